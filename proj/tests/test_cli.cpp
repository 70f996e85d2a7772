#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "magsob/cli.hpp"

#ifndef MAGSOB_CLI_PATH
#error "MAGSOB_CLI_PATH must point at the magsob executable"
#endif

namespace {

struct Proc {
  int code = -1;
  std::string out;
};

// Runs the CLI in a shell; stderr is discarded.
Proc run_cli(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " '" MAGSOB_CLI_PATH "' " + args + " 2>/dev/null";
  Proc p;
  FILE* f = popen(cmd.c_str(), "r");
  if (!f) return p;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, f)) > 0) p.out.append(buf, n);
  const int status = pclose(f);
  p.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return p;
}

double first_value(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  std::getline(in, line);
  const auto a = line.find(',');
  const auto b = line.find(',', a + 1);
  return std::stod(line.substr(a + 1, b - a - 1));
}

}  // namespace

TEST(CliExitCodes, Success) {
  const auto p = run_cli("qnp --dim 2 --p 2");
  EXPECT_EQ(p.code, 0);
  EXPECT_NEAR(first_value(p.out), std::numbers::pi / 2.0, 1e-12);
}

TEST(CliExitCodes, VerdictFailure) {
  EXPECT_EQ(run_cli("study --kind jdelta --delta-list 0.01,0.001 --tolerance 1e-12").code, 1);
}

TEST(CliExitCodes, UsageErrors) {
  EXPECT_EQ(run_cli("energy --bogus").code, 2);
  EXPECT_EQ(run_cli("").code, 2);
  EXPECT_EQ(run_cli("nosuchcommand").code, 2);
  EXPECT_EQ(run_cli("energy --dim 7").code, 2);
  EXPECT_EQ(run_cli("bbm --kernel truncated:s=2").code, 2);
  EXPECT_EQ(run_cli("energy --config /nonexistent.conf").code, 2);
}

TEST(CliExitCodes, NumericDomainError) { EXPECT_EQ(run_cli("energy --field gaussian:1e200").code, 3); }

TEST(CliExitCodes, HelpIsSuccess) { EXPECT_EQ(run_cli("--help").code, 0); }

TEST(CliOutput, EnergyN1) {
  const auto p = run_cli("energy --dim 1 --field gaussian --potential zero --p 2");
  ASSERT_EQ(p.code, 0);
  EXPECT_NEAR(first_value(p.out), std::sqrt(std::numbers::pi) / 2.0, 1e-8);
}

TEST(CliOutput, BbmN1) {
  const auto p = run_cli("bbm --dim 1 --field gaussian --potential zero --kernel truncated:s=0.999,R=16");
  ASSERT_EQ(p.code, 0);
  const double sqrt_pi = std::sqrt(std::numbers::pi);
  EXPECT_LT(std::abs(first_value(p.out) - sqrt_pi) / sqrt_pi, 0.02);
}

TEST(CliOutput, CsvLayout) {
  const auto p = run_cli("study --kind jdelta --delta-list 0.01,0.001");
  ASSERT_EQ(p.code, 0);
  EXPECT_EQ(p.out.find('\r'), std::string::npos);
  EXPECT_EQ(p.out.rfind("param,value,est_error,reference,residual\n", 0), 0u);
  std::istringstream in(p.out);
  std::string line;
  std::getline(in, line);
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    const std::string value = line.substr(line.find(',') + 1, line.find(',', line.find(',') + 1) - line.find(',') - 1);
    const auto mantissa = value.substr(0, value.find_first_of("eE"));
    int digits = 0;
    for (char ch : mantissa) digits += std::isdigit(static_cast<unsigned char>(ch)) ? 1 : 0;
    EXPECT_GE(digits, 16) << value;
  }
  EXPECT_EQ(rows, 2);
}

TEST(CliOutput, JsonParsesLosslessly) {
  const auto p = run_cli("study --kind bbm --s-list 0.9,0.99 --format json");
  ASSERT_EQ(p.code, 0);
  const auto j = nlohmann::json::parse(p.out);
  EXPECT_EQ(j["study_kind"], "bbm_sweep");
  const auto csv = run_cli("study --kind bbm --s-list 0.9,0.99");
  EXPECT_EQ(j["values"][0].get<double>(), first_value(csv.out));
  EXPECT_EQ(nlohmann::json::parse(j.dump()), j);
}

TEST(CliOutput, WritesToOutPath) {
  const auto path = std::filesystem::temp_directory_path() / "magsob_cli_out.csv";
  std::filesystem::remove(path);
  const auto p = run_cli("qnp --dim 3 --out '" + path.string() + "'");
  ASSERT_EQ(p.code, 0);
  std::ifstream f(path);
  std::stringstream ss;
  ss << f.rdbuf();
  EXPECT_NEAR(first_value(ss.str()), 2.0 * std::numbers::pi / 3.0, 1e-12);
  std::filesystem::remove(path);
}

TEST(CliConfig, FlagBeatsFile) {
  const auto path = std::filesystem::temp_directory_path() / "magsob_cli.conf";
  std::ofstream(path) << "[run]\nkind = jdelta\ndelta_list = 0.1, 0.01\n";
  const auto from_file = run_cli("study --config '" + path.string() + "'");
  const auto flagged = run_cli("study --config '" + path.string() + "' --delta-list 0.05");
  ASSERT_EQ(from_file.code, 0);
  ASSERT_EQ(flagged.code, 0);
  EXPECT_DOUBLE_EQ(std::stod(from_file.out.substr(from_file.out.find('\n') + 1)), 0.1);
  EXPECT_DOUBLE_EQ(std::stod(flagged.out.substr(flagged.out.find('\n') + 1)), 0.05);
  std::filesystem::remove(path);
}

TEST(CliConfig, MalformedFileIsUsageError) {
  const auto path = std::filesystem::temp_directory_path() / "magsob_bad.conf";
  std::ofstream(path) << "dim = 1\nradius -1\n";
  std::ostringstream out, err;
  EXPECT_EQ(magsob::cli::run({"energy", "--config", path.string()}, out, err), 2);
  EXPECT_NE(err.str().find("line 2"), std::string::npos) << err.str();
  std::filesystem::remove(path);
}

TEST(CliInProcess, MatchesSubprocess) {
  std::ostringstream out, err;
  ASSERT_EQ(magsob::cli::run({"energy", "--dim", "1"}, out, err), 0);
  EXPECT_EQ(out.str(), run_cli("energy --dim 1").out);
}

TEST(CliDeterminism, ThreadCountDoesNotChangeOutput) {
  const std::string args = "study --kind bbm --dim 2 --potential rotational:2 --nodes-per-dim 16 --sphere-order 8 "
                           "--s-list 0.9,0.99 --format json";
  const auto a = run_cli(args, "MAGSOB_THREADS=1");
  const auto b = run_cli(args, "MAGSOB_THREADS=3");
  ASSERT_EQ(a.code, 0);
  EXPECT_EQ(a.out, b.out);
}
