// Acceptance checks. One PASS/FAIL line per criterion; exit status 1 if any fails.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "classical_reference.hpp"
#include "magsob/magsob.hpp"

#ifndef MAGSOB_CLI_PATH
#error "MAGSOB_CLI_PATH must point at the magsob executable"
#endif

using namespace magsob;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

struct Case {
  ScalarField u;
  VectorPotential A;
};

std::vector<Case> catalog_cases(int dim) {
  std::vector<Case> out;
  for (const auto& f : catalog_field_names()) {
    for (const auto& a : catalog_potential_names()) {
      if (a == "rotational_potential" && dim == 1) continue;
      std::vector<double> params;
      if (a == "constant_potential") params.assign(dim, 0.7);
      if (a == "rotational_potential") params = {2.0};
      if (a == "gradient_potential") params = {0.5};
      out.push_back({make_field(f, dim), make_potential(a, dim, params)});
    }
  }
  return out;
}

// Grids for the catalog-wide sweeps.
QuadConfig sweep_config(int dim) {
  QuadConfig q = QuadConfig::defaults(dim);
  if (dim == 2) {
    q.box.nodes_per_dim = 40;
    q.sphere_order = 16;
  }
  if (dim == 3) {
    q.box.nodes_per_dim = 24;
    q.mc.count = 20000;
  }
  return q;
}

Outcome bbm_nonmagnetic() {
  const auto r = bbm_convergence_study(gaussian_field(1), zero_potential(1), 2.0, {0.9, 0.99, 0.999},
                                       KernelFamily::truncated, QuadConfig::defaults(1));
  const double target = std::sqrt(kPi);
  const double e = rel(r.extrapolated, target);
  return {e <= 0.02, "extrapolated " + fmt("%.8g", r.extrapolated) + " vs " + fmt("%.8g", target) +
                         ", relative error " + fmt("%.3g", e)};
}

Outcome bbm_magnetic() {
  const auto r = bbm_convergence_study(gaussian_field(2), rotational_potential(2, 2.0), 2.0, {0.9, 0.99, 0.999},
                                       KernelFamily::truncated, QuadConfig::defaults(2));
  const double target = 2.0 * kPi * kPi;
  const double e = rel(r.extrapolated, target);
  return {e <= 0.03, "extrapolated " + fmt("%.8g", r.extrapolated) + " vs " + fmt("%.8g", target) +
                         ", relative error " + fmt("%.3g", e)};
}

Outcome jdelta_limits() {
  const std::vector<double> deltas{1e-2, 1e-3, 1e-4};
  const auto r1 = jdelta_convergence_study(gaussian_field(1), zero_potential(1), 2.0, deltas, QuadConfig::defaults(1));
  const auto r2 =
      jdelta_convergence_study(gaussian_field(2), rotational_potential(2, 2.0), 2.0, deltas, QuadConfig::defaults(2));
  const double t1 = std::sqrt(kPi) / 2.0, t2 = kPi * kPi;
  const double e1 = rel(r1.extrapolated, t1), e2 = rel(r2.extrapolated, t2);
  return {e1 <= 0.05 && e2 <= 0.05, "N=1 " + fmt("%.8g", r1.extrapolated) + " (err " + fmt("%.3g", e1) + "), N=2 " +
                                        fmt("%.8g", r2.extrapolated) + " (err " + fmt("%.3g", e2) + ")"};
}

Outcome q_constants() {
  const double expected[] = {1.0, kPi / 2.0, 2.0 * kPi / 3.0};
  const double tol[] = {1e-10, 1e-10, 1e-6};
  bool ok = true;
  double worst_q = 0.0;
  for (int dim = 1; dim <= 3; ++dim) {
    const auto q = q_constant(dim, 2.0, QuadConfig::defaults(dim).sphere());
    const double d = std::max(std::abs(q.quadrature - expected[dim - 1]), std::abs(q.value - expected[dim - 1]));
    ok = ok && d <= tol[dim - 1];
    worst_q = std::max(worst_q, d);
  }
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> n;
  const int orders[] = {1, 4096, 800};
  double worst = 0.0;
  for (int dim = 1; dim <= 3; ++dim) {
    const auto rule = build_sphere_rule(dim, orders[dim - 1]);
    for (double p : {1.5, 2.0, 3.0}) {
      for (int k = 0; k < 50; ++k) {
        ComplexVector z(dim);
        for (int i = 0; i < dim; ++i) z[i] = Complex(n(rng), n(rng));
        worst = std::max(worst, sphere_moment_identity_residual(z, p, rule));
      }
    }
  }
  ok = ok && worst <= 1e-8;
  return {ok, "largest Q deviation " + fmt("%.3g", worst_q) + ", largest identity residual " + fmt("%.3g", worst)};
}

Outcome explicit_bound() {
  bool ok = true;
  double min_margin = std::numeric_limits<double>::infinity();
  std::string where;
  int checked = 0;
  for (int dim = 1; dim <= 3; ++dim) {
    const auto q = sweep_config(dim);
    const double S = sphere_area(dim);
    for (const auto& c : catalog_cases(dim)) {
      const auto E = local_energy(c.u, c.A, 2.0, q.box);
      const double norm2 = field_lp_norm_pow(c.u, 2.0, q.box);
      const double L = c.A.lipschitz_bound;
      const double bound = 2.0 * S * E.value + 2.0 * S * (2.0 + L * L) * norm2;
      const double bound_err = 2.0 * S * E.estimated_error + 2.0 * S * (2.0 + L * L) * E.estimated_error;
      for (double s : {0.9, 0.99, 0.999}) {
        const auto b = bbm_energy(c.u, c.A, truncated_fractional_mollifier(s, 16.0, dim), 2.0, q);
        const double margin = bound - b.value + b.estimated_error + bound_err;
        ++checked;
        if (margin < min_margin) {
          min_margin = margin;
          where = "N=" + std::to_string(dim) + " " + c.u.label + "/" + c.A.label + " s=" + fmt("%g", s);
        }
        ok = ok && margin >= 0.0;
      }
    }
  }
  return {ok, std::to_string(checked) + " cases, smallest margin " + fmt("%.4g", min_margin) + " at " + where};
}

Outcome truncation_monotone() {
  bool ok = true;
  double worst = -std::numeric_limits<double>::infinity();
  int checked = 0;
  for (int dim = 1; dim <= 3; ++dim) {
    const auto q = sweep_config(dim);
    for (const auto& c : catalog_cases(dim)) {
      for (double delta : {1e-1, 1e-2}) {
        const double ju = jdelta_energy(c.u, c.A, delta, 2.0, q).value;
        for (double frac : {0.25, 0.5, 1.0}) {
          const double jt = jdelta_energy(truncate_field(c.u, frac * *c.u.sup_modulus), c.A, delta, 2.0, q).value;
          worst = std::max(worst, jt - ju);
          ok = ok && jt <= ju + 1e-12;
          ++checked;
        }
      }
    }
  }
  return {ok, std::to_string(checked) + " comparisons, largest J(T_M u) - J(u) = " + fmt("%.3g", worst)};
}

Outcome classical_reduction() {
  using namespace magsob::reference;
  double worst = 0.0;
  auto track = [&](double lib, double ref) { worst = std::max(worst, rel(lib, ref)); };
  const auto q1 = QuadConfig::defaults(1);
  const auto s1 = q1.sphere();
  QuadConfig q2 = QuadConfig::defaults(2);
  q2.box.nodes_per_dim = 40;
  q2.sphere_order = 16;
  const auto s2 = q2.sphere();
  for (double s : {0.9, 0.99, 0.999}) {
    const auto rho1 = truncated_fractional_mollifier(s, 16, 1);
    track(bbm_energy(gaussian_field(1), zero_potential(1), rho1, 2.0, q1.box, q1.radial, s1).value,
          classical_bbm(real_gaussian, real_gaussian_grad, rho1, 2.0, q1.box, q1.radial, s1));
    track(bbm_energy(bump_field(1), zero_potential(1), rho1, 2.0, q1.box, q1.radial, s1).value,
          classical_bbm(real_bump, real_bump_grad, rho1, 2.0, q1.box, q1.radial, s1));
    const auto rho2 = truncated_fractional_mollifier(s, 16, 2);
    track(bbm_energy(gaussian_field(2), zero_potential(2), rho2, 2.0, q2.box, q2.radial, s2).value,
          classical_bbm(real_gaussian, real_gaussian_grad, rho2, 2.0, q2.box, q2.radial, s2));
  }
  for (double delta : {1e-2, 1e-3, 1e-4}) {
    track(jdelta_energy(gaussian_field(1), zero_potential(1), delta, 2.0, q1.box, q1.radial, s1).value,
          classical_jdelta(real_gaussian, delta, 2.0, q1.box, q1.radial, s1));
    track(jdelta_energy(bump_field(1), zero_potential(1), delta, 2.0, q1.box, q1.radial, s1).value,
          classical_jdelta(real_bump, delta, 2.0, q1.box, q1.radial, s1));
    track(jdelta_energy(gaussian_field(2), zero_potential(2), delta, 2.0, q2.box, q2.radial, s2).value,
          classical_jdelta(real_gaussian, delta, 2.0, q2.box, q2.radial, s2));
  }
  return {worst <= 1e-12, "largest relative difference " + fmt("%.3g", worst)};
}

Outcome pointwise() {
  const auto grid = BoxGrid{1, 4.0, 33, BoxRule::trapezoid}.nodes();
  const auto q = QuadConfig::defaults(1);
  const auto r = pointwise_convergence_study(gaussian_field(1), zero_potential(1), grid, {0.9, 0.99, 0.999},
                                             PointwiseMode::bbm, q);
  const double l1 = r.details["rows"].back()["l1_error"].get<double>();
  const double frac = l1 / r.reference;
  const double j = pointwise_jdelta(gaussian_field(1), zero_potential(1), 1e-4, Point{1.0}, q.radial, q.sphere());
  const double ej = rel(j, std::exp(-1.0));
  return {frac <= 0.05 && ej <= 0.05, "L1 error " + fmt("%.3g", frac) + " of limit mass " + fmt("%.6g", r.reference) +
                                          "; pointwise J at x=1 " + fmt("%.8g", j) + " (err " + fmt("%.3g", ej) + ")"};
}

Outcome ray_oracle() {
  const RadialGrid radial;
  const double r2 = std::sqrt(0.5), r3 = 1.0 / std::sqrt(3.0);
  struct RayCase {
    Case c;
    std::vector<Point> xs, sigmas;
  };
  const std::vector<RayCase> cases{
      {{gaussian_field(2), rotational_potential(2, 2.0)},
       {Point{0.5, 0.3}, Point{-1.0, 0.7}, Point{1.2, -0.4}},
       {Point{1.0, 0.0}, Point{0.0, 1.0}, Point{r2, -r2}}},
      {{modulated_gaussian_field(2, 1.0), constant_potential(2, {0.7, 0.7})},
       {Point{0.4, -0.6}, Point{-0.8, 0.2}, Point{1.1, 0.9}},
       {Point{1.0, 0.0}, Point{0.0, 1.0}, Point{r2, r2}}},
      {{gaussian_field(3), gradient_potential(3, 0.5)},
       {Point{0.5, 0.3, -0.2}, Point{-1.0, 0.4, 0.8}, Point{0.2, -1.1, 0.6}},
       {Point{1.0, 0.0, 0.0}, Point{0.0, 1.0, 0.0}, Point{r3, r3, r3}}},
  };
  int used = 0;
  double worst = 0.0;
  for (const auto& rc : cases) {
    for (const auto& x : rc.xs) {
      for (const auto& s : rc.sigmas) {
        const double oracle = jdelta_ray_oracle(rc.c.u, rc.c.A, x, s, 2.0);
        if (!(oracle > 1e-6)) continue;
        ++used;
        worst = std::max(worst, rel(jdelta_ray_integral(rc.c.u, rc.c.A, x, s, 1e-4, 2.0, radial), oracle));
      }
    }
  }
  return {used == 27 && worst <= 0.03, std::to_string(used) + " rays, largest relative error " + fmt("%.3g", worst)};
}

struct Proc {
  int code = -1;
  std::string out;
};

Proc run_cli(const std::string& args, const std::string& threads) {
  const std::string cmd = "MAGSOB_THREADS=" + threads + " '" MAGSOB_CLI_PATH "' " + args + " 2>/dev/null";
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

Outcome determinism() {
  const std::vector<std::string> runs{
      "study --kind bbm --dim 1 --format json",
      "study --kind jdelta --dim 1",
      "study --kind pointwise --dim 1 --format json",
      "study --kind bbm --dim 2 --potential rotational:2 --nodes-per-dim 24 --sphere-order 8 --format json",
      "study --kind jdelta --dim 3 --field modulated_gaussian --potential gradient:0.5 --nodes-per-dim 12 "
      "--mc-count 20000 --delta-list 0.01,0.001 --format json",
      "audit --dim 1 --s-list 0.9,0.99 --format json",
  };
  int identical = 0;
  std::string bad;
  for (const auto& args : runs) {
    const Proc a = run_cli(args, "1");
    const Proc b = run_cli(args, "2");
    const Proc c = run_cli(args, "0");
    const bool same = a.code >= 0 && a.code <= 1 && !a.out.empty() && a.code == b.code && a.code == c.code &&
                      a.out == b.out && a.out == c.out;
    if (same) ++identical;
    else if (bad.empty()) bad = "; differs: " + args;
  }
  // In-process: the MC path and the deterministic path under different worker counts.
  auto mc = [](unsigned threads) {
    QuadConfig q = sweep_config(3);
    q.exec.threads = threads;
    return bbm_energy(gaussian_field(3), rotational_potential(3, 2.0), truncated_fractional_mollifier(0.99, 16, 3),
                      2.0, q);
  };
  const auto m1 = mc(1), m4 = mc(4);
  const bool in_process = m1.value == m4.value && m1.estimated_error == m4.estimated_error;
  return {identical == static_cast<int>(runs.size()) && in_process,
          std::to_string(identical) + "/" + std::to_string(runs.size()) +
              " CLI studies byte-identical across MAGSOB_THREADS=1,2,0; in-process MC " +
              (in_process ? "identical" : "differs") + bad};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {"bbm limit, non-magnetic", bbm_nonmagnetic},
      {"bbm limit, magnetic", bbm_magnetic},
      {"jdelta limits", jdelta_limits},
      {"Q constants and sphere identity", q_constants},
      {"explicit bbm bound", explicit_bound},
      {"truncation monotonicity", truncation_monotone},
      {"classical reduction", classical_reduction},
      {"pointwise convergence", pointwise},
      {"ray oracle", ray_oracle},
      {"determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) ++failed;
    std::printf("%s %2zu %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].name, o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
