#pragma once

// Run configuration: flat key=value files with [section] headers.
//
//   dim = 2
//   field = gaussian
//   potential = rotational:2
//   s_list = 0.9,0.99,0.999
//   [quadrature]
//   radius = 8
//   nodes_per_dim = 96
//   [radial]
//   h_min = 1e-6
//   [sphere]
//   order = 32
//   [mc]
//   seed = 42
//   [output]
//   format = json
//
// Keys may also be written fully qualified at top level (radial.h_min = ...).

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "magsob/error.hpp"
#include "magsob/fields.hpp"
#include "magsob/functionals.hpp"
#include "magsob/quadrature.hpp"

namespace magsob {

struct RunConfig {
  int dim = 1;
  std::string field = "gaussian";
  std::string potential = "zero";
  double p = 2.0;
  std::string kernel = "truncated:s=0.999,R=16";
  std::string family = "truncated";
  std::vector<double> s_list{0.9, 0.99, 0.999};
  std::vector<double> delta_list{1e-2, 1e-3, 1e-4};
  double delta = 1e-3;
  std::vector<double> x;
  std::string mode = "bbm";
  std::string kind = "bbm";
  std::optional<double> tolerance;

  // Quadrature; unset values take the per-dimension defaults.
  std::optional<double> radius;
  std::optional<int> nodes_per_dim;
  std::string rule = "gauss_legendre";
  double h_min = 1e-6;
  double h_max = 16.0;
  int radial_count = 160;
  std::optional<int> sphere_order;
  std::optional<bool> mc_enabled;
  std::uint64_t mc_seed = 42;
  std::uint64_t mc_count = 2'000'000;

  std::string format = "csv";
  std::string out;

  bool operator==(const RunConfig&) const = default;

  /// Throws UsageError naming the first out-of-range key.
  void validate() const;
  QuadConfig quadrature() const;
  std::string serialize() const;
};

/// Name plus positional numeric parameters, as in "rotational:2" or "bump:1.5,2".
struct CatalogSpec {
  std::string name;
  std::vector<double> params;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  try {
    std::size_t used = 0;
    const double v = std::stod(t, &used);
    if (used == t.size()) return v;
  } catch (const std::exception&) {
  }
  throw UsageError("value of '" + key + "' is not a number: '" + t + "'");
}

inline long long parse_integer(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  try {
    std::size_t used = 0;
    const long long v = std::stoll(t, &used);
    if (used == t.size()) return v;
  } catch (const std::exception&) {
  }
  throw UsageError("value of '" + key + "' is not an integer: '" + t + "'");
}

inline std::vector<double> parse_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (trim(item).empty()) continue;
    out.push_back(parse_double(key, item));
  }
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw UsageError("value of '" + key + "' is not a boolean: '" + t + "'");
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string format_list(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += format_double(v[i]);
  }
  return out;
}

inline void range_error(const std::string& key, const std::string& what) {
  throw UsageError("config key '" + key + "' out of range: " + what);
}

inline int checked_int(const std::string& key, long long v) {
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) range_error(key, "too large");
  return static_cast<int>(v);
}

}  // namespace detail

inline CatalogSpec parse_catalog_spec(const std::string& spec) {
  CatalogSpec c;
  const auto colon = spec.find(':');
  c.name = detail::trim(spec.substr(0, colon));
  if (c.name.empty()) throw UsageError("empty catalog name");
  if (colon != std::string::npos) c.params = detail::parse_list(c.name, spec.substr(colon + 1));
  return c;
}

inline void RunConfig::validate() const {
  using detail::range_error;
  if (dim < 1 || dim > 3) range_error("dim", "must be 1, 2 or 3");
  if (!(p > 1.0 && p <= 64.0)) range_error("p", "must lie in (1, 64]");
  if (!(delta > 0.0 && std::isfinite(delta))) range_error("delta", "must be positive");
  for (double s : s_list)
    if (!(s > 0.0 && s < 1.0)) range_error("s_list", "values must lie in (0, 1)");
  for (double d : delta_list)
    if (!(d > 0.0 && std::isfinite(d))) range_error("delta_list", "values must be positive");
  if (!x.empty() && static_cast<int>(x.size()) != dim) range_error("x", "needs one coordinate per dimension");
  for (double v : x)
    if (!std::isfinite(v)) range_error("x", "coordinates must be finite");
  if (mode != "bbm" && mode != "jdelta") range_error("mode", "must be bbm or jdelta");
  if (kind != "bbm" && kind != "jdelta" && kind != "pointwise") range_error("kind", "must be bbm, jdelta or pointwise");
  if (family != "truncated" && family != "fractional") range_error("family", "must be truncated or fractional");
  if (tolerance && !(*tolerance > 0.0 && std::isfinite(*tolerance))) range_error("tolerance", "must be positive");
  if (radius && !(*radius > 0.0 && *radius <= 1e3)) range_error("radius", "must lie in (0, 1000]");
  if (nodes_per_dim && (*nodes_per_dim < 2 || *nodes_per_dim > 4096)) range_error("nodes_per_dim", "must lie in [2, 4096]");
  if (rule != "gauss_legendre" && rule != "trapezoid") range_error("rule", "must be gauss_legendre or trapezoid");
  if (!(h_min > 0.0 && std::isfinite(h_min))) range_error("radial.h_min", "must be positive");
  if (!(h_max > h_min && std::isfinite(h_max))) range_error("radial.h_max", "must exceed radial.h_min");
  if (radial_count < 2 || radial_count > 100000) range_error("radial.count", "must lie in [2, 100000]");
  if (sphere_order && (*sphere_order < 1 || *sphere_order > 8192)) range_error("sphere.order", "must lie in [1, 8192]");
  if (mc_count < 1) range_error("mc.count", "must be at least 1");
  if (format != "csv" && format != "json") range_error("output.format", "must be csv or json");
}

inline QuadConfig RunConfig::quadrature() const {
  QuadConfig q = QuadConfig::defaults(dim);
  if (radius) q.box.radius = *radius;
  if (nodes_per_dim) q.box.nodes_per_dim = *nodes_per_dim;
  q.box.rule = box_rule_from_string(rule);
  q.radial.h_min = h_min;
  q.radial.h_max = h_max;
  q.radial.count = radial_count;
  if (sphere_order) q.sphere_order = *sphere_order;
  if (mc_enabled) q.use_mc = *mc_enabled;
  q.mc.seed = mc_seed;
  q.mc.count = mc_count;
  q.exec = Exec::from_env();
  return q;
}

inline std::string RunConfig::serialize() const {
  using detail::format_double;
  std::ostringstream os;
  os << "dim = " << dim << '\n'
     << "field = " << field << '\n'
     << "potential = " << potential << '\n'
     << "p = " << format_double(p) << '\n'
     << "kernel = " << kernel << '\n'
     << "family = " << family << '\n'
     << "s_list = " << detail::format_list(s_list) << '\n'
     << "delta_list = " << detail::format_list(delta_list) << '\n'
     << "delta = " << format_double(delta) << '\n';
  if (!x.empty()) os << "x = " << detail::format_list(x) << '\n';
  os << "mode = " << mode << '\n' << "kind = " << kind << '\n';
  if (tolerance) os << "tolerance = " << format_double(*tolerance) << '\n';
  os << "\n[quadrature]\n";
  if (radius) os << "radius = " << format_double(*radius) << '\n';
  if (nodes_per_dim) os << "nodes_per_dim = " << *nodes_per_dim << '\n';
  os << "rule = " << rule << '\n';
  os << "\n[radial]\n"
     << "h_min = " << format_double(h_min) << '\n'
     << "h_max = " << format_double(h_max) << '\n'
     << "count = " << radial_count << '\n';
  os << "\n[sphere]\n";
  if (sphere_order) os << "order = " << *sphere_order << '\n';
  os << "\n[mc]\n";
  if (mc_enabled) os << "enabled = " << (*mc_enabled ? "true" : "false") << '\n';
  os << "seed = " << mc_seed << '\n' << "count = " << mc_count << '\n';
  os << "\n[output]\n" << "format = " << format << '\n';
  if (!out.empty()) os << "path = " << out << '\n';
  return os.str();
}

/// Applies one key to cfg. `key` is fully qualified (section.name), with the
/// run and quadrature sections folded into the top level.
inline void apply_config_key(RunConfig& cfg, const std::string& key, const std::string& value) {
  using namespace detail;
  const std::string v = trim(value);
  if (key == "dim") cfg.dim = checked_int(key, parse_integer(key, v));
  else if (key == "field") cfg.field = v;
  else if (key == "potential") cfg.potential = v;
  else if (key == "p") cfg.p = parse_double(key, v);
  else if (key == "kernel") cfg.kernel = v;
  else if (key == "family") cfg.family = v;
  else if (key == "s_list") cfg.s_list = parse_list(key, v);
  else if (key == "delta_list") cfg.delta_list = parse_list(key, v);
  else if (key == "delta") cfg.delta = parse_double(key, v);
  else if (key == "x") cfg.x = parse_list(key, v);
  else if (key == "mode") cfg.mode = v;
  else if (key == "kind") cfg.kind = v;
  else if (key == "tolerance") cfg.tolerance = parse_double(key, v);
  else if (key == "radius") cfg.radius = parse_double(key, v);
  else if (key == "nodes_per_dim") cfg.nodes_per_dim = checked_int(key, parse_integer(key, v));
  else if (key == "rule") cfg.rule = v;
  else if (key == "radial.h_min") cfg.h_min = parse_double(key, v);
  else if (key == "radial.h_max") cfg.h_max = parse_double(key, v);
  else if (key == "radial.count") cfg.radial_count = checked_int(key, parse_integer(key, v));
  else if (key == "sphere.order") cfg.sphere_order = checked_int(key, parse_integer(key, v));
  else if (key == "mc.enabled") cfg.mc_enabled = parse_bool(key, v);
  else if (key == "mc.seed" || key == "mc.count") {
    const long long n = parse_integer(key, v);
    if (n < 0) range_error(key, "must be nonnegative");
    (key == "mc.seed" ? cfg.mc_seed : cfg.mc_count) = static_cast<std::uint64_t>(n);
  } else if (key == "output.format") cfg.format = v;
  else if (key == "output.path") cfg.out = v;
  else throw UsageError("unknown config key '" + key + "'");
}

/// Parses configuration text on top of `base`. Errors name the line number.
inline RunConfig parse_config_text(const std::string& text, RunConfig base = {}) {
  std::istringstream in(text);
  std::string raw, section;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = detail::trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    const std::string where = "line " + std::to_string(line_no) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw UsageError(where + "malformed section header '" + line + "'");
      section = detail::trim(line.substr(1, line.size() - 2));
      if (section != "run" && section != "quadrature" && section != "radial" && section != "sphere" &&
          section != "mc" && section != "output") {
        throw UsageError(where + "unknown section '" + section + "'");
      }
      if (section == "run" || section == "quadrature") section.clear();
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageError(where + "expected key = value, got '" + line + "'");
    const std::string name = detail::trim(line.substr(0, eq));
    if (name.empty()) throw UsageError(where + "missing key before '='");
    const std::string key = section.empty() ? name : section + "." + name;
    try {
      apply_config_key(base, key, line.substr(eq + 1));
    } catch (const UsageError& e) {
      throw UsageError(where + e.what());
    }
  }
  base.validate();
  return base;
}

inline RunConfig parse_config(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw UsageError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str());
}

}  // namespace magsob
