#pragma once

// Parameter sweeps, extrapolation to the s -> 1 / delta -> 0 limits, and
// inequality audits.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include <json.hpp>

#include "magsob/error.hpp"
#include "magsob/fields.hpp"
#include "magsob/functionals.hpp"
#include "magsob/kernels.hpp"
#include "magsob/quadrature.hpp"

namespace magsob {

enum class StudyKind { bbm_sweep, jdelta_sweep, pointwise_sweep, bound_audit };

inline std::string to_string(StudyKind k) {
  switch (k) {
    case StudyKind::bbm_sweep: return "bbm_sweep";
    case StudyKind::jdelta_sweep: return "jdelta_sweep";
    case StudyKind::pointwise_sweep: return "pointwise_sweep";
    case StudyKind::bound_audit: return "bound_audit";
  }
  return "unknown";
}

struct Verdict {
  std::string name;
  bool pass = false;
  double margin = 0.0;
  std::string detail;
};

struct StudyPoint {
  double param = 0.0;
  EnergyValue energy;
};

struct StudyReport {
  StudyKind kind = StudyKind::bbm_sweep;
  std::vector<StudyPoint> points;
  double reference = 0.0;
  double extrapolated = 0.0;
  double relative_residual = 0.0;
  std::string extrapolation;
  std::vector<Verdict> verdicts;
  nlohmann::ordered_json details = nlohmann::ordered_json::object();

  bool passed() const {
    return std::all_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.pass; });
  }

  const Verdict* verdict(const std::string& name) const {
    for (const auto& v : verdicts)
      if (v.name == name) return &v;
    return nullptr;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["study_kind"] = to_string(kind);
    auto params = nlohmann::ordered_json::array();
    auto values = nlohmann::ordered_json::array();
    auto errs = nlohmann::ordered_json::array();
    auto digests = nlohmann::ordered_json::array();
    for (const auto& p : points) {
      params.push_back(p.param);
      values.push_back(p.energy.value);
      errs.push_back(p.energy.estimated_error);
      digests.push_back(p.energy.config_digest);
    }
    j["params"] = params;
    j["values"] = values;
    j["est_errors"] = errs;
    j["config_digests"] = digests;
    j["reference"] = reference;
    j["extrapolated"] = extrapolated;
    j["residual"] = relative_residual;
    j["extrapolation"] = extrapolation;
    auto vs = nlohmann::ordered_json::array();
    for (const auto& v : verdicts) {
      vs.push_back({{"name", v.name}, {"pass", v.pass}, {"margin", v.margin}, {"detail", v.detail}});
    }
    j["verdicts"] = vs;
    j["passed"] = passed();
    j["details"] = details;
    return j;
  }

  std::string to_csv() const {
    std::string out = "param,value,est_error,reference,residual\n";
    char buf[160];
    for (const auto& p : points) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g\n", p.param, p.energy.value,
                    p.energy.estimated_error, reference, relative_error(p.energy.value, reference));
      out += buf;
    }
    return out;
  }

  static double relative_error(double value, double ref) {
    return std::abs(value - ref) / std::max(ref, 1e-300);
  }
};

struct StudyOptions {
  /// Pass threshold on the relative residual of the extrapolated value.
  double tolerance = 0.05;
  /// Slack, relative to the reference, allowed in the monotone-improvement check.
  double jitter = 0.01;
  /// Support radius used when kernels are built from a family name.
  double kernel_radius = 16.0;
};

enum class KernelFamily { fractional, truncated };

inline std::string to_string(KernelFamily f) { return f == KernelFamily::fractional ? "fractional" : "truncated"; }

inline KernelFamily kernel_family_from_string(const std::string& s) {
  if (s == "fractional") return KernelFamily::fractional;
  if (s == "truncated") return KernelFamily::truncated;
  throw UsageError("unknown kernel family '" + s + "' (expected fractional or truncated)");
}

inline Mollifier make_kernel(KernelFamily family, double s, int dim, double R = 16.0) {
  return family == KernelFamily::fractional ? fractional_mollifier(s, dim)
                                            : truncated_fractional_mollifier(s, R, dim);
}

namespace detail {

inline void require_increasing_s(const std::vector<double>& s) {
  if (s.size() < 2) throw UsageError("s_list needs at least two values");
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!(s[i] > 0.0 && s[i] < 1.0)) throw UsageError("s_list values must lie in (0, 1)");
    if (i > 0 && !(s[i] > s[i - 1])) throw UsageError("s_list must be increasing");
  }
}

inline void require_decreasing_delta(const std::vector<double>& d) {
  if (d.empty()) throw UsageError("delta_list must be nonempty");
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!(d[i] > 0.0 && std::isfinite(d[i]))) throw UsageError("delta_list values must be positive");
    if (i > 0 && !(d[i] < d[i - 1])) throw UsageError("delta_list must be decreasing");
  }
}

inline double q_reference(int dim, double p) { return q_constant_closed_form(dim, p); }

inline Verdict residual_verdict(double residual, double tolerance) {
  Verdict v;
  v.name = "residual_within_tolerance";
  v.margin = tolerance - residual;
  v.pass = residual <= tolerance;
  char buf[96];
  std::snprintf(buf, sizeof buf, "residual %.6g vs tolerance %.6g", residual, tolerance);
  v.detail = buf;
  return v;
}

inline double sup_modulus_of(const ScalarField& u, const BoxGrid& grid) {
  if (u.sup_modulus) return *u.sup_modulus;
  const auto nodes = grid.nodes();
  double m = 0.0;
  for (const auto& x : nodes.points) m = std::max(m, std::abs(u(x)));
  return m;
}

/// Three sample points, up to three directions and three segment lengths.
inline std::vector<Point> audit_points(int dim) {
  std::vector<Point> xs{Point(dim), Point(dim), Point(dim)};
  for (int i = 0; i < dim; ++i) {
    xs[1][i] = 0.5;
    xs[2][i] = i == 0 ? -1.0 : 0.25;
  }
  return xs;
}

inline std::vector<Point> audit_directions(int dim) {
  if (dim == 1) return {Point{1.0}, Point{-1.0}};
  std::vector<Point> out;
  for (int i = 0; i < dim; ++i) out.push_back(unit_vector(dim, i));
  if (dim == 2) out.push_back(Point{std::sqrt(0.5), -std::sqrt(0.5)});
  return out;
}

}  // namespace detail

/// bbm_energy along s_list; F(s) = F_lim + c (1 - s) fitted on the last two points.
inline StudyReport bbm_convergence_study(const ScalarField& u, const VectorPotential& A, double p,
                                         const std::vector<double>& s_list, KernelFamily family,
                                         const QuadConfig& q, const StudyOptions& opt = {}) {
  require_valid_p(p);
  detail::require_increasing_s(s_list);
  StudyReport r;
  r.kind = StudyKind::bbm_sweep;
  for (double s : s_list) {
    const Mollifier rho = make_kernel(family, s, u.dim, opt.kernel_radius);
    r.points.push_back({s, bbm_energy(u, A, rho, p, q)});
  }
  const EnergyValue e = local_energy(u, A, p, q.box, q.exec);
  const double qnp = detail::q_reference(u.dim, p);
  r.reference = p * qnp * e.value;

  const auto& a = r.points[r.points.size() - 2];
  const auto& b = r.points.back();
  const double ta = 1.0 - a.param, tb = 1.0 - b.param;
  r.extrapolated = (ta * b.energy.value - tb * a.energy.value) / (ta - tb);
  r.relative_residual = StudyReport::relative_error(r.extrapolated, r.reference);
  r.extrapolation = "linear in (1-s) through the last two points";

  r.verdicts.push_back(detail::residual_verdict(r.relative_residual, opt.tolerance));
  Verdict mono{"monotone_improvement", true, 0.0, ""};
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < r.points.size(); ++i) {
    const double prev = std::abs(r.points[i - 1].energy.value - r.reference);
    const double cur = std::abs(r.points[i].energy.value - r.reference);
    worst = std::min(worst, prev + opt.jitter * r.reference - cur);
  }
  mono.margin = worst;
  mono.pass = worst >= 0.0;
  mono.detail = "|F(s) - reference| nonincreasing up to jitter";
  r.verdicts.push_back(mono);

  r.details["kernel_family"] = to_string(family);
  r.details["p"] = p;
  r.details["q_constant"] = qnp;
  r.details["local_energy"] = e.value;
  r.details["local_energy_digest"] = e.config_digest;
  r.details["quadrature"] = q.describe();
  return r;
}

/// jdelta_energy along a decreasing delta_list. With three or more points the
/// limit is the linear Richardson value J_0 from J_delta = J_0 + a delta on the
/// two smallest deltas; otherwise the value at the smallest delta.
inline StudyReport jdelta_convergence_study(const ScalarField& u, const VectorPotential& A, double p,
                                            const std::vector<double>& delta_list, const QuadConfig& q,
                                            const StudyOptions& opt = {}) {
  require_valid_p(p);
  detail::require_decreasing_delta(delta_list);
  StudyReport r;
  r.kind = StudyKind::jdelta_sweep;
  for (double d : delta_list) r.points.push_back({d, jdelta_energy(u, A, d, p, q)});
  const EnergyValue e = local_energy(u, A, p, q.box, q.exec);
  const double qnp = detail::q_reference(u.dim, p);
  r.reference = qnp * e.value;

  const std::size_t n = r.points.size();
  if (n >= 3) {
    const auto& a = r.points[n - 2];
    const auto& b = r.points[n - 1];
    const double slope = (a.energy.value - b.energy.value) / (a.param - b.param);
    r.extrapolated = b.energy.value - slope * b.param;
    const auto& c = r.points[n - 3];
    r.details["richardson_check"] = c.energy.value - (r.extrapolated + slope * c.param);
    r.extrapolation = "linear Richardson in delta on the two smallest deltas";
  } else {
    r.extrapolated = r.points.back().energy.value;
    r.extrapolation = "value at the smallest delta";
  }
  r.relative_residual = StudyReport::relative_error(r.extrapolated, r.reference);
  r.verdicts.push_back(detail::residual_verdict(r.relative_residual, opt.tolerance));

  r.details["p"] = p;
  r.details["q_constant"] = qnp;
  r.details["local_energy"] = e.value;
  r.details["local_energy_digest"] = e.config_digest;
  r.details["quadrature"] = q.describe();
  return r;
}

enum class PointwiseMode { bbm, jdelta };

inline std::string to_string(PointwiseMode m) { return m == PointwiseMode::bbm ? "bbm" : "jdelta"; }

inline PointwiseMode pointwise_mode_from_string(const std::string& s) {
  if (s == "bbm") return PointwiseMode::bbm;
  if (s == "jdelta") return PointwiseMode::jdelta;
  throw UsageError("unknown pointwise mode '" + s + "' (expected bbm or jdelta)");
}

/// Pointwise densities on x_grid against c Q_N |grad u - i A u|^2(x), c = 2 for
/// bbm and 1 for jdelta. Each row holds the discrete L1 mass sum_x w_x D(x) for
/// one parameter; the L1 error sum_x w_x |D(x) - limit(x)| and the largest
/// pointwise residual are reported per parameter in the details.
inline StudyReport pointwise_convergence_study(const ScalarField& u, const VectorPotential& A,
                                               const BoxNodes& x_grid, const std::vector<double>& params,
                                               PointwiseMode mode, const QuadConfig& q,
                                               KernelFamily family = KernelFamily::truncated,
                                               const StudyOptions& opt = {}) {
  if (x_grid.points.empty()) throw UsageError("x_grid must be nonempty");
  if (mode == PointwiseMode::bbm) {
    if (params.empty()) throw UsageError("s_list must be nonempty");
    for (double s : params)
      if (!(s > 0.0 && s < 1.0)) throw UsageError("s_list values must lie in (0, 1)");
  } else {
    detail::require_decreasing_delta(params);
  }
  const int dim = u.dim;
  for (const auto& x : x_grid.points) require_same_dim(x.dim(), dim, "x_grid/field");
  const SphereRule sphere = q.sphere();
  const double qn = q_constant_closed_form(dim, 2.0);
  const double factor = mode == PointwiseMode::bbm ? 2.0 * qn : qn;

  const std::size_t nx = x_grid.points.size();
  std::vector<double> limit(nx);
  double limit_mass = 0.0;
  for (std::size_t i = 0; i < nx; ++i) {
    const double g = u.identically_zero ? 0.0 : norm(magnetic_gradient(u, A, x_grid.points[i]));
    limit[i] = factor * g * g;
    limit_mass += x_grid.weights[i] * limit[i];
  }

  StudyReport r;
  r.kind = StudyKind::pointwise_sweep;
  r.reference = limit_mass;
  auto rows = nlohmann::ordered_json::array();
  double last_l1 = 0.0;
  for (double param : params) {
    std::vector<double> d;
    if (mode == PointwiseMode::bbm) {
      const Mollifier rho = make_kernel(family, param, dim, opt.kernel_radius);
      d = parallel_map<double>(
          nx, [&](std::size_t i) { return pointwise_bbm_density(u, A, rho, x_grid.points[i], q.radial, sphere); },
          q.exec);
    } else {
      d = parallel_map<double>(
          nx, [&](std::size_t i) { return pointwise_jdelta(u, A, param, x_grid.points[i], q.radial, sphere); },
          q.exec);
    }
    double mass = 0.0, l1 = 0.0, max_res = 0.0;
    auto per_x = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < nx; ++i) {
      mass += x_grid.weights[i] * d[i];
      l1 += x_grid.weights[i] * std::abs(d[i] - limit[i]);
      max_res = std::max(max_res, std::abs(d[i] - limit[i]));
      per_x.push_back({{"x", std::vector<double>(x_grid.points[i].begin(), x_grid.points[i].end())},
                       {"computed", d[i]},
                       {"limit", limit[i]}});
    }
    EnergyValue ev;
    ev.value = mass;
    ev.estimated_error = 0.0;
    ev.config_digest = digest_of("pointwise;" + to_string(mode) + ";" + detail::num(param) + ";" + q.describe());
    r.points.push_back({param, ev});
    rows.push_back({{"param", param}, {"l1_error", l1}, {"max_pointwise_residual", max_res}, {"points", per_x}});
    last_l1 = l1;
  }
  r.extrapolated = r.points.back().energy.value;
  r.relative_residual = StudyReport::relative_error(r.extrapolated, r.reference);
  r.extrapolation = "value at the last parameter";

  const double rel_l1 = last_l1 / std::max(limit_mass, 1e-300);
  Verdict v{"l1_error_within_tolerance", rel_l1 <= opt.tolerance, opt.tolerance - rel_l1, ""};
  char buf[128];
  std::snprintf(buf, sizeof buf, "L1 error %.6g = %.6g of the limit mass", last_l1, rel_l1);
  v.detail = buf;
  r.verdicts.push_back(v);

  r.details["mode"] = to_string(mode);
  if (mode == PointwiseMode::bbm) r.details["kernel_family"] = to_string(family);
  r.details["limit_factor"] = factor;
  r.details["rows"] = rows;
  r.details["quadrature"] = q.describe();
  return r;
}

/// Audit of the explicit inequalities:
///  (a) bbm_energy <= C E + C (2 + L^2) |u|_p^p for each full-regime kernel,
///      C = 2^{p-1} |S^{N-1}|;
///  (b) J_delta(T_M u) <= J_delta(u) for M in {0.25, 0.5, 1} sup|u|;
///  (c) segment_bound_residual <= 1e-3 on a 3 x 3 x (up to 3) sample;
///  (d) J_delta stabilizes (< 10% change between the two smallest deltas).
inline StudyReport bound_audit(const ScalarField& u, const VectorPotential& A, double p,
                               const std::vector<Mollifier>& kernels, const std::vector<double>& delta_list,
                               const QuadConfig& q) {
  require_valid_p(p);
  if (kernels.empty()) throw UsageError("kernel list must be nonempty");
  detail::require_decreasing_delta(delta_list);
  const int dim = u.dim;
  StudyReport r;
  r.kind = StudyKind::bound_audit;

  const EnergyValue e = local_energy(u, A, p, q.box, q.exec);
  const double norm_p = field_lp_norm_pow(u, p, q.box, q.exec);
  const double L = A.lipschitz_bound;
  const double C = std::pow(2.0, p - 1.0) * sphere_area(dim);
  const double rhs = C * e.value + C * (2.0 + L * L) * norm_p;
  const double rhs_err = C * e.estimated_error + C * (2.0 + L * L) * e.estimated_error;

  // (a)
  auto a_rows = nlohmann::ordered_json::array();
  for (const auto& rho : kernels) {
    if (rho.regime != Regime::full) {
      a_rows.push_back({{"kernel", rho.label}, {"skipped", "regime is unit_interval"}});
      continue;
    }
    const EnergyValue lhs = bbm_energy(u, A, rho, p, q);
    const double tol = lhs.estimated_error + rhs_err;
    Verdict v{"explicit_bound[" + rho.label + "]", rhs - lhs.value >= -tol, rhs - lhs.value, ""};
    char buf[160];
    std::snprintf(buf, sizeof buf, "bbm %.10g <= bound %.10g (tolerance %.3g)", lhs.value, rhs, tol);
    v.detail = buf;
    r.verdicts.push_back(v);
    a_rows.push_back({{"kernel", rho.label}, {"bbm", lhs.value}, {"bound", rhs}, {"tolerance", tol}});
  }

  // J_delta along delta_list; these rows form the report's parameter points.
  for (double d : delta_list) r.points.push_back({d, jdelta_energy(u, A, d, p, q)});

  // (b)
  const double sup = detail::sup_modulus_of(u, q.box);
  auto b_rows = nlohmann::ordered_json::array();
  for (double frac : {0.25, 0.5, 1.0}) {
    if (u.identically_zero || sup == 0.0) {
      r.verdicts.push_back({"truncation_monotone[M=" + detail::num(frac) + "sup]", true, 0.0, "u = 0"});
      continue;
    }
    const double M = frac * sup;
    const ScalarField t = truncate_field(u, M);
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < delta_list.size(); ++k) {
      const double jt = jdelta_energy(t, A, delta_list[k], p, q).value;
      const double ju = r.points[k].energy.value;
      worst = std::min(worst, ju + 1e-12 - jt);
      b_rows.push_back({{"M", M}, {"delta", delta_list[k]}, {"truncated", jt}, {"original", ju}});
    }
    r.verdicts.push_back({"truncation_monotone[M=" + detail::num(frac) + "sup]", worst >= 0.0, worst,
                          "J_delta(T_M u) <= J_delta(u) + 1e-12"});
  }

  // (c)
  double worst_seg = -std::numeric_limits<double>::infinity();
  std::string worst_cfg;
  for (const auto& x : detail::audit_points(dim)) {
    for (double h : {0.1, 0.3, 0.5}) {
      for (const auto& sigma : detail::audit_directions(dim)) {
        const double res = segment_bound_residual(u, A, x, h, sigma);
        if (res > worst_seg) {
          worst_seg = res;
          worst_cfg = "x=" + to_string(x) + " h=" + detail::num(h) + " sigma=" + to_string(sigma);
        }
      }
    }
  }
  r.verdicts.push_back({"segment_bound", worst_seg <= 1e-3, 1e-3 - worst_seg, "largest residual at " + worst_cfg});

  // (d)
  const double denom = e.value + (L * L + 1.0) * norm_p;
  double ratio = 0.0;
  for (const auto& pt : r.points) ratio = std::max(ratio, denom > 0.0 ? pt.energy.value / denom : 0.0);
  const std::size_t n = r.points.size();
  double change = 0.0;
  if (n >= 2) {
    const double a = r.points[n - 2].energy.value, b = r.points[n - 1].energy.value;
    change = std::abs(a - b) / std::max(std::abs(b), 1e-300);
    if (a == 0.0 && b == 0.0) change = 0.0;
  }
  char buf[128];
  std::snprintf(buf, sizeof buf, "relative change %.6g between the two smallest deltas; max ratio %.6g", change,
                ratio);
  r.verdicts.push_back({"jdelta_bounded", change < 0.1, 0.1 - change, buf});

  const double qnp = detail::q_reference(dim, p);
  r.reference = qnp * e.value;
  r.extrapolated = r.points.back().energy.value;
  r.relative_residual = StudyReport::relative_error(r.extrapolated, r.reference);
  r.extrapolation = "value at the smallest delta";

  r.details["p"] = p;
  r.details["local_energy"] = e.value;
  r.details["norm_p_pow"] = norm_p;
  r.details["lipschitz_bound"] = L;
  r.details["explicit_bound"] = a_rows;
  r.details["truncation"] = b_rows;
  r.details["segment_worst_residual"] = worst_seg;
  r.details["jdelta_ratio"] = ratio;
  r.details["quadrature"] = q.describe();
  return r;
}

}  // namespace magsob
