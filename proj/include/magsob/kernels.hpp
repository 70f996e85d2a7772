#pragma once

// Radial mollifier families and the sphere-moment constants Q_{N,p}.

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>

#include "magsob/error.hpp"
#include "magsob/fields.hpp"
#include "magsob/quadrature.hpp"

namespace magsob {

/// How a mollifier is normalized.
///  full:          int_0^inf rho(r) r^{N-1} dr = 1, mass concentrating at 0.
///  unit_interval: int_0^1 rho(r) r^{N-1} dr = 1 and int_1^inf rho(r) r^{N-3} dr -> 0.
enum class Regime { full, unit_interval };

inline std::string to_string(Regime r) { return r == Regime::full ? "full" : "unit_interval"; }

struct Mollifier {
  int dim = 1;
  std::function<double(double)> eval;
  Regime regime = Regime::full;
  /// s for the fractional families.
  double concentration = 0.0;
  std::optional<double> support_cutoff;
  /// Closed form of int_0^r rho(t) t^{N-1} dt, when known.
  std::function<double(double)> mass_below;
  std::string label;

  double operator()(double r) const { return eval(r); }
  bool has_closed_mass() const { return static_cast<bool>(mass_below); }
};

namespace detail {

inline void require_fractional_s(double s) {
  if (!(s > 0.0 && s < 1.0)) throw UsageError("fractional parameter s must lie in (0, 1)");
}

inline void require_kernel_dim(int dim) {
  if (dim < 1 || dim > kMaxDim) throw UsageError("kernel dimension must be 1, 2 or 3");
}

}  // namespace detail

/// rho(r) = 2(1-s) r^{2-2s-N} for all r > 0 (unit_interval regime).
inline Mollifier fractional_mollifier(double s, int dim) {
  detail::require_fractional_s(s);
  detail::require_kernel_dim(dim);
  Mollifier m;
  m.dim = dim;
  const double c = 2.0 * (1.0 - s);
  const double expo = 2.0 - 2.0 * s - dim;
  m.eval = [c, expo](double r) { return r > 0.0 ? c * std::pow(r, expo) : 0.0; };
  m.regime = Regime::unit_interval;
  m.concentration = s;
  m.mass_below = [s](double r) { return r > 0.0 ? std::pow(r, 2.0 - 2.0 * s) : 0.0; };
  std::ostringstream os;
  os.precision(17);
  os << "fractional:s=" << s;
  m.label = os.str();
  return m;
}

/// rho(r) = 2(1-s) R^{2s-2} r^{2-2s-N} on (0, R], zero beyond (full regime).
inline Mollifier truncated_fractional_mollifier(double s, double R, int dim) {
  detail::require_fractional_s(s);
  detail::require_kernel_dim(dim);
  if (!(R > 0.0 && std::isfinite(R))) throw UsageError("truncation radius R must be positive");
  Mollifier m;
  m.dim = dim;
  const double c = 2.0 * (1.0 - s) * std::pow(R, 2.0 * s - 2.0);
  const double expo = 2.0 - 2.0 * s - dim;
  m.eval = [c, expo, R](double r) { return (r > 0.0 && r <= R) ? c * std::pow(r, expo) : 0.0; };
  m.regime = Regime::full;
  m.concentration = s;
  m.support_cutoff = R;
  m.mass_below = [s, R](double r) { return r > 0.0 ? std::pow(std::min(r, R) / R, 2.0 - 2.0 * s) : 0.0; };
  std::ostringstream os;
  os.precision(17);
  os << "truncated:s=" << s << ",R=" << R;
  m.label = os.str();
  return m;
}

/// Parses "fractional:s=0.99" or "truncated:s=0.99,R=16".
inline Mollifier parse_kernel_spec(const std::string& spec, int dim) {
  const auto colon = spec.find(':');
  const std::string family = spec.substr(0, colon);
  std::map<std::string, double> kv;
  if (colon != std::string::npos) {
    std::stringstream rest(spec.substr(colon + 1));
    std::string item;
    while (std::getline(rest, item, ',')) {
      const auto eq = item.find('=');
      if (eq == std::string::npos) throw UsageError("kernel parameter '" + item + "' is not key=value");
      const std::string key = item.substr(0, eq);
      try {
        std::size_t used = 0;
        const std::string text = item.substr(eq + 1);
        const double v = std::stod(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
        kv[key] = v;
      } catch (const std::exception&) {
        throw UsageError("kernel parameter '" + key + "' is not a number");
      }
    }
  }
  auto take = [&](const std::string& key, std::optional<double> fallback) {
    auto it = kv.find(key);
    if (it == kv.end()) {
      if (!fallback) throw UsageError("kernel '" + family + "' requires parameter " + key);
      return *fallback;
    }
    const double v = it->second;
    kv.erase(it);
    return v;
  };
  Mollifier m;
  if (family == "fractional") {
    m = fractional_mollifier(take("s", std::nullopt), dim);
  } else if (family == "truncated") {
    const double s = take("s", std::nullopt);
    m = truncated_fractional_mollifier(s, take("R", 16.0), dim);
  } else {
    throw UsageError("unknown kernel family '" + family + "'");
  }
  if (!kv.empty()) throw UsageError("unknown kernel parameter '" + kv.begin()->first + "'");
  return m;
}

// ---------------------------------------------------------------------------
// Radial moments

/// Settings for one-dimensional radial integrals of kernel moments: composite
/// Gauss-Legendre in log r on [inner, outer] with local power-law
/// extrapolation to 0 and to infinity.
struct RadialMomentRule {
  double inner = 1e-6;
  double outer = 1e6;
  int panels = 16;
  int order = 16;
};

/// int_a^b f(r) dr for 0 <= a < b <= inf.
///
/// Pieces below `inner` or above `outer` are closed with the power law
/// f(r) ~ c r^alpha fitted at the two nearest sample points. A fitted exponent
/// that makes the piece divergent raises NumericDomainError.
template <class F>
double radial_moment(F&& f, double a, double b, const RadialMomentRule& rule = {}) {
  if (!(b > a) || a < 0.0) return 0.0;
  double total = 0.0;
  const double hi = std::isinf(b) ? std::max(rule.outer, std::max(a, rule.inner) * 2.0) : b;
  const double lo = std::min(std::max(a, rule.inner), hi);
  if (hi > lo) {
    const Rule1D r = composite_gauss_legendre(std::log(lo), std::log(hi), rule.panels, rule.order);
    std::vector<double> terms(r.nodes.size());
    for (std::size_t i = 0; i < r.nodes.size(); ++i) {
      const double x = std::exp(r.nodes[i]);
      terms[i] = r.weights[i] * x * f(x);
    }
    total += pairwise_sum(terms);
  }
  auto power_law = [&](double r1, double r2) {
    const double f1 = f(r1), f2 = f(r2);
    if (!std::isfinite(f1) || !std::isfinite(f2)) {
      throw NumericDomainError("non-finite kernel sample near r=" + std::to_string(r1));
    }
    struct Fit { double f1, f2, alpha; };
    if (f1 <= 0.0 || f2 <= 0.0) return Fit{f1, f2, std::numeric_limits<double>::quiet_NaN()};
    return Fit{f1, f2, std::log(f2 / f1) / std::log(r2 / r1)};
  };
  if (a < lo) {
    const auto fit = power_law(lo, 2.0 * lo);
    if (fit.f1 != 0.0 || fit.f2 != 0.0) {
      if (!(fit.alpha > -1.0)) throw NumericDomainError("kernel moment not integrable at r -> 0");
      const double upper = fit.f1 * lo / (fit.alpha + 1.0);
      const double lower = a > 0.0 ? fit.f1 * std::pow(a / lo, fit.alpha + 1.0) * lo / (fit.alpha + 1.0) : 0.0;
      total += upper - lower;
    }
  }
  if (std::isinf(b)) {
    const auto fit = power_law(hi / 2.0, hi);
    if (fit.f1 != 0.0 || fit.f2 != 0.0) {
      if (!(fit.alpha < -1.0)) throw NumericDomainError("kernel moment not integrable at r -> infinity");
      total += -fit.f2 * hi / (fit.alpha + 1.0);
    }
  }
  return total;
}

struct MollifierDiagnostics {
  /// Normalization mass over the regime's interval.
  double mass = 0.0;
  /// int_delta^upper rho r^{N-1} dr, upper = cutoff (full) or 1 (unit_interval).
  double tail = 0.0;
  /// int_1^inf rho r^{N-3} dr, unit_interval regime only.
  std::optional<double> remark_tail;
  /// Closed-form mass when the family provides one.
  std::optional<double> closed_mass;
};

inline double normalization_upper(const Mollifier& rho) {
  if (rho.regime == Regime::unit_interval) return 1.0;
  return rho.support_cutoff.value_or(std::numeric_limits<double>::infinity());
}

inline MollifierDiagnostics mollifier_diagnostics(const Mollifier& rho, int dim, double delta,
                                                  const RadialMomentRule& rule = {}) {
  detail::require_kernel_dim(dim);
  if (!(delta > 0.0)) throw UsageError("delta must be positive");
  const double upper = normalization_upper(rho);
  auto moment = [&](double r) { return rho(r) * std::pow(r, dim - 1); };
  MollifierDiagnostics d;
  d.mass = radial_moment(moment, 0.0, upper, rule);
  d.tail = delta >= upper ? 0.0 : radial_moment(moment, delta, upper, rule);
  if (rho.regime == Regime::unit_interval) {
    d.remark_tail = radial_moment([&](double r) { return rho(r) * std::pow(r, dim - 3); }, 1.0,
                                  std::numeric_limits<double>::infinity(), rule);
  }
  if (rho.has_closed_mass()) d.closed_mass = std::isinf(upper) ? std::optional<double>{} : rho.mass_below(upper);
  if (!std::isfinite(d.mass) || !std::isfinite(d.tail)) throw NumericDomainError("non-finite kernel moment");
  return d;
}

/// int_0^r rho(t) t^{N-1} dt: closed form when available, numerical otherwise.
inline double mass_below(const Mollifier& rho, double r) {
  if (rho.has_closed_mass()) return rho.mass_below(r);
  return radial_moment([&](double t) { return rho(t) * std::pow(t, rho.dim - 1); }, 0.0, r);
}

// ---------------------------------------------------------------------------
// Q_{N,p}

struct QConstant {
  int dim = 1;
  double p = 2.0;
  /// Reported constant (the closed form).
  double value = 0.0;
  /// (1/p) sum_sigma w_sigma |omega . sigma|^p with omega = e_N.
  double quadrature = 0.0;
  /// (1/p) int_{S^{N-1}} |sigma_N|^p d sigma via Gamma functions.
  double closed_form = 0.0;
  /// |quadrature - closed_form| / closed_form.
  double crosscheck_residual = 0.0;
};

/// (1/p) int_{S^{N-1}} |omega . sigma|^p d sigma = (2/p) pi^{(N-1)/2} Gamma((p+1)/2) / Gamma((N+p)/2).
inline double q_constant_closed_form(int dim, double p) {
  detail::require_kernel_dim(dim);
  const double log_moment = std::log(2.0) + 0.5 * (dim - 1) * std::log(std::numbers::pi) +
                            std::lgamma(0.5 * (p + 1.0)) - std::lgamma(0.5 * (dim + p));
  return std::exp(log_moment) / p;
}

inline double sphere_moment(const SphereRule& rule, const Point& omega, double p) {
  std::vector<double> terms(rule.size());
  for (std::size_t j = 0; j < rule.size(); ++j) {
    const double c = std::abs(dot(omega, rule.nodes[j]));
    terms[j] = rule.weights[j] * (p == 2.0 ? c * c : std::pow(c, p));
  }
  return pairwise_sum(terms);
}

/// Q_{N,p} with reference direction omega (default e_N).
inline QConstant q_constant(int dim, double p, const SphereRule& rule, std::optional<Point> omega = {}) {
  require_valid_p(p);
  if (dim < 1 || dim > 3) throw UsageError("q_constant supports N = 1, 2, 3");
  if (rule.dim != dim) {
    throw UsageError("sphere rule dimension " + std::to_string(rule.dim) + " does not match N = " +
                     std::to_string(dim));
  }
  const Point w = omega.value_or(unit_vector(dim, dim - 1));
  require_same_dim(w.dim(), dim, "q_constant omega");
  QConstant q;
  q.dim = dim;
  q.p = p;
  q.quadrature = sphere_moment(rule, w, p) / p;
  q.closed_form = q_constant_closed_form(dim, p);
  q.crosscheck_residual = std::abs(q.quadrature - q.closed_form) / q.closed_form;
  q.value = q.closed_form;
  return q;
}

/// Relative defect of  sum_sigma w |z . sigma|_p^p = p Q_{N,p} |z|_p^p.
inline double sphere_moment_identity_residual(const ComplexVector& z, double p, const SphereRule& rule) {
  require_same_dim(z.dim(), rule.dim, "sphere_moment_identity_residual");
  const double zp = lp_modulus_pow(z, p);
  if (zp == 0.0) return 0.0;
  require_valid_p(p);
  const double qnp = q_constant_closed_form(rule.dim, p);
  std::vector<double> terms(rule.size());
  for (std::size_t j = 0; j < rule.size(); ++j) {
    terms[j] = rule.weights[j] * lp_modulus_pow(dot(z, rule.nodes[j]), p);
  }
  const double lhs = pairwise_sum(terms);
  const double rhs = p * qnp * zp;
  return std::abs(lhs - rhs) / rhs;
}

}  // namespace magsob
