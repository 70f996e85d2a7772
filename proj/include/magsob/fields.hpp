#pragma once

// Complex scalar fields, magnetic vector potentials, the phase-twisted
// comparison Psi_u(x, y) and the mixed modulus |z|_p.

#include <cmath>
#include <complex>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "magsob/error.hpp"
#include "magsob/vec.hpp"

namespace magsob {

/// Complex-valued function on R^N.
///
/// Fields are immutable once built and may be shared between threads. When
/// `grad` is empty, callers fall back to central differences.
struct ScalarField {
  int dim = 1;
  std::function<Complex(const Point&)> eval;
  std::function<ComplexVector(const Point&)> grad;
  /// |u(x)| = 0 for |x| > support_radius.
  std::optional<double> support_radius;
  /// Known value of sup |u|, if any.
  std::optional<double> sup_modulus;
  /// Set for fields known to vanish identically; functionals short-circuit.
  bool identically_zero = false;
  std::string label;

  Complex operator()(const Point& x) const { return eval(x); }
  bool has_gradient() const { return static_cast<bool>(grad); }
};

/// Lipschitz map R^N -> R^N. `lipschitz_bound` is the sup of the operator
/// norm of the Jacobian.
struct VectorPotential {
  int dim = 1;
  std::function<Point(const Point&)> eval;
  double lipschitz_bound = 0.0;
  bool identically_zero = false;
  std::string label;

  Point operator()(const Point& x) const { return eval(x); }
};

namespace detail {

inline Complex psi_unchecked(const ScalarField& u, const VectorPotential& A, const Point& x,
                             const Point& y) {
  Point mid = 0.5 * (x + y);
  double phase = dot(x - y, A(mid));
  return std::polar(1.0, phase) * u(y);
}

inline Complex difference_unchecked(const ScalarField& u, const VectorPotential& A, const Point& x,
                                    const Point& y, Complex ux) {
  Point mid = 0.5 * (x + y);
  const Complex half = std::polar(1.0, 0.5 * dot(x - y, A(mid)));
  return half * (half * u(y) - std::conj(half) * ux);
}

}  // namespace detail

/// Psi_u(x, y) = exp(i (x - y) . A((x + y)/2)) u(y).
inline Complex psi(const ScalarField& u, const VectorPotential& A, const Point& x, const Point& y) {
  require_same_dim(u.dim, A.dim, "psi(u, A)");
  require_same_dim(u.dim, x.dim(), "psi(u, x)");
  require_same_dim(u.dim, y.dim(), "psi(u, y)");
  return detail::psi_unchecked(u, A, x, y);
}

/// Psi_u(x, y) - u(x) in half-phase form; its modulus is exactly symmetric in (x, y).
inline Complex magnetic_difference(const ScalarField& u, const VectorPotential& A, const Point& x, const Point& y) {
  require_same_dim(u.dim, A.dim, "magnetic_difference(u, A)");
  require_same_dim(u.dim, x.dim(), "magnetic_difference(u, x)");
  require_same_dim(u.dim, y.dim(), "magnetic_difference(u, y)");
  return detail::difference_unchecked(u, A, x, y, u(x));
}

inline double default_fd_step(const Point& x) { return 1e-5 * (1.0 + norm(x)); }

/// grad u(x) - i A(x) u(x). Uses the analytic gradient when the field has one,
/// otherwise central differences with step `fd_step` per coordinate.
inline ComplexVector magnetic_gradient(const ScalarField& u, const VectorPotential& A,
                                       const Point& x, std::optional<double> fd_step = {}) {
  require_same_dim(u.dim, A.dim, "magnetic_gradient");
  require_same_dim(u.dim, x.dim(), "magnetic_gradient");
  ComplexVector g(u.dim);
  if (u.has_gradient()) {
    g = u.grad(x);
  } else {
    const double step = fd_step.value_or(default_fd_step(x));
    if (!(step > 0.0)) throw UsageError("fd_step must be positive");
    for (int i = 0; i < u.dim; ++i) {
      Point xp = x, xm = x;
      xp[i] += step;
      xm[i] -= step;
      g[i] = (u(xp) - u(xm)) / (xp[i] - xm[i]);
    }
  }
  const Complex ux = u(x);
  const Point a = A(x);
  for (int i = 0; i < u.dim; ++i) g[i] -= Complex(0.0, a[i]) * ux;
  return g;
}

inline void require_valid_p(double p) {
  if (!(std::isfinite(p) && p > 1.0)) {
    throw UsageError("exponent p must be finite and > 1, got " + std::to_string(p));
  }
}

namespace detail {

inline double lp_pow_from_parts(double re_norm, double im_norm, double p) {
  if (p == 2.0) return re_norm * re_norm + im_norm * im_norm;
  return std::pow(re_norm, p) + std::pow(im_norm, p);
}

}  // namespace detail

/// |z|_p^p = |Re z|^p + |Im z|^p (Euclidean norms of the real and imaginary parts).
inline double lp_modulus_pow(const ComplexVector& z, double p) {
  return detail::lp_pow_from_parts(norm(real_part(z)), norm(imag_part(z)), p);
}

inline double lp_modulus_pow(Complex z, double p) {
  return detail::lp_pow_from_parts(std::abs(z.real()), std::abs(z.imag()), p);
}

/// The mixed modulus |z|_p = (|Re z|^p + |Im z|^p)^(1/p), p in (1, inf).
inline double lp_modulus(const ComplexVector& z, double p) {
  require_valid_p(p);
  const double re = norm(real_part(z));
  const double im = norm(imag_part(z));
  if (p == 2.0) return std::hypot(re, im);
  return std::pow(detail::lp_pow_from_parts(re, im, p), 1.0 / p);
}

inline double lp_modulus(Complex z, double p) { return lp_modulus(ComplexVector{z}, p); }

// ---------------------------------------------------------------------------
// Catalog

inline ScalarField gaussian_field(int dim, double amplitude = 1.0) {
  ScalarField u;
  u.dim = dim;
  u.eval = [amplitude](const Point& x) { return Complex(amplitude * std::exp(-0.5 * dot(x, x))); };
  u.grad = [amplitude](const Point& x) {
    const double v = amplitude * std::exp(-0.5 * dot(x, x));
    ComplexVector g(x.dim());
    for (int i = 0; i < x.dim(); ++i) g[i] = -x[i] * v;
    return g;
  };
  u.sup_modulus = std::abs(amplitude);
  u.identically_zero = amplitude == 0.0;
  u.label = "gaussian";
  return u;
}

/// amplitude * exp(-|x|^2/2 + i k x_1).
inline ScalarField modulated_gaussian_field(int dim, double k = 1.0, double amplitude = 1.0) {
  ScalarField u;
  u.dim = dim;
  u.eval = [k, amplitude](const Point& x) {
    return amplitude * std::exp(-0.5 * dot(x, x)) * std::polar(1.0, k * x[0]);
  };
  u.grad = [k, amplitude](const Point& x) {
    const Complex v = amplitude * std::exp(-0.5 * dot(x, x)) * std::polar(1.0, k * x[0]);
    ComplexVector g(x.dim());
    for (int i = 0; i < x.dim(); ++i) g[i] = -x[i] * v;
    g[0] += Complex(0.0, k) * v;
    return g;
  };
  u.sup_modulus = std::abs(amplitude);
  u.identically_zero = amplitude == 0.0;
  u.label = "modulated_gaussian";
  return u;
}

/// amplitude * exp(1 - 1/(1 - |x|^2/r^2)) inside the ball of radius r, zero outside.
inline ScalarField bump_field(int dim, double radius = 1.0, double amplitude = 1.0) {
  if (!(radius > 0.0)) throw UsageError("bump radius must be positive");
  ScalarField u;
  u.dim = dim;
  const double r2 = radius * radius;
  u.eval = [r2, amplitude](const Point& x) {
    const double q = dot(x, x) / r2;
    if (q >= 1.0) return Complex(0.0);
    return Complex(amplitude * std::exp(1.0 - 1.0 / (1.0 - q)));
  };
  u.grad = [r2, amplitude](const Point& x) {
    ComplexVector g(x.dim());
    const double q = dot(x, x) / r2;
    if (q >= 1.0) return g;
    const double v = amplitude * std::exp(1.0 - 1.0 / (1.0 - q));
    const double f = -v * 2.0 / (r2 * (1.0 - q) * (1.0 - q));
    for (int i = 0; i < x.dim(); ++i) g[i] = f * x[i];
    return g;
  };
  u.support_radius = radius;
  u.sup_modulus = std::abs(amplitude);
  u.identically_zero = amplitude == 0.0;
  u.label = "bump";
  return u;
}

inline VectorPotential zero_potential(int dim) {
  VectorPotential A;
  A.dim = dim;
  A.eval = [dim](const Point&) { return Point(dim); };
  A.lipschitz_bound = 0.0;
  A.identically_zero = true;
  A.label = "zero_potential";
  return A;
}

inline VectorPotential constant_potential(int dim, std::vector<double> b) {
  if (b.empty()) b = {1.0};
  if (static_cast<int>(b.size()) > dim) {
    throw UsageError("constant_potential: more components than dimensions");
  }
  Point c(dim);
  for (std::size_t i = 0; i < b.size(); ++i) c[static_cast<int>(i)] = b[i];
  VectorPotential A;
  A.dim = dim;
  A.eval = [c](const Point&) { return c; };
  A.lipschitz_bound = 0.0;
  A.identically_zero = norm(c) == 0.0;
  A.label = "constant_potential";
  return A;
}

/// N = 2: (-b x2/2, b x1/2). N = 3: (b/2)(-y, x, 0).
inline VectorPotential rotational_potential(int dim, double b = 1.0) {
  if (dim != 2 && dim != 3) throw UsageError("rotational_potential requires N = 2 or 3");
  VectorPotential A;
  A.dim = dim;
  A.eval = [b, dim](const Point& x) {
    Point a(dim);
    a[0] = -0.5 * b * x[1];
    a[1] = 0.5 * b * x[0];
    return a;
  };
  A.lipschitz_bound = 0.5 * std::abs(b);
  A.identically_zero = b == 0.0;
  A.label = "rotational_potential";
  return A;
}

/// A = grad(c |x|^2 / 2) = c x.
inline VectorPotential gradient_potential(int dim, double c = 1.0) {
  VectorPotential A;
  A.dim = dim;
  A.eval = [c](const Point& x) { return c * x; };
  A.lipschitz_bound = std::abs(c);
  A.identically_zero = c == 0.0;
  A.label = "gradient_potential";
  return A;
}

using CatalogObject = std::variant<ScalarField, VectorPotential>;

namespace detail {

inline double param_or(const std::vector<double>& params, std::size_t i, double fallback) {
  return i < params.size() ? params[i] : fallback;
}

inline void require_max_params(const std::string& name, const std::vector<double>& params,
                               std::size_t n) {
  if (params.size() > n) {
    throw UsageError("catalog entry '" + name + "' takes at most " + std::to_string(n) +
                     " parameters");
  }
}

inline std::string canonical_catalog_name(const std::string& name) {
  if (name == "zero") return "zero_potential";
  if (name == "constant") return "constant_potential";
  if (name == "rotational") return "rotational_potential";
  if (name == "gradient") return "gradient_potential";
  return name;
}

}  // namespace detail

/// Instantiate a named analytic object.
///
/// Fields: gaussian(amplitude), modulated_gaussian(k, amplitude),
/// bump(radius, amplitude). Potentials: zero_potential(), constant_potential(b...),
/// rotational_potential(b), gradient_potential(c).
inline CatalogObject catalog(const std::string& name, int dim, const std::vector<double>& params = {}) {
  if (dim < 1 || dim > kMaxDim) throw UsageError("dimension must be 1, 2 or 3");
  const std::string n = detail::canonical_catalog_name(name);
  using detail::param_or;
  using detail::require_max_params;
  if (n == "gaussian") {
    require_max_params(n, params, 1);
    return gaussian_field(dim, param_or(params, 0, 1.0));
  }
  if (n == "modulated_gaussian") {
    require_max_params(n, params, 2);
    return modulated_gaussian_field(dim, param_or(params, 0, 1.0), param_or(params, 1, 1.0));
  }
  if (n == "bump") {
    require_max_params(n, params, 2);
    return bump_field(dim, param_or(params, 0, 1.0), param_or(params, 1, 1.0));
  }
  if (n == "zero_potential") {
    require_max_params(n, params, 0);
    return zero_potential(dim);
  }
  if (n == "constant_potential") {
    require_max_params(n, params, static_cast<std::size_t>(dim));
    return constant_potential(dim, params);
  }
  if (n == "rotational_potential") {
    require_max_params(n, params, 1);
    return rotational_potential(dim, param_or(params, 0, 1.0));
  }
  if (n == "gradient_potential") {
    require_max_params(n, params, 1);
    return gradient_potential(dim, param_or(params, 0, 1.0));
  }
  throw UsageError("unknown catalog name '" + name + "'");
}

inline ScalarField make_field(const std::string& name, int dim, const std::vector<double>& params = {}) {
  auto obj = catalog(name, dim, params);
  if (auto* u = std::get_if<ScalarField>(&obj)) return std::move(*u);
  throw UsageError("'" + name + "' is a vector potential, not a scalar field");
}

inline VectorPotential make_potential(const std::string& name, int dim,
                                      const std::vector<double>& params = {}) {
  auto obj = catalog(name, dim, params);
  if (auto* a = std::get_if<VectorPotential>(&obj)) return std::move(*a);
  throw UsageError("'" + name + "' is a scalar field, not a vector potential");
}

inline const std::vector<std::string>& catalog_field_names() {
  static const std::vector<std::string> names{"gaussian", "modulated_gaussian", "bump"};
  return names;
}

inline const std::vector<std::string>& catalog_potential_names() {
  static const std::vector<std::string> names{"zero_potential", "constant_potential",
                                              "rotational_potential", "gradient_potential"};
  return names;
}

}  // namespace magsob
