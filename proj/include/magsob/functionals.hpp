#pragma once

// Local and nonlocal magnetic energies.
//
// All double integrals over R^N x R^N are written in polar form y = x + h sigma
// with x on a truncated box, h on a logarithmic radial grid and sigma on a
// sphere rule (or Monte Carlo over (x, sigma) in N = 3).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "magsob/error.hpp"
#include "magsob/fields.hpp"
#include "magsob/kernels.hpp"
#include "magsob/quadrature.hpp"

namespace magsob {

struct EnergyValue {
  double value = 0.0;
  double estimated_error = 0.0;
  std::string config_digest;
};

/// Quadrature configuration shared by every functional of one run.
struct QuadConfig {
  BoxGrid box;
  RadialGrid radial;
  int sphere_order = 32;
  McSampler mc;
  /// Monte Carlo over (x, sigma) instead of box x sphere tensor sums.
  bool use_mc = false;
  Exec exec;

  /// N = 1: 256 box nodes, N = 2: 96 per dimension, N = 3: Monte Carlo with
  /// 2e6 samples (seed 42) for double integrals and 48 nodes per dimension
  /// for single integrals.
  static QuadConfig defaults(int dim) {
    QuadConfig q;
    q.box.dim = dim;
    q.box.radius = 8.0;
    switch (dim) {
      case 1: q.box.nodes_per_dim = 256; q.sphere_order = 2; break;
      case 2: q.box.nodes_per_dim = 96; q.sphere_order = 32; break;
      case 3: q.box.nodes_per_dim = 48; q.sphere_order = 8; q.use_mc = true; break;
      default: throw UsageError("dimension must be 1, 2 or 3");
    }
    q.mc.seed = 42;
    q.mc.count = 2'000'000;
    return q;
  }

  SphereRule sphere() const { return build_sphere_rule(box.dim, sphere_order); }

  std::string describe() const {
    std::ostringstream os;
    os.precision(17);
    os << "box:N=" << box.dim << ",R=" << box.radius << ",n=" << box.nodes_per_dim << ",rule="
       << to_string(box.rule) << ";radial:" << radial.h_min << ',' << radial.h_max << ',' << radial.count
       << ";sphere:" << sphere_order;
    if (use_mc) os << ";mc:" << mc.seed << ',' << mc.count << ',' << mc.stream_id;
    return os.str();
  }
};

/// FNV-1a 64-bit digest as 16 hex digits.
inline std::string digest_of(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

namespace detail {

inline std::string num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

inline void check_dims(const ScalarField& u, const VectorPotential& A, int grid_dim) {
  require_same_dim(u.dim, A.dim, "field/potential");
  require_same_dim(u.dim, grid_dim, "field/grid");
}

/// e^{-R^2}-scale estimate of the mass of |u|^2 outside the box.
inline double box_tail_estimate(const ScalarField& u, double radius) {
  if (u.support_radius && *u.support_radius <= radius) return 0.0;
  const double sup = u.sup_modulus.value_or(1.0);
  return sup * sup * std::exp(-radius * radius);
}

inline double lp_abs(Complex z, double p) {
  if (p == 2.0) return std::abs(z);
  return std::pow(lp_modulus_pow(z, p), 1.0 / p);
}

inline EnergyValue finish(double value, double err, const std::string& desc, const char* what) {
  if (!std::isfinite(value)) throw NumericDomainError(std::string("non-finite value in ") + what);
  EnergyValue e;
  // Rounding can leave sums of nonnegative terms at -0.
  e.value = value < 0.0 ? 0.0 : value;
  e.estimated_error = err;
  e.config_digest = digest_of(desc);
  return e;
}

/// Per-x quantities reused by every ray through x.
struct RayOrigin {
  Point x;
  Complex ux;
  ComplexVector grad_a;  // grad u - i A u at x
};

inline RayOrigin make_origin(const ScalarField& u, const VectorPotential& A, const Point& x) {
  return RayOrigin{x, u(x), magnetic_gradient(u, A, x)};
}

/// Radial part of the BBM integrand: weights w_h h^{N-1} rho(h) / h^p on the
/// capped grid and the kernel mass below h_min.
struct BbmRadial {
  std::vector<double> h;
  std::vector<double> weight;
  double near_mass = 0.0;
  double far_tail_bound = 0.0;  // int_{h_max}^inf rho h^{N-1-p} dh when rho has no cutoff
};

inline BbmRadial make_bbm_radial(const Mollifier& rho, double p, int dim, const RadialGrid& radial) {
  RadialGrid g = radial;
  if (rho.support_cutoff) {
    if (!(radial.h_min < *rho.support_cutoff)) {
      throw UsageError("radial.h_min must lie below the kernel support cutoff");
    }
    g = radial.capped(*rho.support_cutoff);
  }
  BbmRadial out;
  out.h = g.nodes();
  out.weight = g.weights();
  for (std::size_t k = 0; k < out.h.size(); ++k) {
    const double hk = out.h[k];
    out.weight[k] *= std::pow(hk, dim - 1) * rho(hk) / std::pow(hk, p);
    if (!std::isfinite(out.weight[k])) {
      throw NumericDomainError("non-finite kernel weight at h=" + num(hk));
    }
  }
  out.near_mass = mass_below(rho, g.h_min);
  if (!rho.support_cutoff || *rho.support_cutoff > g.h_max) {
    out.far_tail_bound = radial_moment([&](double r) { return rho(r) * std::pow(r, dim - 1 - p); }, g.h_max,
                                       std::numeric_limits<double>::infinity());
  }
  return out;
}

inline double bbm_ray(const ScalarField& u, const VectorPotential& A, const RayOrigin& o, const Point& sigma,
                      double p, const BbmRadial& rad) {
  double sum = 0.0;
  for (std::size_t k = 0; k < rad.h.size(); ++k) {
    const Point y = o.x + rad.h[k] * sigma;
    const Complex diff = difference_unchecked(u, A, o.x, y, o.ux);
    sum += rad.weight[k] * lp_modulus_pow(diff, p);
  }
  return sum + rad.near_mass * lp_modulus_pow(dot(o.grad_a, sigma), p);
}

/// int over the on-part of [a, b] of delta^p h^{-p-1} dh.
inline double jdelta_weight(double delta_p, double p, double a, double b) {
  if (p == 2.0) return 0.5 * delta_p * (1.0 / (a * a) - 1.0 / (b * b));
  return delta_p * (std::pow(a, -p) - std::pow(b, -p)) / p;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Local energy

/// |Psi_u(x, y) - u(x)|_p^p rho(|x - y|) / |x - y|^p for x != y.
inline double bbm_integrand(const ScalarField& u, const VectorPotential& A, const Mollifier& rho, double p,
                            const Point& x, const Point& y) {
  require_valid_p(p);
  const double r = norm(x - y);
  if (!(r > 0.0)) throw UsageError("bbm_integrand needs x != y");
  return lp_modulus_pow(magnetic_difference(u, A, x, y), p) * rho(r) / std::pow(r, p);
}

/// int |u|_p^p over the box.
inline double field_lp_norm_pow(const ScalarField& u, double p, const BoxGrid& grid, Exec exec = {}) {
  require_same_dim(u.dim, grid.dim, "field/grid");
  if (u.identically_zero) return 0.0;
  return integrate_box([&](const Point& x) { return lp_modulus_pow(u(x), p); }, grid, exec);
}

/// int |grad u - i A u|_p^p dx over the truncated box.
inline EnergyValue local_energy(const ScalarField& u, const VectorPotential& A, double p, const BoxGrid& grid,
                                Exec exec = {}) {
  require_valid_p(p);
  detail::check_dims(u, A, grid.dim);
  grid.validate();
  const std::string desc = "local;p=" + detail::num(p) + ";box:" + detail::num(grid.radius) + ',' +
                           std::to_string(grid.nodes_per_dim) + ',' + to_string(grid.rule);
  if (u.identically_zero) return detail::finish(0.0, 0.0, desc, "local_energy");
  const double v = integrate_box(
      [&](const Point& x) { return lp_modulus_pow(magnetic_gradient(u, A, x), p); }, grid, exec);
  return detail::finish(v, detail::box_tail_estimate(u, grid.radius), desc, "local_energy");
}

// ---------------------------------------------------------------------------
// BBM energy

/// Radial integral along one ray of |Psi_u(x, x+h sigma) - Psi_u(x, x)|_p^p / h^p rho(h) h^{N-1},
/// including the part below h_min (integrand frozen at its h -> 0 limit).
inline double bbm_ray_integral(const ScalarField& u, const VectorPotential& A, const Mollifier& rho,
                               const Point& x, const Point& sigma, double p, const RadialGrid& radial) {
  require_valid_p(p);
  detail::check_dims(u, A, x.dim());
  const auto rad = detail::make_bbm_radial(rho, p, u.dim, radial);
  return detail::bbm_ray(u, A, detail::make_origin(u, A, x), sigma, p, rad);
}

/// The nonlocal energy
///   int int |Psi_u(x,y) - Psi_u(x,x)|_p^p / |x-y|^p rho(|x-y|) dx dy
/// with x on the box, y = x + h sigma.
inline EnergyValue bbm_energy(const ScalarField& u, const VectorPotential& A, const Mollifier& rho, double p,
                              const BoxGrid& grid, const RadialGrid& radial, const SphereRule& sphere,
                              Exec exec = {}) {
  require_valid_p(p);
  detail::check_dims(u, A, grid.dim);
  require_same_dim(rho.dim, grid.dim, "kernel/grid");
  require_same_dim(sphere.dim, grid.dim, "sphere/grid");
  const std::string desc = "bbm;p=" + detail::num(p) + ";kernel=" + rho.label + ";box:" +
                           detail::num(grid.radius) + ',' + std::to_string(grid.nodes_per_dim) + ',' +
                           to_string(grid.rule) + ";radial:" + detail::num(radial.h_min) + ',' +
                           detail::num(radial.h_max) + ',' + std::to_string(radial.count) +
                           ";sphere:" + std::to_string(sphere.size());
  if (u.identically_zero) return detail::finish(0.0, 0.0, desc, "bbm_energy");
  const auto rad = detail::make_bbm_radial(rho, p, grid.dim, radial);
  const BoxNodes nodes = grid.nodes();
  auto partial = parallel_map<double>(
      nodes.points.size(),
      [&](std::size_t i) {
        const auto origin = detail::make_origin(u, A, nodes.points[i]);
        double s = 0.0;
        for (std::size_t j = 0; j < sphere.size(); ++j) {
          s += sphere.weights[j] * detail::bbm_ray(u, A, origin, sphere.nodes[j], p, rad);
        }
        detail::require_finite(s, i, nodes.points[i], "bbm_energy");
        return nodes.weights[i] * s;
      },
      exec);
  const double value = pairwise_sum(partial);
  // Errors: near-field freezing is O(h_min) relative, far tail bounded via
  // |Psi diff|^p <= 2^{p-1}(|u(x)|^p + |u(y)|^p), box truncation e^{-R^2}.
  const double sup = u.sup_modulus.value_or(1.0);
  const double l2 = field_lp_norm_pow(u, p, grid, exec);
  const double err = rad.near_mass * radial.h_min * value +
                     2.0 * std::pow(2.0, p - 1.0) * sphere_area(grid.dim) * l2 * rad.far_tail_bound +
                     std::pow(sup, p) * std::exp(-grid.radius * grid.radius);
  return detail::finish(value, err, desc, "bbm_energy");
}

inline EnergyValue bbm_energy_mc(const ScalarField& u, const VectorPotential& A, const Mollifier& rho, double p,
                                 const BoxGrid& grid, const RadialGrid& radial, const McSampler& sampler,
                                 Exec exec = {}) {
  require_valid_p(p);
  detail::check_dims(u, A, grid.dim);
  require_same_dim(rho.dim, grid.dim, "kernel/grid");
  std::ostringstream desc;
  desc << "bbm_mc;p=" << detail::num(p) << ";kernel=" << rho.label << ";R=" << detail::num(grid.radius)
       << ";radial:" << detail::num(radial.h_min) << ',' << detail::num(radial.h_max) << ',' << radial.count
       << ";mc:" << sampler.seed << ',' << sampler.count << ',' << sampler.stream_id;
  if (u.identically_zero) return detail::finish(0.0, 0.0, desc.str(), "bbm_energy_mc");
  const auto rad = detail::make_bbm_radial(rho, p, grid.dim, radial);
  const McEstimate est = integrate_rays_mc(
      [&](const Point& x, const Point& sigma) {
        return detail::bbm_ray(u, A, detail::make_origin(u, A, x), sigma, p, rad);
      },
      grid, sampler, exec);
  return detail::finish(est.mean, est.std_error, desc.str(), "bbm_energy_mc");
}

// ---------------------------------------------------------------------------
// J_delta

/// Radial integral along one ray of 1{|Psi diff|_p > delta} delta^p h^{-p-1}.
///
/// The level function |Psi diff|_p - delta is sampled on the radial nodes and
/// interpolated linearly inside each cell; the weight is integrated exactly on
/// the resulting on-set. The cell below h_min starts from the exact value
/// -delta at h = 0, and the indicator state at h_max is extended to infinity.
inline double jdelta_ray_integral(const ScalarField& u, const VectorPotential& A, const Point& x,
                                  const Point& sigma, double delta, double p, std::span<const double> h) {
  const Complex ux = u(x);
  const double delta_p = std::pow(delta, p);
  double prev_h = 0.0, prev_f = -delta;
  double sum = 0.0;
  for (double hk : h) {
    const Point y = x + hk * sigma;
    const double f = detail::lp_abs(detail::difference_unchecked(u, A, x, y, ux), p) - delta;
    if (prev_f > 0.0 && f > 0.0) {
      sum += detail::jdelta_weight(delta_p, p, prev_h, hk);
    } else if (prev_f <= 0.0 && f > 0.0) {
      const double hc = prev_h + (hk - prev_h) * (-prev_f) / (f - prev_f);
      sum += detail::jdelta_weight(delta_p, p, hc, hk);
    } else if (prev_f > 0.0 && f <= 0.0) {
      const double hc = prev_h + (hk - prev_h) * prev_f / (prev_f - f);
      sum += detail::jdelta_weight(delta_p, p, prev_h, hc);
    }
    prev_h = hk;
    prev_f = f;
  }
  if (prev_f > 0.0) sum += delta_p * std::pow(prev_h, -p) / p;
  return sum;
}

inline double jdelta_ray_integral(const ScalarField& u, const VectorPotential& A, const Point& x,
                                  const Point& sigma, double delta, double p, const RadialGrid& radial) {
  require_valid_p(p);
  if (!(delta > 0.0)) throw UsageError("delta must be positive");
  detail::check_dims(u, A, x.dim());
  const auto h = radial.nodes();
  return jdelta_ray_integral(u, A, x, sigma, delta, p, std::span<const double>(h));
}

/// delta -> 0 limit of the per-ray J_delta integral: (1/p) |(grad u - i A u)(x) . sigma|_p^p.
inline double jdelta_ray_oracle(const ScalarField& u, const VectorPotential& A, const Point& x,
                                const Point& sigma, double p) {
  require_valid_p(p);
  detail::check_dims(u, A, x.dim());
  require_same_dim(sigma.dim(), x.dim(), "jdelta_ray_oracle");
  return lp_modulus_pow(dot(magnetic_gradient(u, A, x), sigma), p) / p;
}

/// J_{delta,p}(u) = int int_{|Psi diff|_p > delta} delta^p / |x-y|^{N+p} dx dy.
inline EnergyValue jdelta_energy(const ScalarField& u, const VectorPotential& A, double delta, double p,
                                 const BoxGrid& grid, const RadialGrid& radial, const SphereRule& sphere,
                                 Exec exec = {}) {
  require_valid_p(p);
  if (!(delta > 0.0 && std::isfinite(delta))) throw UsageError("delta must be positive");
  detail::check_dims(u, A, grid.dim);
  require_same_dim(sphere.dim, grid.dim, "sphere/grid");
  const std::string desc = "jdelta;p=" + detail::num(p) + ";delta=" + detail::num(delta) + ";box:" +
                           detail::num(grid.radius) + ',' + std::to_string(grid.nodes_per_dim) + ',' +
                           to_string(grid.rule) + ";radial:" + detail::num(radial.h_min) + ',' +
                           detail::num(radial.h_max) + ',' + std::to_string(radial.count) +
                           ";sphere:" + std::to_string(sphere.size());
  if (u.identically_zero) return detail::finish(0.0, 0.0, desc, "jdelta_energy");
  const std::vector<double> h = radial.nodes();
  const BoxNodes nodes = grid.nodes();
  auto partial = parallel_map<double>(
      nodes.points.size(),
      [&](std::size_t i) {
        double s = 0.0;
        for (std::size_t j = 0; j < sphere.size(); ++j) {
          s += sphere.weights[j] * jdelta_ray_integral(u, A, nodes.points[i], sphere.nodes[j], delta, p,
                                                       std::span<const double>(h));
        }
        detail::require_finite(s, i, nodes.points[i], "jdelta_energy");
        return nodes.weights[i] * s;
      },
      exec);
  const double sup = u.sup_modulus.value_or(1.0);
  return detail::finish(pairwise_sum(partial), std::pow(sup, p) * std::exp(-grid.radius * grid.radius), desc,
                        "jdelta_energy");
}

inline EnergyValue jdelta_energy_mc(const ScalarField& u, const VectorPotential& A, double delta, double p,
                                    const BoxGrid& grid, const RadialGrid& radial, const McSampler& sampler,
                                    Exec exec = {}) {
  require_valid_p(p);
  if (!(delta > 0.0 && std::isfinite(delta))) throw UsageError("delta must be positive");
  detail::check_dims(u, A, grid.dim);
  std::ostringstream desc;
  desc << "jdelta_mc;p=" << detail::num(p) << ";delta=" << detail::num(delta) << ";R=" << detail::num(grid.radius)
       << ";radial:" << detail::num(radial.h_min) << ',' << detail::num(radial.h_max) << ',' << radial.count
       << ";mc:" << sampler.seed << ',' << sampler.count << ',' << sampler.stream_id;
  if (u.identically_zero) return detail::finish(0.0, 0.0, desc.str(), "jdelta_energy_mc");
  const std::vector<double> h = radial.nodes();
  const McEstimate est = integrate_rays_mc(
      [&](const Point& x, const Point& sigma) {
        return jdelta_ray_integral(u, A, x, sigma, delta, p, std::span<const double>(h));
      },
      grid, sampler, exec);
  return detail::finish(est.mean, est.std_error, desc.str(), "jdelta_energy_mc");
}

// Dispatch on the run configuration.

inline EnergyValue bbm_energy(const ScalarField& u, const VectorPotential& A, const Mollifier& rho, double p,
                              const QuadConfig& q) {
  if (q.use_mc) return bbm_energy_mc(u, A, rho, p, q.box, q.radial, q.mc, q.exec);
  return bbm_energy(u, A, rho, p, q.box, q.radial, q.sphere(), q.exec);
}

inline EnergyValue jdelta_energy(const ScalarField& u, const VectorPotential& A, double delta, double p,
                                 const QuadConfig& q) {
  if (q.use_mc) return jdelta_energy_mc(u, A, delta, p, q.box, q.radial, q.mc, q.exec);
  return jdelta_energy(u, A, delta, p, q.box, q.radial, q.sphere(), q.exec);
}

// ---------------------------------------------------------------------------
// Pointwise densities

/// Largest sampled value of t^{-2} rho(t) over t in [1, 1e6]; throws when the
/// samples are non-finite or grow over the sampled range.
inline double kernel_far_bound(const Mollifier& rho) {
  double first_decade = 0.0, last_decade = 0.0, best = 0.0;
  for (int k = 0; k <= 60; ++k) {
    const double t = std::pow(10.0, k / 10.0);
    const double v = rho(t) / (t * t);
    if (!std::isfinite(v)) throw NumericDomainError("kernel sample t^-2 rho(t) non-finite at t=" + detail::num(t));
    if (k <= 10) first_decade = std::max(first_decade, v);
    if (k >= 50) last_decade = std::max(last_decade, v);
    best = std::max(best, v);
  }
  if (last_decade > 10.0 * first_decade && last_decade > 0.0) {
    throw NumericDomainError("kernel tail t^-2 rho(t) diverges as t -> infinity");
  }
  return best;
}

/// D(u, x) = int |Psi_u(x,y) - Psi_u(x,x)|^2 / |x-y|^2 rho(|x-y|) dy.
inline double pointwise_bbm_density(const ScalarField& u, const VectorPotential& A, const Mollifier& rho,
                                    const Point& x, const RadialGrid& radial, const SphereRule& sphere) {
  detail::check_dims(u, A, x.dim());
  require_same_dim(sphere.dim, x.dim(), "sphere/point");
  kernel_far_bound(rho);
  if (u.identically_zero) return 0.0;
  const auto rad = detail::make_bbm_radial(rho, 2.0, u.dim, radial);
  const auto origin = detail::make_origin(u, A, x);
  double s = 0.0;
  for (std::size_t j = 0; j < sphere.size(); ++j) {
    s += sphere.weights[j] * detail::bbm_ray(u, A, origin, sphere.nodes[j], 2.0, rad);
  }
  if (!std::isfinite(s)) throw NumericDomainError("non-finite pointwise density at x=" + to_string(x));
  return s;
}

/// J_delta(u, x) = int_{|Psi diff| > delta} delta^p / |x-y|^{N+p} dy.
inline double pointwise_jdelta(const ScalarField& u, const VectorPotential& A, double delta, const Point& x,
                               const RadialGrid& radial, const SphereRule& sphere, double p = 2.0) {
  require_valid_p(p);
  if (!(delta > 0.0)) throw UsageError("delta must be positive");
  detail::check_dims(u, A, x.dim());
  require_same_dim(sphere.dim, x.dim(), "sphere/point");
  if (u.identically_zero) return 0.0;
  const auto h = radial.nodes();
  double s = 0.0;
  for (std::size_t j = 0; j < sphere.size(); ++j) {
    s += sphere.weights[j] * jdelta_ray_integral(u, A, x, sphere.nodes[j], delta, p, std::span<const double>(h));
  }
  return s;
}

// ---------------------------------------------------------------------------
// Maximal operators (test oracles)

inline constexpr int kMaximalPointsPerDecade = 64;

/// max over t_k = t_max 10^{-k/64}, k < count, of (1/t) int_0^t f(x + s sigma) ds,
/// each average by composite Simpson on 64 panels.
template <class F>
double directional_maximal(F&& f, const Point& x, const Point& sigma, double t_max, int count) {
  if (!(t_max > 0.0)) throw UsageError("t_max must be positive");
  if (count < 1) throw UsageError("count must be >= 1");
  require_same_dim(x.dim(), sigma.dim(), "directional_maximal");
  constexpr int kPanels = 64;
  double best = 0.0;
  for (int k = 0; k < count; ++k) {
    const double t = t_max * std::pow(10.0, -static_cast<double>(k) / kMaximalPointsPerDecade);
    const double step = t / kPanels;
    double sum = 0.0;
    for (int i = 0; i <= kPanels; ++i) {
      const double c = (i == 0 || i == kPanels) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
      sum += c * f(x + (i * step) * sigma);
    }
    best = std::max(best, sum * step / 3.0 / t);
  }
  return best;
}

struct BallResolution {
  int radial_nodes = 24;
  int sphere_order = 24;
};

/// max over the given radii of the average of f over the ball B_x(r).
template <class F>
double hl_maximal(F&& f, const Point& x, std::span<const double> radii, BallResolution res = {}) {
  if (radii.empty()) throw UsageError("radii must be nonempty");
  const int dim = x.dim();
  const SphereRule sphere = build_sphere_rule(dim, dim == 1 ? 1 : res.sphere_order);
  const Rule1D gl = gauss_legendre(res.radial_nodes);
  double best = 0.0;
  for (double r : radii) {
    if (!(r > 0.0)) throw UsageError("radii must be positive");
    double integral = 0.0;
    for (int i = 0; i < res.radial_nodes; ++i) {
      const double rho = 0.5 * r * (gl.nodes[i] + 1.0);
      const double w = 0.5 * r * gl.weights[i] * std::pow(rho, dim - 1);
      double shell = 0.0;
      for (std::size_t j = 0; j < sphere.size(); ++j) shell += sphere.weights[j] * f(x + rho * sphere.nodes[j]);
      integral += w * shell;
    }
    const double ball = sphere_area(dim) * std::pow(r, dim) / dim;
    best = std::max(best, integral / ball);
  }
  return best;
}

// ---------------------------------------------------------------------------
// Truncation and the segment estimate

/// T_M(z) = z if |z| <= M, M z/|z| otherwise.
inline Complex truncate_value(Complex z, double M) {
  const double a = std::abs(z);
  return a <= M ? z : z * (M / a);
}

/// x -> T_M(u(x)). The result carries no analytic gradient.
inline ScalarField truncate_field(const ScalarField& u, double M) {
  if (!(M > 0.0)) throw UsageError("truncation level M must be positive");
  ScalarField t;
  t.dim = u.dim;
  t.eval = [inner = u.eval, M](const Point& x) { return truncate_value(inner(x), M); };
  t.support_radius = u.support_radius;
  t.sup_modulus = u.sup_modulus ? std::min(*u.sup_modulus, M) : M;
  t.identically_zero = u.identically_zero;
  t.label = "truncate(" + u.label + "," + detail::num(M) + ")";
  return t;
}

/// |Psi_u(x, x+h sigma) - Psi_u(x,x)| - [h M_sigma(|grad u - iAu|, x) + h^2 L M_sigma(|u|, x)],
/// L the Lipschitz bound of A. Nonpositive values certify the segment estimate.
inline double segment_bound_residual(const ScalarField& u, const VectorPotential& A, const Point& x, double h,
                                     const Point& sigma) {
  if (!(h > 0.0 && h < 1.0)) throw UsageError("segment length h must lie in (0, 1)");
  detail::check_dims(u, A, x.dim());
  require_same_dim(sigma.dim(), x.dim(), "segment_bound_residual");
  if (u.identically_zero) return 0.0;
  const double lhs = std::abs(magnetic_difference(u, A, x, x + h * sigma));
  const int count = 3 * kMaximalPointsPerDecade;
  const double m_grad =
      directional_maximal([&](const Point& y) { return norm(magnetic_gradient(u, A, y)); }, x, sigma, h, count);
  const double m_u = directional_maximal([&](const Point& y) { return std::abs(u(y)); }, x, sigma, h, count);
  return lhs - (h * m_grad + h * h * A.lipschitz_bound * m_u);
}

}  // namespace magsob
