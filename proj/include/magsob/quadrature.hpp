#pragma once

// Integration primitives over boxes in R^N, the radial half-line and the unit
// sphere, plus a counter-based Monte Carlo sampler.
//
// Reduction contract: every integral is assembled as a vector of per-node
// partial sums (one entry per outer node, each entry computed sequentially in
// a fixed inner order) followed by a pairwise tree sum keyed by node index.
// The result is therefore bit-identical for any worker count.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <numbers>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "magsob/error.hpp"
#include "magsob/vec.hpp"

namespace magsob {

// ---------------------------------------------------------------------------
// Execution

struct Exec {
  /// Worker count; 0 means one per hardware thread.
  unsigned threads = 1;

  unsigned resolved() const {
    if (threads != 0) return threads;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1u : hw;
  }

  /// Reads MAGSOB_THREADS (0 = auto). Unset or unparsable means auto.
  static Exec from_env() {
    const char* env = std::getenv("MAGSOB_THREADS");
    if (env == nullptr || *env == '\0') return Exec{0};
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 0) return Exec{0};
    return Exec{static_cast<unsigned>(v)};
  }
};

/// out[i] = fn(i) for i in [0, n), evaluated by up to exec.threads workers.
/// If any evaluation throws, the exception from the lowest index is rethrown.
template <class T, class Fn>
std::vector<T> parallel_map(std::size_t n, Fn&& fn, Exec exec = {}) {
  std::vector<T> out(n);
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(exec.resolved(), std::max<std::size_t>(n, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
    return out;
  }
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  constexpr std::size_t kChunk = 16;
  auto work = [&] {
    for (;;) {
      const std::size_t begin = next.fetch_add(kChunk);
      if (begin >= n) return;
      const std::size_t end = std::min(n, begin + kChunk);
      for (std::size_t i = begin; i < end; ++i) {
        try {
          out[i] = fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

/// Pairwise (cascade) summation over a fixed binary tree of indices.
inline double pairwise_sum(std::span<const double> v) {
  if (v.empty()) return 0.0;
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

// ---------------------------------------------------------------------------
// One-dimensional rules

struct Rule1D {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Gauss-Legendre nodes and weights on [-1, 1], ascending.
inline Rule1D gauss_legendre(int n) {
  if (n < 1) throw UsageError("Gauss-Legendre order must be >= 1");
  Rule1D r;
  r.nodes.resize(n);
  r.weights.resize(n);
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int k = 1; k <= n; ++k) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    // Recompute the derivative at the converged root for the weight.
    double p0 = 1.0, p1 = 0.0;
    for (int k = 1; k <= n; ++k) {
      const double p2 = p1;
      p1 = p0;
      p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
    }
    dp = n * (z * p0 - p1) / (z * z - 1.0);
    const double w = 2.0 / ((1.0 - z * z) * dp * dp);
    r.nodes[i] = -z;
    r.nodes[n - 1 - i] = z;
    r.weights[i] = w;
    r.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) r.nodes[n / 2] = 0.0;
  return r;
}

/// Composite Gauss-Legendre on [a, b] with `panels` panels of `order` nodes.
inline Rule1D composite_gauss_legendre(double a, double b, int panels, int order) {
  const Rule1D base = gauss_legendre(order);
  Rule1D r;
  const double width = (b - a) / panels;
  for (int k = 0; k < panels; ++k) {
    const double lo = a + k * width;
    for (int i = 0; i < order; ++i) {
      r.nodes.push_back(lo + 0.5 * width * (base.nodes[i] + 1.0));
      r.weights.push_back(0.5 * width * base.weights[i]);
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Box grid over [-R, R]^N

enum class BoxRule { gauss_legendre, trapezoid };

inline std::string to_string(BoxRule r) {
  return r == BoxRule::gauss_legendre ? "gauss_legendre" : "trapezoid";
}

inline BoxRule box_rule_from_string(const std::string& s) {
  if (s == "gauss_legendre" || s == "gl") return BoxRule::gauss_legendre;
  if (s == "trapezoid") return BoxRule::trapezoid;
  throw UsageError("unknown box rule '" + s + "'");
}

struct BoxNodes {
  std::vector<Point> points;
  std::vector<double> weights;
};

struct BoxGrid {
  int dim = 1;
  double radius = 8.0;
  int nodes_per_dim = 256;
  BoxRule rule = BoxRule::gauss_legendre;

  void validate() const {
    if (dim < 1 || dim > kMaxDim) throw UsageError("box dimension must be 1, 2 or 3");
    if (!(radius > 0.0 && std::isfinite(radius))) throw UsageError("radius must be positive");
    if (nodes_per_dim < 1) throw UsageError("nodes_per_dim must be >= 1");
    if (rule == BoxRule::trapezoid && nodes_per_dim < 2) {
      throw UsageError("trapezoid rule needs nodes_per_dim >= 2");
    }
  }

  Rule1D rule_1d() const {
    validate();
    Rule1D r;
    if (rule == BoxRule::gauss_legendre) {
      r = gauss_legendre(nodes_per_dim);
      for (auto& x : r.nodes) x *= radius;
      for (auto& w : r.weights) w *= radius;
    } else {
      const double h = 2.0 * radius / (nodes_per_dim - 1);
      for (int i = 0; i < nodes_per_dim; ++i) {
        r.nodes.push_back(i == nodes_per_dim - 1 ? radius : -radius + i * h);
        r.weights.push_back((i == 0 || i == nodes_per_dim - 1) ? 0.5 * h : h);
      }
    }
    return r;
  }

  /// Tensor-product nodes, first coordinate varying slowest.
  BoxNodes nodes() const {
    const Rule1D r = rule_1d();
    BoxNodes out;
    std::size_t total = 1;
    for (int d = 0; d < dim; ++d) total *= r.nodes.size();
    out.points.reserve(total);
    out.weights.reserve(total);
    std::vector<std::size_t> idx(dim, 0);
    for (std::size_t k = 0; k < total; ++k) {
      Point x(dim);
      double w = 1.0;
      for (int d = 0; d < dim; ++d) {
        x[d] = r.nodes[idx[d]];
        w *= r.weights[idx[d]];
      }
      out.points.push_back(x);
      out.weights.push_back(w);
      for (int d = dim - 1; d >= 0; --d) {
        if (++idx[d] < r.nodes.size()) break;
        idx[d] = 0;
      }
    }
    return out;
  }

  double volume() const { return std::pow(2.0 * radius, dim); }
};

// ---------------------------------------------------------------------------
// Logarithmic radial grid on [h_min, h_max]

/// Nodes are log-spaced and include both endpoints; weights are the
/// trapezoid rule in log h, i.e. integrate f(h) dh = f(e^t) e^t dt.
struct RadialGrid {
  double h_min = 1e-6;
  double h_max = 16.0;
  int count = 160;

  void validate() const {
    if (!(h_min > 0.0 && std::isfinite(h_min))) throw UsageError("radial.h_min must be positive");
    if (!(h_max > h_min && std::isfinite(h_max))) throw UsageError("radial.h_max must exceed radial.h_min");
    if (count < 2) throw UsageError("radial.count must be >= 2");
  }

  /// Same count, upper end lowered to `cap` when cap < h_max.
  RadialGrid capped(double cap) const {
    RadialGrid g = *this;
    if (cap < g.h_max) g.h_max = cap;
    return g;
  }

  double log_step() const { return std::log(h_max / h_min) / (count - 1); }

  std::vector<double> nodes() const {
    validate();
    std::vector<double> h(count);
    const double t0 = std::log(h_min), dt = log_step();
    for (int k = 0; k < count; ++k) h[k] = std::exp(t0 + k * dt);
    h.front() = h_min;
    h.back() = h_max;
    return h;
  }

  std::vector<double> weights() const {
    const auto h = nodes();
    const double dt = log_step();
    std::vector<double> w(count);
    for (int k = 0; k < count; ++k) w[k] = h[k] * dt * ((k == 0 || k == count - 1) ? 0.5 : 1.0);
    return w;
  }
};

// ---------------------------------------------------------------------------
// Sphere rules

/// |S^{N-1}|: 2, 2 pi, 4 pi.
inline double sphere_area(int dim) {
  switch (dim) {
    case 1: return 2.0;
    case 2: return 2.0 * std::numbers::pi;
    case 3: return 4.0 * std::numbers::pi;
    default: throw UsageError("sphere area requested for unsupported N = " + std::to_string(dim));
  }
}

struct SphereRule {
  int dim = 1;
  std::vector<Point> nodes;
  std::vector<double> weights;

  std::size_t size() const { return nodes.size(); }
  double total_weight() const { return pairwise_sum(weights); }
};

/// N = 1: {+1, -1} with unit weights. N = 2: `order` equally spaced angles.
/// N = 3: Gauss-Legendre in cos(theta) (`order` nodes) times 2*order uniform azimuths.
inline SphereRule build_sphere_rule(int dim, int order) {
  if (order < 1) throw UsageError("sphere.order must be >= 1");
  SphereRule rule;
  rule.dim = dim;
  switch (dim) {
    case 1:
      rule.nodes = {Point{1.0}, Point{-1.0}};
      rule.weights = {1.0, 1.0};
      break;
    case 2: {
      const double w = 2.0 * std::numbers::pi / order;
      for (int k = 0; k < order; ++k) {
        const double th = 2.0 * std::numbers::pi * k / order;
        rule.nodes.push_back(Point{std::cos(th), std::sin(th)});
        rule.weights.push_back(w);
      }
      break;
    }
    case 3: {
      const Rule1D gl = gauss_legendre(order);
      const int nphi = 2 * order;
      const double wphi = 2.0 * std::numbers::pi / nphi;
      for (int i = 0; i < order; ++i) {
        const double z = gl.nodes[i];
        const double st = std::sqrt(std::max(0.0, 1.0 - z * z));
        for (int k = 0; k < nphi; ++k) {
          const double ph = 2.0 * std::numbers::pi * k / nphi;
          rule.nodes.push_back(Point{st * std::cos(ph), st * std::sin(ph), z});
          rule.weights.push_back(gl.weights[i] * wphi);
        }
      }
      break;
    }
    default:
      throw UsageError("sphere rules exist for N = 1, 2, 3 only; got N = " + std::to_string(dim));
  }
  return rule;
}

// ---------------------------------------------------------------------------
// Deterministic integration

namespace detail {

inline void require_finite(double v, std::size_t node, const Point& x, const char* where) {
  if (!std::isfinite(v)) {
    throw NumericDomainError(std::string("non-finite integrand in ") + where + " at node " +
                             std::to_string(node) + " x=" + to_string(x));
  }
}

}  // namespace detail

/// Weighted sum of f over the box nodes.
template <class F>
double integrate_box(F&& f, const BoxGrid& grid, Exec exec = {}) {
  const BoxNodes nodes = grid.nodes();
  auto partial = parallel_map<double>(
      nodes.points.size(),
      [&](std::size_t i) {
        const double v = f(nodes.points[i]);
        detail::require_finite(v, i, nodes.points[i], "integrate_box");
        return nodes.weights[i] * v;
      },
      exec);
  return pairwise_sum(partial);
}

/// Sum over x, sigma, h of w_x w_sigma w_h h^{N-1} g(x, h, sigma). The
/// Jacobian h^{N-1} is applied here; `g` must not include it.
template <class G>
double integrate_polar(G&& g, const BoxGrid& grid, const RadialGrid& radial, const SphereRule& sphere,
                       Exec exec = {}) {
  require_same_dim(grid.dim, sphere.dim, "integrate_polar");
  const BoxNodes nodes = grid.nodes();
  const std::vector<double> h = radial.nodes();
  std::vector<double> wh = radial.weights();
  for (std::size_t k = 0; k < h.size(); ++k) wh[k] *= std::pow(h[k], grid.dim - 1);
  auto partial = parallel_map<double>(
      nodes.points.size(),
      [&](std::size_t i) {
        const Point& x = nodes.points[i];
        double outer = 0.0;
        for (std::size_t j = 0; j < sphere.size(); ++j) {
          double inner = 0.0;
          for (std::size_t k = 0; k < h.size(); ++k) inner += wh[k] * g(x, h[k], sphere.nodes[j]);
          outer += sphere.weights[j] * inner;
        }
        detail::require_finite(outer, i, x, "integrate_polar");
        return nodes.weights[i] * outer;
      },
      exec);
  return pairwise_sum(partial);
}

// ---------------------------------------------------------------------------
// Counter-based Monte Carlo

/// Stateless sampler: the k-th uniform of sample i is a pure function of
/// (seed, stream_id, i, k), so substreams can be generated in any order.
struct McSampler {
  std::uint64_t seed = 42;
  std::uint64_t count = 2'000'000;
  std::uint64_t stream_id = 0;

  static constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t bits(std::uint64_t index, std::uint32_t coord) const {
    const std::uint64_t key = mix64(seed ^ mix64(stream_id + 0x9e3779b97f4a7c15ULL));
    const std::uint64_t counter = index * 8u + coord + 1u;
    return mix64(key + counter * 0x9e3779b97f4a7c15ULL);
  }

  /// Uniform in the open interval (0, 1).
  double uniform(std::uint64_t index, std::uint32_t coord) const {
    return (static_cast<double>(bits(index, coord) >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Uniform point in [-R, R]^N using coordinates 0..N-1.
  Point box_point(std::uint64_t index, int dim, double radius) const {
    Point x(dim);
    for (int d = 0; d < dim; ++d) x[d] = radius * (2.0 * uniform(index, static_cast<std::uint32_t>(d)) - 1.0);
    return x;
  }

  /// Uniform direction on S^{N-1} using coordinates 4 and 5.
  Point sphere_point(std::uint64_t index, int dim) const {
    const double a = uniform(index, 4), b = uniform(index, 5);
    switch (dim) {
      case 1: return Point{a < 0.5 ? 1.0 : -1.0};
      case 2: {
        const double th = 2.0 * std::numbers::pi * a;
        return Point{std::cos(th), std::sin(th)};
      }
      case 3: {
        const double z = 2.0 * a - 1.0;
        const double st = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double ph = 2.0 * std::numbers::pi * b;
        return Point{st * std::cos(ph), st * std::sin(ph), z};
      }
      default: throw UsageError("sphere sampling supports N = 1, 2, 3");
    }
  }
};

struct McEstimate {
  double mean = 0.0;
  double std_error = 0.0;
};

/// Monte Carlo over (x, sigma) with x uniform in the box and sigma uniform on
/// the sphere; `ray(x, sigma)` must return the full radial integral along the
/// ray (Jacobian included). Estimates the integral over box x sphere.
template <class Ray>
McEstimate integrate_rays_mc(Ray&& ray, const BoxGrid& grid, const McSampler& sampler, Exec exec = {}) {
  grid.validate();
  if (sampler.count < 2) throw UsageError("mc.count must be >= 2");
  const double measure = grid.volume() * sphere_area(grid.dim);
  auto values = parallel_map<double>(
      sampler.count,
      [&](std::size_t i) {
        const Point x = sampler.box_point(i, grid.dim, grid.radius);
        const Point s = sampler.sphere_point(i, grid.dim);
        const double v = measure * ray(x, s);
        detail::require_finite(v, i, x, "integrate_rays_mc");
        return v;
      },
      exec);
  const double n = static_cast<double>(values.size());
  McEstimate est;
  est.mean = pairwise_sum(values) / n;
  std::vector<double> sq(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) sq[i] = (values[i] - est.mean) * (values[i] - est.mean);
  est.std_error = std::sqrt(pairwise_sum(sq) / (n - 1.0) / n);
  return est;
}

}  // namespace magsob
