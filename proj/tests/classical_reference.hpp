#pragma once

#include <cmath>

#include "magsob/functionals.hpp"

namespace magsob::reference {

// Non-magnetic reference implementations for real fields u with real
// gradient du, written directly against the node sets.
using RealFn = double (*)(const Point&);

inline double classical_bbm(RealFn u, Point (*du)(const Point&), const Mollifier& rho, double p, const BoxGrid& grid,
                            const RadialGrid& radial, const SphereRule& sphere) {
  RadialGrid r = radial;
  if (rho.support_cutoff && *rho.support_cutoff < r.h_max) r.h_max = *rho.support_cutoff;
  const auto h = r.nodes();
  const auto wh = r.weights();
  const double m0 = rho.mass_below(r.h_min);
  const auto xs = grid.nodes();
  const int n = grid.dim;
  double total = 0.0;
  for (std::size_t i = 0; i < xs.points.size(); ++i) {
    const Point& x = xs.points[i];
    const double ux = u(x);
    const Point g = du(x);
    double over_sigma = 0.0;
    for (std::size_t j = 0; j < sphere.size(); ++j) {
      const Point& s = sphere.nodes[j];
      double ray = m0 * std::pow(std::abs(dot(g, s)), p);
      for (std::size_t k = 0; k < h.size(); ++k) {
        const double d = std::abs(u(x + h[k] * s) - ux);
        ray += wh[k] * std::pow(h[k], n - 1) * rho(h[k]) * std::pow(d, p) / std::pow(h[k], p);
      }
      over_sigma += sphere.weights[j] * ray;
    }
    total += xs.weights[i] * over_sigma;
  }
  return total;
}

inline double classical_jdelta(RealFn u, double delta, double p, const BoxGrid& grid, const RadialGrid& radial,
                               const SphereRule& sphere) {
  const auto h = radial.nodes();
  const auto xs = grid.nodes();
  const double dp = std::pow(delta, p);
  auto W = [&](double a, double b) { return dp * (std::pow(a, -p) - std::pow(b, -p)) / p; };
  double total = 0.0;
  for (std::size_t i = 0; i < xs.points.size(); ++i) {
    const Point& x = xs.points[i];
    const double ux = u(x);
    double over_sigma = 0.0;
    for (std::size_t j = 0; j < sphere.size(); ++j) {
      double a = 0.0, fa = -delta, ray = 0.0;
      for (double b : h) {
        const double fb = std::abs(u(x + b * sphere.nodes[j]) - ux) - delta;
        if (fa > 0 && fb > 0) ray += W(a, b);
        else if (fa <= 0 && fb > 0) ray += W(a + (b - a) * (-fa) / (fb - fa), b);
        else if (fa > 0 && fb <= 0) ray += W(a, a + (b - a) * fa / (fa - fb));
        a = b;
        fa = fb;
      }
      if (fa > 0) ray += dp * std::pow(a, -p) / p;
      over_sigma += sphere.weights[j] * ray;
    }
    total += xs.weights[i] * over_sigma;
  }
  return total;
}

inline double real_gaussian(const Point& x) { return std::exp(-0.5 * dot(x, x)); }
inline Point real_gaussian_grad(const Point& x) { return (-real_gaussian(x)) * x; }
inline double real_bump(const Point& x) {
  const double q = dot(x, x);
  return q >= 1.0 ? 0.0 : std::exp(1.0 - 1.0 / (1.0 - q));
}
inline Point real_bump_grad(const Point& x) {
  const double q = dot(x, x);
  if (q >= 1.0) return Point(x.dim());
  return (-real_bump(x) * 2.0 / ((1.0 - q) * (1.0 - q))) * x;
}

}  // namespace magsob::reference
