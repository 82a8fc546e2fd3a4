#pragma once

#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "gated/detail/numeric.hpp"
#include "gated/errors.hpp"

namespace gated::quad {

namespace detail {

/// Gauss 30 against Gauss 20; bisects while their gap exceeds the target.
template <class F>
double gauss_bisect(F& f, double a, double b, double rel_tol, double abs_floor, int depth) {
  const double fine = boost::math::quadrature::gauss<double, 30>::integrate(f, a, b);
  const double coarse = boost::math::quadrature::gauss<double, 20>::integrate(f, a, b);
  const double err = std::abs(fine - coarse);
  if (depth == 0 || err <= std::max(rel_tol * std::abs(fine), abs_floor) || !std::isfinite(err)) {
    return fine;
  }
  const double mid = 0.5 * (a + b);
  return gauss_bisect(f, a, mid, rel_tol, 0.5 * abs_floor, depth - 1) +
         gauss_bisect(f, mid, b, rel_tol, 0.5 * abs_floor, depth - 1);
}

}  // namespace detail

/// Adaptive Gauss-Legendre on a finite interval, relative tolerance per subinterval.
template <class F>
double integrate(F&& f, double a, double b, double rel_tol = 1e-14, double abs_floor = 0.0) {
  if (!(b > a)) return 0.0;
  return detail::gauss_bisect(f, a, b, rel_tol, abs_floor, 12);
}

struct HalfLineOptions {
  double abs_tol = 1e-15;
  double rel_tol = 1e-16;
  int max_doublings = 900;
  /// relative tolerance of the Gauss-Kronrod rule on each panel
  double panel_rel_tol = 1e-14;
};

/// Integrates f over [0, inf) by geometric panels around `scale`: 60 halvings below it,
/// then doubling panels upward until a panel contributes less than the tolerance.
/// Throws divergent_moment_error when the panels stop shrinking before overflow.
template <class F>
double integrate_half_line(F&& f, double scale, HalfLineOptions opt = {}) {
  gated::detail::CompensatedSum total;
  double lo = std::ldexp(scale, -60);
  total += integrate(f, 0.0, lo, opt.panel_rel_tol);
  for (int t = -60; t < 0; ++t) {
    const double hi = lo * 2.0;
    total += integrate(f, lo, hi, opt.panel_rel_tol);
    lo = hi;
  }
  for (int t = 0; t < opt.max_doublings; ++t) {
    const double hi = lo * 2.0;
    if (!std::isfinite(hi)) break;
    const double piece = integrate(f, lo, hi, opt.panel_rel_tol);
    total += piece;
    const double acc = total.value();
    if (!std::isfinite(acc)) break;
    if (t >= 4 && std::abs(piece) <= std::max(opt.abs_tol, opt.rel_tol * std::abs(acc))) {
      return acc;
    }
    lo = hi;
  }
  throw divergent_moment_error("half-line integral does not converge");
}

/// Composite Gauss-Legendre grid (8 nodes per panel) on [0, y_max].
struct PanelGrid {
  std::vector<double> nodes;
  std::vector<double> weights;

  static PanelGrid uniform(double y_max, int panels) {
    using rule = boost::math::quadrature::gauss<double, 8>;
    PanelGrid g;
    const double h = y_max / panels;
    const auto& abscissa = rule::abscissa();
    const auto& weight = rule::weights();
    g.nodes.reserve(static_cast<std::size_t>(panels) * 8);
    g.weights.reserve(static_cast<std::size_t>(panels) * 8);
    for (int p = 0; p < panels; ++p) {
      const double mid = (p + 0.5) * h;
      // boost stores the non-negative half of a symmetric rule
      for (std::size_t k = 0; k < abscissa.size(); ++k) {
        const double off = 0.5 * h * abscissa[k];
        const double w = 0.5 * h * weight[k];
        if (abscissa[k] == 0.0) {
          g.nodes.push_back(mid);
          g.weights.push_back(w);
        } else {
          g.nodes.push_back(mid - off);
          g.weights.push_back(w);
          g.nodes.push_back(mid + off);
          g.weights.push_back(w);
        }
      }
    }
    std::vector<std::size_t> order(g.nodes.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return g.nodes[a] < g.nodes[b]; });
    PanelGrid sorted;
    for (std::size_t i : order) {
      sorted.nodes.push_back(g.nodes[i]);
      sorted.weights.push_back(g.weights[i]);
    }
    return sorted;
  }

  std::size_t size() const noexcept { return nodes.size(); }
};

}  // namespace gated::quad
