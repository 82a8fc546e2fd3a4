#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gated/detail/numeric.hpp"
#include "gated/distributions.hpp"
#include "gated/errors.hpp"
#include "gated/linsys.hpp"
#include "gated/quadrature.hpp"

namespace gated::mg {

/// Gated M/G/inf queue: Poisson(lambda) arrivals, i.i.d. service times.
class MgModel {
 public:
  MgModel(double lambda, ServiceDistribution service)
      : lambda_(lambda), service_(std::move(service)) {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) {
      throw domain_error("arrival rate lambda must be positive and finite");
    }
  }

  static MgModel exponential(double lambda, double mu) {
    return MgModel(lambda, ServiceDistribution::exponential(mu));
  }

  double lambda() const noexcept { return lambda_; }
  const ServiceDistribution& service() const noexcept { return service_; }
  bool exponential_service() const noexcept { return service_.is_exponential(); }

  /// lambda * E[service]; equals lambda / mu for exponential service.
  double rho() const {
    return exponential_service() ? lambda_ / service_.rate() : lambda_ * raw_moment(service_, 1);
  }

 private:
  double lambda_;
  ServiceDistribution service_;
};

/// Transition density q(x, y) of consecutive active-phase lengths.
inline double kernel_density(const MgModel& m, double x, double y) {
  if (x < 0.0 || y < 0.0) throw domain_error("kernel_density requires x >= 0 and y >= 0");
  const double lx = m.lambda() * x;
  return (lx * std::exp(-lx * m.service().tail(y)) + std::exp(-lx)) * m.service().density(y);
}

/// Transformed exponential-service system in unknowns (s, y_2, y_3, ...); rows i >= 2 are
/// scaled by rho^{i/2}. Supplies zeta-type tail bounds and the closed-form dominance test.
inline linsys::CoefficientOracle transformed_moment_oracle(double rho) {
  if (!(rho > 0.0) || !(rho < 1.0)) {
    throw out_of_regime_error("exponential moment system requires 0 < rho < 1 (rho = " +
                              std::to_string(rho) + ")");
  }
  const double half_log = 0.5 * std::log(rho);
  linsys::CoefficientOracle o;
  o.name = "mg-transformed";
  o.a = [rho, half_log](int i, int j) {
    if (i == 1) {
      if (j == 1) return (1.0 + rho - rho * rho) / (1.0 + rho);
      return detail::alternating_sign(j) * rho * rho / (j * (j + rho));
    }
    if (j == 1) return -std::exp(i * half_log);
    if (j == i) {
      return std::exp(-i * half_log) +
             detail::alternating_sign(i) * std::exp(i * (half_log - std::log(i)));
    }
    return detail::alternating_sign(j) * std::exp(i * (half_log - std::log(j)));
  };
  o.b = [rho, half_log](int i) {
    if (i == 1) return rho * rho / (1.0 + rho);
    return std::exp(i * half_log);
  };
  o.tail_row_bound = [rho, half_log](int i, int cutoff) {
    if (i == 1) return rho * rho / cutoff;
    return std::exp(i * half_log - (i - 1) * std::log(cutoff)) / (i - 1);
  };
  constexpr double zeta2 = std::numbers::pi * std::numbers::pi / 6.0;
  const bool row1 = (1.0 + rho - rho * rho) / (1.0 + rho) > (zeta2 - 1.0) * rho * rho;
  const bool rows = 1.0 / (rho * rho) > zeta2;
  o.certified = row1 && rows;
  o.certificate = "(1+rho-rho^2)/(1+rho) > (pi^2/6-1) rho^2 and rho^-2 > pi^2/6 (rho < 0.779)";
  return o;
}

/// General-service moment system in unknowns y_j = lambda^j beta_j / j!, j >= 2: row i
/// (i >= 2) divided by gamma_{i,1}. Index c of the oracle maps to moment order c + 1.
inline linsys::CoefficientOracle general_moment_oracle(const MgModel& m) {
  linsys::CoefficientOracle o;
  o.name = "mg-general";
  const double log_lambda = std::log(m.lambda());
  const ServiceDistribution service = m.service();
  o.a = [service, log_lambda](int r, int c) {
    const int i = r + 1;
    const int j = c + 1;
    const double lg1 = log_min_moment(service, i, 1);
    const double lgj = log_min_moment(service, i, j);
    double v = detail::alternating_sign(j) * std::expm1(lgj - lg1);
    if (r == c) v += std::exp(detail::log_factorial(i) - i * log_lambda - lg1);
    return v;
  };
  o.b = [](int) { return 1.0; };
  return o;
}

/// Moment system used for analysis: transformed form for exponential service, general form
/// otherwise.
inline linsys::CoefficientOracle moment_oracle(const MgModel& m) {
  if (m.exponential_service()) return transformed_moment_oracle(m.rho());
  return general_moment_oracle(m);
}

struct StageMomentOptions {
  /// Largest truncation dimension the ladder may reach (0 selects a default).
  int max_dimension = 0;
  /// Solve exactly at the requested order; the next rung only feeds the gap diagnostics.
  bool fixed_order = false;
};

struct MgMomentSolution {
  int order = 0;
  double lambda = 0.0;
  double rho = 0.0;
  bool exponential_path = false;
  /// y_k = lambda^k beta_k / k! for k = 2 .. ; element k - 2
  std::vector<double> scaled;
  /// beta_k for k = 2 .. ; element k - 2
  std::vector<double> beta;
  double s = 0.0;
  double beta1 = 0.0;
  /// |s - sum (-1)^k y_k| on the transformed path, 0 otherwise
  double alternating_sum_defect = 0.0;
  bool converged = false;
  /// outside the proven region: dominance not satisfied or not certified
  bool heuristic = false;
  linsys::DominanceReport dominance;
  linsys::ConvergedSolution convergence;

  int moments() const noexcept { return static_cast<int>(scaled.size()); }
  double y(int k) const { return scaled.at(static_cast<std::size_t>(k - 2)); }
  double beta_k(int k) const {
    if (k == 1) return beta1;
    return beta.at(static_cast<std::size_t>(k - 2));
  }
};

inline MgMomentSolution solve_stage_moments(const MgModel& m, int order, double tol,
                                            StageMomentOptions opts = {}) {
  if (order < 4) throw std::invalid_argument("moment order must be >= 4");
  if (!(tol > 0.0)) throw std::invalid_argument("tolerance must be positive");
  MgMomentSolution out;
  out.order = order;
  out.lambda = m.lambda();
  out.exponential_path = m.exponential_service();
  out.rho = m.rho();
  const auto oracle = moment_oracle(m);  // throws out_of_regime_error for rho >= 1
  const int dim = out.exponential_path ? order + 1 : order;
  int max_dim = opts.max_dimension;
  if (max_dim <= 0) max_dim = out.exponential_path ? std::max(2 * dim, 512) : std::max(2 * dim, 128);
  out.convergence = opts.fixed_order ? linsys::solve_fixed(oracle, dim, tol)
                                     : linsys::converge(oracle, dim, max_dim, tol);
  out.converged = out.convergence.converged;
  const auto& x = out.convergence.x;
  const int n = static_cast<int>(x.size());
  const double log_lambda = std::log(m.lambda());

  gated::detail::CompensatedSum alt;
  if (out.exponential_path) {
    out.s = x[0];
    for (int k = 2; k <= n; ++k) out.scaled.push_back(x[static_cast<std::size_t>(k - 1)]);
  } else {
    for (int c = 1; c <= n; ++c) out.scaled.push_back(x[static_cast<std::size_t>(c - 1)]);
  }
  for (int k = 2; k < 2 + static_cast<int>(out.scaled.size()); ++k) {
    const double yk = out.y(k);
    alt += gated::detail::alternating_sign(k) * yk;
    out.beta.push_back(yk * std::exp(gated::detail::log_factorial(k) - k * log_lambda));
  }
  if (out.exponential_path) {
    out.alternating_sum_defect = std::abs(out.s - alt.value());
    const double mu = m.service().rate();
    gated::detail::CompensatedSum b1;
    b1 += 1.0;
    for (int k = 2; k < 2 + out.moments(); ++k) {
      b1 += gated::detail::alternating_sign(k) * out.y(k) * (k - 1.0) / k;
    }
    out.beta1 = b1.value() / mu;
  } else {
    out.s = alt.value();
    const double g11 = min_moment(m.service(), 1, 1);
    gated::detail::CompensatedSum b1;
    b1 += g11;
    for (int k = 2; k < 2 + out.moments(); ++k) {
      b1 += gated::detail::alternating_sign(k) * out.y(k) * (g11 - min_moment(m.service(), 1, k));
    }
    out.beta1 = b1.value();
  }
  const int used = out.convergence.n_used;
  out.dominance = linsys::dominance_report(oracle, used, 4 * used);
  out.heuristic = !(out.dominance.satisfied && out.dominance.certified.value_or(false));
  return out;
}

namespace detail {

inline void require_converged(const MgMomentSolution& sol) {
  if (!sol.converged) throw unconverged_error("moment solution did not converge");
}

}  // namespace detail

/// Stationary active-phase density from the moment series.
inline double stationary_density(const MgMomentSolution& sol, const MgModel& m, double y) {
  if (y < 0.0) throw domain_error("stationary_density requires y >= 0");
  detail::require_converged(sol);
  const auto& service = m.service();
  gated::detail::CompensatedSum acc;
  if (sol.exponential_path) {
    const double mu = service.rate();
    const double g = mu * std::exp(-mu * y);
    acc += g;
    for (int k = 2; k < 2 + sol.moments(); ++k) {
      const double yk = sol.y(k);
      if (std::abs(yk) * (1.0 + k) < 1e-12) break;
      acc += gated::detail::alternating_sign(k) * yk * (g - k * mu * std::exp(-k * mu * y));
    }
    return acc.value();
  }
  const double g = service.density(y);
  const double tail = service.tail(y);
  acc += 1.0;
  for (int k = 2; k < 2 + sol.moments(); ++k) {
    const double yk = sol.y(k);
    if (std::abs(yk) * (1.0 + k) < 1e-12) break;
    acc += gated::detail::alternating_sign(k) * yk * (1.0 - k * std::pow(tail, k - 1));
  }
  return g * acc.value();
}

/// E[K] = 1 + s.
inline double mean_customers_per_stage(const MgMomentSolution& sol) {
  detail::require_converged(sol);
  return 1.0 + sol.s;
}

/// P(K = k | active phase of length y) for the next stage.
inline double customers_given_length(double lambda, int k, double y) {
  const double ly = lambda * y;
  if (k == 1) return (1.0 + ly) * std::exp(-ly);
  if (ly <= 0.0) return 0.0;
  return std::exp(k * std::log(ly) - ly - gated::detail::log_factorial(k));
}

inline double stage_count_pmf(const MgMomentSolution& sol, const MgModel& m, int k) {
  if (k < 1) throw domain_error("customers per stage start at 1");
  detail::require_converged(sol);
  const auto integrand = [&](double y) {
    return customers_given_length(m.lambda(), k, y) * stationary_density(sol, m, y);
  };
  return quad::integrate_half_line(integrand, m.service().scale(), {1e-18, 1e-15, 900, 1e-11});
}

struct GridSpec {
  /// 0 selects the smallest power-of-two multiple of the service scale with tail < 1e-10
  double y_max = 0.0;
  int panels = 256;  // 8 Gauss-Legendre nodes per panel
};

/// Grid solution of the invariant integral equation, with Nystrom interpolation.
class FixedPointDensity {
 public:
  FixedPointDensity(MgModel model, quad::PanelGrid grid)
      : model_(std::move(model)), grid_(std::move(grid)) {}

  const std::vector<double>& nodes() const noexcept { return grid_.nodes; }
  const std::vector<double>& weights() const noexcept { return grid_.weights; }
  const std::vector<double>& values() const noexcept { return values_; }

  /// f(y) = sum_j w_j f(x_j) q(x_j, y)
  double operator()(double y) const {
    gated::detail::CompensatedSum s;
    for (std::size_t j = 0; j < values_.size(); ++j) {
      s += grid_.weights[j] * values_[j] * kernel_density(model_, grid_.nodes[j], y);
    }
    return s.value();
  }

  double mass() const {
    gated::detail::CompensatedSum s;
    for (std::size_t j = 0; j < values_.size(); ++j) s += grid_.weights[j] * values_[j];
    return s.value();
  }

  int iterations = 0;
  double last_change = 0.0;
  bool converged = false;
  /// largest |mass - 1| of a sweep before renormalization
  double max_mass_defect = 0.0;
  double y_max = 0.0;

 private:
  friend FixedPointDensity fixed_point_density(const MgModel&, GridSpec, double, int);
  MgModel model_;
  quad::PanelGrid grid_;
  std::vector<double> values_;
};

inline FixedPointDensity fixed_point_density(const MgModel& m, GridSpec spec, double tol,
                                             int max_iter) {
  const auto& service = m.service();
  double y_max = spec.y_max;
  if (y_max <= 0.0) {
    y_max = service.scale();
    for (int it = 0; it < 200 && !(service.tail(y_max) < 1e-10); ++it) y_max *= 2.0;
  }
  if (!(service.tail(y_max) < 1e-10)) {
    throw domain_error("fixed-point grid must cover [0, Y] with G_bar(Y) < 1e-10");
  }
  if (spec.panels < 1) throw std::invalid_argument("grid needs at least one panel");
  FixedPointDensity fp(m, quad::PanelGrid::uniform(y_max, spec.panels));
  fp.y_max = y_max;
  const auto& x = fp.grid_.nodes;
  const auto& w = fp.grid_.weights;
  const std::size_t n = x.size();

  std::vector<double> kernel(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) kernel[i * n + j] = w[j] * kernel_density(m, x[j], x[i]);
  }
  std::vector<double> f(n);
  for (std::size_t i = 0; i < n; ++i) f[i] = service.density(x[i]);
  std::vector<double> next(n);
  for (int it = 1; it <= max_iter; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      const double* row = &kernel[i * n];
      for (std::size_t j = 0; j < n; ++j) s += row[j] * f[j];
      next[i] = s;
    }
    gated::detail::CompensatedSum mass;
    for (std::size_t i = 0; i < n; ++i) mass += w[i] * next[i];
    fp.max_mass_defect = std::max(fp.max_mass_defect, std::abs(mass.value() - 1.0));
    double change = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      next[i] /= mass.value();
      change = std::max(change, std::abs(next[i] - f[i]));
    }
    f.swap(next);
    fp.iterations = it;
    fp.last_change = change;
    if (change < tol) {
      fp.converged = true;
      break;
    }
  }
  fp.values_ = std::move(f);
  return fp;
}

}  // namespace gated::mg
