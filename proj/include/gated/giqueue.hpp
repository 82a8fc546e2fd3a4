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

namespace gated::gi {

/// Synchronized gated GI/M/inf queue: renewal arrivals, exponential(mu) services.
class GiModel {
 public:
  GiModel(ArrivalDistribution arrivals, double mu) : arrivals_(std::move(arrivals)), mu_(mu) {
    if (!(mu > 0.0) || !std::isfinite(mu)) throw domain_error("service rate mu must be positive");
    if (!(arrivals_.mean() > 0.0)) throw domain_error("mean interarrival time must be positive");
  }

  /// Poisson arrivals with rate rho * mu.
  static GiModel poisson(double rho, double mu = 1.0) {
    return GiModel(ArrivalDistribution::poisson(rho * mu), mu);
  }

  const ArrivalDistribution& arrivals() const noexcept { return arrivals_; }
  double mu() const noexcept { return mu_; }
  double rho() const noexcept { return 1.0 / (mu_ * arrivals_.mean()); }
  /// Lorden constant E[tau^2] / (E tau)^2
  double b0() const noexcept {
    return arrivals_.second_moment() / (arrivals_.mean() * arrivals_.mean());
  }

  /// B^(k mu)
  double bhat(int k) const { return arrivals_.transform(k * mu_); }

  double log_bhat(int k) const {
    switch (arrivals_.kind()) {
      case ArrivalDistribution::Kind::poisson: {
        const double l = arrivals_.rate();
        return std::log(l) - std::log(l + k * mu_);
      }
      case ArrivalDistribution::Kind::deterministic:
        return -k * mu_ * arrivals_.period();
      case ArrivalDistribution::Kind::custom:
        break;
    }
    return std::log(bhat(k));
  }

  /// log(1 - B^(k mu))
  double log_one_minus_bhat(int k) const {
    switch (arrivals_.kind()) {
      case ArrivalDistribution::Kind::poisson: {
        const double l = arrivals_.rate();
        return std::log(k * mu_) - std::log(l + k * mu_);
      }
      case ArrivalDistribution::Kind::deterministic:
        return std::log(-std::expm1(-k * mu_ * arrivals_.period()));
      case ArrivalDistribution::Kind::custom:
        break;
    }
    return std::log1p(-bhat(k));
  }

 private:
  ArrivalDistribution arrivals_;
  double mu_;
};

struct LightTraffic {
  bool ok = false;
  /// 1/2 - B^(mu)
  double margin = 0.0;
};

inline LightTraffic light_traffic_ok(const GiModel& m) {
  const double b1 = m.bhat(1);
  return {b1 < 0.5, 0.5 - b1};
}

inline constexpr int max_transition_index = 60;

/// P(K_{n+1} = j | K_n = i).
inline double transition_probability(const GiModel& m, int i, int j) {
  if (i < 1 || j < 1) throw domain_error("transition indices start at 1");
  if (i > max_transition_index) {
    throw domain_error("transition_probability: i = " + std::to_string(i) +
                       " loses all precision to binomial cancellation; simulate instead");
  }
  std::vector<double> terms;
  terms.reserve(static_cast<std::size_t>(i));
  const double log_fi = gated::detail::log_factorial(i);
  for (int k = 1; k <= i; ++k) {
    const double log_c = log_fi - gated::detail::log_factorial(k) - gated::detail::log_factorial(i - k);
    const double mag = std::exp(log_c + (j - 1) * m.log_bhat(k) + m.log_one_minus_bhat(k));
    terms.push_back(-gated::detail::alternating_sign(k) * mag);
  }
  return gated::detail::pairwise_sum(terms);
}

/// Poisson closed form of the w-system (w_i = i x_i); rows i >= 2 scaled by rho^{-i/2}.
inline linsys::CoefficientOracle poisson_factorial_oracle(double rho) {
  if (!(rho > 0.0)) throw domain_error("rho must be positive");
  const double log_rho = std::log(rho);
  linsys::CoefficientOracle o;
  o.name = "gi-poisson";
  o.a = [rho, log_rho](int i, int j) {
    if (i == 1) {
      if (j == 1) return -(1.0 - rho);
      return -gated::detail::alternating_sign(j) * rho / (static_cast<double>(j) * j);
    }
    const double off = -gated::detail::alternating_sign(j) * (1.0 + rho / j) *
                       std::exp((0.5 * i - 1.0) * log_rho - i * std::log(j));
    if (j == i) return off - std::exp(-0.5 * i * log_rho) / i;
    return off;
  };
  o.b = [](int i) { return i == 1 ? -1.0 : 0.0; };
  o.tail_row_bound = [rho, log_rho](int i, int cutoff) {
    if (i == 1) return rho / cutoff;
    return (1.0 + rho / cutoff) *
           std::exp((0.5 * i - 1.0) * log_rho - (i - 1) * std::log(cutoff)) / (i - 1);
  };
  constexpr double zeta2 = std::numbers::pi * std::numbers::pi / 6.0;
  constexpr double zeta3 = 1.2020569031595942;
  o.certified = rho < 1.0 / zeta2 && 2.0 * rho * (zeta2 + rho * zeta3) < 1.0;
  o.certificate = "rho < 6/pi^2 and 2 rho (zeta(2) + rho zeta(3)) < 1 (rho < 0.256)";
  return o;
}

/// w-system for a general arrival transform: row 1 is the phi(0) = 0 condition, rows m >= 2
/// are scaled by r^{-m/2} with r = b_1 / (1 - b_1). Reduces to the Poisson form above.
inline linsys::CoefficientOracle general_factorial_oracle(const GiModel& model) {
  const double b1 = model.bhat(1);
  const double log_r = model.log_bhat(1) - model.log_one_minus_bhat(1);
  linsys::CoefficientOracle o;
  o.name = "gi-general";
  o.a = [model, b1, log_r](int m, int k) {
    if (m == 1) {
      if (k == 1) return -(1.0 - 2.0 * b1) / (1.0 - b1);
      return -gated::detail::alternating_sign(k) *
             std::exp(model.log_bhat(k) - model.log_one_minus_bhat(k) - std::log(k));
    }
    const double log_a = (m - 1) * model.log_bhat(k) - m * model.log_one_minus_bhat(k);
    const double off = -gated::detail::alternating_sign(k) * std::exp(log_a - std::log(k) - 0.5 * m * log_r);
    if (k == m) return off - std::exp(-0.5 * m * log_r) / m;
    return off;
  };
  o.b = [](int i) { return i == 1 ? -1.0 : 0.0; };
  return o;
}

/// Analysis oracle: closed form for Poisson arrivals, general assembly otherwise. Refuses
/// B^(mu) >= 1/2 unless `allow_out_of_regime`.
inline linsys::CoefficientOracle factorial_oracle(const GiModel& m, bool allow_out_of_regime = false) {
  const auto lt = light_traffic_ok(m);
  if (!lt.ok && !allow_out_of_regime) {
    throw out_of_regime_error("light-traffic condition B(mu) < 1/2 fails (B(mu) = " +
                              std::to_string(m.bhat(1)) + ")");
  }
  if (m.arrivals().is_poisson()) return poisson_factorial_oracle(m.rho());
  return general_factorial_oracle(m);
}

struct FactorialOptions {
  int max_dimension = 0;
  bool fixed_order = false;
  bool allow_out_of_regime = false;
};

struct GiMomentSolution {
  int order = 0;
  double rho = 0.0;
  /// x_m = phi^(m)(1) / m!, element m - 1
  std::vector<double> x;
  /// w_m = m x_m
  std::vector<double> w;
  /// |sum (-1)^m x_m + 1|
  double normalization_defect = 0.0;
  int nonpositive = 0;
  bool converged = false;
  bool heuristic = false;
  linsys::DominanceReport dominance;
  linsys::ConvergedSolution convergence;

  int size() const noexcept { return static_cast<int>(x.size()); }
  /// E[K] = x_1
  double mean() const { return x.at(0); }
};

inline GiMomentSolution solve_factorial_moments(const GiModel& m, int order, double tol,
                                                FactorialOptions opts = {}) {
  if (order < 4) throw std::invalid_argument("moment order must be >= 4");
  if (!(tol > 0.0)) throw std::invalid_argument("tolerance must be positive");
  const auto oracle = factorial_oracle(m, opts.allow_out_of_regime);
  GiMomentSolution out;
  out.order = order;
  out.rho = m.rho();
  int max_dim = opts.max_dimension;
  if (max_dim <= 0) max_dim = std::max(2 * order, 512);
  out.convergence = opts.fixed_order ? linsys::solve_fixed(oracle, order, tol)
                                     : linsys::converge(oracle, order, max_dim, tol);
  out.converged = out.convergence.converged;
  out.w = out.convergence.x;
  gated::detail::CompensatedSum alt;
  for (std::size_t i = 0; i < out.w.size(); ++i) {
    const int k = static_cast<int>(i) + 1;
    const double xk = out.w[i] / k;
    out.x.push_back(xk);
    if (!(xk > 0.0)) ++out.nonpositive;
    alt += gated::detail::alternating_sign(k) * xk;
  }
  out.normalization_defect = std::abs(alt.value() + 1.0);
  const int used = out.convergence.n_used;
  out.dominance = linsys::dominance_report(oracle, used, 4 * used);
  out.heuristic = !(out.dominance.satisfied && out.dominance.certified.value_or(false));
  return out;
}

namespace detail {

inline void require_converged(const GiMomentSolution& sol) {
  if (!sol.converged) throw unconverged_error("factorial-moment solution did not converge");
}

/// z sum_k x_k (-1)^{k-1} (1 - b_k) / (1 - b_k z), unchecked; valid for |z| < 1 / b_1.
inline double pgf_series(const GiMomentSolution& sol, const GiModel& m, double z) {
  gated::detail::CompensatedSum s;
  for (int k = 1; k <= sol.size(); ++k) {
    const double b = m.bhat(k);
    s += -gated::detail::alternating_sign(k) * sol.x[static_cast<std::size_t>(k - 1)] * (1.0 - b) / (1.0 - b * z);
  }
  return z * s.value();
}

}  // namespace detail

inline constexpr double pmf_clamp_threshold = 1e-10;

/// pi_i from the alternating geometric mixture; tiny negatives in [-1e-10, 0) are returned as
/// 0 and counted in `clamped`.
inline double stationary_pmf(const GiMomentSolution& sol, const GiModel& m, int i,
                             int* clamped = nullptr) {
  if (i < 1) throw domain_error("stationary_pmf: states start at 1");
  detail::require_converged(sol);
  gated::detail::CompensatedSum s;
  for (int k = 1; k <= sol.size(); ++k) {
    const double xk = sol.x[static_cast<std::size_t>(k - 1)];
    const double mag = std::exp((i - 1) * m.log_bhat(k) + m.log_one_minus_bhat(k));
    if (std::abs(xk) * mag < 1e-14) break;
    s += -gated::detail::alternating_sign(k) * xk * mag;
  }
  const double v = s.value();
  if (v < 0.0 && v >= -pmf_clamp_threshold) {
    if (clamped) ++*clamped;
    return 0.0;
  }
  return v;
}

struct PmfTable {
  std::vector<double> values;  // element i - 1
  int clamped = 0;
  double mass = 0.0;
};

inline PmfTable stationary_pmf_table(const GiMomentSolution& sol, const GiModel& m, int i_max) {
  if (i_max < 1) throw domain_error("pmf table needs i_max >= 1");
  PmfTable t;
  gated::detail::CompensatedSum mass;
  for (int i = 1; i <= i_max; ++i) {
    t.values.push_back(stationary_pmf(sol, m, i, &t.clamped));
    mass += t.values.back();
  }
  t.mass = mass.value();
  return t;
}

inline double pgf(const GiMomentSolution& sol, const GiModel& m, double z) {
  if (!(z >= 0.0 && z <= 1.0)) throw domain_error("pgf requires z in [0, 1]");
  detail::require_converged(sol);
  return detail::pgf_series(sol, m, z);
}

}  // namespace gated::gi
