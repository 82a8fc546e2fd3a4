#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include "gated/errors.hpp"
#include "gated/quadrature.hpp"

namespace gated {

/// User-supplied service law. `density` and `cdf` are required; the rest is optional.
struct ServiceLaw {
  std::function<double(double)> density;
  std::function<double(double)> cdf;
  std::function<double(double)> tail;          // defaults to 1 - cdf
  std::function<double(double)> quantile;      // defaults to bisection on cdf
  std::function<double(int, int)> min_moment;  // closed form for E[min(s_1..s_k)^m]
  std::string name = "custom";
};

namespace detail {

struct MomentCache {
  std::mutex mutex;
  std::map<std::pair<int, int>, double> log_values;
};

}  // namespace detail

/// Service-time law. Immutable; copies share one internally synchronized moment cache.
class ServiceDistribution {
 public:
  static ServiceDistribution exponential(double mu) {
    if (!(mu > 0.0) || !std::isfinite(mu)) {
      throw domain_error("exponential service rate must be positive and finite");
    }
    ServiceDistribution d;
    d.exponential_ = true;
    d.mu_ = mu;
    d.law_.name = "exponential";
    d.scale_ = std::log(2.0) / mu;
    return d;
  }

  static ServiceDistribution custom(ServiceLaw law) {
    if (!law.density || !law.cdf) {
      throw domain_error("custom service law needs both a density and a cdf");
    }
    ServiceDistribution d;
    d.law_ = std::move(law);
    d.scale_ = d.find_scale();
    return d;
  }

  bool is_exponential() const noexcept { return exponential_; }
  bool has_closed_form_moments() const noexcept {
    return exponential_ || static_cast<bool>(law_.min_moment);
  }

  /// Rate of an exponential law; throws for other laws.
  double rate() const {
    if (!exponential_) throw domain_error("rate() is defined for exponential service only");
    return mu_;
  }

  double density(double y) const {
    if (y < 0.0) return 0.0;
    return exponential_ ? mu_ * std::exp(-mu_ * y) : law_.density(y);
  }
  double cdf(double y) const {
    if (y <= 0.0) return exponential_ ? 0.0 : law_.cdf(std::max(y, 0.0));
    return exponential_ ? -std::expm1(-mu_ * y) : law_.cdf(y);
  }
  double tail(double y) const {
    if (exponential_) return y <= 0.0 ? 1.0 : std::exp(-mu_ * y);
    return law_.tail ? law_.tail(y) : 1.0 - law_.cdf(y);
  }

  double quantile(double u) const {
    if (exponential_) return -std::log1p(-u) / mu_;
    if (law_.quantile) return law_.quantile(u);
    double lo = 0.0;
    double hi = scale_;
    for (int it = 0; it < 2000 && law_.cdf(hi) < u; ++it) hi *= 2.0;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      (law_.cdf(mid) < u ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  }

  /// Time scale of the law (its median when the cdf reaches 1/2).
  double scale() const noexcept { return scale_; }
  const std::string& name() const noexcept { return law_.name; }
  const ServiceLaw& law() const noexcept { return law_; }
  detail::MomentCache& cache() const { return *cache_; }

 private:
  ServiceDistribution() : cache_(std::make_shared<detail::MomentCache>()) {}

  double find_scale() const {
    double y = 1.0;
    if (tail(y) > 0.5) {
      for (int it = 0; it < 1000 && tail(y) > 0.5 && std::isfinite(2.0 * y); ++it) y *= 2.0;
      return tail(y) > 0.5 ? 1.0 : y;
    }
    for (int it = 0; it < 1000 && tail(0.5 * y) <= 0.5 && y > 1e-300; ++it) y *= 0.5;
    return y;
  }

  bool exponential_ = false;
  double mu_ = 0.0;
  ServiceLaw law_;
  double scale_ = 1.0;
  std::shared_ptr<detail::MomentCache> cache_;
};

/// User-supplied renewal interarrival law.
struct ArrivalLaw {
  std::function<double(double)> laplace;   // s -> E[exp(-s tau)]
  std::function<double(double)> quantile;  // u in (0,1) -> tau
  double mean = 0.0;
  double second_moment = 0.0;
  std::string name = "custom";
};

class ArrivalDistribution {
 public:
  enum class Kind { poisson, deterministic, custom };

  static ArrivalDistribution poisson(double lambda) {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) {
      throw domain_error("Poisson arrival rate must be positive and finite");
    }
    ArrivalDistribution a;
    a.kind_ = Kind::poisson;
    a.param_ = lambda;
    a.mean_ = 1.0 / lambda;
    a.second_ = 2.0 / (lambda * lambda);
    a.name_ = "poisson";
    return a;
  }

  /// Constant interarrival time c. c = 0 is accepted so validate() can flag it.
  static ArrivalDistribution deterministic(double c) {
    if (!(c >= 0.0) || !std::isfinite(c)) {
      throw domain_error("deterministic interarrival time must be finite and non-negative");
    }
    ArrivalDistribution a;
    a.kind_ = Kind::deterministic;
    a.param_ = c;
    a.mean_ = c;
    a.second_ = c * c;
    a.name_ = "deterministic";
    return a;
  }

  static ArrivalDistribution custom(ArrivalLaw law) {
    if (!law.laplace || !law.quantile) {
      throw domain_error("custom arrival law needs a Laplace transform and a quantile");
    }
    ArrivalDistribution a;
    a.kind_ = Kind::custom;
    a.mean_ = law.mean;
    a.second_ = law.second_moment;
    a.name_ = law.name;
    a.law_ = std::move(law);
    return a;
  }

  Kind kind() const noexcept { return kind_; }
  bool is_poisson() const noexcept { return kind_ == Kind::poisson; }
  /// Poisson rate; throws for other laws.
  double rate() const {
    if (kind_ != Kind::poisson) throw domain_error("rate() is defined for Poisson arrivals only");
    return param_;
  }
  /// Deterministic period; throws for other laws.
  double period() const {
    if (kind_ != Kind::deterministic) {
      throw domain_error("period() is defined for deterministic arrivals only");
    }
    return param_;
  }
  double mean() const noexcept { return mean_; }
  double second_moment() const noexcept { return second_; }
  const std::string& name() const noexcept { return name_; }

  /// Laplace-Stieltjes transform without the domain check.
  double transform(double s) const {
    switch (kind_) {
      case Kind::poisson:
        return param_ / (param_ + s);
      case Kind::deterministic:
        return std::exp(-s * param_);
      case Kind::custom:
        break;
    }
    return law_.laplace(s);
  }

  double sample(double u) const {
    switch (kind_) {
      case Kind::poisson:
        return -std::log1p(-u) / param_;
      case Kind::deterministic:
        return param_;
      case Kind::custom:
        break;
    }
    return law_.quantile(u);
  }

 private:
  Kind kind_ = Kind::poisson;
  double param_ = 1.0;
  double mean_ = 1.0;
  double second_ = 2.0;
  std::string name_;
  ArrivalLaw law_;
};

namespace detail {

/// log E[min(s_1..s_k)^m] by the tail identity m * int y^{m-1} G_bar(y)^k dy, integrated in
/// log-scaled form so large m does not overflow.
inline double log_min_moment_quadrature(const ServiceDistribution& d, int m, int k) {
  const auto log_integrand = [&](double y) {
    const double t = d.tail(y);
    if (!(t > 0.0)) return -std::numeric_limits<double>::infinity();
    const double lt = k * std::log(std::min(t, 1.0));
    if (m == 1) return lt;
    if (y <= 0.0) return -std::numeric_limits<double>::infinity();
    return std::log(static_cast<double>(m)) + (m - 1) * std::log(y) + lt;
  };

  // Scan the geometric grid base * 2^{t/4}. c = h + log y is the log of the integrand mass
  // per unit of log y: the integral converges only if c eventually falls away.
  const double base = d.scale();
  constexpr int lo_t = -240;
  constexpr int hi_t = 3200;
  constexpr double negligible = 50.0;
  std::vector<double> ys;
  std::vector<double> cs;
  double best_h = -std::numeric_limits<double>::infinity();
  double best_c = -std::numeric_limits<double>::infinity();
  int best_i = 0;
  bool decayed = false;
  for (int t = lo_t; t <= hi_t; ++t) {
    const double y = base * std::exp2(t / 4.0);
    if (!std::isfinite(y)) break;
    const double h = log_integrand(y);
    const double c = h + std::log(y);
    ys.push_back(y);
    cs.push_back(c);
    const int i = static_cast<int>(ys.size()) - 1;
    best_h = std::max(best_h, h);
    if (c > best_c) {
      best_c = c;
      best_i = i;
    }
    if (i > best_i + 40 && !(c >= best_c - 800.0)) {
      decayed = true;
      break;
    }
  }
  if (!std::isfinite(best_c)) throw divergent_moment_error("min-moment integrand vanishes");
  const auto diverges = [m] {
    return divergent_moment_error("moment of order " + std::to_string(m) + " is not finite");
  };
  if (!decayed) throw diverges();
  {
    // a tail that underflows while the mass is still significant hides divergence
    std::size_t last = cs.size() - 1;
    while (last > 0 && !std::isfinite(cs[last])) --last;
    if (cs[last] >= best_c - negligible && d.tail(ys[last]) < 1e-100) throw diverges();
  }
  const double best = best_h;
  const auto scaled = [&](double y) {
    const double h = log_integrand(y);
    return std::isfinite(h) ? std::exp(h - best) : 0.0;
  };
  using fine = boost::math::quadrature::gauss<double, 20>;
  using coarse = boost::math::quadrature::gauss<double, 10>;
  struct Panel {
    double a, b, value, err;
  };
  std::vector<Panel> panels;
  const auto add_panel = [&](double a, double b) {
    const double v = fine::integrate(scaled, a, b);
    panels.push_back({a, b, v, std::abs(v - coarse::integrate(scaled, a, b))});
  };
  std::size_t first = 0;
  while (first + 1 < ys.size() && !(std::max(cs[first], cs[first + 1]) >= best_c - negligible)) {
    ++first;
  }
  add_panel(0.0, ys[first]);
  for (std::size_t i = first; i + 1 < ys.size(); ++i) {
    if (std::max(cs[i], cs[i + 1]) >= best_c - negligible) add_panel(ys[i], ys[i + 1]);
  }
  // panels whose 10/20-point disagreement shows in the total (kinks) are split 64 ways
  CompensatedSum rough;
  for (const auto& p : panels) rough += p.value;
  const double target = 1e-15 * std::abs(rough.value());
  CompensatedSum total;
  for (const auto& p : panels) {
    if (p.err <= target) {
      total += p.value;
      continue;
    }
    constexpr int pieces = 64;
    const double h = (p.b - p.a) / pieces;
    for (int q = 0; q < pieces; ++q) total += fine::integrate(scaled, p.a + q * h, p.a + (q + 1) * h);
  }
  const double value = total.value();
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw divergent_moment_error("min-moment integral evaluated to a non-positive value");
  }
  return std::log(value) + best;
}

}  // namespace detail

/// log E[min(s_1..s_k)^m]; memoized per distribution.
inline double log_min_moment(const ServiceDistribution& d, int m, int k) {
  if (m < 1 || k < 1) throw domain_error("min_moment requires m >= 1 and k >= 1");
  if (d.is_exponential()) {
    return detail::log_factorial(m) - m * std::log(k * d.rate());
  }
  auto& cache = d.cache();
  {
    std::lock_guard lock(cache.mutex);
    if (auto it = cache.log_values.find({m, k}); it != cache.log_values.end()) return it->second;
  }
  double value = 0.0;
  if (d.law().min_moment) {
    value = std::log(d.law().min_moment(m, k));
  } else {
    value = detail::log_min_moment_quadrature(d, m, k);
  }
  std::lock_guard lock(cache.mutex);
  cache.log_values.emplace(std::pair{m, k}, value);
  return value;
}

/// gamma_{m,k} = E[min(s_1, ..., s_k)^m].
inline double min_moment(const ServiceDistribution& d, int m, int k) {
  if (m < 1 || k < 1) throw domain_error("min_moment requires m >= 1 and k >= 1");
  if (d.is_exponential()) {
    double num = 1.0;
    for (int j = 2; j <= m; ++j) num *= j;
    const double v = num / std::pow(k * d.rate(), m);
    if (std::isfinite(v) && v > 0.0) return v;
  }
  return std::exp(log_min_moment(d, m, k));
}

/// Raw moment E[s^m].
inline double raw_moment(const ServiceDistribution& d, int m) { return min_moment(d, m, 1); }

/// Forces the quadrature route even when a closed form exists (used to cross-check it).
inline double min_moment_by_quadrature(const ServiceDistribution& d, int m, int k) {
  if (m < 1 || k < 1) throw domain_error("min_moment requires m >= 1 and k >= 1");
  return std::exp(detail::log_min_moment_quadrature(d, m, k));
}

inline double laplace(const ArrivalDistribution& a, double s) {
  if (!(s >= 0.0)) throw domain_error("Laplace transform argument must be non-negative");
  if (s == 0.0) return 1.0;
  return a.transform(s);
}

struct DistributionReport {
  bool ok = true;
  double normalization_defect = 0.0;
  int monotonicity_violations = 0;
  bool moments_finite = true;
  std::vector<std::string> issues;

  void flag(std::string what) {
    ok = false;
    issues.push_back(std::move(what));
  }
};

inline DistributionReport validate(const ServiceDistribution& d) {
  DistributionReport r;
  const double scale = d.scale();
  try {
    const double mass =
        quad::integrate_half_line([&](double y) { return d.density(y); }, scale, {1e-15, 1e-15});
    r.normalization_defect = std::abs(1.0 - mass);
  } catch (const divergent_moment_error&) {
    r.normalization_defect = std::numeric_limits<double>::infinity();
  }
  if (r.normalization_defect > 1e-6) {
    r.flag("density does not integrate to 1 (defect " + std::to_string(r.normalization_defect) +
           ")");
  }
  if (std::abs(d.cdf(0.0)) > 1e-12) r.flag("G(0) != 0");
  double prev = d.cdf(0.0);
  bool negative_density = false;
  for (int t = -40; t <= 80; ++t) {
    const double y = scale * std::exp2(t / 4.0);
    const double c = d.cdf(y);
    if (c < prev - 1e-15) ++r.monotonicity_violations;
    if (d.density(y) < 0.0) negative_density = true;
    prev = c;
  }
  if (r.monotonicity_violations > 0) r.flag("G is not nondecreasing on the probe grid");
  if (negative_density) r.flag("density is negative on the probe grid");
  if (std::abs(1.0 - d.cdf(scale * std::exp2(20.0))) > 1e-6) r.flag("G(inf) != 1");
  for (int m = 1; m <= 4; ++m) {
    try {
      if (!std::isfinite(raw_moment(d, m))) r.moments_finite = false;
    } catch (const divergent_moment_error&) {
      r.moments_finite = false;
    }
  }
  if (!r.moments_finite) r.flag("raw moments up to order 4 are not all finite");
  return r;
}

inline DistributionReport validate(const ArrivalDistribution& a) {
  DistributionReport r;
  if (!(a.mean() > 0.0)) r.flag("mean interarrival time E[tau] must be positive");
  if (a.second_moment() < a.mean() * a.mean() * (1.0 - 1e-12)) {
    r.flag("E[tau^2] < (E[tau])^2 violates Jensen's inequality");
  }
  if (std::abs(a.transform(0.0) - 1.0) > 1e-12) r.flag("B(0) != 1");
  const double unit = a.mean() > 0.0 ? 1.0 / a.mean() : 1.0;
  double prev = 1.0;
  bool range = true;
  for (int t = -20; t <= 20; ++t) {
    const double s = unit * std::exp2(t / 2.0);
    const double v = a.transform(s);
    if (prev > 1e-300 && !(v < prev)) ++r.monotonicity_violations;
    if (prev > 1e-300 && !(v > 0.0 && v < 1.0)) range = false;
    prev = v;
  }
  if (r.monotonicity_violations > 0) r.flag("Laplace transform is not strictly decreasing");
  if (!range) r.flag("Laplace transform leaves (0,1) for s > 0");
  return r;
}

}  // namespace gated
