#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gated/detail/numeric.hpp"
#include "gated/distributions.hpp"
#include "gated/errors.hpp"
#include "gated/giqueue.hpp"
#include "gated/random.hpp"

namespace gated::sim {

inline constexpr int default_burn_in = 1000;
inline constexpr int batch_count = 20;

struct StageRecord {
  std::int64_t index = 0;
  /// stage length, including any waiting phase
  double Y = 0.0;
  /// customers served in the stage
  std::int64_t K = 1;
  bool waiting_phase = false;
  /// active phase: the longest of the K services
  double M = 0.0;
};

struct StageTrace {
  std::vector<StageRecord> records;
  std::uint64_t seed = 0;
  int burn_in = 0;
  /// "mg" or "gi"
  std::string model;
  std::string descriptor;

  /// records after the burn-in
  std::span<const StageRecord> stationary() const {
    const std::size_t skip = std::min(records.size(), static_cast<std::size_t>(burn_in));
    return std::span<const StageRecord>(records).subspan(skip);
  }
};

/// Substream ids: services and arrivals draw from independent streams.
enum : std::uint64_t { service_stream = 1, arrival_stream = 2 };

/// Gated M/G/inf: the gate admits everyone waiting; when the active phase sees no arrival
/// the stage is extended to the next arrival, which is served alone in the next stage.
inline StageTrace simulate_mg(double lambda, const ServiceDistribution& service,
                              std::int64_t n_stages, std::uint64_t seed,
                              int burn_in = default_burn_in) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw domain_error("lambda must be positive");
  if (n_stages < 1) throw domain_error("n_stages must be >= 1");
  if (burn_in < 0) throw domain_error("burn_in must be >= 0");
  StageTrace trace;
  trace.seed = seed;
  trace.burn_in = burn_in;
  trace.model = "mg";
  trace.descriptor = "lambda=" + std::to_string(lambda) + " service=" + service.name();
  const std::int64_t total = n_stages + burn_in;
  trace.records.reserve(static_cast<std::size_t>(total));
  RandomStream services(seed, service_stream);
  RandomStream arrivals(seed, arrival_stream);

  double start = 0.0;
  double next_arrival = arrivals.exponential(lambda);
  std::int64_t k = 1;
  for (std::int64_t n = 1; n <= total; ++n) {
    double m = 0.0;
    for (std::int64_t c = 0; c < k; ++c) m = std::max(m, service.quantile(services.uniform()));
    StageRecord r;
    r.index = n;
    r.K = k;
    r.M = m;
    std::int64_t admitted = 0;
    while (next_arrival <= start + m) {
      ++admitted;
      next_arrival += arrivals.exponential(lambda);
    }
    if (admitted > 0) {
      r.Y = m;
      k = admitted;
    } else {
      r.waiting_phase = true;
      r.Y = next_arrival - start;
      k = 1;
      next_arrival += arrivals.exponential(lambda);
    }
    start += r.Y;
    trace.records.push_back(r);
  }
  return trace;
}

/// Synchronized gated GI/M/inf: the stage ends at the first arrival epoch strictly after the
/// active phase, and that closing arrival is counted in the next stage.
inline StageTrace simulate_gi(const ArrivalDistribution& arrivals, double mu,
                              std::int64_t n_stages, std::uint64_t seed,
                              int burn_in = default_burn_in) {
  if (!(mu > 0.0) || !std::isfinite(mu)) throw domain_error("mu must be positive");
  if (!(arrivals.mean() > 0.0)) throw domain_error("mean interarrival time must be positive");
  if (n_stages < 1) throw domain_error("n_stages must be >= 1");
  if (burn_in < 0) throw domain_error("burn_in must be >= 0");
  StageTrace trace;
  trace.seed = seed;
  trace.burn_in = burn_in;
  trace.model = "gi";
  trace.descriptor = "arrivals=" + arrivals.name() + " mu=" + std::to_string(mu);
  const std::int64_t total = n_stages + burn_in;
  trace.records.reserve(static_cast<std::size_t>(total));
  RandomStream services(seed, service_stream);
  RandomStream gaps(seed, arrival_stream);

  std::int64_t k = 1;
  for (std::int64_t n = 0; n < total; ++n) {
    double m = 0.0;
    for (std::int64_t c = 0; c < k; ++c) m = std::max(m, services.exponential(mu));
    // the stage opens at a renewal epoch
    double epoch = arrivals.sample(gaps.uniform());
    std::int64_t inside = 0;
    while (epoch <= m) {
      ++inside;
      epoch += arrivals.sample(gaps.uniform());
    }
    StageRecord r;
    r.index = n;
    r.K = k;
    r.M = m;
    r.Y = epoch;
    trace.records.push_back(r);
    k = inside + 1;
  }
  return trace;
}

enum class Quantity { active, stage };

struct EstimateSe {
  double value = 0.0;
  double se = 0.0;
};

struct StageStats {
  std::size_t n = 0;
  Quantity quantity = Quantity::active;
  EstimateSe mean_length;
  EstimateSe mean_customers;
  double y_max = 0.0;
  double bin_width = 0.0;
  std::vector<double> density;
  std::vector<double> density_se;
  /// fraction of records with length > y_max
  double overflow_mass = 0.0;
  /// pmf of K, index k (index 0 is always 0)
  std::vector<double> pmf;
  std::vector<double> pmf_se;
};

namespace detail {

/// Batch-means standard errors of per-category frequencies from per-batch counts.
inline std::vector<double> frequency_se(const std::vector<std::vector<std::int64_t>>& counts,
                                        std::size_t batch_size, std::size_t categories,
                                        double scale) {
  std::vector<double> se(categories, 0.0);
  const auto batches = counts.size();
  if (batch_size == 0 || batches < 2) return se;
  for (std::size_t c = 0; c < categories; ++c) {
    double grand = 0.0;
    for (const auto& b : counts) grand += static_cast<double>(b[c]) / batch_size;
    grand /= static_cast<double>(batches);
    double var = 0.0;
    for (const auto& b : counts) {
      const double p = static_cast<double>(b[c]) / batch_size - grand;
      var += p * p;
    }
    var /= static_cast<double>(batches - 1);
    se[c] = scale * std::sqrt(var / static_cast<double>(batches));
  }
  return se;
}

}  // namespace detail

inline StageStats empirical_stats(const StageTrace& trace, int bins, double y_max,
                                  Quantity quantity = Quantity::active) {
  const auto recs = trace.stationary();
  if (recs.size() < 100) {
    throw insufficient_data_error("empirical_stats needs at least 100 records after burn-in (have " +
                                  std::to_string(recs.size()) + ")");
  }
  if (bins < 1 || !(y_max > 0.0)) throw domain_error("histogram needs bins >= 1 and y_max > 0");
  StageStats s;
  s.n = recs.size();
  s.quantity = quantity;
  s.y_max = y_max;
  s.bin_width = y_max / bins;
  const auto length = [quantity](const StageRecord& r) {
    return quantity == Quantity::active ? r.M : r.Y;
  };

  std::vector<double> lengths;
  std::vector<double> counts;
  lengths.reserve(s.n);
  counts.reserve(s.n);
  std::int64_t k_max = 1;
  for (const auto& r : recs) {
    lengths.push_back(length(r));
    counts.push_back(static_cast<double>(r.K));
    k_max = std::max(k_max, r.K);
  }
  const auto ml = gated::detail::batch_means(lengths, batch_count);
  const auto mk = gated::detail::batch_means(counts, batch_count);
  s.mean_length = {ml.mean, ml.se};
  s.mean_customers = {mk.mean, mk.se};

  const std::size_t batch_size = s.n / batch_count;
  const auto cells = static_cast<std::size_t>(bins) + 1;  // last cell is the overflow
  const auto kinds = static_cast<std::size_t>(k_max) + 1;
  std::vector<std::vector<std::int64_t>> hist(batch_count, std::vector<std::int64_t>(cells));
  std::vector<std::vector<std::int64_t>> pm(batch_count, std::vector<std::int64_t>(kinds));
  std::vector<std::int64_t> hist_all(cells);
  std::vector<std::int64_t> pm_all(kinds);
  for (std::size_t i = 0; i < s.n; ++i) {
    const double y = lengths[i];
    std::size_t cell = y > y_max ? static_cast<std::size_t>(bins)
                                 : std::min(static_cast<std::size_t>(y / s.bin_width),
                                            static_cast<std::size_t>(bins - 1));
    const auto kk = static_cast<std::size_t>(recs[i].K);
    ++hist_all[cell];
    ++pm_all[kk];
    if (batch_size > 0 && i < batch_size * batch_count) {
      ++hist[i / batch_size][cell];
      ++pm[i / batch_size][kk];
    }
  }
  std::vector<double> hv(cells);
  std::vector<double> pv(kinds);
  for (std::size_t c = 0; c < cells; ++c) {
    hv[c] = static_cast<double>(hist_all[c]) / static_cast<double>(s.n) / s.bin_width;
  }
  for (std::size_t k = 0; k < kinds; ++k) {
    pv[k] = static_cast<double>(pm_all[k]) / static_cast<double>(s.n);
  }
  auto hse = detail::frequency_se(hist, batch_size, cells, 1.0 / s.bin_width);
  s.pmf_se = detail::frequency_se(pm, batch_size, kinds, 1.0);
  s.overflow_mass = hv.back() * s.bin_width;
  hv.pop_back();
  hse.pop_back();
  s.density = std::move(hv);
  s.density_se = std::move(hse);
  s.pmf = std::move(pv);
  return s;
}

struct DriftState {
  std::int64_t state = 0;
  std::size_t visits = 0;
  EstimateSe next_mean;
  /// rho H_i + b0
  double bound = 0.0;
  /// 1 + rho H_i, exact for Poisson arrivals
  std::optional<double> exact;
};

struct DriftReport {
  double rho = 0.0;
  double b0 = 0.0;
  std::size_t min_visits = 0;
  std::vector<DriftState> states;
  /// states whose conditional mean exceeds the bound by more than 3 SE
  std::vector<std::int64_t> violations;
  /// Poisson only: states more than 3 SE from the exact conditional mean
  std::vector<std::int64_t> exact_deviations;
};

/// Empirical E[K_{n+1} | K_n = i] against the Lorden-type bound rho H_i + b0.
inline DriftReport drift_check(const StageTrace& trace, const gi::GiModel& model,
                               std::size_t min_visits = 500) {
  if (trace.model != "gi") throw domain_error("drift_check needs a trace from simulate_gi");
  const auto recs = trace.stationary();
  DriftReport rep;
  rep.rho = model.rho();
  rep.b0 = model.b0();
  rep.min_visits = min_visits;
  std::vector<std::vector<double>> next;
  for (std::size_t n = 0; n + 1 < recs.size(); ++n) {
    const auto i = static_cast<std::size_t>(recs[n].K);
    if (next.size() <= i) next.resize(i + 1);
    next[i].push_back(static_cast<double>(recs[n + 1].K));
  }
  const bool poisson = model.arrivals().is_poisson();
  for (std::size_t i = 1; i < next.size(); ++i) {
    if (next[i].size() < min_visits) continue;
    DriftState st;
    st.state = static_cast<std::int64_t>(i);
    st.visits = next[i].size();
    const auto bm = gated::detail::batch_means(next[i], batch_count);
    st.next_mean = {bm.mean, bm.se};
    const double h = gated::detail::harmonic(static_cast<int>(i));
    st.bound = rep.rho * h + rep.b0;
    if (st.next_mean.value > st.bound + 3.0 * bm.se) rep.violations.push_back(st.state);
    if (poisson) {
      st.exact = 1.0 + rep.rho * h;
      if (std::abs(st.next_mean.value - *st.exact) > 3.0 * bm.se) {
        rep.exact_deviations.push_back(st.state);
      }
    }
    rep.states.push_back(st);
  }
  if (rep.states.empty()) {
    throw insufficient_data_error("no state reached " + std::to_string(min_visits) + " visits");
  }
  return rep;
}

}  // namespace gated::sim
