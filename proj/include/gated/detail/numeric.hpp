#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace gated::detail {

/// Neumaier compensated accumulator.
class CompensatedSum {
 public:
  void add(double v) noexcept {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) {
      comp_ += (sum_ - t) + v;
    } else {
      comp_ += (v - t) + sum_;
    }
    sum_ = t;
  }
  CompensatedSum& operator+=(double v) noexcept {
    add(v);
    return *this;
  }
  double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

inline double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

inline double alternating_sign(int k) noexcept { return (k % 2 == 0) ? 1.0 : -1.0; }

inline double harmonic(int n) {
  CompensatedSum s;
  for (int j = 1; j <= n; ++j) s += 1.0 / j;
  return s.value();
}

inline double log_factorial(int n) { return std::lgamma(static_cast<double>(n) + 1.0); }

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

/// Batch-means estimate of a sample mean and its standard error.
inline MeanSe batch_means(std::span<const double> samples, int batches = 20) {
  MeanSe out;
  const std::size_t n = samples.size();
  if (n == 0) return out;
  CompensatedSum total;
  for (double v : samples) total += v;
  out.mean = total.value() / static_cast<double>(n);
  const std::size_t size = n / static_cast<std::size_t>(batches);
  if (size == 0) return out;
  std::vector<double> means(static_cast<std::size_t>(batches));
  for (int b = 0; b < batches; ++b) {
    CompensatedSum s;
    for (std::size_t i = 0; i < size; ++i) s += samples[b * size + i];
    means[static_cast<std::size_t>(b)] = s.value() / static_cast<double>(size);
  }
  double grand = 0.0;
  for (double m : means) grand += m;
  grand /= batches;
  double var = 0.0;
  for (double m : means) var += (m - grand) * (m - grand);
  var /= (batches - 1);
  out.se = std::sqrt(var / batches);
  return out;
}

}  // namespace gated::detail
