#include <gtest/gtest.h>

#include <cmath>
#include <thread>
#include <vector>

#include "gated/distributions.hpp"
#include "gated/random.hpp"

using namespace gated;

namespace {

ServiceDistribution uniform01() {
  ServiceLaw law;
  law.density = [](double y) { return (y >= 0.0 && y <= 1.0) ? 1.0 : 0.0; };
  law.cdf = [](double y) { return std::clamp(y, 0.0, 1.0); };
  law.tail = [](double y) { return 1.0 - std::clamp(y, 0.0, 1.0); };
  law.quantile = [](double u) { return u; };
  law.name = "uniform";
  return ServiceDistribution::custom(law);
}

/// Exponential law presented without its closed forms.
ServiceDistribution opaque_exponential(double mu) {
  ServiceLaw law;
  law.density = [mu](double y) { return y < 0.0 ? 0.0 : mu * std::exp(-mu * y); };
  law.cdf = [mu](double y) { return y <= 0.0 ? 0.0 : -std::expm1(-mu * y); };
  law.tail = [mu](double y) { return y <= 0.0 ? 1.0 : std::exp(-mu * y); };
  law.name = "opaque-exponential";
  return ServiceDistribution::custom(law);
}

/// Pareto-type tail (1 + y)^-3: moments of order >= 3 diverge.
ServiceDistribution lomax3() {
  ServiceLaw law;
  law.density = [](double y) { return y < 0.0 ? 0.0 : 3.0 / std::pow(1.0 + y, 4); };
  law.cdf = [](double y) { return y <= 0.0 ? 0.0 : 1.0 - std::pow(1.0 + y, -3); };
  law.tail = [](double y) { return y <= 0.0 ? 1.0 : std::pow(1.0 + y, -3); };
  law.name = "lomax3";
  return ServiceDistribution::custom(law);
}

}  // namespace

TEST(MinMoment, ExponentialClosedForm) {
  const auto d = ServiceDistribution::exponential(2.5);
  EXPECT_NEAR(min_moment(d, 2, 3), 2.0 / 56.25, 1e-15);
  EXPECT_NEAR(min_moment(d, 2, 3), 0.035556, 1e-6);
}

TEST(MinMoment, SingleSampleIsRawMoment) {
  const auto d = ServiceDistribution::exponential(2.5);
  EXPECT_NEAR(min_moment(d, 2, 1), 0.32, 1e-15);
  EXPECT_DOUBLE_EQ(raw_moment(d, 2), min_moment(d, 2, 1));
}

TEST(MinMoment, UniformMinOfTwoMatchesExactAndMonteCarlo) {
  const auto d = uniform01();
  EXPECT_NEAR(min_moment(d, 1, 2), 1.0 / 3.0, 1e-12);

  RandomStream rng(20240611, 7);
  constexpr int n = 1000000;
  double sum = 0.0;
  double sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double v = std::min(rng.uniform(), rng.uniform());
    sum += v;
    sq += v * v;
  }
  const double mean = sum / n;
  const double se = std::sqrt((sq / n - mean * mean) / n);
  EXPECT_LT(std::abs(mean - min_moment(d, 1, 2)), 3.0 * se);
}

TEST(MinMoment, InvalidIndicesThrow) {
  const auto d = ServiceDistribution::exponential(1.0);
  EXPECT_THROW(min_moment(d, 0, 1), domain_error);
  EXPECT_THROW(min_moment(d, 1, 0), domain_error);
}

TEST(MinMoment, HeavyTailDiverges) {
  const auto d = lomax3();
  EXPECT_NEAR(min_moment(d, 1, 1), 0.5, 1e-10);
  EXPECT_NEAR(min_moment(d, 2, 1), 1.0, 1e-10);
  EXPECT_THROW(min_moment(d, 3, 1), divergent_moment_error);
  EXPECT_THROW(min_moment(d, 5, 1), divergent_moment_error);
  // the minimum of two draws has tail (1+y)^-6, so its third moment is finite
  EXPECT_NO_THROW(min_moment(d, 3, 2));
}

TEST(MinMoment, StrictlyDecreasingInSampleCount) {
  for (const auto& d : {ServiceDistribution::exponential(2.5), uniform01(), opaque_exponential(0.7)}) {
    for (int m = 1; m <= 8; ++m) {
      for (int k = 1; k < 12; ++k) {
        EXPECT_LT(min_moment(d, m, k + 1), min_moment(d, m, k)) << d.name() << " m=" << m << " k=" << k;
        EXPECT_GT(min_moment(d, m, k + 1), 0.0);
      }
    }
  }
}

TEST(MinMoment, QuadratureMatchesClosedForm) {
  const auto d = ServiceDistribution::exponential(2.5);
  for (int m = 1; m <= 12; ++m) {
    for (int k = 1; k <= 12; ++k) {
      const double exact = min_moment(d, m, k);
      EXPECT_NEAR(min_moment_by_quadrature(d, m, k) / exact, 1.0, 1e-10) << m << "," << k;
    }
  }
}

TEST(MinMoment, HighOrdersStayAccurateInLogSpace) {
  const auto d = opaque_exponential(2.5);
  for (int m : {40, 120, 300}) {
    for (int k : {1, 7, 80}) {
      const double exact = detail::log_factorial(m) - m * std::log(k * 2.5);
      EXPECT_NEAR(log_min_moment(d, m, k), exact, 1e-11) << m << "," << k;
    }
  }
}

TEST(MinMoment, MemoizedAndThreadSafe) {
  const auto d = opaque_exponential(1.3);
  const double first = min_moment(d, 5, 4);
  EXPECT_EQ(d.cache().log_values.count({5, 4}), 1u);
  EXPECT_EQ(min_moment(d, 5, 4), first);

  const auto copy = d;
  std::vector<double> results(8);
  std::vector<std::thread> pool;
  for (int t = 0; t < 8; ++t) {
    pool.emplace_back([&, t] { results[static_cast<std::size_t>(t)] = min_moment(copy, 3 + t % 2, 6); });
  }
  for (auto& th : pool) th.join();
  for (int t = 0; t < 8; ++t) {
    EXPECT_EQ(results[static_cast<std::size_t>(t)], min_moment(d, 3 + t % 2, 6));
  }
}

TEST(Laplace, PoissonAtZeroIsOne) {
  EXPECT_EQ(laplace(ArrivalDistribution::poisson(1.0), 0.0), 1.0);
}

TEST(Laplace, PoissonLightTrafficValue) {
  EXPECT_NEAR(laplace(ArrivalDistribution::poisson(0.85), 1.0), 0.85 / 1.85, 1e-15);
  EXPECT_NEAR(laplace(ArrivalDistribution::poisson(0.85), 1.0), 0.45946, 1e-5);
}

TEST(Laplace, DeterministicNearHalf) {
  const double v = laplace(ArrivalDistribution::deterministic(1.0), 0.6932);
  EXPECT_NEAR(v, 0.5, 1e-4);
  EXPECT_DOUBLE_EQ(v, std::exp(-0.6932));
}

TEST(Laplace, NegativeArgumentThrows) {
  EXPECT_THROW(laplace(ArrivalDistribution::poisson(1.0), -0.1), domain_error);
}

TEST(Laplace, NonincreasingAndExactAtZero) {
  for (const auto& a : {ArrivalDistribution::poisson(0.4), ArrivalDistribution::deterministic(2.0)}) {
    EXPECT_EQ(laplace(a, 0.0), 1.0);
    double prev = 1.0;
    for (int i = 1; i <= 200; ++i) {
      const double v = laplace(a, 0.05 * i);
      EXPECT_LE(v, prev);
      prev = v;
    }
  }
}

TEST(Validate, ExponentialPasses) {
  const auto r = validate(ServiceDistribution::exponential(2.5));
  EXPECT_TRUE(r.ok);
  EXPECT_LT(r.normalization_defect, 1e-10);
  EXPECT_EQ(r.monotonicity_violations, 0);
  EXPECT_TRUE(r.moments_finite);
}

TEST(Validate, FlagsDensityDefect) {
  ServiceLaw law;
  law.density = [](double y) { return y < 0.0 ? 0.0 : 0.98 * 2.0 * std::exp(-2.0 * y); };
  law.cdf = [](double y) { return y <= 0.0 ? 0.0 : -std::expm1(-2.0 * y); };
  const auto r = validate(ServiceDistribution::custom(law));
  EXPECT_FALSE(r.ok);
  EXPECT_NEAR(r.normalization_defect, 0.02, 1e-9);
}

TEST(Validate, FlagsHeavyTailMoments) {
  const auto r = validate(lomax3());
  EXPECT_FALSE(r.moments_finite);
  EXPECT_FALSE(r.ok);
}

TEST(Validate, FlagsDegenerateDeterministicArrivals) {
  const auto r = validate(ArrivalDistribution::deterministic(0.0));
  EXPECT_FALSE(r.ok);
  ASSERT_FALSE(r.issues.empty());
  EXPECT_NE(r.issues.front().find("E[tau]"), std::string::npos);
}

TEST(Validate, PoissonAndDeterministicPass) {
  EXPECT_TRUE(validate(ArrivalDistribution::poisson(3.0)).ok);
  EXPECT_TRUE(validate(ArrivalDistribution::deterministic(0.5)).ok);
}

TEST(Validate, FlagsJensenViolation) {
  ArrivalLaw law;
  law.laplace = [](double s) { return 1.0 / (1.0 + s); };
  law.quantile = [](double u) { return -std::log1p(-u); };
  law.mean = 1.0;
  law.second_moment = 0.5;
  const auto r = validate(ArrivalDistribution::custom(law));
  EXPECT_FALSE(r.ok);
}

TEST(Distributions, RejectsBadParameters) {
  EXPECT_THROW(ServiceDistribution::exponential(0.0), domain_error);
  EXPECT_THROW(ServiceDistribution::exponential(-1.0), domain_error);
  EXPECT_THROW(ArrivalDistribution::poisson(0.0), domain_error);
  EXPECT_THROW(ArrivalDistribution::deterministic(-1.0), domain_error);
}

TEST(Distributions, ArrivalMoments) {
  const auto p = ArrivalDistribution::poisson(4.0);
  EXPECT_DOUBLE_EQ(p.mean(), 0.25);
  EXPECT_DOUBLE_EQ(p.second_moment(), 2.0 / 16.0);
  const auto c = ArrivalDistribution::deterministic(3.0);
  EXPECT_DOUBLE_EQ(c.second_moment(), c.mean() * c.mean());
}

TEST(Distributions, QuantileInvertsCdf) {
  const auto d = opaque_exponential(1.7);
  for (double u : {0.01, 0.3, 0.5, 0.9, 0.999}) EXPECT_NEAR(d.cdf(d.quantile(u)), u, 1e-12);
  const auto e = ServiceDistribution::exponential(1.7);
  EXPECT_NEAR(e.quantile(0.5), e.scale(), 1e-15);
}
