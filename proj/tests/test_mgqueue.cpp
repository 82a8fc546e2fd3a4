#include <gtest/gtest.h>

#include <cmath>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "gated/linsys.hpp"
#include "gated/mgqueue.hpp"
#include "gated/simulator.hpp"

using namespace gated;
using mg::MgModel;

namespace {

ServiceDistribution opaque_exponential(double mu) {
  ServiceLaw law;
  law.density = [mu](double y) { return y < 0.0 ? 0.0 : mu * std::exp(-mu * y); };
  law.cdf = [mu](double y) { return y <= 0.0 ? 0.0 : -std::expm1(-mu * y); };
  law.tail = [mu](double y) { return y <= 0.0 ? 1.0 : std::exp(-mu * y); };
  law.quantile = [mu](double u) { return -std::log1p(-u) / mu; };
  law.name = "opaque-exponential";
  return ServiceDistribution::custom(law);
}

double half_line(const std::function<double(double)>& f) {
  boost::math::quadrature::exp_sinh<double> integrator;
  return integrator.integrate(f, std::sqrt(std::numeric_limits<double>::epsilon()));
}

double integral(const std::function<double(double)>& f, double a, double b) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 12, 1e-13);
}

const mg::MgMomentSolution& base_solution() {
  static const auto sol = mg::solve_stage_moments(MgModel::exponential(1.0, 2.5), 10, 1e-10);
  return sol;
}

const sim::StageStats& base_simulation() {
  static const auto stats = [] {
    const auto trace = sim::simulate_mg(1.0, ServiceDistribution::exponential(2.5), 100000, 4101);
    return sim::empirical_stats(trace, 64, 3.0);
  }();
  return stats;
}

}  // namespace

TEST(Kernel, ZeroStartIsServiceDensity) {
  const auto m = MgModel::exponential(1.0, 2.5);
  for (double y : {0.0, 0.3, 1.0, 4.0}) EXPECT_NEAR(mg::kernel_density(m, 0.0, y), 2.5 * std::exp(-2.5 * y), 1e-15);
}

TEST(Kernel, HandValue) {
  const auto m = MgModel::exponential(1.0, 2.5);
  const double tail = std::exp(-1.25);
  const double expected = (std::exp(-tail) + std::exp(-1.0)) * 2.5 * tail;
  EXPECT_NEAR(mg::kernel_density(m, 1.0, 0.5), expected, 1e-15);
  EXPECT_NEAR(mg::kernel_density(m, 1.0, 0.5), 0.8014, 1e-4);
}

TEST(Kernel, RowsAreDensities) {
  const auto m = MgModel::exponential(1.0, 2.5);
  for (double x : {0.0, 0.1, 1.0, 5.0, 20.0}) {
    EXPECT_NEAR(half_line([&](double y) { return mg::kernel_density(m, x, y); }), 1.0, 1e-8) << x;
  }
}

TEST(Kernel, RejectsNegativeArguments) {
  const auto m = MgModel::exponential(1.0, 2.5);
  EXPECT_THROW(mg::kernel_density(m, -1.0, 0.5), domain_error);
  EXPECT_THROW(mg::kernel_density(m, 1.0, -0.5), domain_error);
}

TEST(Oracle, RefusesHeavyTraffic) {
  EXPECT_THROW(mg::transformed_moment_oracle(1.0), out_of_regime_error);
  EXPECT_THROW(mg::transformed_moment_oracle(1.2), out_of_regime_error);
  EXPECT_THROW(mg::solve_stage_moments(MgModel::exponential(3.0, 2.5), 10, 1e-10), out_of_regime_error);
}

TEST(Oracle, RowTwoDiagonal) {
  EXPECT_NEAR(mg::transformed_moment_oracle(0.4).a(2, 2), 2.6, 1e-14);
}

TEST(Oracle, SmallTrafficRowsReduceToPowers) {
  const double rho = 1e-3;
  const auto o = mg::transformed_moment_oracle(rho);
  for (int i = 2; i <= 6; ++i) {
    EXPECT_NEAR(o.a(i, i) / std::pow(rho, -0.5 * i), 1.0, 1e-5);
    EXPECT_NEAR(o.b(i) / std::pow(rho, 0.5 * i), 1.0, 1e-12);
  }
}

TEST(StageMoments, EmptySystemLimit) {
  const double mu = 2.5;
  const auto sol = mg::solve_stage_moments(MgModel::exponential(1e-6, mu), 10, 1e-12);
  ASSERT_TRUE(sol.converged);
  EXPECT_NEAR(sol.beta1, 1.0 / mu, 1e-5);
  for (int k = 2; k <= 8; ++k) {
    const double exact = std::exp(std::lgamma(k + 1.0)) / std::pow(mu, k);
    EXPECT_NEAR(sol.beta_k(k) / exact, 1.0, 1e-5) << k;
  }
  EXPECT_NEAR(mg::mean_customers_per_stage(sol), 1.0, 1e-5);
}

TEST(StageMoments, BaseParametersSolve) {
  const auto& sol = base_solution();
  EXPECT_TRUE(sol.converged);
  EXPECT_FALSE(sol.heuristic);
  EXPECT_GE(sol.moments(), 11);
  EXPECT_GT(sol.beta1, 0.4);
  EXPECT_LT(sol.alternating_sum_defect, 1e-10);
  for (int k = 2; k <= 11; ++k) EXPECT_GT(sol.beta_k(k), 0.0);
  EXPECT_NEAR(mg::mean_customers_per_stage(sol), 1.0 + sol.s, 0.0);
}

TEST(StageMoments, RejectsBadArguments) {
  const auto m = MgModel::exponential(1.0, 2.5);
  EXPECT_THROW(mg::solve_stage_moments(m, 3, 1e-10), std::invalid_argument);
  EXPECT_THROW(mg::solve_stage_moments(m, 10, 0.0), std::invalid_argument);
}

TEST(StageMoments, FixedOrderSolvesAtRequestedSize) {
  const auto sol = mg::solve_stage_moments(MgModel::exponential(1.0, 2.5), 10, 1e-10, {0, true});
  EXPECT_EQ(sol.convergence.n_used, 11);
  EXPECT_EQ(sol.moments(), 10);
}

TEST(StageMoments, TwoAssemblyPathsAgree) {
  for (double lambda : {0.25, 0.625, 1.0}) {
    const auto a = mg::solve_stage_moments(MgModel::exponential(lambda, 2.5), 10, 1e-12);
    const auto b = mg::solve_stage_moments(MgModel(lambda, opaque_exponential(2.5)), 10, 1e-12);
    ASSERT_TRUE(a.exponential_path);
    ASSERT_FALSE(b.exponential_path);
    ASSERT_TRUE(b.converged);
    EXPECT_NEAR(b.beta1 / a.beta1, 1.0, 1e-6) << lambda;
    for (int k = 2; k <= 11; ++k) EXPECT_NEAR(b.beta_k(k) / a.beta_k(k), 1.0, 1e-6) << lambda << " k=" << k;
    EXPECT_NEAR(b.s, a.s, 1e-8);
  }
}

TEST(StageMoments, MeanLengthGrowsWithTraffic) {
  double prev = 0.4;
  for (double rho : {0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7}) {
    const auto sol = mg::solve_stage_moments(MgModel::exponential(rho * 2.5, 2.5), 10, 1e-10);
    EXPECT_GT(sol.beta1, prev) << rho;
    prev = sol.beta1;
  }
}

TEST(StageMoments, HeuristicOutsideCertifiedRegion) {
  const auto sol = mg::solve_stage_moments(MgModel::exponential(0.85 * 2.5, 2.5), 10, 1e-10);
  EXPECT_TRUE(sol.heuristic);
}

TEST(Density, EmptySystemIsServiceDensity) {
  const auto m = MgModel::exponential(1e-9, 2.5);
  const auto sol = mg::solve_stage_moments(m, 10, 1e-12);
  for (double y : {0.0, 0.2, 1.0, 3.0}) {
    EXPECT_NEAR(mg::stationary_density(sol, m, y), 2.5 * std::exp(-2.5 * y), 1e-7);
  }
}

TEST(Density, IntegratesToOneAndStaysNonnegative) {
  const auto m = MgModel::exponential(1.0, 2.5);
  const auto& sol = base_solution();
  EXPECT_NEAR(half_line([&](double y) { return mg::stationary_density(sol, m, y); }), 1.0, 1e-6);
  for (int p = 0; p < 2048; ++p) EXPECT_GE(mg::stationary_density(sol, m, 8.0 * p / 2047.0), -1e-10);
}

TEST(Density, MeanMatchesBetaOne) {
  const auto m = MgModel::exponential(1.0, 2.5);
  const auto& sol = base_solution();
  EXPECT_NEAR(half_line([&](double y) { return y * mg::stationary_density(sol, m, y); }), sol.beta1, 1e-8);
}

TEST(Density, RefusesNegativeArgumentAndUnconverged) {
  const auto m = MgModel::exponential(1.0, 2.5);
  EXPECT_THROW(mg::stationary_density(base_solution(), m, -0.1), domain_error);
  auto bad = base_solution();
  bad.converged = false;
  EXPECT_THROW(mg::stationary_density(bad, m, 0.1), unconverged_error);
  EXPECT_THROW(mg::mean_customers_per_stage(bad), unconverged_error);
}

TEST(Density, GeneralPathIntegratesToOne) {
  const auto m = MgModel(1.0, opaque_exponential(2.5));
  const auto sol = mg::solve_stage_moments(m, 10, 1e-10);
  const double mass = integral([&](double y) { return mg::stationary_density(sol, m, y); }, 0.0, 20.0);
  EXPECT_NEAR(mass, 1.0, 1e-6);
}

TEST(Density, AgreesWithFixedPointGrid) {
  const auto m = MgModel::exponential(1.0, 2.5);
  const auto fp = mg::fixed_point_density(m, {0.0, 256}, 1e-12, 2000);
  ASSERT_TRUE(fp.converged);
  EXPECT_EQ(fp.nodes().size(), 2048u);
  EXPECT_LT(fp.max_mass_defect, 1e-9);
  double sup = 0.0;
  for (std::size_t i = 0; i < fp.nodes().size(); ++i) {
    sup = std::max(sup, std::abs(fp.values()[i] - mg::stationary_density(base_solution(), m, fp.nodes()[i])));
  }
  EXPECT_LE(sup, 1e-3);
  // the Nystrom interpolant reproduces the grid values
  EXPECT_NEAR(fp(fp.nodes()[10]), fp.values()[10], 1e-9);
  EXPECT_NEAR(fp.mass(), 1.0, 1e-12);
}

TEST(FixedPoint, EmptySystemStopsAfterOneSweep) {
  const auto m = MgModel::exponential(1e-12, 2.5);
  const auto fp = mg::fixed_point_density(m, {0.0, 64}, 1e-8, 50);
  EXPECT_TRUE(fp.converged);
  EXPECT_EQ(fp.iterations, 1);
  for (std::size_t i = 0; i < fp.nodes().size(); i += 37) {
    EXPECT_NEAR(fp.values()[i], 2.5 * std::exp(-2.5 * fp.nodes()[i]), 1e-9);
  }
}

TEST(FixedPoint, ReportsUnconvergedWithLastChange) {
  const auto fp = mg::fixed_point_density(MgModel::exponential(1.0, 2.5), {0.0, 32}, 1e-15, 2);
  EXPECT_FALSE(fp.converged);
  EXPECT_EQ(fp.iterations, 2);
  EXPECT_GT(fp.last_change, 1e-15);
}

TEST(FixedPoint, RefusesShortGrid) {
  EXPECT_THROW(mg::fixed_point_density(MgModel::exponential(1.0, 2.5), {2.0, 32}, 1e-10, 10), domain_error);
}

TEST(StageCount, EmptySystemServesOne) {
  const auto m = MgModel::exponential(1e-9, 2.5);
  const auto sol = mg::solve_stage_moments(m, 10, 1e-12);
  EXPECT_NEAR(mg::stage_count_pmf(sol, m, 1), 1.0, 1e-7);
  EXPECT_THROW(mg::stage_count_pmf(sol, m, 0), domain_error);
}

TEST(StageCount, SumsToOneAndMatchesMean) {
  const auto m = MgModel::exponential(1.0, 2.5);
  const auto& sol = base_solution();
  double total = 0.0;
  double mean = 0.0;
  for (int k = 1; k <= 40; ++k) {
    const double p = mg::stage_count_pmf(sol, m, k);
    EXPECT_GE(p, -1e-12);
    total += p;
    mean += k * p;
  }
  EXPECT_NEAR(total, 1.0, 1e-6);
  EXPECT_NEAR(mean, mg::mean_customers_per_stage(sol), 1e-6);
}

TEST(StageCount, ConditionalLawSumsToOne) {
  for (double y : {0.0, 0.3, 2.0}) {
    double total = 0.0;
    for (int k = 1; k <= 60; ++k) total += mg::customers_given_length(1.0, k, y);
    EXPECT_NEAR(total, 1.0, 1e-14) << y;
  }
}

TEST(Simulation, MeanActivePhaseMatchesBetaOne) {
  const auto& s = base_simulation();
  EXPECT_LT(std::abs(s.mean_length.value - base_solution().beta1), 3.0 * s.mean_length.se);
}

TEST(Simulation, MeanCustomersMatches) {
  const auto& s = base_simulation();
  EXPECT_LT(std::abs(s.mean_customers.value - mg::mean_customers_per_stage(base_solution())),
            3.0 * s.mean_customers.se);
}

TEST(Simulation, TwoCustomerFrequencyMatches) {
  const auto& s = base_simulation();
  const double p2 = mg::stage_count_pmf(base_solution(), MgModel::exponential(1.0, 2.5), 2);
  EXPECT_LT(std::abs(s.pmf[2] - p2), 3.0 * s.pmf_se[2]);
}

TEST(Simulation, HistogramMatchesDensity) {
  const auto& s = base_simulation();
  const auto m = MgModel::exponential(1.0, 2.5);
  double sup = 0.0;
  for (std::size_t b = 0; b < s.density.size(); ++b) {
    const double lo = b * s.bin_width;
    const double f = integral([&](double y) { return mg::stationary_density(base_solution(), m, y); }, lo,
                              lo + s.bin_width) /
                     s.bin_width;
    sup = std::max(sup, std::abs(f - s.density[b]));
  }
  EXPECT_LE(sup, 0.05);
}
