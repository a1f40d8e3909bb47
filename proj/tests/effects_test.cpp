#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "gmlm/effects.hpp"
#include "gmlm/error.hpp"
#include "support/oracles.hpp"

using namespace gmlm;

namespace {

std::vector<double> lognormal_values(std::size_t n, double mu, double sd,
                                     std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::lognormal_distribution<double> d(mu, sd);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

// The average-effect formula written out term by term.
double ate_reference(double a, double s, double md, double m0, double pd,
                     double p0) {
  const double sd = pd / (pd + p0);
  const double s0 = p0 / (pd + p0);
  const double treated_part = md - (md - a) / s;
  const double control_part = a + (s - 1.0) * m0;
  return sd * treated_part + s0 * control_part;
}

}  // namespace

TEST(AverageEffect, UnitScaleCollapsesToTheShift) {
  for (double a : {-2.0, 0.0, 0.7}) {
    EXPECT_NEAR(ate_from_fit(a, 1.0, 3.3, -1.2, 0.3, 0.7), a, 1e-15);
    EXPECT_NEAR(ate_from_fit(a, 1.0, 10.0, 5.0, 120, 80), a, 1e-14);
  }
  EXPECT_EQ(ate_from_fit(0.0, 1.0, 4.0, 2.0, 0.5, 0.5), 0.0);
}

TEST(AverageEffect, DirectEvaluation) {
  EXPECT_NEAR(ate_from_fit(1.0, 2.0, 3.0, 1.0, 0.5, 0.5), 2.0, 1e-15);
  // Counts and fractions give the same shares.
  EXPECT_NEAR(ate_from_fit(0.4, 1.3, 2.0, 1.5, 300, 100),
              ate_from_fit(0.4, 1.3, 2.0, 1.5, 0.75, 0.25), 1e-15);
  EXPECT_NEAR(ate_from_fit(0.4, 1.3, 2.0, 1.5, 300, 100),
              ate_reference(0.4, 1.3, 2.0, 1.5, 300, 100), 1e-14);
  EXPECT_THROW(ate_from_fit(0.0, 0.0, 1.0, 1.0, 1, 1), Error);
  EXPECT_THROW(ate_from_fit(0.0, -1.0, 1.0, 1.0, 1, 1), Error);
}

TEST(AverageEffect, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  std::uniform_real_distribution<double> pos(0.2, 3.0);
  for (int k = 0; k < 100; ++k) {
    const double a = u(rng), s = pos(rng), md = u(rng), m0 = u(rng);
    const double pd = pos(rng), p0 = pos(rng);
    const auto g = ate_gradient(a, s, md, m0, pd, p0);
    const std::array<double, 4> fd{
        oracle::central_difference(
            [&](double x) { return ate_reference(x, s, md, m0, pd, p0); }, a),
        oracle::central_difference(
            [&](double x) { return ate_reference(a, x, md, m0, pd, p0); }, s),
        oracle::central_difference(
            [&](double x) { return ate_reference(a, s, x, m0, pd, p0); }, md),
        oracle::central_difference(
            [&](double x) { return ate_reference(a, s, md, x, pd, p0); }, m0)};
    for (int i = 0; i < 4; ++i) {
      EXPECT_NEAR(g[i], fd[i], 1e-6 * std::max(1.0, std::abs(fd[i])))
          << "point " << k << " component " << i;
    }
  }
}

TEST(Dispersion, Values) {
  EXPECT_EQ(dispersion_from_fit(1.0), 0.0);
  EXPECT_NEAR(dispersion_from_fit(0.8), -0.2, 1e-15);
  const auto g = dispersion_gradient();
  EXPECT_EQ(g, (std::array<double, 4>{0.0, 1.0, 0.0, 0.0}));
}

TEST(DeltaSe, QuadraticForm) {
  Eigen::Matrix4d C = Eigen::Matrix4d::Zero();
  EXPECT_EQ(delta_se(dispersion_gradient(), C), 0.0);
  C.diagonal() << 0.5, 0.09, 1.0, 2.0;
  EXPECT_NEAR(delta_se(dispersion_gradient(), C), 0.3, 1e-15);
  const std::array<double, 4> g{1.0, 2.0, 0.0, -1.0};
  C(0, 1) = C(1, 0) = 0.05;
  const double ref = std::sqrt(0.5 + 4 * 0.09 + 2.0 + 2 * 2 * 0.05);
  EXPECT_NEAR(delta_se(g, C), ref, 1e-14);
  bool clamped = false;
  Eigen::Matrix4d negative = -Eigen::Matrix4d::Identity() * 1e-20;
  EXPECT_EQ(delta_se(g, negative, &clamped), 0.0);
  EXPECT_TRUE(clamped);
}

TEST(AggregateStrata, Arithmetic) {
  const std::vector<StratumEffect> one{{1.7, 0.3}};
  const std::vector<double> w1{1.0};
  const auto a1 = aggregate_strata(one, w1);
  EXPECT_DOUBLE_EQ(a1.value, 1.7);
  EXPECT_DOUBLE_EQ(a1.se, 0.3);

  const std::vector<StratumEffect> equal{{0.4, 1.0}, {0.4, 2.0}};
  for (double w : {0.1, 0.5, 0.9}) {
    const std::vector<double> ws{w, 1.0 - w};
    EXPECT_NEAR(aggregate_strata(equal, ws).value, 0.4, 1e-15);
  }

  const std::vector<StratumEffect> two{{1.0, 1.0}, {3.0, 1.0}};
  const std::vector<double> w2{0.25, 0.75};
  const auto a2 = aggregate_strata(two, w2);
  EXPECT_NEAR(a2.value, 2.5, 1e-15);
  EXPECT_NEAR(a2.se, std::sqrt(0.0625 + 0.5625), 1e-15);
  EXPECT_NEAR(a2.se, 0.7906, 5e-5);

  const std::vector<double> bad{0.5, 0.6};
  EXPECT_THROW(aggregate_strata(two, bad), Error);
  EXPECT_THROW(aggregate_strata(two, w1), Error);
}

TEST(Nonparametric, Definitions) {
  const Sample t({1.0, 2.0, 3.0, 6.0});
  const Sample c({0.0, 2.0, 4.0});
  const auto np = nonparametric_effect(t, c);
  EXPECT_DOUBLE_EQ(np.diff_means, 3.0 - 2.0);
  EXPECT_NEAR(np.diff_means_se, std::sqrt(t.variance() / 4 + c.variance() / 3),
              1e-15);
  EXPECT_NEAR(np.sd_ratio_minus_one, t.stddev() / c.stddev() - 1.0, 1e-15);
  EXPECT_GE(np.sd_ratio_se, 0.0);
  const auto big = nonparametric_effect(Sample(lognormal_values(500, 0, 1, 7)),
                                        Sample(lognormal_values(400, 0, 1, 8)));
  EXPECT_GT(big.sd_ratio_se, 0.0);
  EXPECT_TRUE(std::isnan(nonparametric_effect(t, Sample({1.0, 1.0})).sd_ratio_se));
}

TEST(EstimateEffect, IdenticalArmsGiveNoEffect) {
  const auto v = lognormal_values(300, 0.0, 1.0, 1);
  const EffectEstimate e =
      estimate_effect(Sample(v), Sample(v), {8, {}, {200, 3, 0}});
  EXPECT_EQ(e.alpha, 0.0);
  EXPECT_EQ(e.sigma, 1.0);
  EXPECT_NEAR(e.delta, 0.0, 1e-15);
  EXPECT_EQ(e.psi, 0.0);
  EXPECT_EQ(e.df, 6u);
  EXPECT_EQ(e.j_pvalue, 1.0);
  EXPECT_GT(e.delta_se, 0.0);
}

TEST(EstimateEffect, RecoversAPlantedLocationScaleEffect) {
  const auto c = lognormal_values(2000, 0.0, 0.6, 2);
  auto y0 = lognormal_values(2000, 0.0, 0.6, 3);
  for (double& y : y0) y = 0.3 + 1.2 * y;
  const EffectEstimate e =
      estimate_effect(Sample(y0), Sample(c), {8, {}, {300, 3, 0}});
  EXPECT_NEAR(e.alpha, 0.3, 4.0 * e.alpha_se);
  EXPECT_NEAR(e.sigma, 1.2, 4.0 * e.sigma_se);
  EXPECT_NEAR(e.psi, e.sigma - 1.0, 1e-15);
  EXPECT_NEAR(e.psi_se, e.sigma_se, 1e-15);
  EXPECT_NEAR(e.delta,
              ate_from_fit(e.alpha, e.sigma, e.treated_mean, e.control_mean,
                           2000, 2000),
              1e-15);
  const double true_effect = 0.3 + 0.2 * std::exp(0.18);
  EXPECT_NEAR(e.delta, true_effect, 4.0 * e.delta_se);
  EXPECT_EQ(e.R_used, 8u);
  EXPECT_GE(e.j_pvalue, 0.0);
  EXPECT_LE(e.j_pvalue, 1.0);
}

TEST(EstimateEffect, RejectsTinyArms) {
  EXPECT_THROW(estimate_effect(Sample({1.0}), Sample({1.0, 2.0}), {}), Error);
}
