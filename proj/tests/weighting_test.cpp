#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "gmlm/error.hpp"
#include "gmlm/weighting.hpp"
#include "support/oracles.hpp"

using namespace gmlm;

namespace {

std::vector<double> normal_values(std::size_t n, double mean, double sd,
                                  std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(mean, sd);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

std::vector<double> lognormal_values(std::size_t n, double sd,
                                     std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::lognormal_distribution<double> d(0.0, sd);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

GmlmProblem problem_of(const Sample& t, const Sample& c, std::size_t order,
                       WeightMatrix w = {}) {
  GmlmProblem p;
  p.treated = t;
  p.control = c;
  p.order = order;
  p.weight = std::move(w);
  return p;
}

double sample_sd(const std::vector<double>& v) {
  const double m = std::accumulate(v.begin(), v.end(), 0.0) /
                   static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

TEST(ReweightedQuantile, UniformWeightsMatchEmpiricalQuantile) {
  const Sample s(normal_values(17, 0.0, 1.0, 1));
  const std::vector<double> w(17, 1.0 / 17.0);
  for (int k = 0; k <= 200; ++k) {
    const double u = k / 200.0;
    EXPECT_EQ(reweighted_quantile(s, w, u),
              oracle::quantile_brute_force(s.values(), u))
        << "u=" << u;
  }
}

TEST(ReweightedQuantile, AllMassOnTheLargestValue) {
  const Sample s({1.0, 4.0, 9.0});
  const std::vector<double> w{0.0, 0.0, 1.0};
  for (double u : {0.01, 0.3, 0.5, 1.0}) {
    EXPECT_EQ(reweighted_quantile(s, w, u), 9.0);
  }
}

TEST(ReweightedQuantile, DirectCdfInversion) {
  const Sample s({1.0, 2.0});
  const std::vector<double> w{0.25, 0.75};
  EXPECT_EQ(reweighted_quantile(s, w, 0.25), 1.0);
  EXPECT_EQ(reweighted_quantile(s, w, 0.3), 2.0);
}

TEST(BootstrapWeights, NormalisedPositiveDeterministic) {
  std::mt19937_64 a(42), b(42);
  for (std::size_t n : {1u, 2u, 10u, 1000u}) {
    const auto wa = draw_bootstrap_weights(n, a);
    const auto wb = draw_bootstrap_weights(n, b);
    EXPECT_EQ(wa, wb);
    double sum = 0.0;
    for (double w : wa) {
      EXPECT_GT(w, 0.0);
      sum += w;
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
  std::mt19937_64 c(7);
  EXPECT_EQ(draw_bootstrap_weights(1, c), std::vector<double>{1.0});
}

TEST(BootstrapConfig, Validation) {
  EXPECT_THROW((BootstrapConfig{49, 1, 0}.validate()), Error);
  EXPECT_NO_THROW((BootstrapConfig{50, 1, 0}.validate()));
  EXPECT_TRUE((BootstrapConfig{199, 1, 0}.is_low()));
  EXPECT_FALSE((BootstrapConfig{200, 1, 0}.is_low()));
}

TEST(DiscrepancyCovariance, LocationOrderOneMatchesMeanDifferenceVariance) {
  // With R = 1 the discrepancy is the mean difference, so N times its
  // bootstrap variance targets N (Var(Y1)/n1 + Var(Y0)/n0).
  const std::size_t n1 = 1500, n0 = 1000;
  const Sample t(normal_values(n1, 0.0, 2.0, 2));
  const Sample c(normal_values(n0, 0.0, 1.0, 3));
  const Eigen::MatrixXd V =
      discrepancy_covariance(t, c, 1.0, 1, {}, {2000, 11, 0});
  const double N = static_cast<double>(n1 + n0);
  const double analytic =
      N * (t.variance() / static_cast<double>(n1) +
           c.variance() / static_cast<double>(n0));
  EXPECT_NEAR(V(0, 0), analytic, 0.10 * analytic);
  const WeightMatrix W =
      optimal_weight_matrix(t, c, 1.0, 1, {}, {2000, 11, 0});
  EXPECT_NEAR(W.matrix()(0, 0), 1.0 / V(0, 0), 1e-12 / V(0, 0));
}

TEST(DiscrepancyCovariance, ConstantArmsGiveZeroAndRankZeroWeight) {
  const Sample t({2.0, 2.0, 2.0});
  const Sample c({5.0, 5.0});
  const Eigen::MatrixXd V = discrepancy_covariance(t, c, 1.0, 4, {}, {100, 1, 0});
  EXPECT_EQ(V, Eigen::MatrixXd::Zero(4, 4));
  const WeightMatrix W = WeightMatrix::pseudo_inverse_of(V);
  EXPECT_EQ(W.rank(), 0u);
  EXPECT_EQ(W.matrix(), Eigen::MatrixXd::Zero(4, 4));
}

TEST(DiscrepancyCovariance, DeterministicAndStreamKeyed) {
  const Sample t(lognormal_values(300, 1.0, 4));
  const Sample c(lognormal_values(250, 1.0, 5));
  const auto a = discrepancy_covariance(t, c, 1.1, 6, {}, {200, 9, 3});
  const auto b = discrepancy_covariance(t, c, 1.1, 6, {}, {200, 9, 3});
  const auto d = discrepancy_covariance(t, c, 1.1, 6, {}, {200, 9, 4});
  EXPECT_EQ(a, b);
  EXPECT_NE(a, d);
  EXPECT_LE((a - a.transpose()).norm(), 1e-12 * a.norm());
}

TEST(WeightMatrix, PseudoInverseIdentities) {
  const Sample t(lognormal_values(200, 1.2, 6));
  const Sample c(lognormal_values(200, 1.2, 7));
  // Step quantiles of n points span at most n - 1 non-constant directions,
  // so small samples make V rank deficient at high order.
  const Sample ts({1.0, 2.0, 4.0});
  const Sample cs({0.5, 3.0, 3.5});
  for (const auto& [tt, cc] : {std::pair{t, c}, std::pair{ts, cs}}) {
    const Eigen::MatrixXd V = discrepancy_covariance(tt, cc, 1.0, 10, {}, {300, 1, 0});
    std::size_t rank = 0;
    const Eigen::MatrixXd P = symmetric_pseudo_inverse(V, &rank);
    EXPECT_LE((V * P * V - V).norm(), 1e-8 * V.norm());
    EXPECT_LE((P * V * P - P).norm(), 1e-8 * P.norm());
    EXPECT_GE(rank, 1u);
    EXPECT_LE(rank, 10u);
  }
}

TEST(WeightMatrix, FromMatrixValidation) {
  Eigen::Matrix2d asym;
  asym << 1.0, 0.5, 0.0, 1.0;
  EXPECT_THROW(WeightMatrix::from_matrix(asym), Error);
  Eigen::Matrix2d neg;
  neg << 1.0, 0.0, 0.0, -1.0;
  EXPECT_THROW(WeightMatrix::from_matrix(neg), Error);
  Eigen::Matrix2d tiny;
  tiny << 1.0, 0.0, 0.0, -1e-12;
  const WeightMatrix w = WeightMatrix::from_matrix(tiny);
  EXPECT_GE(w.matrix()(1, 1), 0.0);
  EXPECT_EQ(WeightMatrix::identity(3).matrix(), Eigen::MatrixXd::Identity(3, 3));
}

TEST(ThetaCovariance, OptimalWeightCollapsesTheSandwich) {
  const Sample t(lognormal_values(400, 1.0, 8));
  const Sample c(lognormal_values(350, 0.9, 9));
  const double s = first_step_scale_sd_ratio(t, c);
  const Eigen::MatrixXd V = discrepancy_covariance(t, c, s, 6, {}, {500, 5, 0});
  const WeightMatrix W = WeightMatrix::pseudo_inverse_of(V);
  const GmlmProblem p = problem_of(t, c, 6, W);
  const GmlmFit f = fit_location_scale(p);
  const Eigen::MatrixXd cov = theta_covariance(p, f, W, V);

  const DesignVectors dv = design_vectors(p);
  const Eigen::MatrixXd info = dv.X.transpose() * V.inverse() * dv.X;
  const Eigen::MatrixXd ref =
      info.inverse() / static_cast<double>(p.total_size());
  EXPECT_LE((cov - ref).norm(), 1e-10 * ref.norm() + 1e-15);
}

TEST(ThetaCovariance, LinearInTheDiscrepancyCovariance) {
  const Sample t(lognormal_values(150, 1.0, 10));
  const Sample c(lognormal_values(150, 1.0, 11));
  const Eigen::MatrixXd V = discrepancy_covariance(t, c, 1.0, 5, {}, {300, 5, 0});
  const WeightMatrix W = WeightMatrix::identity(5);
  const GmlmProblem p = problem_of(t, c, 5, W);
  const GmlmFit f = fit_location_scale(p);
  const Eigen::MatrixXd a = theta_covariance(p, f, W, V);
  const Eigen::MatrixXd b = theta_covariance(p, f, W, 3.0 * V);
  EXPECT_LE((b - 3.0 * a).norm(), 1e-12 * b.norm());
}

TEST(ThetaCovariance, LocationOrderOneAgreesWithSimulation) {
  // Sandwich sd of the shift estimate at N = 2000 against the sd of the
  // estimate across independent samples.
  const std::size_t n = 1000;
  std::vector<double> estimates;
  double predicted = 0.0;
  const ModelSpec loc = ModelSpec::location();
  for (std::uint64_t rep = 0; rep < 300; ++rep) {
    const Sample t(normal_values(n, 0.0, 2.0, 1000 + 2 * rep));
    const Sample c(normal_values(n, 0.0, 1.0, 1001 + 2 * rep));
    const GmlmProblem p = problem_of(t, c, 1, WeightMatrix::identity(1));
    const GmlmFit f = fit_location(p);
    estimates.push_back(f.theta[0]);
    if (rep < 20) {
      const Eigen::MatrixXd V =
          discrepancy_covariance(t, c, 1.0, 1, {}, {500, rep, 0});
      predicted += std::sqrt(theta_covariance(p, f, p.weight, V, loc)(0, 0));
    }
  }
  predicted /= 20.0;
  const double simulated = sample_sd(estimates);
  EXPECT_NEAR(predicted, simulated, 0.15 * simulated);
  EXPECT_NEAR(simulated, std::sqrt(5.0 / 1000.0), 0.15 * std::sqrt(5.0 / 1000.0));
}

TEST(JTest, PValues) {
  EXPECT_EQ(jtest_pvalue(0.0, 3), 1.0);
  EXPECT_NEAR(jtest_pvalue(3.841, 1), 0.05, 5e-4);
  EXPECT_NEAR(jtest_pvalue(12.592, 6), 0.05, 5e-4);
  EXPECT_NEAR(jtest_pvalue(6.635, 1), 0.01, 1e-4);
  EXPECT_EQ(jtest_pvalue(0.0, 0), 1.0);
  EXPECT_EQ(jtest_pvalue(1.0, 0), 0.0);
  EXPECT_THROW(jtest_pvalue(NAN, 2), Error);
}

TEST(JTest, MatchesQuadratureOracle) {
  for (unsigned df : {1u, 2u, 3u, 6u, 10u, 14u}) {
    for (double x : {0.3, 1.0, 3.0, 7.5, 15.0, 25.0}) {
      const double ref = oracle::chi2_upper_tail_quadrature(x, df);
      EXPECT_NEAR(jtest_pvalue(x, df), ref, 1e-9) << "df=" << df << " x=" << x;
    }
  }
}

TEST(PrimitiveCovariance, ShapeDiagonalAndDeterminism) {
  const Sample t(lognormal_values(300, 1.0, 12));
  const Sample c(lognormal_values(300, 1.0, 13));
  const GmlmProblem p = problem_of(t, c, 4);
  const auto a = primitive_joint_cov(p, ModelSpec::location_scale(), {200, 3, 1});
  const auto b = primitive_joint_cov(p, ModelSpec::location_scale(), {200, 3, 1});
  ASSERT_EQ(a.cov.rows(), 4);
  EXPECT_EQ(a.size(), 4u);
  EXPECT_EQ(a.treated_mean_index(), 2u);
  EXPECT_EQ(a.control_mean_index(), 3u);
  EXPECT_EQ(a.cov, b.cov);
  for (Eigen::Index i = 0; i < 4; ++i) EXPECT_GE(a.cov(i, i), 0.0);
  // The arm means are reweighted independently.
  EXPECT_NEAR(a.cov(2, 3), 0.0, 0.2 * std::sqrt(a.cov(2, 2) * a.cov(3, 3)));
  EXPECT_NEAR(a.cov(2, 2), t.variance() / 300.0, 0.25 * t.variance() / 300.0);
}

TEST(PrimitiveCovariance, ShrinksWithSampleSize) {
  auto sd_alpha = [](std::size_t n) {
    const Sample t(lognormal_values(n, 0.8, 14 + n));
    const Sample c(lognormal_values(n, 0.8, 15 + n));
    const GmlmProblem p = problem_of(t, c, 4);
    return std::sqrt(
        primitive_joint_cov(p, ModelSpec::location_scale(), {200, 3, 0}).cov(0, 0));
  };
  EXPECT_LT(sd_alpha(4000), sd_alpha(250));
}

TEST(PrimitiveCovariance, ConstantEqualArmsAreExact) {
  const GmlmProblem p = problem_of(Sample({3.0, 3.0}), Sample({3.0}), 2);
  const auto a = primitive_joint_cov(p, ModelSpec::location_scale(), {100, 1, 0});
  EXPECT_EQ(a.cov, Eigen::MatrixXd::Zero(4, 4));
}

TEST(FirstStep, Parameters) {
  const Sample t({1.0, 3.0, 5.0});
  const Sample c({0.0, 1.0, 2.0});
  EXPECT_DOUBLE_EQ(first_step_scale_sd_ratio(t, c), 2.0);
  const Eigen::VectorXd ls = first_step_parameter(t, c, ModelSpec::location_scale());
  EXPECT_DOUBLE_EQ(ls[1], 2.0);
  EXPECT_DOUBLE_EQ(ls[0], 3.0 - 2.0 * 1.0);
  const Eigen::VectorXd loc = first_step_parameter(t, c, ModelSpec::location());
  EXPECT_EQ(loc[0], 0.0);
}
