#include "gmlm/learning.hpp"

#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "gmlm/error.hpp"

namespace gmlm {

namespace {

constexpr double kMaxCondition = 1e10;

void check_prior(const QualityPrior& p) {
  require(std::isfinite(p.mu) && std::isfinite(p.sigma2) && p.sigma2 >= 0.0,
          ErrorKind::invalid_argument,
          "quality prior: mu must be finite and sigma2 nonnegative");
}

void check_tech(const BundleTech& t) {
  require(t.gamma > 0.0 && t.phi > 0.0 && t.phi <= 1.0,
          ErrorKind::invalid_argument,
          "bundle technology: need gamma > 0 and phi in (0, 1]");
}

}  // namespace

double lognormal_moment(const QualityPrior& prior, double s) {
  return std::exp(s * prior.mu + 0.5 * s * s * prior.sigma2);
}

Eigen::Matrix3d demand_matrix(const QualityPrior& prior,
                              const BundleTech& tech) {
  check_prior(prior);
  check_tech(tech);
  const double g = tech.gamma;
  const double f = tech.phi;
  auto m = [&](double s) { return lognormal_moment(prior, s); };
  Eigen::Matrix3d M;
  M << 1.0, g * m(f), m(1.0),
       g * m(f), g * g * m(2.0 * f), g * m(1.0 + f),
       m(1.0), g * m(1.0 + f), m(2.0);
  return M;
}

Eigen::Vector3d direct_price_effect(const CalibrationParams& params) {
  require(params.lambda > 0.0, ErrorKind::invalid_argument,
          "direct_price_effect: lambda must be positive");
  const Eigen::Matrix3d M = demand_matrix(params.prior, params.tech);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(M, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  require(lo > 0.0 && hi / lo < kMaxCondition, ErrorKind::degenerate_prior,
          "direct_price_effect: demand matrix is singular; the prior does not "
          "identify the bundle and new-mode responses");
  const Eigen::Vector3d col = M.partialPivLu().solve(Eigen::Vector3d::UnitY());
  return -(params.price_change / params.lambda) * col;
}

double learning_share(double total_effect, double direct_effect) {
  require(total_effect != 0.0, ErrorKind::undefined_share,
          "learning_share: total effect is zero");
  return 1.0 - direct_effect / total_effect;
}

BundleTech calibrate_bundle_tech(double logmean_A, double logvar_A,
                                 double logmean_bundle, double logvar_bundle) {
  require(logvar_A > 0.0, ErrorKind::invalid_argument,
          "calibrate_bundle_tech: variance of log A must be positive");
  require(logvar_bundle >= 0.0, ErrorKind::invalid_argument,
          "calibrate_bundle_tech: bundle log-variance must be nonnegative");
  BundleTech t;
  t.phi = std::sqrt(logvar_bundle / logvar_A);
  t.gamma = std::exp(logmean_bundle - t.phi * logmean_A);
  return t;
}

double backout_lambda(double income, double rate, double tau) {
  require(tau > 0.0, ErrorKind::invalid_argument,
          "backout_lambda: target must be positive");
  require(rate > -1.0, ErrorKind::invalid_argument,
          "backout_lambda: rate must exceed -1");
  return income * (1.0 + 1.0 / (1.0 + rate)) / tau;
}

double per_period_rate(double annual_rate, double periods) {
  require(annual_rate > -1.0 && periods > 0.0, ErrorKind::invalid_argument,
          "per_period_rate: need annual rate > -1 and positive periods");
  return std::pow(1.0 + annual_rate, 1.0 / periods) - 1.0;
}

Decomposition decompose(const DecompositionInput& input) {
  require(!input.units.empty(), ErrorKind::invalid_argument,
          "decompose: no units");
  const double r = per_period_rate(input.annual_rate, input.periods_per_year);
  Decomposition out;
  out.total = input.total_effect;
  for (const auto& u : input.units) {
    UnitDecomposition d;
    d.id = u.id;
    d.lambda = u.lambda ? *u.lambda : backout_lambda(u.income, r, u.tau);
    require(d.lambda > 0.0, ErrorKind::invalid_argument,
            "decompose: unit " + u.id + " has a nonpositive lambda");
    CalibrationParams p{input.prior, input.tech, d.lambda, input.price_change};
    d.direct = direct_price_effect(p)[1];
    out.mean_lambda += d.lambda;
    out.direct += d.direct;
    out.units.push_back(d);
  }
  const auto n = static_cast<double>(out.units.size());
  out.mean_lambda /= n;
  out.direct /= n;
  out.learning_share = learning_share(out.total, out.direct);
  return out;
}

}  // namespace gmlm
