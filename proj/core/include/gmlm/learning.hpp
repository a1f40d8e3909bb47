#pragma once

// Direct-price versus learning decomposition of a demand response under a
// log-normal prior on the quality of the new transport mode.

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace gmlm {

// log A ~ N(mu, sigma2).
struct QualityPrior {
  double mu = 0.0;
  double sigma2 = 0.0;
};

// Bundled-ride technology gamma * A^phi.
struct BundleTech {
  double gamma = 1.0;
  double phi = 1.0;
};

struct CalibrationParams {
  QualityPrior prior;
  BundleTech tech;
  double lambda = 1.0;        // target sensitivity, > 0
  double price_change = 0.0;  // change in the bundle price
};

// E[A^s] = exp(s mu + s^2 sigma2 / 2).
double lognormal_moment(const QualityPrior& prior, double s);

// Gram matrix E[v v'] with v = (1, gamma A^phi, A): the first-order system of
// the static demand problem.
Eigen::Matrix3d demand_matrix(const QualityPrior& prior, const BundleTech& tech);

// -(1/lambda) M^{-1} e_2 price_change, ordered (outside, bundle, new mode).
// Throws degenerate-prior when M is singular or its condition number exceeds
// 1e10, invalid-argument for lambda <= 0.
Eigen::Vector3d direct_price_effect(const CalibrationParams& params);

// 1 - direct / total. Throws undefined-share for a zero total.
double learning_share(double total_effect, double direct_effect);

// Moment match of log(gamma A^phi) ~ N(log gamma + phi mu, phi^2 sigma2):
// phi = sqrt(logvar_bundle / logvar_A), gamma = exp(logmean_bundle - phi
// logmean_A). Throws invalid-argument for logvar_A <= 0.
BundleTech calibrate_bundle_tech(double logmean_A, double logvar_A,
                                 double logmean_bundle, double logvar_bundle);

// lambda with (lambda / 2) tau = (w + w / (1 + r)) / 2. Throws
// invalid-argument for tau <= 0 or r <= -1.
double backout_lambda(double income, double rate, double tau);

// Per-period rate from an annual one, compounded over `periods` per year.
double per_period_rate(double annual_rate, double periods = 26.0);

// One individual of a decomposition: lambda given directly or backed out of
// income and target.
struct DecompositionUnit {
  std::string id;
  std::optional<double> lambda;
  double income = 0.0;
  double tau = 0.0;
};

struct DecompositionInput {
  QualityPrior prior;
  BundleTech tech;
  double price_change = 0.0;
  double total_effect = 0.0;
  double annual_rate = 0.04;
  double periods_per_year = 26.0;
  std::vector<DecompositionUnit> units;
};

struct UnitDecomposition {
  std::string id;
  double lambda = 0.0;
  double direct = 0.0;  // bundle component of the direct price effect
};

struct Decomposition {
  std::vector<UnitDecomposition> units;
  double mean_lambda = 0.0;
  double direct = 0.0;  // average over units
  double total = 0.0;
  double learning_share = 0.0;
};

// Direct effect per unit and the learning share of the total effect.
Decomposition decompose(const DecompositionInput& input);

}  // namespace gmlm
