#pragma once

// Treatment-effect functionals of a location-scale fit and their
// delta-method standard errors.

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "gmlm/estimator.hpp"
#include "gmlm/weighting.hpp"

namespace gmlm {

struct EffectEstimate {
  double delta = 0.0;  // average effect, outcome units
  double delta_se = 0.0;
  double psi = 0.0;  // relative change in dispersion
  double psi_se = 0.0;
  double alpha = 0.0;
  double sigma = 1.0;
  double alpha_se = 0.0;
  double sigma_se = 0.0;
  double j_stat = 0.0;
  std::size_t df = 0;
  double j_pvalue = 1.0;
  double treated_mean = 0.0;
  double control_mean = 0.0;
  std::size_t n_treated = 0;
  std::size_t n_control = 0;
  std::size_t R_used = 0;
  TrimRange trim_used;
  std::size_t weight_rank = 0;
};

// Average effect imputed from the location-scale model:
//   s_d (m_d - (m_d - alpha) / sigma) + s_0 (alpha + (sigma - 1) m_0),
// with s_d = p_d / (p_d + p_0) and s_0 = p_0 / (p_d + p_0). Arm shares may be
// given as fractions or counts. Throws invalid-argument for sigma <= 0.
double ate_from_fit(double alpha, double sigma, double treated_mean,
                    double control_mean, double p_d, double p_0);

// Partial derivatives of ate_from_fit with respect to
// (alpha, sigma, treated_mean, control_mean).
std::array<double, 4> ate_gradient(double alpha, double sigma,
                                   double treated_mean, double control_mean,
                                   double p_d, double p_0);

// sigma - 1.
double dispersion_from_fit(double sigma);

// Gradient of dispersion_from_fit over (alpha, sigma, treated_mean,
// control_mean).
std::array<double, 4> dispersion_gradient();

// sqrt(g' C g). A negative quadratic form (numerical noise) is clamped to zero
// and reported through `clamped`.
double delta_se(std::span<const double> gradient, const Eigen::MatrixXd& cov,
                bool* clamped = nullptr);
double delta_se(std::span<const double> gradient,
                const PrimitiveCovariance& cov, bool* clamped = nullptr);

struct StratumEffect {
  double value = 0.0;
  double se = 0.0;
};

struct AggregateEffect {
  double value = 0.0;
  double se = 0.0;
  std::vector<double> weights;
};

// sum_u w_u e_u with se sqrt(sum_u w_u^2 se_u^2), strata independent.
// Proportions must match the strata one-to-one and sum to one.
AggregateEffect aggregate_strata(std::span<const StratumEffect> effects,
                                 std::span<const double> proportions);

struct EffectConfig {
  std::size_t order = 8;
  TrimRange trim;
  BootstrapConfig bootstrap;
};

// Full two-sample pipeline: optimal weight (sd-ratio first step), GLS
// location-scale fit, J-test, bootstrap primitive covariance, average effect
// and dispersion change with delta-method standard errors.
EffectEstimate estimate_effect(const Sample& treated, const Sample& control,
                               const EffectConfig& cfg);

// Difference in means and sd ratio minus one, with textbook standard errors
// (unequal-variance two-sample t; delta method on the sd ratio using sample
// fourth moments). Variances use the n - 1 convention.
struct NonparametricEffect {
  double diff_means = 0.0;
  double diff_means_se = 0.0;
  double sd_ratio_minus_one = 0.0;
  double sd_ratio_se = 0.0;
};

NonparametricEffect nonparametric_effect(const Sample& treated,
                                         const Sample& control);

}  // namespace gmlm
