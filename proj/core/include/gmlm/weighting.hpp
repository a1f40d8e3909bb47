#pragma once

// Weighted (Bayesian) bootstrap inference for GMLM fits: optimal weighting,
// sandwich covariance, joint covariance of primitives and the J-test.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "gmlm/estimator.hpp"
#include "gmlm/quantile_core.hpp"
#include "gmlm/random.hpp"
#include "gmlm/weight_matrix.hpp"

namespace gmlm {

// Replicate weights are normalised unit-mean exponential draws.
struct BootstrapConfig {
  std::size_t replicates = 500;
  std::uint64_t seed = kDefaultSeed;
  // Extra key folded into every replicate stream (cell, period, ...).
  std::uint64_t stream = 0;

  // Throws invalid-argument below 50 replicates.
  void validate() const;
  // Below 200 replicates the covariance estimate is noisy.
  bool is_low() const noexcept { return replicates < 200; }
};

// z_i ~ Exp(1) i.i.d., w_i = z_i / sum_j z_j.
std::vector<double> draw_bootstrap_weights(std::size_t n, std::mt19937_64& rng);

// Same, written into `out` (size n).
void draw_bootstrap_weights(std::span<double> out, std::mt19937_64& rng);

// inf{x : sum_i w_i 1{y_i <= x} >= u}; weights follow the sorted order of
// the sample.
double reweighted_quantile(const Sample& sample,
                           std::span<const double> weights, double u);

// Covariance (over B replicates) of
//   v_b = sqrt(N) * int [(Q1~ - Q1^) - scale * (Q0~ - Q0^)] P_R du,
// the bootstrap analogue of the L-moment discrepancy's leading term. Each arm
// is reweighted independently; streams are keyed by (seed, stream, replicate,
// arm).
Eigen::MatrixXd discrepancy_covariance(const Sample& treated,
                                       const Sample& control,
                                       double first_step_scale,
                                       std::size_t order,
                                       const TrimRange& trim,
                                       const BootstrapConfig& cfg);

// Pseudoinverse of discrepancy_covariance. The scale is dG/dY at a first-step
// estimate: the sd ratio for location-scale, 1 for the location model.
WeightMatrix optimal_weight_matrix(const Sample& treated,
                                   const Sample& control,
                                   double first_step_scale, std::size_t order,
                                   const TrimRange& trim,
                                   const BootstrapConfig& cfg);

// Nonparametric first-step scale sd(treated) / sd(control).
double first_step_scale_sd_ratio(const Sample& treated, const Sample& control);

// First-step parameter for the optimal weight: (mean shift, sd ratio) for
// location-scale, the null for the location model, and an identity-weighted
// exactly identified fit for custom models.
Eigen::VectorXd first_step_parameter(const Sample& treated,
                                     const Sample& control,
                                     const ModelSpec& model);

// discrepancy_covariance with the control term G(Q0~; theta) - G(Q0^; theta)
// evaluated at a first-step parameter. For the linear families this is the
// scalar-scale formula; for custom models the control arm is mapped through
// G, which keeps the step structure because G is increasing.
Eigen::MatrixXd model_discrepancy_covariance(const Sample& treated,
                                             const Sample& control,
                                             const ModelSpec& model,
                                             const Eigen::VectorXd& first_step,
                                             std::size_t order,
                                             const TrimRange& trim,
                                             const BootstrapConfig& cfg);

// Sandwich (J'WJ)^{-1} J'W V W J (J'WJ)^{-1} / N, where V is the covariance of
// sqrt(N) times the discrepancy vector.
Eigen::MatrixXd theta_covariance(const GmlmProblem& problem,
                                 const GmlmFit& fit,
                                 const WeightMatrix& weight,
                                 const Eigen::MatrixXd& discrepancy_cov,
                                 const ModelSpec& model =
                                     ModelSpec::location_scale());

// Upper tail of chi-squared(df) at j. df = 0 gives 1 for j <= 1e-8, else 0.
double jtest_pvalue(double j, std::size_t df);

// Joint covariance of (theta_hat..., treated mean, control mean), the inputs
// of delta-method functionals. Already on the scale of the estimates.
struct PrimitiveCovariance {
  Eigen::MatrixXd cov;
  std::size_t dim = 0;  // parameter dimension p
  std::size_t replicates_used = 0;
  std::size_t failures = 0;

  std::size_t size() const noexcept { return dim + 2; }
  std::size_t treated_mean_index() const noexcept { return dim; }
  std::size_t control_mean_index() const noexcept { return dim + 1; }
};

// Refits the model on B reweighted replicates with the problem's weighting
// matrix held fixed. More than 5% failed refits is an inference-unstable
// error.
PrimitiveCovariance primitive_joint_cov(
    const GmlmProblem& problem, const ModelSpec& model,
    const BootstrapConfig& cfg,
    const std::optional<Eigen::VectorXd>& theta_init = {});

}  // namespace gmlm
