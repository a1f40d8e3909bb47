#pragma once

// Generalized method of L-moments: closed-form GLS for the location and
// location-scale models, Gauss-Newton for general monotone transformations.

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>

#include <Eigen/Core>

#include "gmlm/quantile_core.hpp"
#include "gmlm/weight_matrix.hpp"

namespace gmlm {

enum class ModelFamily { location_scale, location, custom };

std::string to_string(ModelFamily family);
ModelFamily parse_model_family(const std::string& name);

// Treated outcome as a known increasing transformation of the untreated one,
// Y(1) = G(Y(0); theta).
struct ModelSpec {
  using Transform = std::function<double(double, const Eigen::VectorXd&)>;
  using Gradient =
      std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)>;
  using Admissible = std::function<bool(const Eigen::VectorXd&)>;

  ModelFamily family = ModelFamily::custom;
  std::string name;
  std::size_t dim = 0;
  Transform transform;           // G(y; theta)
  Transform outcome_derivative;  // dG/dy
  Gradient parameter_gradient;   // grad_theta G
  Admissible admissible;         // empty: every theta is admissible
  Eigen::VectorXd null_parameter;  // G(y; null) == y
  bool monotone = true;

  // alpha + sigma * y with sigma > 0; null (0, 1).
  static ModelSpec location_scale();
  // theta + y; null 0.
  static ModelSpec location();

  bool is_admissible(const Eigen::VectorXd& theta) const;

  // Checks G(y; null) == y and strict monotonicity in y at `theta` (or the
  // null parameter) on the probe points. Throws invalid-argument.
  void validate(std::span<const double> probes,
                const std::optional<Eigen::VectorXd>& theta = {}) const;
};

struct GmlmProblem {
  Sample treated;
  Sample control;
  std::size_t order = 2;
  TrimRange trim;
  WeightMatrix weight;

  std::size_t total_size() const noexcept {
    return treated.size() + control.size();
  }

  // The identity weight when `weight` is left empty.
  Eigen::MatrixXd weight_or_identity() const;
};

struct GmlmFit {
  Eigen::VectorXd theta;
  Eigen::VectorXd residual;  // L-moment discrepancy at theta
  double objective = 0.0;    // residual' W residual
  double j_stat = 0.0;       // N * objective
  std::size_t df = 0;        // R - p
  Eigen::MatrixXd covariance;  // filled by the inference layer
  bool converged = false;
  std::size_t iterations = 0;
  double gradient_norm = 0.0;
};

// Location-scale: y = int Q1 P_R, X = [int P_R, int Q0 P_R].
// Location: y = int (Q1 - Q0) P_R, X = [int P_R].
struct DesignVectors {
  Eigen::VectorXd y;
  Eigen::MatrixXd X;
};

DesignVectors design_vectors(const GmlmProblem& problem,
                             ModelFamily family = ModelFamily::location_scale);

// theta = (X'WX)^{-1} X'W y. Throws degenerate-design when X'WX is singular or
// its (column-equilibrated) condition number exceeds 1e12.
Eigen::VectorXd gls_solve(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                          const Eigen::MatrixXd& W);

// Closed-form GLS for alpha + sigma * Y(0). Throws degenerate-design on a
// singular design and non-monotone-fit when sigma_hat <= 0.
GmlmFit fit_location_scale(const GmlmProblem& problem);

// Closed-form GLS for theta + Y(0).
GmlmFit fit_location(const GmlmProblem& problem);

struct GaussNewtonOptions {
  double gradient_tol = 1e-10;
  double step_tol = 1e-12;
  std::size_t max_iterations = 200;
  std::size_t max_halvings = 60;
};

// Minimises || int (Q1 - G(Q0; theta)) P_R ||_W^2 by Gauss-Newton with
// step halving, starting from the null parameter unless `theta_init` is
// given. Non-convergence is reported through GmlmFit::converged.
GmlmFit fit_generic(const GmlmProblem& problem, const ModelSpec& model,
                    const std::optional<Eigen::VectorXd>& theta_init = {},
                    const GaussNewtonOptions& options = {});

// Closed form for the linear families, Gauss-Newton otherwise.
GmlmFit fit(const GmlmProblem& problem, const ModelSpec& model);

// d(residual)/d(theta') = -int grad_theta G(Q0; theta) P_R, an R x p matrix.
Eigen::MatrixXd residual_jacobian(const GmlmProblem& problem,
                                  const ModelSpec& model,
                                  const Eigen::VectorXd& theta);

struct JStatistic {
  double j = 0.0;
  std::size_t df = 0;
};

// N * ||residual||_W^2 with R - p degrees of freedom. Only chi-squared
// calibrated when the fit used the optimal weighting matrix.
JStatistic j_statistic(const GmlmFit& fit, std::size_t total_size);

// Lower-level Gauss-Newton over precomputed L-moment targets and step
// integrals of the control quantile; shared with the bootstrap refits.
GmlmFit gauss_newton(const Eigen::VectorXd& target,
                     const StepQuantile& control,
                     const Eigen::MatrixXd& control_steps,
                     const Eigen::MatrixXd& W, const ModelSpec& model,
                     const Eigen::VectorXd& theta_init,
                     const GaussNewtonOptions& options = {});

}  // namespace gmlm
