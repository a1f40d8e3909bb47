#include "gmlm/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "gmlm/error.hpp"

namespace gmlm {

namespace {

constexpr double kMaxCondition = 1e12;

// Condition number of a symmetric PSD matrix after scaling it to unit
// diagonal, so that the guard does not depend on the outcome units.
double equilibrated_condition(const Eigen::MatrixXd& a) {
  const Eigen::VectorXd d = a.diagonal();
  if ((d.array() <= 0.0).any() || !d.allFinite()) {
    return std::numeric_limits<double>::infinity();
  }
  const Eigen::VectorXd s = d.array().rsqrt();
  const Eigen::MatrixXd scaled = s.asDiagonal() * a * s.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(scaled,
                                                     Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (lo <= 0.0) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

void check_problem(const GmlmProblem& problem, std::size_t dim) {
  require(!problem.treated.empty() && !problem.control.empty(),
          ErrorKind::invalid_state, "GMLM: empty treated or control sample");
  require(problem.order >= dim, ErrorKind::invalid_argument,
          "GMLM: number of L-moments R must be at least the parameter "
          "dimension p");
  if (!problem.weight.empty()) {
    require(problem.weight.order() == problem.order,
            ErrorKind::invalid_argument,
            "GMLM: weighting matrix order differs from R");
  }
}

// Constant and equal arms (flat objective) or identical samples: the null
// parameter fits exactly.
bool flat_and_equal(const GmlmProblem& problem) {
  if (problem.treated.is_constant() && problem.control.is_constant() &&
      problem.treated[0] == problem.control[0]) {
    return true;
  }
  return std::ranges::equal(problem.treated.values(),
                            problem.control.values());
}

GmlmFit null_fit(const GmlmProblem& problem, const Eigen::VectorXd& null) {
  GmlmFit fit;
  fit.theta = null;
  fit.residual = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(problem.order));
  fit.df = problem.order - static_cast<std::size_t>(null.size());
  fit.converged = true;
  return fit;
}

void finish_fit(GmlmFit& fit, const GmlmProblem& problem,
                const Eigen::MatrixXd& W) {
  fit.objective = std::max(0.0, fit.residual.dot(W * fit.residual));
  fit.j_stat = static_cast<double>(problem.total_size()) * fit.objective;
  fit.df = problem.order - static_cast<std::size_t>(fit.theta.size());
}

GmlmFit fit_linear(const GmlmProblem& problem, ModelFamily family) {
  const std::size_t dim = family == ModelFamily::location_scale ? 2 : 1;
  check_problem(problem, dim);
  if (flat_and_equal(problem)) {
    Eigen::VectorXd null = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
    if (family == ModelFamily::location_scale) null[1] = 1.0;
    return null_fit(problem, null);
  }
  const DesignVectors dv = design_vectors(problem, family);
  const Eigen::MatrixXd W = problem.weight_or_identity();
  GmlmFit fit;
  fit.theta = gls_solve(dv.y, dv.X, W);
  if (family == ModelFamily::location_scale) {
    require(fit.theta[1] > 0.0, ErrorKind::non_monotone_fit,
            "fit_location_scale: estimated scale " +
                std::to_string(fit.theta[1]) +
                " is not positive; the location-scale model is not monotone");
  }
  fit.residual = dv.y - dv.X * fit.theta;
  fit.converged = true;
  fit.iterations = 0;
  fit.gradient_norm = (dv.X.transpose() * W * fit.residual).norm();
  finish_fit(fit, problem, W);
  return fit;
}

}  // namespace

std::string to_string(ModelFamily family) {
  switch (family) {
    case ModelFamily::location_scale: return "location_scale";
    case ModelFamily::location: return "location";
    case ModelFamily::custom: return "custom";
  }
  return "custom";
}

ModelFamily parse_model_family(const std::string& name) {
  if (name == "location_scale" || name == "location-scale") {
    return ModelFamily::location_scale;
  }
  if (name == "location") return ModelFamily::location;
  fail(ErrorKind::invalid_argument, "unknown model family '" + name + "'");
}

// ------------------------------------------------------------- ModelSpec

ModelSpec ModelSpec::location_scale() {
  ModelSpec m;
  m.family = ModelFamily::location_scale;
  m.name = "location_scale";
  m.dim = 2;
  m.transform = [](double y, const Eigen::VectorXd& t) {
    return t[0] + t[1] * y;
  };
  m.outcome_derivative = [](double, const Eigen::VectorXd& t) { return t[1]; };
  m.parameter_gradient = [](double y, const Eigen::VectorXd&) {
    return Eigen::Vector2d(1.0, y).eval();
  };
  m.admissible = [](const Eigen::VectorXd& t) { return t[1] > 0.0; };
  m.null_parameter = Eigen::Vector2d(0.0, 1.0);
  return m;
}

ModelSpec ModelSpec::location() {
  ModelSpec m;
  m.family = ModelFamily::location;
  m.name = "location";
  m.dim = 1;
  m.transform = [](double y, const Eigen::VectorXd& t) { return t[0] + y; };
  m.outcome_derivative = [](double, const Eigen::VectorXd&) { return 1.0; };
  m.parameter_gradient = [](double, const Eigen::VectorXd&) {
    return Eigen::VectorXd::Ones(1).eval();
  };
  m.null_parameter = Eigen::VectorXd::Zero(1);
  return m;
}

bool ModelSpec::is_admissible(const Eigen::VectorXd& theta) const {
  if (!theta.allFinite()) return false;
  return !admissible || admissible(theta);
}

void ModelSpec::validate(std::span<const double> probes,
                         const std::optional<Eigen::VectorXd>& theta) const {
  require(static_cast<bool>(transform) && static_cast<bool>(parameter_gradient),
          ErrorKind::invalid_argument,
          "ModelSpec: transform and parameter gradient are required");
  require(static_cast<std::size_t>(null_parameter.size()) == dim,
          ErrorKind::invalid_argument,
          "ModelSpec: null parameter has the wrong dimension");
  require(monotone, ErrorKind::invalid_argument,
          "ModelSpec: the transformation must be increasing in the outcome");
  for (double y : probes) {
    const double g = transform(y, null_parameter);
    require(std::abs(g - y) <= 1e-10 * std::max(1.0, std::abs(y)),
            ErrorKind::invalid_argument,
            "ModelSpec: G(y; null) != y at probe " + std::to_string(y));
  }
  const Eigen::VectorXd& t = theta ? *theta : null_parameter;
  std::vector<double> sorted(probes.begin(), probes.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    require(transform(sorted[i], t) > transform(sorted[i - 1], t),
            ErrorKind::invalid_argument,
            "ModelSpec: G is not strictly increasing on the probe points");
  }
}

Eigen::MatrixXd GmlmProblem::weight_or_identity() const {
  if (weight.empty()) {
    return Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(order),
                                     static_cast<Eigen::Index>(order));
  }
  return weight.matrix();
}

// -------------------------------------------------------------- fitting

DesignVectors design_vectors(const GmlmProblem& problem, ModelFamily family) {
  require(family != ModelFamily::custom, ErrorKind::invalid_argument,
          "design_vectors: only the location and location-scale families "
          "have a linear design");
  require(!problem.treated.empty() && !problem.control.empty(),
          ErrorKind::invalid_state, "design_vectors: empty sample");
  const LegendreBasis basis(problem.order);
  DesignVectors dv;
  dv.y = integrate_quantile(StepQuantile::from_sample(problem.treated), basis,
                            problem.trim);
  const auto R = static_cast<Eigen::Index>(problem.order);
  const Eigen::VectorXd control = integrate_quantile(
      StepQuantile::from_sample(problem.control), basis, problem.trim);
  if (family == ModelFamily::location_scale) {
    dv.X.resize(R, 2);
    dv.X.col(0) = basis.integrals(problem.trim);
    dv.X.col(1) = control;
  } else {
    dv.y -= control;
    dv.X.resize(R, 1);
    dv.X.col(0) = basis.integrals(problem.trim);
  }
  return dv;
}

Eigen::VectorXd gls_solve(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                          const Eigen::MatrixXd& W) {
  const Eigen::MatrixXd xtw = X.transpose() * W;
  Eigen::MatrixXd a = xtw * X;
  a = 0.5 * (a + a.transpose()).eval();
  const double cond = equilibrated_condition(a);
  require(cond <= kMaxCondition, ErrorKind::degenerate_design,
          "GLS design is singular or ill-conditioned (condition number " +
              std::to_string(cond) +
              "); the control quantile may be constant over the trim range");
  return a.ldlt().solve(xtw * y);
}

GmlmFit fit_location_scale(const GmlmProblem& problem) {
  return fit_linear(problem, ModelFamily::location_scale);
}

GmlmFit fit_location(const GmlmProblem& problem) {
  return fit_linear(problem, ModelFamily::location);
}

GmlmFit gauss_newton(const Eigen::VectorXd& target,
                     const StepQuantile& control,
                     const Eigen::MatrixXd& control_steps,
                     const Eigen::MatrixXd& W, const ModelSpec& model,
                     const Eigen::VectorXd& theta_init,
                     const GaussNewtonOptions& options) {
  const auto steps = static_cast<Eigen::Index>(control.values.size());
  const auto p = static_cast<Eigen::Index>(model.dim);
  require(model.is_admissible(theta_init), ErrorKind::invalid_argument,
          "gauss_newton: initial parameter is not admissible");

  Eigen::VectorXd g(steps);
  Eigen::MatrixXd grad_g(steps, p);
  auto residual_at = [&](const Eigen::VectorXd& theta) {
    for (Eigen::Index i = 0; i < steps; ++i) {
      g[i] = model.transform(control.values[static_cast<std::size_t>(i)], theta);
    }
    return (target - control_steps.transpose() * g).eval();
  };
  auto jacobian_at = [&](const Eigen::VectorXd& theta) {
    for (Eigen::Index i = 0; i < steps; ++i) {
      grad_g.row(i) = model
                          .parameter_gradient(
                              control.values[static_cast<std::size_t>(i)], theta)
                          .transpose();
    }
    return (-(control_steps.transpose() * grad_g)).eval();
  };
  auto objective = [&](const Eigen::VectorXd& r) {
    return std::max(0.0, r.dot(W * r));
  };

  GmlmFit fit;
  fit.theta = theta_init;
  fit.residual = residual_at(fit.theta);
  double obj = objective(fit.residual);

  for (std::size_t it = 0; it < options.max_iterations; ++it) {
    const Eigen::MatrixXd J = jacobian_at(fit.theta);
    const Eigen::MatrixXd jtw = J.transpose() * W;
    const Eigen::VectorXd grad = jtw * fit.residual;
    fit.gradient_norm = grad.norm();
    fit.iterations = it;
    if (fit.gradient_norm < options.gradient_tol || obj == 0.0) {
      fit.converged = true;
      break;
    }
    Eigen::MatrixXd a = jtw * J;
    a = 0.5 * (a + a.transpose()).eval();
    const double cond = equilibrated_condition(a);
    require(cond <= kMaxCondition, ErrorKind::degenerate_design,
            "gauss_newton: J'WJ is singular or ill-conditioned (condition "
            "number " + std::to_string(cond) + ")");
    const Eigen::VectorXd delta = -a.ldlt().solve(grad);

    double t = 1.0;
    bool accepted = false;
    Eigen::VectorXd candidate;
    Eigen::VectorXd cand_residual;
    double cand_obj = obj;
    for (std::size_t h = 0; h <= options.max_halvings; ++h, t *= 0.5) {
      candidate = fit.theta + t * delta;
      if (!model.is_admissible(candidate)) continue;
      cand_residual = residual_at(candidate);
      cand_obj = objective(cand_residual);
      if (cand_obj <= obj) {
        accepted = true;
        break;
      }
    }
    const double step_norm = accepted ? t * delta.norm() : 0.0;
    if (accepted) {
      fit.theta = candidate;
      fit.residual = cand_residual;
      obj = cand_obj;
    }
    fit.iterations = it + 1;
    if (!accepted || step_norm < options.step_tol) {
      // No descent direction left at working precision.
      fit.converged = true;
      break;
    }
  }
  if (!fit.converged) {
    const Eigen::MatrixXd J = jacobian_at(fit.theta);
    fit.gradient_norm = (J.transpose() * W * fit.residual).norm();
    fit.converged = fit.gradient_norm < options.gradient_tol;
  }
  fit.objective = obj;
  fit.df = static_cast<std::size_t>(target.size()) - model.dim;
  return fit;
}

GmlmFit fit_generic(const GmlmProblem& problem, const ModelSpec& model,
                    const std::optional<Eigen::VectorXd>& theta_init,
                    const GaussNewtonOptions& options) {
  require(model.dim >= 1 && static_cast<bool>(model.transform) &&
              static_cast<bool>(model.parameter_gradient),
          ErrorKind::invalid_argument, "fit_generic: incomplete model");
  check_problem(problem, model.dim);
  if (flat_and_equal(problem)) return null_fit(problem, model.null_parameter);

  const LegendreBasis basis(problem.order);
  const Eigen::VectorXd target = integrate_quantile(
      StepQuantile::from_sample(problem.treated), basis, problem.trim);
  const StepQuantile q0 = StepQuantile::from_sample(problem.control);
  const Eigen::MatrixXd steps = step_basis_integrals(q0, basis, problem.trim);
  const Eigen::MatrixXd W = problem.weight_or_identity();
  GmlmFit fit = gauss_newton(target, q0, steps, W, model,
                             theta_init.value_or(model.null_parameter), options);
  finish_fit(fit, problem, W);
  return fit;
}

GmlmFit fit(const GmlmProblem& problem, const ModelSpec& model) {
  switch (model.family) {
    case ModelFamily::location_scale: return fit_location_scale(problem);
    case ModelFamily::location: return fit_location(problem);
    case ModelFamily::custom: return fit_generic(problem, model);
  }
  return fit_generic(problem, model);
}

Eigen::MatrixXd residual_jacobian(const GmlmProblem& problem,
                                  const ModelSpec& model,
                                  const Eigen::VectorXd& theta) {
  const LegendreBasis basis(problem.order);
  if (model.family == ModelFamily::location_scale ||
      model.family == ModelFamily::location) {
    return -design_vectors(problem, model.family).X;
  }
  const StepQuantile q0 = StepQuantile::from_sample(problem.control);
  const Eigen::MatrixXd steps = step_basis_integrals(q0, basis, problem.trim);
  Eigen::MatrixXd grad(static_cast<Eigen::Index>(q0.values.size()),
                       static_cast<Eigen::Index>(model.dim));
  for (std::size_t i = 0; i < q0.values.size(); ++i) {
    grad.row(static_cast<Eigen::Index>(i)) =
        model.parameter_gradient(q0.values[i], theta).transpose();
  }
  return -(steps.transpose() * grad);
}

JStatistic j_statistic(const GmlmFit& fit, std::size_t total_size) {
  return {static_cast<double>(total_size) * fit.objective, fit.df};
}

}  // namespace gmlm
