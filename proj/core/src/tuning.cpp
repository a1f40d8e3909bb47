#include "gmlm/tuning.hpp"

#include <algorithm>
#include <bit>
#include <limits>
#include <utility>

#include "gmlm/error.hpp"
#include "gmlm/random.hpp"

namespace gmlm {

namespace {

bool wider_first(const TrimRange& a, const TrimRange& b) {
  if (a.width() != b.width()) return a.width() > b.width();
  return a.lo() < b.lo();
}

bool informative(const PlaceboPeriod& p) {
  return p.treated.size() >= 2 && p.control.size() >= 2 &&
         !p.treated.is_constant() && !p.control.is_constant();
}

bool identical(const Sample& a, const Sample& b) {
  return std::ranges::equal(a.values(), b.values());
}

std::uint64_t trim_stream(std::uint64_t key, const TrimRange& trim) {
  return stream_key({key, std::bit_cast<std::uint64_t>(trim.lo()),
                     std::bit_cast<std::uint64_t>(trim.hi())});
}

double squared_distance(const Eigen::VectorXd& theta,
                        const Eigen::VectorXd& null) {
  return (theta - null).squaredNorm();
}

// Per-period cache of the optimal-weight ingredients for one trim range: the
// covariance at the largest order and the first-step parameter.
struct WeightCache {
  Eigen::VectorXd first_step;
  Eigen::MatrixXd cov;
};

WeightCache build_cache(const PlaceboPeriod& period, const TrimRange& trim,
                        std::size_t max_order, const TuningConfig& cfg) {
  WeightCache c;
  c.first_step = first_step_parameter(period.treated, period.control, cfg.model);
  BootstrapConfig bc = cfg.bootstrap;
  bc.stream = trim_stream(period.key, trim);
  c.cov = model_discrepancy_covariance(period.treated, period.control,
                                       cfg.model, c.first_step, max_order,
                                       trim, bc);
  return c;
}

Eigen::VectorXd fit_with_weight(const PlaceboPeriod& period,
                                const HyperPoint& h, const TuningConfig& cfg,
                                WeightMatrix weight) {
  require(h.order >= cfg.model.dim, ErrorKind::invalid_argument,
          "placebo_fit: R must be at least the parameter dimension");
  if (identical(period.treated, period.control)) {
    return cfg.model.null_parameter;
  }
  GmlmProblem problem{period.treated, period.control, h.order, h.trim,
                      std::move(weight)};
  GmlmFit f = fit(problem, cfg.model);
  require(f.converged, ErrorKind::degenerate_design,
          "placebo_fit: fit did not converge");
  return f.theta;
}

}  // namespace

HyperGrid::HyperGrid()
    : HyperGrid({2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16},
                {TrimRange{}}) {}

HyperGrid::HyperGrid(std::vector<std::size_t> orders,
                     std::vector<TrimRange> trims)
    : orders_(std::move(orders)), trims_(std::move(trims)) {
  std::sort(orders_.begin(), orders_.end());
  orders_.erase(std::unique(orders_.begin(), orders_.end()), orders_.end());
  std::sort(trims_.begin(), trims_.end(), wider_first);
  trims_.erase(std::unique(trims_.begin(), trims_.end()), trims_.end());
  require(!orders_.empty(), ErrorKind::invalid_argument,
          "HyperGrid: no orders");
  require(!trims_.empty(), ErrorKind::invalid_argument,
          "HyperGrid: no trim ranges");
  for (std::size_t r : orders_) {
    require(r >= 1 && r <= LegendreBasis::max_order,
            ErrorKind::invalid_argument, "HyperGrid: order out of range");
  }
}

std::vector<HyperPoint> HyperGrid::points() const {
  std::vector<HyperPoint> out;
  out.reserve(orders_.size() * trims_.size());
  for (std::size_t r : orders_) {
    for (const TrimRange& t : trims_) out.push_back({r, t});
  }
  return out;
}

std::string to_string(TuningWeight w) {
  return w == TuningWeight::identity ? "identity" : "optimal";
}

TuningWeight parse_tuning_weight(const std::string& name) {
  if (name == "identity") return TuningWeight::identity;
  if (name == "optimal") return TuningWeight::optimal;
  fail(ErrorKind::invalid_argument, "unknown tuning weight '" + name + "'");
}

PlaceboPeriod make_placebo_period(std::string label, Sample treated,
                                  Sample control) {
  const std::uint64_t key = hash_label(label);
  return {std::move(label), std::move(treated), std::move(control), key};
}

Eigen::VectorXd placebo_fit(const PlaceboPeriod& period, const HyperPoint& h,
                            const TuningConfig& cfg) {
  if (cfg.weighting == TuningWeight::identity) {
    return fit_with_weight(period, h, cfg, WeightMatrix{});
  }
  const WeightCache c = build_cache(period, h.trim, h.order, cfg);
  return fit_with_weight(period, h, cfg, WeightMatrix::pseudo_inverse_of(c.cov));
}

TuningReport select_hyperparams(std::span<const PlaceboPeriod> periods,
                                const HyperGrid& grid,
                                const TuningConfig& cfg) {
  require(!periods.empty(), ErrorKind::invalid_argument,
          "select_hyperparams: no pre-treatment periods");
  require(grid.min_order() >= cfg.model.dim, ErrorKind::invalid_argument,
          "select_hyperparams: grid order below the parameter dimension");
  if (cfg.weighting == TuningWeight::optimal) cfg.bootstrap.validate();

  TuningReport report;
  std::vector<const PlaceboPeriod*> used;
  for (const PlaceboPeriod& p : periods) {
    if (informative(p) || identical(p.treated, p.control)) {
      used.push_back(&p);
    } else {
      report.skipped_periods.push_back(p.label);
    }
  }
  std::sort(used.begin(), used.end(),
            [](const PlaceboPeriod* a, const PlaceboPeriod* b) {
              return a->label < b->label;
            });
  for (const PlaceboPeriod* p : used) report.periods.push_back(p->label);
  report.T0 = used.size();
  if (used.empty()) {
    fail(ErrorKind::tuning_failed,
         "select_hyperparams: every pre-treatment period is degenerate");
  }

  const std::vector<HyperPoint> points = grid.points();
  report.points.resize(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    report.points[i].point = points[i];
    report.points[i].per_period.assign(
        used.size(), std::numeric_limits<double>::quiet_NaN());
    report.points[i].feasible = true;
  }

  for (std::size_t t = 0; t < used.size(); ++t) {
    const PlaceboPeriod& period = *used[t];
    for (const TrimRange& trim : grid.trims()) {
      WeightCache cache;
      bool cache_ok = true;
      if (cfg.weighting == TuningWeight::optimal &&
          !identical(period.treated, period.control)) {
        try {
          cache = build_cache(period, trim, grid.max_order(), cfg);
        } catch (const Error& e) {
          if (!e.is_numerical()) throw;
          cache_ok = false;
        }
      }
      for (std::size_t i = 0; i < points.size(); ++i) {
        if (!(points[i].trim == trim)) continue;
        GridPointReport& gp = report.points[i];
        if (!cache_ok) {
          gp.feasible = false;
          continue;
        }
        try {
          WeightMatrix w;
          if (cache.cov.size() > 0) {
            const auto r = static_cast<Eigen::Index>(points[i].order);
            w = WeightMatrix::pseudo_inverse_of(cache.cov.topLeftCorner(r, r));
          }
          const Eigen::VectorXd theta =
              fit_with_weight(period, points[i], cfg, std::move(w));
          if (!cfg.model.is_admissible(theta)) {
            gp.feasible = false;
            continue;
          }
          gp.per_period[t] = squared_distance(theta, cfg.model.null_parameter);
        } catch (const Error& e) {
          if (!e.is_numerical()) throw;
          gp.feasible = false;
        }
      }
    }
  }

  const HyperPoint* best = nullptr;
  double best_value = std::numeric_limits<double>::infinity();
  for (GridPointReport& gp : report.points) {
    if (!gp.feasible) {
      gp.criterion = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    std::vector<double> sorted = gp.per_period;
    std::sort(sorted.begin(), sorted.end());
    double sum = 0.0;
    for (double v : sorted) sum += v;
    gp.criterion = sum / static_cast<double>(used.size());
    if (gp.criterion < best_value) {
      best_value = gp.criterion;
      best = &gp.point;
    }
  }
  if (best == nullptr) {
    fail(ErrorKind::tuning_failed,
         "select_hyperparams: no feasible grid point");
  }
  report.chosen = *best;
  report.chosen_criterion = best_value;
  return report;
}

}  // namespace gmlm
