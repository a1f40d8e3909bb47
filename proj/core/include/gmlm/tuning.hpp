#pragma once

// Hyperparameter selection (number of L-moments, trimming) by placebo
// estimation on pre-treatment periods: pick the grid point whose placebo
// estimates stay closest to the null-effect parameter.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "gmlm/estimator.hpp"
#include "gmlm/weighting.hpp"

namespace gmlm {

struct HyperPoint {
  std::size_t order = 2;
  TrimRange trim;

  friend bool operator==(const HyperPoint&, const HyperPoint&) = default;
};

class HyperGrid {
 public:
  // R in 2..16, no trimming.
  HyperGrid();
  HyperGrid(std::vector<std::size_t> orders, std::vector<TrimRange> trims);

  // Tie-break order: smaller R first, then wider trim, then lower p_lo.
  std::vector<HyperPoint> points() const;
  const std::vector<std::size_t>& orders() const noexcept { return orders_; }
  const std::vector<TrimRange>& trims() const noexcept { return trims_; }
  std::size_t max_order() const noexcept { return orders_.back(); }
  std::size_t min_order() const noexcept { return orders_.front(); }

 private:
  std::vector<std::size_t> orders_;
  std::vector<TrimRange> trims_;
};

enum class TuningWeight { identity, optimal };

std::string to_string(TuningWeight w);
TuningWeight parse_tuning_weight(const std::string& name);

struct TuningConfig {
  ModelSpec model = ModelSpec::location_scale();
  TuningWeight weighting = TuningWeight::optimal;
  BootstrapConfig bootstrap{200, kDefaultSeed, 0};
};

// Outcomes of one pre-treatment period, split by post-treatment assignment.
struct PlaceboPeriod {
  std::string label;
  Sample treated;
  Sample control;
  // Keys the bootstrap streams; defaults to a hash of the label so results do
  // not depend on the position of the period in the list.
  std::uint64_t key = 0;
};

PlaceboPeriod make_placebo_period(std::string label, Sample treated,
                                  Sample control);

// Placebo GMLM estimate for one period and grid point. Throws the fit's
// numerical error (degenerate-design, non-monotone-fit) when infeasible.
Eigen::VectorXd placebo_fit(const PlaceboPeriod& period, const HyperPoint& h,
                            const TuningConfig& cfg);

struct GridPointReport {
  HyperPoint point;
  // ||theta(t; h) - null||^2 per used period; NaN where infeasible.
  std::vector<double> per_period;
  double criterion = 0.0;
  bool feasible = false;
};

struct TuningReport {
  HyperPoint chosen;
  double chosen_criterion = 0.0;
  std::vector<GridPointReport> points;  // in grid tie-break order
  std::vector<std::string> periods;     // periods used
  std::vector<std::string> skipped_periods;  // constant or tiny arms
  std::size_t T0 = 0;
};

// h* = argmin_h (1/T0) sum_t ||theta(t; h) - null||^2 over the feasible grid
// points, first in grid order on exact ties. A period whose arms are constant
// or have fewer than two observations carries no information about any grid
// point and is skipped; a grid point that fails on any used period is
// infeasible. Throws tuning-failed when nothing is feasible.
TuningReport select_hyperparams(std::span<const PlaceboPeriod> periods,
                                const HyperGrid& grid,
                                const TuningConfig& cfg);

}  // namespace gmlm
