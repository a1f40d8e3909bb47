#pragma once

// Report tables with an aligned text rendering (6 significant digits) and a
// JSON twin at full precision.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "gmlm/estimator.hpp"
#include "gmlm/learning.hpp"
#include "gmlm/montecarlo.hpp"
#include "gmlm/panel.hpp"
#include "gmlm/quantile_core.hpp"
#include "gmlm/tuning.hpp"

namespace gmlm {

// Empty cells render as "-" and null.
using Cell = std::variant<std::monostate, std::string, double, std::int64_t>;

struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add_row(std::vector<Cell> row);
};

struct Report {
  std::string command;
  std::optional<std::uint64_t> seed;
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<Table> tables;

  std::string to_text() const;
  std::string to_json() const;
};

// "%.6g"; NaN and infinities as nan / inf / -inf.
std::string format_number(double x);

Table lmoments_table(const LMomentVector& lm);
Table fit_table(const GmlmFit& fit, const ModelSpec& model,
                std::optional<double> j_pvalue);
Table panel_table(const PanelReport& report);
Table control_means_table(const PanelReport& report);
Table panel_tuning_table(const PanelReport& report);
Table tuning_table(const TuningReport& report);
Table mc_table(const McResult& result);
Table decomposition_table(const Decomposition& d);

}  // namespace gmlm
