#pragma once

// CSV ingestion and JSON run configurations.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "gmlm/learning.hpp"
#include "gmlm/montecarlo.hpp"
#include "gmlm/panel.hpp"

namespace gmlm {

inline constexpr int kSchemaVersion = 1;

// Header `unit_id,arm,stratum,period,outcome_type,count`. Errors are
// data-errors citing `source:line`.
PanelDataset parse_panel_csv(const std::string& path);
PanelDataset parse_panel_csv(std::istream& in, const std::string& source);

// Round-trips through parse_panel_csv (counts at full precision).
void write_panel_csv(const PanelDataset& data, std::ostream& out);

// One value per line, the first line may be a header. Blank lines are
// skipped; with several comma-separated columns the first is read.
std::vector<double> read_values_csv(const std::string& path);
std::vector<double> read_values_csv(std::istream& in, const std::string& source);

// Monte Carlo configuration. The population is either read from a file or
// synthetic; `seed` seeds both unless the synthetic block sets its own.
struct McRunConfig {
  McConfig mc;
  std::optional<std::string> population_file;
  SyntheticPopulationSpec synthetic;
};

McRunConfig parse_mc_config(const std::string& json_text,
                            const std::string& source = "config");

struct PanelRunConfig {
  PanelConfig panel;
};

PanelRunConfig parse_panel_config(const std::string& json_text,
                                  const std::string& source = "config");

DecompositionInput parse_decomposition_config(
    const std::string& json_text, const std::string& source = "config");

// Whole file as a string; data-error when it cannot be read.
std::string read_text_file(const std::string& path);

}  // namespace gmlm
