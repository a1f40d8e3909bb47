#pragma once

// Panel experiments: long-format records of per-unit outcomes by period and
// the cell-by-cell analysis over (outcome, period, discount, stratum).

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "gmlm/effects.hpp"
#include "gmlm/tuning.hpp"

namespace gmlm {

enum class Arm { control, d20, d50 };
enum class Stratum { user, nonuser };
enum class OutcomeType { integrated, nonintegrated };

std::string to_string(Arm a);
std::string to_string(Stratum s);
std::string to_string(OutcomeType o);
// Throw data-error on an unknown label.
Arm parse_arm(const std::string& s);
Stratum parse_stratum(const std::string& s);
OutcomeType parse_outcome_type(const std::string& s);

struct PanelRecord {
  std::string unit_id;
  Arm arm = Arm::control;
  Stratum stratum = Stratum::user;
  std::string period;  // opaque label, ordered lexicographically
  OutcomeType outcome = OutcomeType::integrated;
  double count = 0.0;

  friend bool operator==(const PanelRecord&, const PanelRecord&) = default;
};

// Records with (unit, period, outcome) unique and a single arm and stratum
// per unit.
class PanelDataset {
 public:
  PanelDataset() = default;
  // Throws data-error naming the first offending record.
  explicit PanelDataset(std::vector<PanelRecord> records);

  // Appends one record; throws data-error if it breaks an invariant, leaving
  // the dataset unchanged.
  void add(PanelRecord record);

  const std::vector<PanelRecord>& records() const noexcept { return records_; }
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }
  // Distinct period labels, ascending.
  std::vector<std::string> periods() const;

  // Outcomes of one (period, outcome, arm, stratum) group.
  std::vector<double> outcomes(const std::string& period, OutcomeType outcome,
                               Arm arm, Stratum stratum) const;

  friend bool operator==(const PanelDataset& a, const PanelDataset& b) {
    return a.records_ == b.records_;
  }

 private:
  struct UnitInfo {
    Arm arm;
    Stratum stratum;
  };
  std::vector<PanelRecord> records_;
  std::map<std::string, UnitInfo> units_;
  std::map<std::tuple<std::string, std::string, OutcomeType>, std::size_t>
      keys_;
};

struct PanelConfig {
  // Periods with label >= cutover are post-treatment.
  std::string cutover;
  // Fixed R and trim; when unset, R and trim are tuned per
  // (outcome, discount, stratum) on the last T0 pre-treatment periods.
  std::optional<std::size_t> order;
  TrimRange trim;
  HyperGrid grid;
  std::size_t T0 = 0;  // 0: every pre-treatment period
  TuningConfig tuning;
  BootstrapConfig bootstrap;
  std::size_t threads = 1;
};

enum class CellStatus { ok, unavailable, failed };

std::string to_string(CellStatus s);

struct PanelRow {
  OutcomeType outcome = OutcomeType::integrated;
  std::string period;
  Arm discount = Arm::d20;
  std::optional<Stratum> stratum;  // empty for the aggregate over strata
  CellStatus status = CellStatus::ok;
  std::string message;
  EffectEstimate effect;  // aggregate rows fill delta, psi and their ses
  NonparametricEffect baseline;
  bool has_baseline = false;
  std::vector<double> weights;  // aggregate rows: (user, nonuser) shares
};

struct ControlMean {
  OutcomeType outcome = OutcomeType::integrated;
  std::string period;
  Stratum stratum = Stratum::user;
  double mean = 0.0;
  std::size_t n = 0;
};

struct TuningChoice {
  OutcomeType outcome = OutcomeType::integrated;
  Arm discount = Arm::d20;
  Stratum stratum = Stratum::user;
  bool ok = false;
  std::string message;
  HyperPoint chosen;
  double criterion = 0.0;
  std::size_t T0 = 0;
};

struct PanelReport {
  std::vector<PanelRow> rows;  // sorted by (outcome, period, discount, stratum)
  std::vector<ControlMean> control_means;
  std::vector<TuningChoice> tuning;
  std::vector<std::string> pre_periods;
  std::vector<std::string> post_periods;
};

// Fits every post-treatment (outcome, period, discount, stratum) cell on its
// own: optimal weight, location-scale fit, average effect, dispersion change,
// J-test. Aggregate rows weight strata by (n_d,u + n_0,u) / sum_u. Empty or
// single-observation cells are marked unavailable, numerical failures are
// marked failed; neither aborts the run.
PanelReport analyze_panel(const PanelDataset& data, const PanelConfig& cfg);

// Placebo periods for one (outcome, discount, stratum) selector: the last T0
// pre-treatment periods (all of them when T0 = 0), arms by assignment.
std::vector<PlaceboPeriod> placebo_periods(const PanelDataset& data,
                                           const std::string& cutover,
                                           OutcomeType outcome, Arm discount,
                                           Stratum stratum, std::size_t T0);

// Planted location-scale effect for one (outcome, period, discount, stratum)
// cell of a synthetic panel.
struct PlantedEffect {
  OutcomeType outcome = OutcomeType::integrated;
  std::string period;
  Arm discount = Arm::d20;
  Stratum stratum = Stratum::user;
  double alpha = 0.0;
  double sigma = 1.0;
};

// Synthetic panel: each unit's untreated outcome in each period is an
// independent log-normal draw (per-stratum log-mean); treated units in
// post-treatment periods get alpha + sigma * Y(0) for their cell's planted
// effect (null where none is given).
struct SyntheticPanelSpec {
  std::vector<std::string> pre_periods{"2018-09-03", "2018-09-17",
                                       "2018-10-01", "2018-10-15"};
  std::vector<std::string> post_periods{"2018-11-26", "2018-12-10"};
  std::size_t units_per_group = 200;  // per (arm, stratum)
  double log_mean_user = 1.0;
  double log_mean_nonuser = 0.0;
  double log_sd = 0.8;
  std::vector<PlantedEffect> effects;
  std::uint64_t seed = kDefaultSeed;
};

PanelDataset synthetic_panel(const SyntheticPanelSpec& spec);

}  // namespace gmlm
