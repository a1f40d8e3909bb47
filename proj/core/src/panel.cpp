#include "gmlm/panel.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <utility>

#include "gmlm/error.hpp"
#include "gmlm/parallel.hpp"
#include "gmlm/random.hpp"

namespace gmlm {

namespace {

constexpr Arm kDiscounts[] = {Arm::d20, Arm::d50};
constexpr Stratum kStrata[] = {Stratum::user, Stratum::nonuser};
constexpr OutcomeType kOutcomes[] = {OutcomeType::integrated,
                                     OutcomeType::nonintegrated};

std::uint64_t selector_key(OutcomeType o, Arm d, Stratum s) {
  return stream_key({static_cast<std::uint64_t>(o) + 1,
                     static_cast<std::uint64_t>(d) + 1,
                     static_cast<std::uint64_t>(s) + 1});
}

std::uint64_t cell_key(OutcomeType o, const std::string& period, Arm d,
                       Stratum s) {
  return stream_key({selector_key(o, d, s), hash_label(period)});
}

struct Selector {
  OutcomeType outcome;
  Arm discount;
  Stratum stratum;
};

struct Cell {
  OutcomeType outcome;
  std::string period;
  Arm discount;
  Stratum stratum;
};

int stratum_rank(const std::optional<Stratum>& s) {
  return s ? static_cast<int>(*s) : 2;
}

}  // namespace

std::string to_string(Arm a) {
  switch (a) {
    case Arm::control: return "control";
    case Arm::d20: return "d20";
    case Arm::d50: return "d50";
  }
  return "?";
}

std::string to_string(Stratum s) {
  return s == Stratum::user ? "user" : "nonuser";
}

std::string to_string(OutcomeType o) {
  return o == OutcomeType::integrated ? "integrated" : "nonintegrated";
}

std::string to_string(CellStatus s) {
  switch (s) {
    case CellStatus::ok: return "ok";
    case CellStatus::unavailable: return "unavailable";
    case CellStatus::failed: return "failed";
  }
  return "?";
}

Arm parse_arm(const std::string& s) {
  if (s == "control") return Arm::control;
  if (s == "d20") return Arm::d20;
  if (s == "d50") return Arm::d50;
  fail(ErrorKind::data_error,
       "unknown arm '" + s + "' (expected control, d20 or d50)");
}

Stratum parse_stratum(const std::string& s) {
  if (s == "user") return Stratum::user;
  if (s == "nonuser") return Stratum::nonuser;
  fail(ErrorKind::data_error,
       "unknown stratum '" + s + "' (expected user or nonuser)");
}

OutcomeType parse_outcome_type(const std::string& s) {
  if (s == "integrated") return OutcomeType::integrated;
  if (s == "nonintegrated") return OutcomeType::nonintegrated;
  fail(ErrorKind::data_error, "unknown outcome type '" + s +
                                  "' (expected integrated or nonintegrated)");
}

// ------------------------------------------------------------ dataset

PanelDataset::PanelDataset(std::vector<PanelRecord> records) {
  records_.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    try {
      add(std::move(records[i]));
    } catch (const Error& e) {
      fail(ErrorKind::data_error,
           "record " + std::to_string(i + 1) + ": " + e.what());
    }
  }
}

void PanelDataset::add(PanelRecord r) {
  require(!r.unit_id.empty(), ErrorKind::data_error, "empty unit_id");
  require(!r.period.empty(), ErrorKind::data_error, "empty period");
  require(std::isfinite(r.count) && r.count >= 0.0, ErrorKind::data_error,
          "count must be a finite nonnegative number");
  auto key = std::make_tuple(r.unit_id, r.period, r.outcome);
  if (auto it = keys_.find(key); it != keys_.end()) {
    fail(ErrorKind::data_error,
         "duplicate (unit_id, period, outcome_type) = (" + r.unit_id + ", " +
             r.period + ", " + to_string(r.outcome) + "), first seen at record " +
             std::to_string(it->second + 1));
  }
  if (auto it = units_.find(r.unit_id); it != units_.end()) {
    require(it->second.arm == r.arm && it->second.stratum == r.stratum,
            ErrorKind::data_error,
            "unit " + r.unit_id + " has inconsistent arm or stratum");
  } else {
    units_.emplace(r.unit_id, UnitInfo{r.arm, r.stratum});
  }
  keys_.emplace(std::move(key), records_.size());
  records_.push_back(std::move(r));
}

std::vector<std::string> PanelDataset::periods() const {
  std::set<std::string> s;
  for (const auto& r : records_) s.insert(r.period);
  return {s.begin(), s.end()};
}

std::vector<double> PanelDataset::outcomes(const std::string& period,
                                           OutcomeType outcome, Arm arm,
                                           Stratum stratum) const {
  std::vector<double> out;
  for (const auto& r : records_) {
    if (r.period == period && r.outcome == outcome && r.arm == arm &&
        r.stratum == stratum) {
      out.push_back(r.count);
    }
  }
  return out;
}

// ------------------------------------------------------------ analysis

std::vector<PlaceboPeriod> placebo_periods(const PanelDataset& data,
                                           const std::string& cutover,
                                           OutcomeType outcome, Arm discount,
                                           Stratum stratum, std::size_t T0) {
  std::vector<std::string> pre;
  for (const auto& p : data.periods()) {
    if (p < cutover) pre.push_back(p);
  }
  if (T0 > 0 && pre.size() > T0) {
    pre.erase(pre.begin(), pre.end() - static_cast<std::ptrdiff_t>(T0));
  }
  const std::uint64_t sel = selector_key(outcome, discount, stratum);
  std::vector<PlaceboPeriod> out;
  for (const auto& p : pre) {
    auto t = data.outcomes(p, outcome, discount, stratum);
    auto c = data.outcomes(p, outcome, Arm::control, stratum);
    if (t.empty() || c.empty()) continue;
    PlaceboPeriod pp{p, Sample(std::move(t)), Sample(std::move(c)),
                     stream_key({sel, hash_label(p)})};
    out.push_back(std::move(pp));
  }
  return out;
}

PanelReport analyze_panel(const PanelDataset& data, const PanelConfig& cfg) {
  require(!data.empty(), ErrorKind::data_error, "analyze_panel: empty panel");
  require(!cfg.cutover.empty(), ErrorKind::invalid_argument,
          "analyze_panel: cutover period is not set");
  cfg.bootstrap.validate();

  PanelReport report;
  for (const auto& p : data.periods()) {
    (p < cfg.cutover ? report.pre_periods : report.post_periods).push_back(p);
  }
  require(!report.post_periods.empty(), ErrorKind::data_error,
          "analyze_panel: no period at or after the cutover " + cfg.cutover);

  std::set<OutcomeType> outcomes;
  std::set<Arm> discounts;
  std::set<Stratum> strata;
  for (const auto& r : data.records()) {
    outcomes.insert(r.outcome);
    if (r.arm != Arm::control) discounts.insert(r.arm);
    strata.insert(r.stratum);
  }

  // Hyperparameters per (outcome, discount, stratum).
  std::vector<Selector> selectors;
  for (OutcomeType o : kOutcomes) {
    if (!outcomes.count(o)) continue;
    for (Arm d : kDiscounts) {
      if (!discounts.count(d)) continue;
      for (Stratum s : kStrata) {
        if (strata.count(s)) selectors.push_back({o, d, s});
      }
    }
  }
  std::vector<TuningChoice> choices(selectors.size());
  parallel_for(selectors.size(), cfg.threads, [&](std::size_t i) {
    const Selector& sel = selectors[i];
    TuningChoice& ch = choices[i];
    ch.outcome = sel.outcome;
    ch.discount = sel.discount;
    ch.stratum = sel.stratum;
    if (cfg.order) {
      ch.ok = true;
      ch.chosen = {*cfg.order, cfg.trim};
      return;
    }
    try {
      const auto periods = placebo_periods(data, cfg.cutover, sel.outcome,
                                           sel.discount, sel.stratum, cfg.T0);
      require(!periods.empty(), ErrorKind::tuning_failed,
              "no pre-treatment period with data in both arms");
      const TuningReport tr = select_hyperparams(periods, cfg.grid, cfg.tuning);
      ch.ok = true;
      ch.chosen = tr.chosen;
      ch.criterion = tr.chosen_criterion;
      ch.T0 = tr.T0;
    } catch (const Error& e) {
      if (!e.is_numerical()) throw;
      ch.ok = false;
      ch.message = e.what();
    }
  });
  if (!cfg.order) report.tuning = choices;
  auto choice_for = [&](OutcomeType o, Arm d, Stratum s) -> const TuningChoice& {
    for (const auto& c : choices) {
      if (c.outcome == o && c.discount == d && c.stratum == s) return c;
    }
    fail(ErrorKind::invalid_state, "analyze_panel: missing selector");
  };

  // Per-stratum cells.
  std::vector<Cell> cells;
  for (const Selector& sel : selectors) {
    for (const auto& p : report.post_periods) {
      cells.push_back({sel.outcome, p, sel.discount, sel.stratum});
    }
  }
  std::vector<PanelRow> rows(cells.size());
  parallel_for(cells.size(), cfg.threads, [&](std::size_t i) {
    const Cell& c = cells[i];
    PanelRow& row = rows[i];
    row.outcome = c.outcome;
    row.period = c.period;
    row.discount = c.discount;
    row.stratum = c.stratum;
    const auto t = data.outcomes(c.period, c.outcome, c.discount, c.stratum);
    const auto k = data.outcomes(c.period, c.outcome, Arm::control, c.stratum);
    row.effect.n_treated = t.size();
    row.effect.n_control = k.size();
    if (t.size() < 2 || k.size() < 2) {
      row.status = CellStatus::unavailable;
      row.message = "fewer than two observations in an arm";
      return;
    }
    const Sample treated(t);
    const Sample control(k);
    row.baseline = nonparametric_effect(treated, control);
    row.has_baseline = true;
    const TuningChoice& ch = choice_for(c.outcome, c.discount, c.stratum);
    if (!ch.ok) {
      row.status = CellStatus::failed;
      row.message = "tuning failed: " + ch.message;
      return;
    }
    EffectConfig ec{ch.chosen.order, ch.chosen.trim, cfg.bootstrap};
    ec.bootstrap.stream = cell_key(c.outcome, c.period, c.discount, c.stratum);
    try {
      row.effect = estimate_effect(treated, control, ec);
      row.status = CellStatus::ok;
    } catch (const Error& e) {
      if (!e.is_numerical()) throw;
      row.status = CellStatus::failed;
      row.message = e.what();
      row.effect.treated_mean = treated.mean();
      row.effect.control_mean = control.mean();
      row.effect.R_used = ch.chosen.order;
      row.effect.trim_used = ch.chosen.trim;
    }
  });

  // Aggregates over strata, weights (n_d,u + n_0,u) / sum_u.
  for (OutcomeType o : kOutcomes) {
    if (!outcomes.count(o)) continue;
    for (Arm d : kDiscounts) {
      if (!discounts.count(d)) continue;
      for (const auto& p : report.post_periods) {
        std::vector<const PanelRow*> parts;
        for (const auto& r : rows) {
          if (r.outcome == o && r.discount == d && r.period == p) {
            parts.push_back(&r);
          }
        }
        PanelRow agg;
        agg.outcome = o;
        agg.period = p;
        agg.discount = d;
        double total = 0.0;
        std::vector<double> w;
        bool all_ok = true;
        bool all_baseline = true;
        for (const PanelRow* r : parts) {
          const double n = static_cast<double>(r->effect.n_treated +
                                               r->effect.n_control);
          w.push_back(n);
          total += n;
          all_ok = all_ok && r->status == CellStatus::ok;
          all_baseline = all_baseline && r->has_baseline;
          agg.effect.n_treated += r->effect.n_treated;
          agg.effect.n_control += r->effect.n_control;
        }
        if (total > 0.0) {
          for (double& x : w) x /= total;
        }
        agg.weights = w;
        agg.effect.j_pvalue = std::nan("");
        agg.effect.j_stat = std::nan("");
        if (all_baseline && total > 0.0) {
          std::vector<StratumEffect> dm, sd;
          for (const PanelRow* r : parts) {
            dm.push_back({r->baseline.diff_means, r->baseline.diff_means_se});
            sd.push_back(
                {r->baseline.sd_ratio_minus_one, r->baseline.sd_ratio_se});
          }
          const auto a = aggregate_strata(dm, w);
          const auto b = aggregate_strata(sd, w);
          agg.baseline = {a.value, a.se, b.value, b.se};
          agg.has_baseline = true;
        }
        if (!all_ok || parts.empty()) {
          bool any_failed = false;
          for (const PanelRow* r : parts) {
            any_failed = any_failed || r->status == CellStatus::failed;
          }
          agg.status =
              any_failed ? CellStatus::failed : CellStatus::unavailable;
          agg.message = "a stratum cell is not available";
        } else {
          std::vector<StratumEffect> de, pe;
          double cm = 0.0;
          double tm = 0.0;
          for (std::size_t i = 0; i < parts.size(); ++i) {
            de.push_back({parts[i]->effect.delta, parts[i]->effect.delta_se});
            pe.push_back({parts[i]->effect.psi, parts[i]->effect.psi_se});
            cm += w[i] * parts[i]->effect.control_mean;
            tm += w[i] * parts[i]->effect.treated_mean;
          }
          const auto a = aggregate_strata(de, w);
          const auto b = aggregate_strata(pe, w);
          agg.effect.delta = a.value;
          agg.effect.delta_se = a.se;
          agg.effect.psi = b.value;
          agg.effect.psi_se = b.se;
          agg.effect.control_mean = cm;
          agg.effect.treated_mean = tm;
          agg.effect.alpha = std::nan("");
          agg.effect.sigma = std::nan("");
          agg.effect.alpha_se = std::nan("");
          agg.effect.sigma_se = std::nan("");
          agg.status = CellStatus::ok;
        }
        rows.push_back(std::move(agg));
      }
    }
  }

  std::stable_sort(rows.begin(), rows.end(),
                   [](const PanelRow& a, const PanelRow& b) {
                     return std::make_tuple(a.outcome, a.period, a.discount,
                                            stratum_rank(a.stratum)) <
                            std::make_tuple(b.outcome, b.period, b.discount,
                                            stratum_rank(b.stratum));
                   });
  report.rows = std::move(rows);

  for (OutcomeType o : kOutcomes) {
    if (!outcomes.count(o)) continue;
    for (const auto& p : data.periods()) {
      for (Stratum s : kStrata) {
        const auto c = data.outcomes(p, o, Arm::control, s);
        if (c.empty()) continue;
        report.control_means.push_back(
            {o, p, s, Sample(c).mean(), c.size()});
      }
    }
  }
  return report;
}

// ------------------------------------------------------------ synthetic

PanelDataset synthetic_panel(const SyntheticPanelSpec& spec) {
  require(spec.units_per_group >= 1, ErrorKind::invalid_argument,
          "synthetic_panel: units_per_group must be positive");
  require(spec.log_sd >= 0.0, ErrorKind::invalid_argument,
          "synthetic_panel: log_sd must be nonnegative");
  std::set<std::string> post(spec.post_periods.begin(), spec.post_periods.end());
  auto planted = [&](OutcomeType o, const std::string& p, Arm d,
                     Stratum s) -> std::pair<double, double> {
    for (const auto& e : spec.effects) {
      if (e.outcome == o && e.period == p && e.discount == d && e.stratum == s) {
        return {e.alpha, e.sigma};
      }
    }
    return {0.0, 1.0};
  };
  for (const auto& e : spec.effects) {
    require(e.sigma > 0.0, ErrorKind::invalid_argument,
            "synthetic_panel: planted sigma must be positive");
  }

  std::vector<std::string> periods = spec.pre_periods;
  periods.insert(periods.end(), spec.post_periods.begin(),
                 spec.post_periods.end());
  PanelDataset data;
  for (Arm a : {Arm::control, Arm::d20, Arm::d50}) {
    for (Stratum s : kStrata) {
      const double mu = s == Stratum::user ? spec.log_mean_user
                                           : spec.log_mean_nonuser;
      for (std::size_t i = 0; i < spec.units_per_group; ++i) {
        const std::string unit =
            to_string(a) + "-" + to_string(s) + "-" + std::to_string(i);
        for (const auto& p : periods) {
          for (OutcomeType o : kOutcomes) {
            auto rng = make_stream({spec.seed,
                                    purpose(StreamPurpose::synthetic_panel),
                                    hash_label(unit), hash_label(p),
                                    static_cast<std::uint64_t>(o)});
            std::normal_distribution<double> z(0.0, 1.0);
            double y = std::exp(mu + spec.log_sd * z(rng));
            if (a != Arm::control && post.count(p)) {
              const auto [alpha, sigma] = planted(o, p, a, s);
              y = alpha + sigma * y;
              require(y >= 0.0, ErrorKind::invalid_argument,
                      "synthetic_panel: planted effect gives a negative count");
            }
            data.add({unit, a, s, p, o, y});
          }
        }
      }
    }
  }
  return data;
}

}  // namespace gmlm
