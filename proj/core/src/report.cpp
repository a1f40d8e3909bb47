#include "gmlm/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "gmlm/error.hpp"
#include "gmlm/io.hpp"

namespace gmlm {

namespace {

using nlohmann::json;

std::string render(const Cell& c) {
  if (std::holds_alternative<std::monostate>(c)) return "-";
  if (const auto* s = std::get_if<std::string>(&c)) return *s;
  if (const auto* d = std::get_if<double>(&c)) return format_number(*d);
  return std::to_string(std::get<std::int64_t>(c));
}

json to_json_cell(const Cell& c) {
  if (std::holds_alternative<std::monostate>(c)) return nullptr;
  if (const auto* s = std::get_if<std::string>(&c)) return *s;
  if (const auto* d = std::get_if<double>(&c)) {
    if (!std::isfinite(*d)) return nullptr;
    return *d;
  }
  return std::get<std::int64_t>(c);
}

Cell num(double x) { return x; }
Cell count(std::size_t n) { return static_cast<std::int64_t>(n); }

std::string trim_label(const TrimRange& t) {
  return "[" + format_number(t.lo()) + "," + format_number(t.hi()) + "]";
}

}  // namespace

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

void Table::add_row(std::vector<Cell> row) {
  require(row.size() == columns.size(), ErrorKind::invalid_argument,
          "Table " + name + ": row width differs from the header");
  rows.push_back(std::move(row));
}

std::string Report::to_text() const {
  std::ostringstream out;
  out << command << '\n';
  if (seed) out << "seed: " << *seed << '\n';
  for (const auto& [k, v] : meta) out << k << ": " << v << '\n';
  for (const Table& t : tables) {
    out << '\n' << t.name << '\n';
    std::vector<std::size_t> width(t.columns.size());
    std::vector<std::vector<std::string>> cells;
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
      width[c] = t.columns[c].size();
    }
    for (const auto& row : t.rows) {
      std::vector<std::string> r;
      for (std::size_t c = 0; c < row.size(); ++c) {
        r.push_back(render(row[c]));
        width[c] = std::max(width[c], r.back().size());
      }
      cells.push_back(std::move(r));
    }
    auto line = [&](const std::vector<std::string>& r) {
      for (std::size_t c = 0; c < r.size(); ++c) {
        if (c) out << "  ";
        const bool last = c + 1 == r.size();
        out << std::string(width[c] - r[c].size(), ' ') << r[c];
        if (last) out << '\n';
      }
    };
    line(t.columns);
    for (const auto& r : cells) line(r);
  }
  return out.str();
}

std::string Report::to_json() const {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["command"] = command;
  j["seed"] = seed ? json(*seed) : json(nullptr);
  json m = json::object();
  for (const auto& [k, v] : meta) m[k] = v;
  j["meta"] = m;
  json tabs = json::array();
  for (const Table& t : tables) {
    json jt;
    jt["name"] = t.name;
    jt["columns"] = t.columns;
    json rows = json::array();
    for (const auto& row : t.rows) {
      json r = json::object();
      for (std::size_t c = 0; c < row.size(); ++c) {
        r[t.columns[c]] = to_json_cell(row[c]);
      }
      rows.push_back(std::move(r));
    }
    jt["rows"] = std::move(rows);
    tabs.push_back(std::move(jt));
  }
  j["tables"] = std::move(tabs);
  return j.dump(2) + "\n";
}

Table lmoments_table(const LMomentVector& lm) {
  Table t{"lmoments", {"r", "lambda"}, {}};
  for (Eigen::Index r = 0; r < lm.values.size(); ++r) {
    t.add_row({count(static_cast<std::size_t>(r + 1)), num(lm.values[r])});
  }
  return t;
}

Table fit_table(const GmlmFit& fit, const ModelSpec& model,
                std::optional<double> j_pvalue) {
  Table t{"fit", {"parameter", "estimate", "se"}, {}};
  const bool ls = model.family == ModelFamily::location_scale;
  for (Eigen::Index i = 0; i < fit.theta.size(); ++i) {
    std::string name = "theta" + std::to_string(i);
    if (ls) name = i == 0 ? "alpha" : "sigma";
    if (model.family == ModelFamily::location) name = "shift";
    Cell se;
    if (fit.covariance.rows() == fit.theta.size()) {
      se = num(std::sqrt(std::max(0.0, fit.covariance(i, i))));
    }
    t.add_row({name, num(fit.theta[i]), se});
  }
  t.add_row({"J", num(fit.j_stat), Cell{}});
  t.add_row({"df", count(fit.df), Cell{}});
  t.add_row({"J p-value", j_pvalue ? num(*j_pvalue) : Cell{}, Cell{}});
  t.add_row({"converged", std::string(fit.converged ? "yes" : "no"), Cell{}});
  t.add_row({"iterations", count(fit.iterations), Cell{}});
  return t;
}

Table panel_table(const PanelReport& report) {
  Table t{"effects",
          {"outcome", "period", "discount", "stratum", "status", "R", "trim",
           "delta", "delta_se", "psi", "psi_se", "alpha", "sigma", "J",
           "J_df", "J_pvalue", "control_mean", "n_treated", "n_control",
           "np_delta", "np_delta_se", "np_psi", "np_psi_se", "weight_user",
           "weight_nonuser", "message"},
          {}};
  for (const auto& r : report.rows) {
    const bool ok = r.status == CellStatus::ok;
    const bool agg = !r.stratum.has_value();
    auto maybe = [&](double x) { return ok ? num(x) : Cell{}; };
    std::vector<Cell> row{
        to_string(r.outcome),
        r.period,
        to_string(r.discount),
        agg ? std::string("all") : to_string(*r.stratum),
        to_string(r.status),
        ok && !agg ? count(r.effect.R_used) : Cell{},
        ok && !agg ? Cell{trim_label(r.effect.trim_used)} : Cell{},
        maybe(r.effect.delta),
        maybe(r.effect.delta_se),
        maybe(r.effect.psi),
        maybe(r.effect.psi_se),
        ok && !agg ? num(r.effect.alpha) : Cell{},
        ok && !agg ? num(r.effect.sigma) : Cell{},
        ok && !agg ? num(r.effect.j_stat) : Cell{},
        ok && !agg ? count(r.effect.df) : Cell{},
        ok && !agg ? num(r.effect.j_pvalue) : Cell{},
        ok ? num(r.effect.control_mean) : Cell{},
        count(r.effect.n_treated),
        count(r.effect.n_control),
        r.has_baseline ? num(r.baseline.diff_means) : Cell{},
        r.has_baseline ? num(r.baseline.diff_means_se) : Cell{},
        r.has_baseline ? num(r.baseline.sd_ratio_minus_one) : Cell{},
        r.has_baseline ? num(r.baseline.sd_ratio_se) : Cell{},
        agg && r.weights.size() > 0 ? num(r.weights[0]) : Cell{},
        agg && r.weights.size() > 1 ? num(r.weights[1]) : Cell{},
        r.message.empty() ? Cell{} : Cell{r.message}};
    t.add_row(std::move(row));
  }
  return t;
}

Table control_means_table(const PanelReport& report) {
  Table t{"control_means", {"outcome", "period", "stratum", "mean", "n"}, {}};
  for (const auto& c : report.control_means) {
    t.add_row({to_string(c.outcome), c.period, to_string(c.stratum),
               num(c.mean), count(c.n)});
  }
  return t;
}

Table panel_tuning_table(const PanelReport& report) {
  Table t{"tuning",
          {"outcome", "discount", "stratum", "status", "R", "trim",
           "criterion", "T0", "message"},
          {}};
  for (const auto& c : report.tuning) {
    t.add_row({to_string(c.outcome), to_string(c.discount),
               to_string(c.stratum), std::string(c.ok ? "ok" : "failed"),
               c.ok ? count(c.chosen.order) : Cell{},
               c.ok ? Cell{trim_label(c.chosen.trim)} : Cell{},
               c.ok ? num(c.criterion) : Cell{}, count(c.T0),
               c.message.empty() ? Cell{} : Cell{c.message}});
  }
  return t;
}

Table tuning_table(const TuningReport& report) {
  Table t{"grid", {"R", "trim", "criterion", "feasible", "chosen"}, {}};
  for (const auto& g : report.points) {
    t.add_row({count(g.point.order), trim_label(g.point.trim),
               g.feasible ? num(g.criterion) : Cell{},
               std::string(g.feasible ? "yes" : "no"),
               std::string(g.point == report.chosen ? "*" : "")});
  }
  return t;
}

Table mc_table(const McResult& result) {
  Table t{"montecarlo",
          {"estimator", "N", "RMSE", "MAE", "coverage", "length", "J_rate",
           "median_R", "replications", "failures"},
          {}};
  for (const auto& r : result.rows) {
    const bool np = r.estimator == McEstimator::diff_in_means;
    t.add_row({to_string(r.estimator), count(r.N), num(r.rmse), num(r.mae),
               num(r.coverage), num(r.avg_length), np ? Cell{} : num(r.j_rate),
               np ? Cell{} : num(r.median_R), count(r.replications),
               count(r.failures)});
  }
  return t;
}

Table decomposition_table(const Decomposition& d) {
  Table t{"decomposition", {"unit", "lambda", "direct", "learning_share"}, {}};
  for (const auto& u : d.units) {
    Cell share;
    if (d.total != 0.0) share = num(learning_share(d.total, u.direct));
    t.add_row({u.id, num(u.lambda), num(u.direct), share});
  }
  t.add_row({std::string("all"), num(d.mean_lambda), num(d.direct),
             num(d.learning_share)});
  return t;
}

}  // namespace gmlm
