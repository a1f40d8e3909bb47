#include "cli.hpp"

#include <algorithm>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "gmlm/effects.hpp"
#include "gmlm/error.hpp"
#include "gmlm/estimator.hpp"
#include "gmlm/io.hpp"
#include "gmlm/learning.hpp"
#include "gmlm/montecarlo.hpp"
#include "gmlm/panel.hpp"
#include "gmlm/quantile_core.hpp"
#include "gmlm/report.hpp"
#include "gmlm/tuning.hpp"
#include "gmlm/weighting.hpp"

namespace gmlm::cli {

namespace {

struct Output {
  std::string format = "table";
  std::string path;
};

void add_output(CLI::App* sub, Output& o) {
  sub->add_option("--format", o.format, "Report format")
      ->check(CLI::IsMember({"table", "json"}))
      ->capture_default_str();
  sub->add_option("--output", o.path, "Write the report to this file");
}

void add_trim(CLI::App* sub, std::vector<double>& trim) {
  sub->add_option("--trim", trim, "Trim range P_LO,P_HI (default 0,1)")
      ->expected(2)
      ->delimiter(',');
}

TrimRange trim_of(const std::vector<double>& v) {
  if (v.empty()) return {};
  return {v[0], v[1]};
}

void emit(const Report& r, const Output& o, std::ostream& out) {
  const std::string text = o.format == "json" ? r.to_json() : r.to_text();
  if (o.path.empty()) {
    out << text;
    return;
  }
  std::ofstream f(o.path, std::ios::binary);
  require(f.good(), ErrorKind::data_error, "cannot write " + o.path);
  f << text;
  require(f.good(), ErrorKind::data_error, "failed writing " + o.path);
}

std::string join(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(v[i]);
  }
  return s;
}

int exit_code(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::invalid_argument:
    case ErrorKind::invalid_state:
      return usage;
    case ErrorKind::data_error:
      return data;
    default:
      return numerical;
  }
}

// ------------------------------------------------------------ lmoments

struct LmomentsArgs {
  std::string input;
  std::size_t R = 4;
  std::vector<double> trim;
  Output out;
};

Report run_lmoments(const LmomentsArgs& a) {
  const Sample s(read_values_csv(a.input));
  Report r;
  r.command = "lmoments";
  r.meta = {{"input", a.input},
            {"n", std::to_string(s.size())},
            {"R", std::to_string(a.R)}};
  r.tables.push_back(lmoments_table(lmoments(s, a.R, trim_of(a.trim))));
  return r;
}

// ------------------------------------------------------------ fit

struct FitArgs {
  std::string treated;
  std::string control;
  std::size_t R = 8;
  std::vector<double> trim;
  std::string model = "location_scale";
  std::string weight = "optimal";
  std::size_t B = 500;
  std::uint64_t seed = kDefaultSeed;
  Output out;
};

Report run_fit(const FitArgs& a) {
  const Sample t(read_values_csv(a.treated));
  const Sample c(read_values_csv(a.control));
  const ModelFamily family = parse_model_family(a.model);
  require(family != ModelFamily::custom, ErrorKind::invalid_argument,
          "fit: --model must be location_scale or location");
  const ModelSpec model = family == ModelFamily::location_scale
                              ? ModelSpec::location_scale()
                              : ModelSpec::location();
  const TrimRange trim = trim_of(a.trim);
  Report r;
  r.command = "fit";
  r.meta = {{"treated", a.treated}, {"control", a.control},
            {"n_treated", std::to_string(t.size())},
            {"n_control", std::to_string(c.size())},
            {"model", a.model}, {"R", std::to_string(a.R)},
            {"trim", format_number(trim.lo()) + "," + format_number(trim.hi())},
            {"weight", a.weight}};

  GmlmProblem problem{t, c, a.R, trim, WeightMatrix{}};
  std::optional<double> p;
  GmlmFit f;
  if (a.weight == "optimal") {
    r.seed = a.seed;
    r.meta.emplace_back("B", std::to_string(a.B));
    const BootstrapConfig bc{a.B, a.seed, 0};
    const Eigen::VectorXd first = first_step_parameter(t, c, model);
    const Eigen::MatrixXd V =
        model_discrepancy_covariance(t, c, model, first, a.R, trim, bc);
    problem.weight = WeightMatrix::pseudo_inverse_of(V);
    f = fit(problem, model);
    if (V.isZero(0.0)) {
      f.covariance = Eigen::MatrixXd::Zero(f.theta.size(), f.theta.size());
    } else {
      f.covariance = theta_covariance(problem, f, problem.weight, V, model);
    }
    p = jtest_pvalue(f.j_stat, f.df);
    r.meta.emplace_back("weight_rank", std::to_string(problem.weight.rank()));
  } else {
    f = fit(problem, model);
  }
  r.tables.push_back(fit_table(f, model, p));
  return r;
}

// ------------------------------------------------------------ panel

struct PanelArgs {
  std::string input;
  std::string config;
  std::string cutover;
  std::size_t R = 0;
  std::vector<double> trim;
  std::size_t T0 = 0;
  std::size_t B = 500;
  std::size_t tuning_B = 200;
  std::string tuning_weight = "optimal";
  std::uint64_t seed = kDefaultSeed;
  std::size_t threads = 1;
  Output out;
};

Report run_panel(const PanelArgs& a, const CLI::App& sub) {
  PanelConfig cfg;
  if (!a.config.empty()) {
    cfg = parse_panel_config(read_text_file(a.config), a.config).panel;
  }
  if (sub.count("--cutover")) cfg.cutover = a.cutover;
  if (sub.count("--R")) cfg.order = a.R;
  if (sub.count("--trim")) cfg.trim = trim_of(a.trim);
  if (sub.count("--T0")) cfg.T0 = a.T0;
  if (sub.count("--B")) cfg.bootstrap.replicates = a.B;
  if (sub.count("--tuning-B")) cfg.tuning.bootstrap.replicates = a.tuning_B;
  if (sub.count("--tuning-weight")) {
    cfg.tuning.weighting = parse_tuning_weight(a.tuning_weight);
  }
  if (sub.count("--seed") || a.config.empty()) {
    cfg.bootstrap.seed = a.seed;
    cfg.tuning.bootstrap.seed = a.seed;
  }
  if (sub.count("--threads")) cfg.threads = a.threads;
  require(!cfg.cutover.empty(), ErrorKind::invalid_argument,
          "panel: --cutover (or cutover in the config) is required");

  const PanelDataset data = parse_panel_csv(a.input);
  const PanelReport pr = analyze_panel(data, cfg);
  Report r;
  r.command = "panel";
  r.seed = cfg.bootstrap.seed;
  r.meta = {{"input", a.input},
            {"records", std::to_string(data.size())},
            {"cutover", cfg.cutover},
            {"B", std::to_string(cfg.bootstrap.replicates)},
            {"R", cfg.order ? std::to_string(*cfg.order) : "tuned"}};
  if (!cfg.order) {
    r.meta.emplace_back("grid", join(cfg.grid.orders()));
    r.meta.emplace_back("tuning_weight", to_string(cfg.tuning.weighting));
  }
  r.tables.push_back(panel_table(pr));
  if (!cfg.order) r.tables.push_back(panel_tuning_table(pr));
  r.tables.push_back(control_means_table(pr));
  return r;
}

// ------------------------------------------------------------ tune

struct TuneArgs {
  std::string input;
  std::string cutover;
  std::string outcome = "integrated";
  std::string discount = "d50";
  std::string stratum = "user";
  std::size_t T0 = 0;
  std::vector<std::size_t> orders;
  std::vector<double> trim;
  std::string model = "location_scale";
  std::string weight = "optimal";
  std::size_t B = 200;
  std::uint64_t seed = kDefaultSeed;
  Output out;
};

Report run_tune(const TuneArgs& a) {
  const PanelDataset data = parse_panel_csv(a.input);
  const OutcomeType o = parse_outcome_type(a.outcome);
  const Arm d = parse_arm(a.discount);
  const Stratum s = parse_stratum(a.stratum);
  require(d != Arm::control, ErrorKind::invalid_argument,
          "tune: --discount must be d20 or d50");
  const auto periods = placebo_periods(data, a.cutover, o, d, s, a.T0);
  require(!periods.empty(), ErrorKind::data_error,
          "tune: no pre-treatment period with data in both arms");
  HyperGrid grid;
  if (!a.orders.empty() || !a.trim.empty()) {
    grid = HyperGrid(a.orders.empty() ? grid.orders() : a.orders,
                     {trim_of(a.trim)});
  }
  TuningConfig cfg;
  const ModelFamily family = parse_model_family(a.model);
  require(family != ModelFamily::custom, ErrorKind::invalid_argument,
          "tune: --model must be location_scale or location");
  cfg.model = family == ModelFamily::location_scale ? ModelSpec::location_scale()
                                                    : ModelSpec::location();
  cfg.weighting = parse_tuning_weight(a.weight);
  cfg.bootstrap = {a.B, a.seed, 0};
  const TuningReport tr = select_hyperparams(periods, grid, cfg);
  Report r;
  r.command = "tune";
  if (cfg.weighting == TuningWeight::optimal) r.seed = a.seed;
  std::string used;
  for (const auto& p : tr.periods) used += (used.empty() ? "" : ",") + p;
  r.meta = {{"input", a.input},
            {"selector", a.outcome + "/" + a.discount + "/" + a.stratum},
            {"T0", std::to_string(tr.T0)},
            {"periods", used},
            {"chosen_R", std::to_string(tr.chosen.order)},
            {"chosen_criterion", format_number(tr.chosen_criterion)},
            {"weight", to_string(cfg.weighting)}};
  r.tables.push_back(tuning_table(tr));
  return r;
}

// ------------------------------------------------------------ mc

struct McArgs {
  std::string config;
  std::string population;
  std::vector<std::size_t> sizes;
  std::size_t replications = 0;
  std::size_t T0 = 0;
  std::size_t B = 0;
  std::size_t tuning_B = 0;
  std::string scale;
  std::uint64_t seed = kDefaultSeed;
  std::size_t threads = 1;
  Output out;
};

Report run_mc(const McArgs& a, const CLI::App& sub) {
  McRunConfig rc;
  if (!a.config.empty()) {
    rc = parse_mc_config(read_text_file(a.config), a.config);
  }
  McConfig& c = rc.mc;
  if (sub.count("--seed")) {
    c.seed = a.seed;
    rc.synthetic.seed = a.seed;
  }
  if (sub.count("--population")) rc.population_file = a.population;
  if (sub.count("--sizes")) c.sizes = a.sizes;
  if (sub.count("--replications")) c.replications = a.replications;
  if (sub.count("--T0")) c.T0 = a.T0;
  if (sub.count("--B")) c.bootstrap_replicates = a.B;
  if (sub.count("--tuning-B")) c.tuning_replicates = a.tuning_B;
  if (sub.count("--scale")) c.scale = parse_mc_scale(a.scale);
  if (sub.count("--threads")) c.threads = a.threads;

  const Population pop =
      rc.population_file
          ? Population(read_values_csv(*rc.population_file),
                       *rc.population_file)
          : Population::synthetic(rc.synthetic);
  const McResult res = run_study(pop, c);
  Report r;
  r.command = "mc";
  r.seed = c.seed;
  r.meta = {{"population", pop.source()},
            {"population_size", std::to_string(pop.size())},
            {"scale", to_string(c.scale)},
            {"replications", std::to_string(c.replications)},
            {"T0", std::to_string(c.T0)},
            {"B", std::to_string(c.bootstrap_replicates)},
            {"tuning_B", std::to_string(c.tuning_replicates)},
            {"ci_level", format_number(c.ci_level)},
            {"trim_hi", format_number(c.trim_hi)}};
  r.tables.push_back(mc_table(res));
  return r;
}

// ------------------------------------------------------------ decompose

struct DecomposeArgs {
  std::string config;
  Output out;
};

Report run_decompose(const DecomposeArgs& a) {
  const DecompositionInput in =
      parse_decomposition_config(read_text_file(a.config), a.config);
  const Decomposition d = decompose(in);
  Report r;
  r.command = "decompose";
  r.meta = {{"config", a.config},
            {"total_effect", format_number(in.total_effect)},
            {"price_change", format_number(in.price_change)}};
  r.tables.push_back(decomposition_table(d));
  return r;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out,
             std::ostream& err) {
  CLI::App app{"Semiparametric treatment effects by the generalized method of "
               "L-moments",
               "gmlm"};
  app.require_subcommand(1);
  app.fallthrough(false);

  LmomentsArgs lm;
  auto* s_lm = app.add_subcommand("lmoments", "L-moments of a sample");
  s_lm->add_option("--input", lm.input, "One value per line")->required();
  s_lm->add_option("--R", lm.R, "Number of L-moments")->capture_default_str();
  add_trim(s_lm, lm.trim);
  add_output(s_lm, lm.out);

  FitArgs fa;
  auto* s_fit = app.add_subcommand("fit", "Fit a two-sample model");
  s_fit->add_option("--treated", fa.treated, "Treated sample")->required();
  s_fit->add_option("--control", fa.control, "Control sample")->required();
  s_fit->add_option("--R", fa.R, "Number of L-moments")->capture_default_str();
  add_trim(s_fit, fa.trim);
  s_fit->add_option("--model", fa.model, "location_scale or location")
      ->check(CLI::IsMember({"location_scale", "location"}))
      ->capture_default_str();
  s_fit->add_option("--weight", fa.weight, "identity or optimal")
      ->check(CLI::IsMember({"identity", "optimal"}))
      ->capture_default_str();
  s_fit->add_option("--B", fa.B, "Bootstrap replicates")->capture_default_str();
  s_fit->add_option("--seed", fa.seed, "Random seed")->capture_default_str();
  add_output(s_fit, fa.out);

  PanelArgs pa;
  auto* s_panel = app.add_subcommand("panel", "Analyse a panel experiment");
  s_panel->add_option("--input", pa.input, "Panel CSV")->required();
  s_panel->add_option("--config", pa.config, "JSON configuration");
  s_panel->add_option("--cutover", pa.cutover, "First post-treatment period");
  s_panel->add_option("--R", pa.R, "Fixed number of L-moments (else tuned)");
  add_trim(s_panel, pa.trim);
  s_panel->add_option("--T0", pa.T0, "Pre-periods used for tuning (0: all)");
  s_panel->add_option("--B", pa.B, "Bootstrap replicates")
      ->capture_default_str();
  s_panel->add_option("--tuning-B", pa.tuning_B,
                      "Bootstrap replicates inside placebo fits")
      ->capture_default_str();
  s_panel->add_option("--tuning-weight", pa.tuning_weight,
                      "identity or optimal")
      ->check(CLI::IsMember({"identity", "optimal"}));
  s_panel->add_option("--seed", pa.seed, "Random seed")->capture_default_str();
  s_panel->add_option("--threads", pa.threads, "Worker threads (0: all)");
  add_output(s_panel, pa.out);

  TuneArgs ta;
  auto* s_tune = app.add_subcommand("tune", "Select R on pre-treatment periods");
  s_tune->add_option("--input", ta.input, "Panel CSV")->required();
  s_tune->add_option("--cutover", ta.cutover, "First post-treatment period")
      ->required();
  s_tune->add_option("--outcome", ta.outcome, "integrated or nonintegrated")
      ->capture_default_str();
  s_tune->add_option("--discount", ta.discount, "d20 or d50")
      ->capture_default_str();
  s_tune->add_option("--stratum", ta.stratum, "user or nonuser")
      ->capture_default_str();
  s_tune->add_option("--T0", ta.T0, "Pre-periods used (0: all)");
  s_tune->add_option("--orders", ta.orders, "Candidate R values (default 2..16)")
      ->delimiter(',');
  add_trim(s_tune, ta.trim);
  s_tune->add_option("--model", ta.model, "location_scale or location")
      ->check(CLI::IsMember({"location_scale", "location"}))
      ->capture_default_str();
  s_tune->add_option("--weight", ta.weight, "identity or optimal")
      ->check(CLI::IsMember({"identity", "optimal"}))
      ->capture_default_str();
  s_tune->add_option("--B", ta.B, "Bootstrap replicates per placebo period")
      ->capture_default_str();
  s_tune->add_option("--seed", ta.seed, "Random seed")->capture_default_str();
  add_output(s_tune, ta.out);

  McArgs ma;
  auto* s_mc = app.add_subcommand("mc", "Monte Carlo estimator comparison");
  s_mc->add_option("--config", ma.config, "JSON configuration");
  s_mc->add_option("--population", ma.population,
                   "Population file, one value per line");
  s_mc->add_option("--sizes", ma.sizes, "Total sample sizes N")->delimiter(',');
  s_mc->add_option("--replications", ma.replications, "Replications per N");
  s_mc->add_option("--T0", ma.T0, "Placebo periods for tuning");
  s_mc->add_option("--B", ma.B, "Bootstrap replicates");
  s_mc->add_option("--tuning-B", ma.tuning_B,
                   "Bootstrap replicates inside placebo fits");
  s_mc->add_option("--scale", ma.scale, "levels or logs")
      ->check(CLI::IsMember({"levels", "logs"}));
  s_mc->add_option("--seed", ma.seed, "Random seed")->capture_default_str();
  s_mc->add_option("--threads", ma.threads, "Worker threads (0: all)");
  add_output(s_mc, ma.out);

  DecomposeArgs da;
  auto* s_dec = app.add_subcommand("decompose",
                                   "Direct-price and learning decomposition");
  s_dec->add_option("--config", da.config, "Calibration JSON")->required();
  add_output(s_dec, da.out);

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << (app.get_subcommands().empty()
                ? app.help()
                : app.get_subcommands().front()->help());
    return ok;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return usage;
  }

  try {
    if (*s_lm) emit(run_lmoments(lm), lm.out, out);
    else if (*s_fit) emit(run_fit(fa), fa.out, out);
    else if (*s_panel) emit(run_panel(pa, *s_panel), pa.out, out);
    else if (*s_tune) emit(run_tune(ta), ta.out, out);
    else if (*s_mc) emit(run_mc(ma, *s_mc), ma.out, out);
    else if (*s_dec) emit(run_decompose(da), da.out, out);
    return ok;
  } catch (const Error& e) {
    err << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
    return exit_code(e);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return data;
  }
}

}  // namespace gmlm::cli
