#include "gmlm/io.hpp"

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <json.hpp>

#include "gmlm/error.hpp"

namespace gmlm {

namespace {

using nlohmann::json;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

std::optional<double> to_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || errno == ERANGE) return std::nullopt;
  return v;
}

void strip_bom(std::string& line) {
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF &&
      static_cast<unsigned char>(line[1]) == 0xBB &&
      static_cast<unsigned char>(line[2]) == 0xBF) {
    line.erase(0, 3);
  }
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::data_error, "cannot open " + path);
  return in;
}

// Object reader that rejects unknown keys and reports the offending path.
class Obj {
 public:
  Obj(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    require(j_.is_object(), ErrorKind::data_error, where_ + ": expected an object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }

  const json& at(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  std::string path(const std::string& key) const { return where_ + "." + key; }

  double number(const std::string& key) {
    const json& v = at(key);
    require(v.is_number(), ErrorKind::data_error,
            path(key) + ": expected a number");
    return v.get<double>();
  }

  std::size_t count(const std::string& key) {
    const json& v = at(key);
    require(v.is_number_unsigned() ||
                (v.is_number_integer() && v.get<std::int64_t>() >= 0),
            ErrorKind::data_error,
            path(key) + ": expected a nonnegative integer");
    return v.get<std::size_t>();
  }

  std::uint64_t u64(const std::string& key) {
    const json& v = at(key);
    require(v.is_number_unsigned() ||
                (v.is_number_integer() && v.get<std::int64_t>() >= 0),
            ErrorKind::data_error,
            path(key) + ": expected a nonnegative integer");
    return v.get<std::uint64_t>();
  }

  std::string string(const std::string& key) {
    const json& v = at(key);
    require(v.is_string(), ErrorKind::data_error,
            path(key) + ": expected a string");
    return v.get<std::string>();
  }

  std::vector<std::size_t> counts(const std::string& key) {
    const json& v = at(key);
    require(v.is_array(), ErrorKind::data_error,
            path(key) + ": expected an array");
    std::vector<std::size_t> out;
    for (const auto& e : v) {
      require(e.is_number_unsigned() ||
                  (e.is_number_integer() && e.get<std::int64_t>() >= 0),
              ErrorKind::data_error,
              path(key) + ": expected nonnegative integers");
      out.push_back(e.get<std::size_t>());
    }
    return out;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      require(seen_.count(it.key()) > 0, ErrorKind::data_error,
              where_ + ": unknown key '" + it.key() + "'");
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

json parse_json(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::data_error, source + ": invalid JSON: " + e.what());
  }
}

void check_version(Obj& o, const std::string& source) {
  require(o.has("schema_version"), ErrorKind::data_error,
          source + ": missing schema_version");
  const std::size_t v = o.count("schema_version");
  require(v == static_cast<std::size_t>(kSchemaVersion), ErrorKind::data_error,
          source + ": unsupported schema_version " + std::to_string(v) +
              " (expected " + std::to_string(kSchemaVersion) + ")");
}

TrimRange trim_from(const json& v, const std::string& where) {
  require(v.is_array() && v.size() == 2 && v[0].is_number() &&
              v[1].is_number(),
          ErrorKind::data_error, where + ": expected [p_lo, p_hi]");
  try {
    return TrimRange(v[0].get<double>(), v[1].get<double>());
  } catch (const Error& e) {
    fail(ErrorKind::data_error, where + ": " + e.what());
  }
}

}  // namespace

// ------------------------------------------------------------ CSV

PanelDataset parse_panel_csv(const std::string& path) {
  std::ifstream in = open_input(path);
  return parse_panel_csv(in, path);
}

PanelDataset parse_panel_csv(std::istream& in, const std::string& source) {
  static const std::vector<std::string> header{
      "unit_id", "arm", "stratum", "period", "outcome_type", "count"};
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  PanelDataset data;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1) strip_bom(line);
    if (trim(line).empty()) continue;
    const auto where = source + ":" + std::to_string(lineno) + ": ";
    auto fields = split(line);
    if (!have_header) {
      require(fields == header, ErrorKind::data_error,
              where + "expected header unit_id,arm,stratum,period,"
                      "outcome_type,count");
      have_header = true;
      continue;
    }
    require(fields.size() == header.size(), ErrorKind::data_error,
            where + "expected 6 fields, found " +
                std::to_string(fields.size()));
    try {
      PanelRecord r;
      r.unit_id = fields[0];
      r.arm = parse_arm(fields[1]);
      r.stratum = parse_stratum(fields[2]);
      r.period = fields[3];
      r.outcome = parse_outcome_type(fields[4]);
      const auto c = to_number(fields[5]);
      require(c.has_value(), ErrorKind::data_error,
              "count '" + fields[5] + "' is not a number");
      r.count = *c;
      data.add(std::move(r));
    } catch (const Error& e) {
      fail(ErrorKind::data_error, where + e.what());
    }
  }
  require(have_header, ErrorKind::data_error, source + ": empty file");
  require(!data.empty(), ErrorKind::data_error, source + ": no records");
  return data;
}

void write_panel_csv(const PanelDataset& data, std::ostream& out) {
  out << "unit_id,arm,stratum,period,outcome_type,count\n";
  std::ostringstream num;
  num << std::setprecision(17);
  for (const auto& r : data.records()) {
    num.str("");
    num << r.count;
    out << r.unit_id << ',' << to_string(r.arm) << ',' << to_string(r.stratum)
        << ',' << r.period << ',' << to_string(r.outcome) << ',' << num.str()
        << '\n';
  }
}

std::vector<double> read_values_csv(const std::string& path) {
  std::ifstream in = open_input(path);
  return read_values_csv(in, path);
}

std::vector<double> read_values_csv(std::istream& in,
                                    const std::string& source) {
  std::vector<double> out;
  std::string line;
  std::size_t lineno = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1) strip_bom(line);
    if (trim(line).empty()) continue;
    const std::string field = split(line).front();
    const auto v = to_number(field);
    if (!v) {
      require(first, ErrorKind::data_error,
              source + ":" + std::to_string(lineno) + ": '" + field +
                  "' is not a number");
      first = false;
      continue;
    }
    first = false;
    require(std::isfinite(*v), ErrorKind::data_error,
            source + ":" + std::to_string(lineno) + ": value is not finite");
    out.push_back(*v);
  }
  require(!out.empty(), ErrorKind::data_error, source + ": no values");
  return out;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in = open_input(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ------------------------------------------------------------ JSON

McRunConfig parse_mc_config(const std::string& json_text,
                            const std::string& source) {
  const json j = parse_json(json_text, source);
  Obj o(j, source);
  check_version(o, source);
  McRunConfig rc;
  McConfig& c = rc.mc;
  if (o.has("seed")) c.seed = o.u64("seed");
  rc.synthetic.seed = c.seed;
  if (o.has("population")) {
    Obj p(o.at("population"), o.path("population"));
    if (p.has("file")) rc.population_file = p.string("file");
    if (p.has("synthetic")) {
      require(!rc.population_file, ErrorKind::data_error,
              source + ".population: give either file or synthetic");
      Obj s(p.at("synthetic"), p.path("synthetic"));
      auto& sp = rc.synthetic;
      if (s.has("size")) sp.size = s.count("size");
      if (s.has("body_log_mean")) sp.body_log_mean = s.number("body_log_mean");
      if (s.has("body_log_sd")) sp.body_log_sd = s.number("body_log_sd");
      if (s.has("tail_log_mean")) sp.tail_log_mean = s.number("tail_log_mean");
      if (s.has("tail_log_sd")) sp.tail_log_sd = s.number("tail_log_sd");
      if (s.has("tail_weight")) sp.tail_weight = s.number("tail_weight");
      if (s.has("seed")) sp.seed = s.u64("seed");
      s.finish();
    }
    p.finish();
  }
  if (o.has("sizes")) c.sizes = o.counts("sizes");
  if (o.has("replications")) c.replications = o.count("replications");
  if (o.has("T0")) c.T0 = o.count("T0");
  if (o.has("ci_level")) c.ci_level = o.number("ci_level");
  if (o.has("bootstrap_replicates")) {
    c.bootstrap_replicates = o.count("bootstrap_replicates");
  }
  if (o.has("tuning_replicates")) {
    c.tuning_replicates = o.count("tuning_replicates");
  }
  if (o.has("scale")) {
    try {
      c.scale = parse_mc_scale(o.string("scale"));
    } catch (const Error& e) {
      fail(ErrorKind::data_error, o.path("scale") + ": " + e.what());
    }
  }
  if (o.has("estimators")) {
    const json& v = o.at("estimators");
    require(v.is_array(), ErrorKind::data_error,
            o.path("estimators") + ": expected an array");
    c.estimators.clear();
    for (const auto& e : v) {
      require(e.is_string(), ErrorKind::data_error,
              o.path("estimators") + ": expected strings");
      try {
        c.estimators.push_back(parse_mc_estimator(e.get<std::string>()));
      } catch (const Error& err) {
        fail(ErrorKind::data_error, o.path("estimators") + ": " + err.what());
      }
    }
  }
  if (o.has("orders")) c.orders = o.counts("orders");
  if (o.has("trim_hi")) c.trim_hi = o.number("trim_hi");
  if (o.has("threads")) c.threads = o.count("threads");
  o.finish();
  return rc;
}

PanelRunConfig parse_panel_config(const std::string& json_text,
                                  const std::string& source) {
  const json j = parse_json(json_text, source);
  Obj o(j, source);
  check_version(o, source);
  PanelRunConfig rc;
  PanelConfig& c = rc.panel;
  if (o.has("cutover")) c.cutover = o.string("cutover");
  if (o.has("R")) c.order = o.count("R");
  if (o.has("trim")) c.trim = trim_from(o.at("trim"), o.path("trim"));
  std::vector<std::size_t> orders = c.grid.orders();
  std::vector<TrimRange> trims = c.grid.trims();
  if (o.has("orders")) orders = o.counts("orders");
  if (o.has("trims")) {
    const json& v = o.at("trims");
    require(v.is_array() && !v.empty(), ErrorKind::data_error,
            o.path("trims") + ": expected a nonempty array");
    trims.clear();
    for (const auto& t : v) trims.push_back(trim_from(t, o.path("trims")));
  }
  require(!orders.empty(), ErrorKind::data_error,
          o.path("orders") + ": empty grid");
  try {
    c.grid = HyperGrid(orders, trims);
  } catch (const Error& e) {
    fail(ErrorKind::data_error, source + ": " + e.what());
  }
  if (o.has("T0")) c.T0 = o.count("T0");
  if (o.has("tuning_weight")) {
    try {
      c.tuning.weighting = parse_tuning_weight(o.string("tuning_weight"));
    } catch (const Error& e) {
      fail(ErrorKind::data_error, o.path("tuning_weight") + ": " + e.what());
    }
  }
  if (o.has("tuning_replicates")) {
    c.tuning.bootstrap.replicates = o.count("tuning_replicates");
  }
  if (o.has("bootstrap_replicates")) {
    c.bootstrap.replicates = o.count("bootstrap_replicates");
  }
  if (o.has("seed")) {
    c.bootstrap.seed = o.u64("seed");
  }
  c.tuning.bootstrap.seed = c.bootstrap.seed;
  if (o.has("threads")) c.threads = o.count("threads");
  o.finish();
  return rc;
}

DecompositionInput parse_decomposition_config(const std::string& json_text,
                                              const std::string& source) {
  const json j = parse_json(json_text, source);
  Obj o(j, source);
  check_version(o, source);
  DecompositionInput in;
  {
    require(o.has("prior"), ErrorKind::data_error, source + ": missing prior");
    Obj p(o.at("prior"), o.path("prior"));
    in.prior.mu = p.number("mu");
    in.prior.sigma2 = p.number("sigma2");
    p.finish();
  }
  {
    require(o.has("tech"), ErrorKind::data_error, source + ": missing tech");
    Obj t(o.at("tech"), o.path("tech"));
    in.tech.gamma = t.number("gamma");
    in.tech.phi = t.number("phi");
    t.finish();
  }
  require(o.has("price_change"), ErrorKind::data_error,
          source + ": missing price_change");
  in.price_change = o.number("price_change");
  require(o.has("total_effect"), ErrorKind::data_error,
          source + ": missing total_effect");
  in.total_effect = o.number("total_effect");
  if (o.has("annual_rate")) in.annual_rate = o.number("annual_rate");
  if (o.has("periods_per_year")) {
    in.periods_per_year = o.number("periods_per_year");
  }
  require(o.has("units"), ErrorKind::data_error, source + ": missing units");
  const json& units = o.at("units");
  require(units.is_array() && !units.empty(), ErrorKind::data_error,
          o.path("units") + ": expected a nonempty array");
  for (std::size_t i = 0; i < units.size(); ++i) {
    Obj u(units[i], o.path("units") + "[" + std::to_string(i) + "]");
    DecompositionUnit du;
    du.id = u.has("id") ? u.string("id") : std::to_string(i + 1);
    if (u.has("lambda")) {
      du.lambda = u.number("lambda");
    } else {
      require(u.has("income") && u.has("tau"), ErrorKind::data_error,
              u.path("") + " needs lambda or both income and tau");
      du.income = u.number("income");
      du.tau = u.number("tau");
    }
    u.finish();
    in.units.push_back(std::move(du));
  }
  o.finish();
  return in;
}

}  // namespace gmlm
