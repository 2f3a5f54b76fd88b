#include "coverlab/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

namespace coverlab {

const char* tool_version() { return "coverlab 1.0.0"; }

namespace {

[[noreturn]] void fail(const std::string& field, const std::string& msg) {
  throw ConfigError(field + ": " + msg);
}

const Json& require(const Json& j, const std::string& key, const std::string& field) {
  if (!j.is_object()) fail(field, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) fail(field + "." + key, "missing");
  return *it;
}

Rational json_rational(const Json& v, const std::string& field) {
  try {
    if (v.is_string()) return parse_rational(v.get<std::string>());
    if (v.is_number()) return parse_rational(v.dump());
  } catch (const std::exception& e) {
    fail(field, e.what());
  }
  fail(field, "expected a number or a rational string");
}

double json_double(const Json& v, const std::string& field) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) return static_cast<double>(to_long_double(json_rational(v, field)));
  fail(field, "expected a number");
}

std::int64_t json_int(const Json& v, const std::string& field) {
  if (v.is_number_integer()) return v.get<std::int64_t>();
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (std::floor(d) == d && std::abs(d) < 9e18) return static_cast<std::int64_t>(d);
  }
  fail(field, "expected an integer");
}

std::string json_string(const Json& v, const std::string& field) {
  if (!v.is_string()) fail(field, "expected a string");
  return v.get<std::string>();
}

std::vector<double> json_double_list(const Json& v, const std::string& field) {
  if (!v.is_array()) fail(field, "expected an array");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i)
    out.push_back(json_double(v[i], field + "[" + std::to_string(i) + "]"));
  return out;
}

template <class F>
auto guarded(const std::string& field, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    fail(field, e.what());
  }
}

std::string fmt_g(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string short_g(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", x);
  return buf;
}

bool csv_safe(const std::string& s) {
  return s.find_first_of(",\"\n\r") == std::string::npos;
}

Word parse_word_key(const std::string& key, const std::string& field) {
  Word w;
  if (key.find(',') != std::string::npos) {
    std::stringstream ss(key);
    std::string part;
    while (std::getline(ss, part, ',')) {
      try {
        w.push_back(std::stoll(part));
      } catch (const std::exception&) {
        fail(field, "bad symbol '" + part + "' in word key '" + key + "'");
      }
    }
  } else {
    for (char c : key) {
      if (c < '0' || c > '9') fail(field, "bad symbol in word key '" + key + "'");
      w.push_back(c - '0');
    }
  }
  return w;
}

std::optional<double> finite_or_none(double x) {
  if (std::isnan(x) || std::isinf(x)) return std::nullopt;
  return x;
}

Json num_or_null(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

Json opt_json(const std::optional<double>& x) { return x ? Json(*x) : Json(nullptr); }

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

// ---------------------------------------------------------------------------
// System specs

std::shared_ptr<const SymbolicMeasure> parse_measure(const Json& j, Sidedness side,
                                                     const std::string& field) {
  if (!j.is_object()) fail(field, "expected an object");
  if (j.contains("bernoulli")) {
    const auto w = json_double_list(j["bernoulli"], field + ".bernoulli");
    return guarded(field + ".bernoulli",
                   [&] { return std::make_shared<const SymbolicMeasure>(make_bernoulli(w, side)); });
  }
  if (j.contains("markov")) {
    const Json& rows = j["markov"];
    if (!rows.is_array()) fail(field + ".markov", "expected a matrix");
    std::vector<std::vector<double>> P;
    for (std::size_t i = 0; i < rows.size(); ++i)
      P.push_back(json_double_list(rows[i], field + ".markov[" + std::to_string(i) + "]"));
    return guarded(field + ".markov",
                   [&] { return std::make_shared<const SymbolicMeasure>(make_markov(P, side)); });
  }
  if (j.contains("geometric")) {
    const double omega = json_double(j["geometric"], field + ".geometric");
    const double tol = j.contains("tolerance") ? json_double(j["tolerance"], field + ".tolerance")
                                               : 1e-15;
    return guarded(field + ".geometric", [&] {
      return std::make_shared<const SymbolicMeasure>(make_geometric(omega, tol, side));
    });
  }
  fail(field, "expected one of bernoulli, markov, geometric");
}

MapSystem parse_map_system(const Json& j) {
  const std::string field = "system";
  if (!j.is_object()) fail(field, "expected an object");
  const std::string family = json_string(require(j, "family", field), field + ".family");
  MapSystem sys;
  if (family == "doubling") {
    sys.name = "doubling";
    auto map = build_affine_markov({{Rational(0), Rational(1, 2)}, {Rational(1, 2), Rational(1)}},
                                   {Rational(2), Rational(2)}, {{0, 1}, {0, 1}});
    sys.map = std::make_shared<const MarkovIntervalMap>(std::move(map));
  } else if (family == "zeta") {
    const double kappa = json_double(require(j, "kappa", field), field + ".kappa");
    const double omega = j.contains("omega") ? json_double(j["omega"], field + ".omega") : 2.0;
    const double tol =
        j.contains("tolerance") ? json_double(j["tolerance"], field + ".tolerance") : 1e-6;
    if (!(kappa > 1)) fail(field + ".kappa", "must exceed 1");
    if (!(omega > 1)) fail(field + ".omega", "must exceed 1");
    auto z = guarded(field, [&] { return build_zeta_map(kappa, tol); });
    sys.map = std::make_shared<const MarkovIntervalMap>(z.map);
    sys.zeta = std::move(z);
    sys.omega = omega;
    sys.name = "zeta-k" + short_g(kappa) + "-w" + short_g(omega);
    if (!j.contains("measure"))
      sys.measure = guarded(field + ".omega", [&] {
        return std::make_shared<const SymbolicMeasure>(make_geometric(omega));
      });
  } else if (family == "affine") {
    const Json& part = require(j, "partition", field);
    const Json& slopes = require(j, "slopes", field);
    const Json& images = require(j, "images", field);
    if (!part.is_array() || !slopes.is_array() || !images.is_array())
      fail(field, "partition, slopes and images must be arrays");
    std::vector<std::pair<Rational, Rational>> P;
    std::vector<Rational> S;
    std::vector<std::vector<std::size_t>> I;
    for (std::size_t i = 0; i < part.size(); ++i) {
      const std::string f = field + ".partition[" + std::to_string(i) + "]";
      if (!part[i].is_array() || part[i].size() != 2) fail(f, "expected [left, right]");
      P.emplace_back(json_rational(part[i][0], f), json_rational(part[i][1], f));
    }
    for (std::size_t i = 0; i < slopes.size(); ++i)
      S.push_back(json_rational(slopes[i], field + ".slopes[" + std::to_string(i) + "]"));
    for (std::size_t i = 0; i < images.size(); ++i) {
      const std::string f = field + ".images[" + std::to_string(i) + "]";
      if (!images[i].is_array()) fail(f, "expected an index list");
      std::vector<std::size_t> row;
      for (const auto& v : images[i]) {
        const auto k = json_int(v, f);
        if (k < 0) fail(f, "indices must be non-negative");
        row.push_back(static_cast<std::size_t>(k));
      }
      I.push_back(std::move(row));
    }
    auto map = guarded(field, [&] { return build_affine_markov(P, S, I); });
    sys.map = std::make_shared<const MarkovIntervalMap>(std::move(map));
    sys.name = "affine-" + std::to_string(P.size());
  } else {
    fail(field + ".family", "unknown family '" + family + "' (doubling, zeta, affine)");
  }
  if (j.contains("measure")) {
    sys.measure = parse_measure(j["measure"], Sidedness::one_sided, field + ".measure");
  } else if (!sys.measure) {
    const std::size_t n = sys.map->size();
    sys.measure = std::make_shared<const SymbolicMeasure>(
        make_bernoulli(std::vector<double>(n, 1.0 / static_cast<double>(n))));
  }
  if (sys.measure->first_label() != sys.map->first_label() ||
      (!sys.map->countable() && !sys.measure->countable() &&
       sys.measure->subshift().alphabet_size() != sys.map->size()))
    fail(field + ".measure", "alphabet does not match the map's branches");
  if (j.contains("name")) sys.name = json_string(j["name"], field + ".name");
  if (!csv_safe(sys.name)) fail(field + ".name", "must not contain commas, quotes or newlines");
  return sys;
}

ContinuedFraction parse_theta(const Json& j) {
  const std::string field = "theta";
  if (!j.is_object()) fail(field, "expected an object");
  if (j.contains("quotients")) {
    const Json& q = j["quotients"];
    if (!q.is_array() || q.empty()) fail(field + ".quotients", "expected a non-empty array");
    std::vector<BigInt> a;
    for (std::size_t i = 0; i < q.size(); ++i) {
      const std::string f = field + ".quotients[" + std::to_string(i) + "]";
      BigInt v;
      if (q[i].is_string()) {
        v = guarded(f, [&] { return BigInt(q[i].get<std::string>()); });
      } else {
        v = BigInt(json_int(q[i], f));
      }
      if (v < 1) fail(f, "quotients must be >= 1");
      a.push_back(v);
    }
    const bool term = j.contains("terminating") && j["terminating"].is_boolean() &&
                      j["terminating"].get<bool>();
    return ContinuedFraction::from_quotients(a, term);
  }
  if (j.contains("rule")) {
    const std::string rule = json_string(j["rule"], field + ".rule");
    if (rule == "constant") {
      const auto a = json_int(require(j, "a", field), field + ".a");
      if (a < 1) fail(field + ".a", "must be >= 1");
      return ContinuedFraction::constant(BigInt(a));
    }
    if (rule == "type") {
      const double eta = json_double(require(j, "eta", field), field + ".eta");
      if (!(eta >= 1)) fail(field + ".eta", "must be >= 1");
      return ContinuedFraction::of_type(eta);
    }
    fail(field + ".rule", "unknown rule '" + rule + "' (constant, type)");
  }
  if (j.contains("decimal")) {
    const std::string dec = json_string(j["decimal"], field + ".decimal");
    std::optional<int> digits;
    if (j.contains("digits")) digits = static_cast<int>(json_int(j["digits"], field + ".digits"));
    const auto count = j.contains("count") ? json_int(j["count"], field + ".count") : 100;
    if (count < 1) fail(field + ".count", "must be >= 1");
    return guarded(field + ".decimal",
                   [&] { return cf_expand(dec, static_cast<std::size_t>(count), digits); });
  }
  fail(field, "expected quotients, rule or decimal");
}

namespace {

std::string theta_name(const Json& j) {
  if (j.contains("rule") && j["rule"] == "constant") return "rotation-const" + j["a"].dump();
  if (j.contains("rule") && j["rule"] == "type")
    return "rotation-eta" + short_g(j["eta"].get<double>());
  if (j.contains("decimal")) return "rotation-decimal";
  return "rotation-cf";
}

}  // namespace

std::shared_ptr<const SuspensionSpace> parse_flow_system(const Json& j) {
  const std::string field = "system";
  if (!j.is_object()) fail(field, "expected an object");
  auto base = parse_measure(require(j, "base", field), Sidedness::two_sided, field + ".base");
  const Json& roof = require(j, "roof", field);
  const std::string rf = field + ".roof";
  if (!roof.is_object()) fail(rf, "expected an object");
  RoofFunction phi = RoofFunction::constant(1);
  if (roof.contains("constant")) {
    phi = guarded(rf, [&] { return RoofFunction::constant(json_rational(roof["constant"], rf + ".constant")); });
  } else if (roof.contains("values")) {
    const auto depth = json_int(require(roof, "depth", rf), rf + ".depth");
    const Json& vals = roof["values"];
    if (!vals.is_object()) fail(rf + ".values", "expected an object keyed by words");
    std::map<Word, Rational> table;
    for (auto it = vals.begin(); it != vals.end(); ++it) {
      const std::string f = rf + ".values." + it.key();
      table[parse_word_key(it.key(), f)] = json_rational(it.value(), f);
    }
    phi = guarded(rf, [&] { return RoofFunction::table(static_cast<int>(depth), table); });
  } else {
    fail(rf, "expected constant or depth/values");
  }
  return guarded(field, [&] { return std::make_shared<const SuspensionSpace>(base, phi); });
}

// ---------------------------------------------------------------------------
// Config

std::vector<double> parse_scales(const Json& j, const Json& system) {
  const std::string field = "scales";
  std::vector<double> out;
  auto range = [&](const char* key) {
    const Json& v = j[key];
    const std::string f = field + "." + key;
    if (!v.is_array() || v.size() != 2) fail(f, "expected [first, last]");
    const auto a = json_int(v[0], f), b = json_int(v[1], f);
    if (a > b) fail(f, "first must not exceed last");
    if (b - a > 10000000) fail(f, "range too long");
    return std::pair{a, b};
  };
  if (j.is_array()) {
    out = json_double_list(j, field);
  } else if (j.is_object() && j.contains("values")) {
    out = json_double_list(j["values"], field + ".values");
  } else if (j.is_object() && j.contains("dyadic")) {
    const auto [a, b] = range("dyadic");
    if (a < 0 || b > 1000) fail(field + ".dyadic", "exponents must lie in 0..1000");
    for (auto k = a; k <= b; ++k) out.push_back(std::ldexp(1.0, -static_cast<int>(k)));
  } else if (j.is_object() && j.contains("harmonic")) {
    const auto [a, b] = range("harmonic");
    if (a < 1) fail(field + ".harmonic", "indices must be >= 1");
    for (auto n = a; n <= b; ++n) out.push_back(1.0 / static_cast<double>(n));
  } else if (j.is_object() && j.contains("zeta_index")) {
    const auto [a, b] = range("zeta_index");
    if (a < 1) fail(field + ".zeta_index", "indices must be >= 1");
    if (!system.is_object() || system.value("family", "") != "zeta")
      fail(field + ".zeta_index", "needs a zeta family system");
    const double kappa = json_double(require(system, "kappa", "system"), "system.kappa");
    const double omega =
        system.contains("omega") ? json_double(system["omega"], "system.omega") : 2.0;
    for (auto n = a; n <= b; ++n)
      out.push_back(guarded(field, [&] { return zeta_min_ball_bounds(kappa, omega, n).r; }));
  } else {
    fail(field, "expected dyadic, harmonic, zeta_index or values");
  }
  if (out.empty()) fail(field, "empty scale grid");
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!(out[i] > 0) || !std::isfinite(out[i])) fail(field, "scales must be positive");
    if (i > 0 && !(out[i] < out[i - 1])) fail(field, "scale grid must be strictly decreasing");
  }
  return out;
}

ExperimentConfig parse_config(const Json& j) {
  if (!j.is_object()) fail("config", "expected a JSON object");
  ExperimentConfig c;
  c.echo = j;
  if (j.contains("schema") && json_int(j["schema"], "schema") != kConfigSchema)
    fail("schema", "unsupported version " + j["schema"].dump() + " (expected " +
                       std::to_string(kConfigSchema) + ")");
  c.experiment_id = json_string(require(j, "experiment_id", "config"), "experiment_id");
  if (c.experiment_id.empty() || !csv_safe(c.experiment_id))
    fail("experiment_id", "must be non-empty without commas, quotes or newlines");
  c.system = require(j, "system", "config");
  const std::string kind = json_string(require(c.system, "kind", "system"), "system.kind");
  if (kind == "map")
    c.kind = SystemKind::map;
  else if (kind == "rotation")
    c.kind = SystemKind::rotation;
  else if (kind == "flow")
    c.kind = SystemKind::flow;
  else
    fail("system.kind", "unknown kind '" + kind + "' (map, rotation, flow)");
  c.scales = parse_scales(require(j, "scales", "config"), c.system);
  if (j.contains("trials")) {
    const auto t = json_int(j["trials"], "trials");
    if (t < 1) fail("trials", "must be >= 1");
    c.trials = static_cast<std::size_t>(t);
  }
  if (j.contains("seed")) {
    const Json& s = j["seed"];
    if (s.is_number_unsigned() || s.is_number_integer()) {
      if (s.is_number_integer() && s.get<std::int64_t>() < 0) fail("seed", "must be non-negative");
      c.seed = s.get<std::uint64_t>();
    } else {
      fail("seed", "expected a non-negative integer");
    }
  }
  if (j.contains("budget")) {
    const auto b = json_int(j["budget"], "budget");
    if (b < 1) fail("budget", "must be >= 1");
    c.budget = static_cast<std::uint64_t>(b);
  }
  if (j.contains("mode")) {
    const std::string m = json_string(j["mode"], "mode");
    if (m == "single-log")
      c.mode = SlopeMode::single_log;
    else if (m == "double-log")
      c.mode = SlopeMode::double_log;
    else
      fail("mode", "expected single-log or double-log");
  }
  if (j.contains("method")) {
    const std::string m = json_string(j["method"], "method");
    if (m == "bracket")
      c.method = MapMethod::bracket;
    else if (m == "direct")
      c.method = MapMethod::direct;
    else
      fail("method", "expected bracket or direct");
    if (c.kind != SystemKind::map) fail("method", "only applies to map systems");
  }
  if (j.contains("output")) c.output = json_string(j["output"], "output");
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  return parse_config(j);
}

// ---------------------------------------------------------------------------
// Running

bool ReportRow::operator==(const ReportRow& o) const {
  return experiment_id == o.experiment_id && system == o.system && seed == o.seed && r == o.r &&
         completed == o.completed && value == o.value && slope_single == o.slope_single &&
         slope_double == o.slope_double && bracket_low == o.bracket_low &&
         bracket_high == o.bracket_high;
}

bool ExperimentReport::partial() const {
  return std::any_of(rows.begin(), rows.end(), [](const ReportRow& r) { return !r.completed; });
}

namespace {

void fill_slopes(ReportRow& row) {
  if (!row.completed) return;
  row.slope_single = finite_or_none(single_log_ratio(row.value, row.r));
  row.slope_double = finite_or_none(double_log_ratio(row.value, row.r));
}

// Builds the system once and evaluates one (scale, trial) job.
class JobRunner {
 public:
  explicit JobRunner(const ExperimentConfig& c) : c_(c) {
    switch (c.kind) {
      case SystemKind::map:
        map_ = parse_map_system(c.system);
        if (c.method == MapMethod::direct && !interval_support(*map_.map))
          fail("method", "direct needs a map whose repeller is an interval");
        name_ = map_.name;
        break;
      case SystemKind::rotation:
        theta_ = parse_theta(require(c.system, "theta", "system"));
        name_ = c.system.contains("name") ? json_string(c.system["name"], "system.name")
                                          : theta_name(c.system["theta"]);
        break;
      case SystemKind::flow:
        flow_ = parse_flow_system(c.system);
        name_ = c.system.contains("name") ? json_string(c.system["name"], "system.name")
                                          : std::string("flow");
        break;
    }
    if (!csv_safe(name_)) fail("system.name", "must not contain commas, quotes or newlines");
  }

  ReportRow run(std::size_t scale_index, std::size_t trial) const {
    ReportRow row;
    row.experiment_id = c_.experiment_id;
    row.system = name_;
    row.seed = trial_key(c_.seed, trial);
    row.r = c_.scales[scale_index];
    const CoverOptions opt{c_.budget, 0};
    switch (c_.kind) {
      case SystemKind::map:
        if (c_.method == MapMethod::bracket) {
          const auto b = cover_time_bracket(*map_.map, map_.measure, row.seed, row.r, opt);
          row.completed = b.mid.completed();
          row.value = static_cast<double>(b.mid.steps);
          if (b.lower.completed()) row.bracket_low = static_cast<double>(b.lower.steps);
          if (b.upper.completed()) row.bracket_high = static_cast<double>(b.upper.steps);
        } else {
          MapOrbit orbit(*map_.map, SymbolStream::sampled(map_.measure, row.seed),
                         row.r / 1024);
          const std::vector<std::pair<long double, long double>> support = {
              {map_.map->support_lo(), map_.map->support_hi()}};
          const auto run = cover_time_direct(orbit, support, row.r, opt);
          row.completed = run.completed();
          row.value = static_cast<double>(run.steps);
        }
        break;
      case SystemKind::rotation: {
        ContinuedFraction cf = theta_;
        RotationCoverOptions ro;
        ro.seed = row.seed;
        const auto res = guarded("system.theta", [&] { return rotation_cover_time(cf, row.r, ro); });
        row.completed = true;
        row.value = static_cast<double>(res.k);
        break;
      }
      case SystemKind::flow: {
        const FlowPoint start = sample_flow_point(*flow_, row.seed);
        const auto b =
            flow_cover_bracket(*flow_, start, row.r, {static_cast<double>(c_.budget)});
        row.completed = b.mid.completed();
        row.value = b.mid.time;
        if (b.lower.completed()) row.bracket_low = b.lower.time;
        if (b.upper.completed()) row.bracket_high = b.upper.time;
        break;
      }
    }
    fill_slopes(row);
    return row;
  }

 private:
  const ExperimentConfig& c_;
  std::string name_;
  MapSystem map_;
  ContinuedFraction theta_;
  std::shared_ptr<const SuspensionSpace> flow_;
};

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& config, const RunOptions& opt) {
  if (config.scales.empty()) fail("scales", "empty scale grid");
  for (std::size_t i = 1; i < config.scales.size(); ++i)
    if (!(config.scales[i] < config.scales[i - 1]))
      fail("scales", "scale grid must be strictly decreasing");
  if (config.trials < 1) fail("trials", "must be >= 1");
  if (config.budget < 1) fail("budget", "must be >= 1");

  const JobRunner runner(config);
  const std::size_t total = config.scales.size() * config.trials;
  std::vector<std::optional<ReportRow>> done(total);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::mutex mu;
  std::size_t flushed = 0;
  std::exception_ptr error;

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= total || stop.load()) return;
      try {
        ReportRow row = runner.run(i / config.trials, i % config.trials);
        std::lock_guard<std::mutex> lock(mu);
        done[i] = std::move(row);
        while (flushed < total && done[flushed]) {
          if (opt.on_row) opt.on_row(*done[flushed]);
          ++flushed;
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!error) error = std::current_exception();
        stop.store(true);
        return;
      }
    }
  };

  const unsigned threads = std::max(1u, std::min<unsigned>(opt.threads, static_cast<unsigned>(total)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (error) std::rethrow_exception(error);

  ExperimentReport report;
  report.config = config;
  report.version = tool_version();
  for (auto& row : done) report.rows.push_back(std::move(*row));

  std::vector<std::pair<double, double>> medians;
  for (std::size_t s = 0; s < config.scales.size(); ++s) {
    std::vector<double> values;
    for (std::size_t t = 0; t < config.trials; ++t) {
      const auto& row = report.rows[s * config.trials + t];
      if (row.completed) values.push_back(row.value);
    }
    if (!values.empty()) medians.emplace_back(config.scales[s], median(values));
  }
  if (!medians.empty()) report.aggregate = slope_series(medians);
  return report;
}

// ---------------------------------------------------------------------------
// Serialization

std::string report_csv_header() {
  return "experiment_id,system,seed,r,outcome,steps_or_time,slope_single,slope_double,"
         "bracket_low,bracket_high";
}

std::string report_csv_row(const ReportRow& row) {
  auto opt = [](const std::optional<double>& x) { return x ? fmt_g(*x) : std::string(); };
  std::string s = row.experiment_id + "," + row.system + "," + std::to_string(row.seed) + "," +
                  fmt_g(row.r) + "," + (row.completed ? "completed" : "exhausted") + "," +
                  fmt_g(row.value) + ",";
  if (row.completed) s += opt(row.slope_single) + "," + opt(row.slope_double);
  else s += ",";
  s += "," + opt(row.bracket_low) + "," + opt(row.bracket_high);
  return s;
}

std::string report_csv(const ExperimentReport& report) {
  std::string out = report_csv_header() + "\n";
  for (const auto& row : report.rows) out += report_csv_row(row) + "\n";
  return out;
}

std::vector<ReportRow> parse_report_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != report_csv_header())
    throw std::runtime_error("report csv: unexpected header");
  std::vector<ReportRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t pos = 0;
    for (;;) {
      const auto comma = line.find(',', pos);
      cells.push_back(line.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    const std::string where = "report csv line " + std::to_string(lineno);
    if (cells.size() != 10) throw std::runtime_error(where + ": expected 10 cells");
    auto num = [&](const std::string& cell) {
      std::size_t used = 0;
      const double v = std::stod(cell, &used);
      if (used != cell.size()) throw std::runtime_error(where + ": bad number '" + cell + "'");
      return v;
    };
    auto opt = [&](const std::string& cell) -> std::optional<double> {
      if (cell.empty()) return std::nullopt;
      return num(cell);
    };
    ReportRow row;
    row.experiment_id = cells[0];
    row.system = cells[1];
    row.seed = std::stoull(cells[2]);
    row.r = num(cells[3]);
    if (cells[4] == "completed")
      row.completed = true;
    else if (cells[4] == "exhausted")
      row.completed = false;
    else
      throw std::runtime_error(where + ": bad outcome '" + cells[4] + "'");
    row.value = num(cells[5]);
    row.slope_single = opt(cells[6]);
    row.slope_double = opt(cells[7]);
    row.bracket_low = opt(cells[8]);
    row.bracket_high = opt(cells[9]);
    rows.push_back(std::move(row));
  }
  return rows;
}

Json report_json(const ExperimentReport& report) {
  Json rows = Json::array();
  for (const auto& row : report.rows) {
    rows.push_back({{"experiment_id", row.experiment_id},
                    {"system", row.system},
                    {"seed", row.seed},
                    {"r", row.r},
                    {"outcome", row.completed ? "completed" : "exhausted"},
                    {"steps_or_time", row.value},
                    {"slope_single", opt_json(row.slope_single)},
                    {"slope_double", opt_json(row.slope_double)},
                    {"bracket_low", opt_json(row.bracket_low)},
                    {"bracket_high", opt_json(row.bracket_high)}});
  }
  Json out = {{"schema", kConfigSchema},
              {"version", report.version},
              {"experiment_id", report.config.experiment_id},
              {"config", report.config.echo},
              {"partial", report.partial()},
              {"rows", rows}};
  if (report.aggregate) {
    const auto& a = *report.aggregate;
    Json single = Json::array(), dbl = Json::array();
    for (double x : a.single) single.push_back(num_or_null(x));
    for (double x : a.double_) dbl.push_back(num_or_null(x));
    out["aggregate"] = {{"r", a.r},
                        {"median_tau", a.tau},
                        {"single", single},
                        {"double", dbl},
                        {"single_sup", num_or_null(a.single_sup)},
                        {"single_inf", num_or_null(a.single_inf)},
                        {"double_sup", num_or_null(a.double_sup)},
                        {"double_inf", num_or_null(a.double_inf)}};
  } else {
    out["aggregate"] = nullptr;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Other subcommands

namespace {

std::string id_of(const Json& j) {
  if (!j.is_object()) fail("config", "expected a JSON object");
  if (j.contains("schema") && json_int(j["schema"], "schema") != kConfigSchema)
    fail("schema", "unsupported version " + j["schema"].dump());
  const std::string id = json_string(require(j, "experiment_id", "config"), "experiment_id");
  if (id.empty() || !csv_safe(id))
    fail("experiment_id", "must be non-empty without commas, quotes or newlines");
  return id;
}

}  // namespace

DimsResult run_dims(const Json& j) {
  DimsResult out;
  out.experiment_id = id_of(j);
  const Json& system = require(j, "system", "config");
  const std::string kind = json_string(require(system, "kind", "system"), "system.kind");
  const Json& scales = require(j, "scales", "config");
  if (kind == "map") {
    const MapSystem sys = parse_map_system(system);
    const std::string curve = j.contains("curve") ? json_string(j["curve"], "curve") : "min-ball";
    if (curve == "closed-form") {
      if (!sys.zeta) fail("curve", "closed-form needs a zeta family system");
      std::vector<std::int64_t> ns;
      if (scales.is_object() && scales.contains("zeta_index")) {
        const Json& v = scales["zeta_index"];
        if (!v.is_array() || v.size() != 2) fail("scales.zeta_index", "expected [first, last]");
        const auto a = json_int(v[0], "scales.zeta_index"), b = json_int(v[1], "scales.zeta_index");
        if (a < 1 || a > b) fail("scales.zeta_index", "expected 1 <= first <= last");
        for (auto n = a; n <= b; ++n) ns.push_back(n);
      } else if (scales.is_object() && scales.contains("zeta_indices")) {
        for (const auto& v : scales["zeta_indices"]) ns.push_back(json_int(v, "scales.zeta_indices"));
      } else {
        fail("scales", "closed-form needs zeta_index or zeta_indices");
      }
      if (ns.empty()) fail("scales", "empty scale grid");
      out.curve = guarded("scales", [&] {
        return zeta_bound_curve(static_cast<double>(sys.zeta->kappa), sys.omega, ns);
      });
    } else if (curve == "min-ball") {
      const auto grid = parse_scales(scales, system);
      MinBallOptions mo;
      if (j.contains("domain")) {
        const std::string d = json_string(j["domain"], "domain");
        if (d == "interior")
          mo.domain = CentreDomain::interior;
        else if (d == "support")
          mo.domain = CentreDomain::support;
        else
          fail("domain", "expected interior or support");
      }
      for (double r : grid) {
        const auto mb = guarded("scales", [&] { return min_ball_measure(*sys.map, *sys.measure, r, mo); });
        out.curve.add_bracket(r, mb.lower, mb.upper, Provenance::net_approximate);
      }
    } else {
      fail("curve", "expected min-ball or closed-form");
    }
  } else if (kind == "flow") {
    const auto space = parse_flow_system(system);
    const auto grid = parse_scales(scales, system);
    const auto samples = j.contains("sampled_points") ? json_int(j["sampled_points"], "sampled_points") : 8;
    if (samples < 0) fail("sampled_points", "must be non-negative");
    const auto seed = j.contains("seed") ? json_int(j["seed"], "seed") : 0;
    out.curve = guarded("scales", [&] {
      return nu_min_ball_curve(*space, grid, static_cast<std::size_t>(samples),
                               static_cast<std::uint64_t>(seed));
    });
  } else {
    fail("system.kind", "dims supports map and flow systems");
  }
  out.report = guarded("scales", [&] { return dim_estimates(out.curve); });
  return out;
}

Json dims_json(const DimsResult& result) {
  return {{"schema", kConfigSchema},
          {"version", tool_version()},
          {"experiment_id", result.experiment_id},
          {"curve", Json::parse(curve_to_json(result.curve))},
          {"report", Json::parse(report_to_json(result.report))}};
}

CfResult run_cf(const Json& j) {
  CfResult out;
  out.experiment_id = id_of(j);
  out.cf = parse_theta(require(j, "theta", "config"));
  const auto count = j.contains("count") ? json_int(j["count"], "count") : 30;
  const auto window = j.contains("tail_window") ? json_int(j["tail_window"], "tail_window") : 10;
  if (count < 10) fail("count", "must be >= 10");
  if (window < 1) fail("tail_window", "must be >= 1");
  if (!out.cf.ensure(static_cast<std::size_t>(count)))
    fail("count", "theta provides only " + std::to_string(out.cf.size()) + " quotients");
  out.count = static_cast<std::size_t>(count);
  out.type = guarded("theta", [&] {
    return type_estimate(out.cf, out.count, static_cast<std::size_t>(window));
  });
  return out;
}

std::string cf_csv(CfResult& result) {
  std::string s = "i,a,p,q,log_q\n";
  for (std::size_t i = 0; i <= result.count; ++i) {
    const long k = static_cast<long>(i);
    s += std::to_string(i) + "," + (i == 0 ? std::string() : result.cf.a(i).str()) + "," +
         result.cf.p(k).str() + "," + result.cf.q(k).str() + "," +
         fmt_g(log_big(result.cf.q(k))) + "\n";
  }
  return s;
}

Json cf_json(CfResult& result) {
  Json a = Json::array(), p = Json::array(), q = Json::array();
  for (std::size_t i = 0; i <= result.count; ++i) {
    if (i > 0) a.push_back(result.cf.a(i).str());
    p.push_back(result.cf.p(static_cast<long>(i)).str());
    q.push_back(result.cf.q(static_cast<long>(i)).str());
  }
  Json beta = Json::array();
  for (const auto& b : result.type.beta_grid)
    beta.push_back({{"beta", b.beta}, {"log_min", num_or_null(b.log_min)}});
  const auto& t = result.type;
  return {{"schema", kConfigSchema},
          {"version", tool_version()},
          {"experiment_id", result.experiment_id},
          {"quotients", a},
          {"p", p},
          {"q", q},
          {"type",
           {{"ratios", t.ratios},
            {"tail_sup", num_or_null(t.tail_sup)},
            {"tail_inf", num_or_null(t.tail_inf)},
            {"declared_eta", t.declared_eta ? Json(*t.declared_eta) : Json(nullptr)},
            {"beta_grid", beta}}}};
}

MixingResult run_mixing(const Json& j) {
  MixingResult out;
  out.experiment_id = id_of(j);
  const auto measure = parse_measure(require(j, "measure", "config"), Sidedness::one_sided, "measure");
  const auto depth = j.contains("max_depth") ? json_int(j["max_depth"], "max_depth") : 4;
  if (depth < 1) fail("max_depth", "must be >= 1");
  std::vector<int> gaps;
  const Json& g = require(j, "gaps", "config");
  if (g.is_array()) {
    for (std::size_t i = 0; i < g.size(); ++i)
      gaps.push_back(static_cast<int>(json_int(g[i], "gaps[" + std::to_string(i) + "]")));
  } else if (g.is_object() && g.contains("range")) {
    const Json& v = g["range"];
    if (!v.is_array() || v.size() != 2) fail("gaps.range", "expected [first, last]");
    const auto a = json_int(v[0], "gaps.range"), b = json_int(v[1], "gaps.range");
    if (a > b) fail("gaps.range", "first must not exceed last");
    for (auto k = a; k <= b; ++k) gaps.push_back(static_cast<int>(k));
  } else {
    fail("gaps", "expected a list or {\"range\":[first,last]}");
  }
  if (gaps.empty()) fail("gaps", "empty gap list");
  for (int k : gaps)
    if (k < 1) fail("gaps", "gaps must be >= 1");
  const auto budget =
      j.contains("pair_budget") ? json_int(j["pair_budget"], "pair_budget") : 1000000;
  if (budget < 1) fail("pair_budget", "must be >= 1");
  out.report = guarded("measure", [&] {
    return psi_mixing_report(*measure, static_cast<int>(depth), gaps,
                             static_cast<std::size_t>(budget));
  });
  return out;
}

std::string mixing_csv(const MixingResult& result) {
  std::string s = "gap,psi\n";
  for (std::size_t i = 0; i < result.report.gaps.size(); ++i)
    s += std::to_string(result.report.gaps[i]) + "," + fmt_g(result.report.psi[i]) + "\n";
  return s;
}

Json mixing_json(const MixingResult& result) {
  const auto& r = result.report;
  Json psi = Json::array();
  for (double x : r.psi) psi.push_back(num_or_null(x));
  return {{"schema", kConfigSchema},
          {"version", tool_version()},
          {"experiment_id", result.experiment_id},
          {"gaps", r.gaps},
          {"psi", psi},
          {"min_depth", r.min_depth},
          {"max_depth", r.max_depth},
          {"pairs_tested", r.pairs_tested},
          {"exact_zero", r.exact_zero},
          {"rate", r.rate ? Json(*r.rate) : Json(nullptr)},
          {"constant", r.constant ? Json(*r.constant) : Json(nullptr)},
          {"fit_points", r.fit_points}};
}

}  // namespace coverlab
