#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "coverlab/experiment.hpp"

using namespace coverlab;

namespace {

Json make_doubling(int trials) {
  Json j = Json::parse(R"({
    "schema": 1,
    "experiment_id": "doubling-sweep",
    "system": {"kind": "map", "family": "doubling"},
    "scales": {"dyadic": [8, 14]},
    "seed": 7,
    "budget": 10000000
  })");
  j["trials"] = trials;
  return j;
}

// Cover times of the golden rotation at every scale, by an ordered-set gap scan in long
// double: the orbit covers at radius r once the largest circular gap is below 2r.
std::vector<std::uint64_t> golden_gap_scan(const std::vector<double>& scales) {
  const long double theta = (std::sqrt(5.0L) - 1) / 2;
  std::set<long double> pts;
  std::multiset<long double> gaps;
  std::vector<std::uint64_t> out;
  std::size_t next = 0;
  long double x = 0;
  pts.insert(0);
  gaps.insert(1);
  for (std::uint64_t k = 0; next < scales.size(); ++k) {
    if (k > 0) {
      x += theta;
      if (x >= 1) x -= 1;
      auto it = pts.insert(x).first;
      const long double lo = it == pts.begin() ? *pts.rbegin() - 1 : *std::prev(it);
      const long double hi = std::next(it) == pts.end() ? *pts.begin() + 1 : *std::next(it);
      gaps.erase(gaps.find(hi - lo));
      gaps.insert(x - lo);
      gaps.insert(hi - x);
    }
    while (next < scales.size() && *gaps.rbegin() < 2.0L * scales[next]) {
      out.push_back(k);
      ++next;
    }
  }
  return out;
}

}  // namespace

TEST(Config, ParsesDefaultsAndGrid) {
  const auto c = parse_config(make_doubling(10));
  EXPECT_EQ(c.experiment_id, "doubling-sweep");
  EXPECT_EQ(c.kind, SystemKind::map);
  ASSERT_EQ(c.scales.size(), 7u);
  EXPECT_EQ(c.scales.front(), std::ldexp(1.0, -8));
  EXPECT_EQ(c.scales.back(), std::ldexp(1.0, -14));
  EXPECT_EQ(c.trials, 10u);
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.mode, SlopeMode::single_log);
  EXPECT_EQ(c.method, MapMethod::bracket);
  EXPECT_EQ(c.echo, make_doubling(10));
}

TEST(Config, HarmonicAndZetaGrids) {
  const auto h = parse_scales(Json::parse(R"({"harmonic":[2,5]})"), Json());
  ASSERT_EQ(h.size(), 4u);
  EXPECT_DOUBLE_EQ(h[0], 0.5);
  EXPECT_DOUBLE_EQ(h[3], 0.2);
  const Json zsys = Json::parse(R"({"kind":"map","family":"zeta","kappa":2,"omega":2})");
  const auto z = parse_scales(Json::parse(R"({"zeta_index":[1,4]})"), zsys);
  ASSERT_EQ(z.size(), 4u);
  for (std::size_t i = 0; i < z.size(); ++i)
    EXPECT_DOUBLE_EQ(z[i], zeta_min_ball_bounds(2.0, 2.0, static_cast<std::int64_t>(i + 1)).r);
  EXPECT_THROW(parse_scales(Json::parse(R"({"zeta_index":[1,4]})"), Json::parse(R"({"family":"doubling"})")),
               ConfigError);
}

TEST(Config, FieldLevelErrors) {
  auto message = [](const Json& j) {
    try {
      parse_config(j);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  Json j = make_doubling(1);
  j["scales"] = Json::parse(R"({"values":[]})");
  EXPECT_EQ(message(j).rfind("scales:", 0), 0u) << message(j);
  j["scales"] = Json::parse(R"([0.1, 0.2])");
  EXPECT_NE(message(j).find("strictly decreasing"), std::string::npos);
  j = make_doubling(0);
  EXPECT_EQ(message(j).rfind("trials:", 0), 0u);
  j = make_doubling(1);
  j["budget"] = 0;
  EXPECT_EQ(message(j).rfind("budget:", 0), 0u);
  j = make_doubling(1);
  j["schema"] = 2;
  EXPECT_EQ(message(j).rfind("schema:", 0), 0u);
  j = make_doubling(1);
  j["system"]["kind"] = "torus";
  EXPECT_EQ(message(j).rfind("system.kind:", 0), 0u);
  j = make_doubling(1);
  j.erase("experiment_id");
  EXPECT_EQ(message(j).rfind("config.experiment_id:", 0), 0u);
  j = make_doubling(1);
  j["mode"] = "triple-log";
  EXPECT_EQ(message(j).rfind("mode:", 0), 0u);
  j = make_doubling(1);
  j["experiment_id"] = "a,b";
  EXPECT_EQ(message(j).rfind("experiment_id:", 0), 0u);
}

TEST(Config, EmptyGridIsRejectedAtRunTime) {
  auto c = parse_config(make_doubling(1));
  c.scales.clear();
  EXPECT_THROW(run_experiment(c), ConfigError);
}

TEST(Config, UnconstructibleSystems) {
  auto sys_error = [](const char* text) {
    try {
      parse_map_system(Json::parse(text));
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  EXPECT_EQ(sys_error(R"({"family":"tent"})").rfind("system.family:", 0), 0u);
  EXPECT_EQ(sys_error(R"({"family":"zeta","kappa":0.5})").rfind("system.kappa:", 0), 0u);
  EXPECT_EQ(sys_error(R"({"family":"doubling","measure":{"bernoulli":[0.2,0.3,0.5]}})")
                .rfind("system.measure:", 0),
            0u);
  EXPECT_EQ(sys_error(R"({"family":"doubling","measure":{"bernoulli":[0.2,0.3]}})")
                .rfind("system.measure.bernoulli:", 0),
            0u);
  EXPECT_THROW(parse_flow_system(Json::parse(R"({"base":{"geometric":2},"roof":{"constant":1}})")),
               ConfigError);
  EXPECT_THROW(parse_theta(Json::parse(R"({"quotients":[1,0,2]})")), ConfigError);
  EXPECT_THROW(parse_theta(Json::parse(R"({"decimal":"0.5"})")), ConfigError);
}

TEST(Config, SystemSpecs) {
  const auto aff = parse_map_system(Json::parse(R"({
    "family":"affine",
    "partition":[["0","1/3"],["1/3","1"]],
    "slopes":[3,"3/2"],
    "images":[[0,1],[0,1]],
    "measure":{"markov":[[0.5,0.5],[0.25,0.75]]}})"));
  EXPECT_EQ(aff.map->size(), 2u);
  EXPECT_EQ(aff.map->right_exact(0), Rational(1, 3));
  EXPECT_EQ(aff.measure->kind(), SymbolicMeasure::Kind::markov);

  const auto z = parse_map_system(Json::parse(R"({"family":"zeta","kappa":2})"));
  ASSERT_TRUE(z.zeta.has_value());
  EXPECT_EQ(z.name, "zeta-k2-w2");
  EXPECT_DOUBLE_EQ(z.measure->weight(1), 0.5);

  auto cf = parse_theta(Json::parse(R"({"quotients":[1,2,"123456789012345678901234567890"]})"));
  EXPECT_EQ(cf.a(3).str(), "123456789012345678901234567890");
  auto golden = parse_theta(Json::parse(
      R"({"decimal":"0.6180339887498948482045868343656381177203091798057628621354486227","digits":60,"count":40})"));
  for (std::size_t i = 1; i <= 40; ++i) EXPECT_EQ(golden.a(i), 1);
  auto two = parse_theta(Json::parse(R"({"rule":"constant","a":2})"));
  ASSERT_TRUE(two.ensure(5));
  EXPECT_EQ(two.a(5), 2);
  auto eta = parse_theta(Json::parse(R"({"rule":"type","eta":2})"));
  EXPECT_EQ(eta.declared_eta(), 2.0);

  const auto flow = parse_flow_system(Json::parse(R"({
    "base":{"bernoulli":[0.5,0.5]},
    "roof":{"depth":2,"values":{"000":"1/2","001":"1/2","100":"1/2","101":"1/2",
                                "010":1,"011":1,"110":1,"111":"3/4"}}})"));
  EXPECT_EQ(flow->roof().depth(), 2);
  EXPECT_EQ(flow->roof().min(), Rational(1, 2));
  EXPECT_EQ(flow->roof().max(), Rational(1));
  const auto flow2 = parse_flow_system(Json::parse(
      R"({"base":{"bernoulli":[0.5,0.5]},"roof":{"depth":1,"values":{"0":1,"1":"1/2"}}})"));
  EXPECT_EQ(flow2->roof().min(), Rational(1, 2));
}

TEST(Experiment, DoublingSweepRowsAndAggregate) {
  const auto c = parse_config(make_doubling(10));
  const auto rep = run_experiment(c, {2, {}});
  ASSERT_EQ(rep.rows.size(), 70u);
  EXPECT_FALSE(rep.partial());
  for (std::size_t i = 0; i < rep.rows.size(); ++i) {
    const auto& row = rep.rows[i];
    EXPECT_EQ(row.r, c.scales[i / 10]);
    EXPECT_EQ(row.seed, trial_key(7, i % 10));
    EXPECT_EQ(row.system, "doubling");
    ASSERT_TRUE(row.slope_single.has_value());
    ASSERT_TRUE(row.bracket_low && row.bracket_high);
    EXPECT_LE(*row.bracket_low, row.value);
    EXPECT_LE(row.value, *row.bracket_high);
  }
  // Coupon collector: the net has N = 1/r centres spaced r apart and each orbit point visits
  // the two centres within r, so each centre is hit with probability 2/N per step and the
  // median cover time is about (N/2)(ln N + ln(1/ln 2)).
  ASSERT_TRUE(rep.aggregate.has_value());
  const auto& a = *rep.aggregate;
  ASSERT_EQ(a.r.size(), 7u);
  for (std::size_t s = 0; s < a.r.size(); ++s) {
    const double n = 1.0 / a.r[s];
    const double oracle = std::log(n / 2 * (std::log(n) - std::log(std::log(2.0)))) / std::log(n);
    EXPECT_NEAR(a.single[s], oracle, 0.04) << "scale " << a.r[s];
  }
  EXPECT_GT(a.single_inf, 1.0);
  EXPECT_LT(a.single_sup, 1.3);
}

TEST(Experiment, GoldenRotationExactTimes) {
  const Json j = Json::parse(R"({
    "experiment_id": "golden",
    "system": {"kind": "rotation", "theta": {"rule": "constant", "a": 1}},
    "scales": {"dyadic": [4, 20]},
    "seed": 3
  })");
  const auto c = parse_config(j);
  const auto rep = run_experiment(c);
  ASSERT_EQ(rep.rows.size(), 17u);
  const auto oracle = golden_gap_scan(c.scales);
  for (std::size_t i = 0; i < rep.rows.size(); ++i) {
    EXPECT_TRUE(rep.rows[i].completed);
    EXPECT_EQ(rep.rows[i].value, static_cast<double>(oracle[i])) << "scale index " << i;
    EXPECT_FALSE(rep.rows[i].bracket_low.has_value());
  }
  EXPECT_EQ(rep.rows[0].system, "rotation-const1");
  ASSERT_TRUE(rep.aggregate);
  EXPECT_NEAR(rep.aggregate->single.back(), 1.0, 0.05);
}

TEST(Experiment, RotationWithShortPrefixIsAConfigError) {
  const Json j = Json::parse(R"({
    "experiment_id": "short",
    "system": {"kind": "rotation", "theta": {"quotients": [1, 1, 1]}},
    "scales": {"dyadic": [10, 11]}
  })");
  EXPECT_THROW(run_experiment(parse_config(j)), ConfigError);
}

TEST(Experiment, ExhaustedRowsAreFlagged) {
  Json j = make_doubling(3);
  j["budget"] = 50;
  const auto rep = run_experiment(parse_config(j));
  ASSERT_EQ(rep.rows.size(), 21u);
  EXPECT_TRUE(rep.partial());
  for (const auto& row : rep.rows) {
    EXPECT_FALSE(row.completed);
    EXPECT_EQ(row.value, 50.0);
    EXPECT_FALSE(row.slope_single.has_value());
    EXPECT_FALSE(row.slope_double.has_value());
  }
  EXPECT_FALSE(rep.aggregate.has_value());
  const std::string csv = report_csv(rep);
  const auto line = csv.substr(csv.find('\n') + 1, csv.find('\n', csv.find('\n') + 1) - csv.find('\n') - 1);
  EXPECT_NE(line.find(",exhausted,50,,,"), std::string::npos) << line;
}

TEST(Experiment, CsvRoundTrip) {
  Json j = make_doubling(4);
  j["scales"] = Json::parse(R"({"dyadic":[3,6]})");
  j["budget"] = 60;  // mixes completed and exhausted rows
  const auto rep = run_experiment(parse_config(j));
  bool some_done = false, some_exhausted = false;
  for (const auto& row : rep.rows) (row.completed ? some_done : some_exhausted) = true;
  EXPECT_TRUE(some_done && some_exhausted);
  const std::string csv = report_csv(rep);
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "experiment_id,system,seed,r,outcome,steps_or_time,slope_single,slope_double,"
            "bracket_low,bracket_high");
  const auto back = parse_report_csv(csv);
  ASSERT_EQ(back.size(), rep.rows.size());
  for (std::size_t i = 0; i < back.size(); ++i) EXPECT_TRUE(back[i] == rep.rows[i]) << i;

  ReportRow odd;
  odd.experiment_id = "x";
  odd.system = "s";
  odd.seed = ~0ull;
  odd.r = 0.1;
  odd.completed = true;
  odd.value = 1.0 / 3.0;
  odd.slope_single = std::nextafter(1.0, 2.0);
  odd.bracket_high = 1e-300;
  const auto again = parse_report_csv(report_csv_header() + "\n" + report_csv_row(odd) + "\n");
  ASSERT_EQ(again.size(), 1u);
  EXPECT_TRUE(again[0] == odd);
  EXPECT_THROW(parse_report_csv("bad header\n"), std::runtime_error);
}

TEST(Experiment, ByteIdenticalAcrossRunsAndThreads) {
  Json j = make_doubling(5);
  j["scales"] = Json::parse(R"({"dyadic":[6,9]})");
  const auto c = parse_config(j);
  const auto a = report_csv(run_experiment(c, {1, {}}));
  const auto b = report_csv(run_experiment(c, {1, {}}));
  const auto d = report_csv(run_experiment(c, {4, {}}));
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, d);
  const auto ja = report_json(run_experiment(c, {1, {}})).dump();
  const auto jb = report_json(run_experiment(c, {3, {}})).dump();
  EXPECT_EQ(ja, jb);
}

TEST(Experiment, RowsStreamInOrder) {
  Json j = make_doubling(4);
  j["scales"] = Json::parse(R"({"dyadic":[5,8]})");
  std::vector<ReportRow> streamed;
  const auto rep =
      run_experiment(parse_config(j), {3, [&](const ReportRow& r) { streamed.push_back(r); }});
  ASSERT_EQ(streamed.size(), rep.rows.size());
  for (std::size_t i = 0; i < streamed.size(); ++i) EXPECT_TRUE(streamed[i] == rep.rows[i]);
}

TEST(Experiment, JsonMirrorsRows) {
  Json j = make_doubling(2);
  j["scales"] = Json::parse(R"({"dyadic":[4,5]})");
  const auto rep = run_experiment(parse_config(j));
  const Json out = report_json(rep);
  EXPECT_EQ(out["schema"], 1);
  EXPECT_EQ(out["version"], tool_version());
  EXPECT_EQ(out["config"], j);
  ASSERT_EQ(out["rows"].size(), rep.rows.size());
  for (std::size_t i = 0; i < rep.rows.size(); ++i) {
    EXPECT_EQ(out["rows"][i]["seed"].get<std::uint64_t>(), rep.rows[i].seed);
    EXPECT_EQ(out["rows"][i]["steps_or_time"].get<double>(), rep.rows[i].value);
    EXPECT_EQ(out["rows"][i]["outcome"], "completed");
  }
  EXPECT_FALSE(out["aggregate"].is_null());
}

TEST(Experiment, DirectMethodOnZetaMap) {
  const Json j = Json::parse(R"({
    "experiment_id": "zeta-direct",
    "system": {"kind": "map", "family": "zeta", "kappa": 2, "omega": 2},
    "scales": {"zeta_index": [2, 4]},
    "trials": 3,
    "method": "direct",
    "budget": 200000
  })");
  const auto c = parse_config(j);
  const auto a = run_experiment(c);
  const auto b = run_experiment(c, {2, {}});
  ASSERT_EQ(a.rows.size(), 9u);
  EXPECT_EQ(report_csv(a), report_csv(b));
  for (const auto& row : a.rows) {
    EXPECT_TRUE(row.completed);
    EXPECT_FALSE(row.bracket_low.has_value());
  }
  // cover times are monotone in the scale for a fixed orbit
  for (std::size_t t = 0; t < 3; ++t) {
    EXPECT_LE(a.rows[t].value, a.rows[3 + t].value);
    EXPECT_LE(a.rows[3 + t].value, a.rows[6 + t].value);
  }
}

TEST(Experiment, FlowSweep) {
  const Json j = Json::parse(R"({
    "experiment_id": "flow",
    "system": {"kind": "flow", "base": {"bernoulli": [0.5, 0.5]}, "roof": {"constant": 1}},
    "scales": {"dyadic": [2, 4]},
    "trials": 4,
    "seed": 11,
    "budget": 100000
  })");
  const auto rep = run_experiment(parse_config(j), {2, {}});
  ASSERT_EQ(rep.rows.size(), 12u);
  for (const auto& row : rep.rows) {
    EXPECT_TRUE(row.completed);
    EXPECT_EQ(row.system, "flow");
    ASSERT_TRUE(row.bracket_low && row.bracket_high);
    EXPECT_LE(*row.bracket_low, row.value);
    EXPECT_LE(row.value, *row.bracket_high);
  }
  EXPECT_EQ(report_csv(rep), report_csv(run_experiment(parse_config(j))));
}

TEST(Subcommands, DimsClosedFormStretched) {
  const Json j = Json::parse(R"({
    "experiment_id": "dims",
    "system": {"kind": "map", "family": "zeta", "kappa": 2, "omega": 2},
    "curve": "closed-form",
    "scales": {"zeta_indices": [10, 100, 1000, 10000, 100000, 1000000]}
  })");
  const auto d = run_dims(j);
  EXPECT_EQ(d.curve.points.size(), 6u);
  EXPECT_NEAR(d.report.stretched_upper.hi, 1.0, 0.05);
  EXPECT_NEAR(d.report.stretched_lower.lo, 1.0, 0.05);
  const std::string csv = curve_to_csv(d.curve);
  EXPECT_EQ(csv.rfind("r,M_lower,M_upper,provenance", 0), 0u);
  const Json out = dims_json(d);
  EXPECT_EQ(out["experiment_id"], "dims");
  EXPECT_TRUE(out["report"].is_object());
}

TEST(Subcommands, DimsMinBallDoubling) {
  const Json j = Json::parse(R"({
    "experiment_id": "dims-doubling",
    "system": {"kind": "map", "family": "doubling"},
    "scales": {"dyadic": [4, 12]}
  })");
  const auto d = run_dims(j);
  EXPECT_EQ(d.curve.points.size(), 9u);
  EXPECT_NEAR(d.report.minkowski_upper.hi, 1.0, 0.05);
  EXPECT_THROW(run_dims(Json::parse(R"({"experiment_id":"x","system":{"kind":"rotation"},"scales":[0.1]})")),
               ConfigError);
}

TEST(Subcommands, CfGolden) {
  auto r = run_cf(Json::parse(R"({"experiment_id":"cf","theta":{"rule":"constant","a":1},"count":20})"));
  const std::string csv = cf_csv(r);
  EXPECT_EQ(csv.rfind("i,a,p,q,log_q\n0,,0,1,0\n1,1,1,1,0\n2,1,1,2,", 0), 0u) << csv;
  const Json j = cf_json(r);
  EXPECT_EQ(j["quotients"].size(), 20u);
  EXPECT_EQ(j["q"][20], "10946");
  // ratios log F_{n+2} / log F_{n+1} for n = 2..19 (Fibonacci denominators)
  std::vector<double> fib = {1, 1};
  while (fib.size() < 24) fib.push_back(fib[fib.size() - 1] + fib[fib.size() - 2]);
  const auto& ratios = j["type"]["ratios"];
  ASSERT_EQ(ratios.size(), 18u);
  double tail_sup = 0;
  for (std::size_t k = 0; k < ratios.size(); ++k) {
    const double expect = std::log(fib[k + 3]) / std::log(fib[k + 2]);
    EXPECT_NEAR(ratios[k].get<double>(), expect, 1e-12);
    if (k + 10 >= ratios.size()) tail_sup = std::max(tail_sup, expect);
  }
  EXPECT_NEAR(j["type"]["tail_sup"].get<double>(), tail_sup, 1e-12);
  EXPECT_THROW(run_cf(Json::parse(R"({"experiment_id":"cf","theta":{"quotients":[1,2]},"count":20})")),
               ConfigError);
}

TEST(Subcommands, MixingBernoulliAndMarkov) {
  const auto b = run_mixing(Json::parse(
      R"({"experiment_id":"mix","measure":{"bernoulli":[0.3,0.7]},"max_depth":3,"gaps":{"range":[1,6]}})"));
  ASSERT_EQ(b.report.psi.size(), 6u);
  for (double p : b.report.psi) EXPECT_EQ(p, 0.0);
  EXPECT_EQ(mixing_csv(b).rfind("gap,psi\n1,0\n", 0), 0u);
  const auto m = run_mixing(Json::parse(
      R"({"experiment_id":"mix","measure":{"markov":[[0.9,0.1],[0.5,0.5]]},"max_depth":3,"gaps":[1,2,3,4,5,6,7,8]})"));
  ASSERT_TRUE(m.report.rate.has_value());
  EXPECT_NEAR(*m.report.rate, -std::log(0.4), 0.1);
  EXPECT_FALSE(mixing_json(m)["rate"].is_null());
  EXPECT_THROW(run_mixing(Json::parse(R"({"experiment_id":"mix","measure":{"bernoulli":[1]},"gaps":[]})")),
               ConfigError);
}
