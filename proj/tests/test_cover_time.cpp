#include <gtest/gtest.h>

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <cmath>

#include "coverlab/cover_time.hpp"
#include "coverlab/dimension.hpp"

using namespace coverlab;

namespace {

Rational q(const char* s) { return parse_rational(s); }

MarkovIntervalMap doubling() {
  return build_affine_markov({{q("0"), q("1/2")}, {q("1/2"), q("1")}}, {q("2"), q("2")},
                             {{0, 1}, {0, 1}});
}

std::shared_ptr<const SymbolicMeasure> fair() {
  static auto m = std::make_shared<const SymbolicMeasure>(make_bernoulli({0.5, 0.5}));
  return m;
}

const std::vector<std::pair<long double, long double>> kUnit = {{0.0L, 1.0L}};

// Dense-grid tau oracle: first j at which every grid point is within rho (+err) of the orbit.
std::uint64_t grid_cover_time(const std::vector<OrbitPoint>& orbit, double rho, double spacing) {
  const std::size_t n = static_cast<std::size_t>(std::ceil(1.0 / spacing)) + 1;
  std::vector<char> seen(n, 0);
  std::size_t left = n;
  for (std::size_t j = 0; j < orbit.size(); ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      const long double y = std::min(1.0L, static_cast<long double>(i) * spacing);
      if (!seen[i] && std::fabs(orbit[j].x - y) < rho + orbit[j].err) {
        seen[i] = 1;
        --left;
      }
    }
    if (left == 0) return j;
  }
  return std::numeric_limits<std::uint64_t>::max();
}

std::vector<OrbitPoint> record(const MarkovIntervalMap& map, std::uint64_t seed, double res,
                               std::size_t n) {
  MapOrbit orbit(map, SymbolStream::sampled(fair(), seed), res);
  std::vector<OrbitPoint> out;
  for (std::size_t j = 0; j < n; ++j) out.push_back(orbit.next());
  return out;
}

class Replay : public OrbitSource {
 public:
  explicit Replay(const std::vector<OrbitPoint>& pts) : pts_(pts) {}
  OrbitPoint next() override { return pts_.at(j_++); }

 private:
  const std::vector<OrbitPoint>& pts_;
  std::size_t j_ = 0;
};

}  // namespace

// ---------------------------------------------------------------- nets

TEST(Net, DoublingCentres) {
  for (int k = 1; k <= 10; ++k) {
    auto net = build_net(doubling(), std::ldexp(1.0, -k));
    ASSERT_EQ(net.centres.size(), std::size_t(1) << k);
    EXPECT_EQ(net.centres.front(), std::ldexp(0.5L, -k));
  }
  EXPECT_EQ(build_net(doubling(), 1.0).centres.size(), 1u);
  EXPECT_EQ(build_net(doubling(), 5.0).centres.size(), 1u);
}

TEST(Net, EveryPointNearACentre) {
  auto z = build_zeta_map(2.0L);
  for (double mesh : {0.1, 0.03}) {
    auto net = build_net(z.map, mesh);
    for (int i = 0; i <= 100000; ++i) {
      const long double y = i / 100000.0L;
      auto it = std::lower_bound(net.centres.begin(), net.centres.end(), y);
      long double d = 1.0L;
      if (it != net.centres.end()) d = std::min(d, *it - y);
      if (it != net.centres.begin()) d = std::min(d, y - *std::prev(it));
      ASSERT_LE(d, mesh / 2 + 1e-15) << "y=" << double(y);
    }
  }
}

TEST(Net, ZetaTailGetsACentre) {
  auto z = build_zeta_map(2.0L);
  const double r = zeta_min_ball_bounds(2.0, 2.0, 8).r;
  auto net = build_net(z.map, r);
  // the lumped tail cylinder containing [a_N, 1) has its midpoint within r/2 of 1
  EXPECT_GE(net.centres.back(), 1.0L - r / 2);
  EXPECT_LT(net.centres.back(), 1.0L);
}

TEST(Net, CantorCentresInSupport) {
  auto m = build_affine_markov({{q("0"), q("1/3")}, {q("2/3"), q("1")}}, {q("3"), q("3")},
                               {{0, 1}, {0, 1}});
  auto net = build_net(m, 1.0 / 9);
  EXPECT_EQ(net.centres.size(), 8u);
  for (auto c : net.centres) EXPECT_TRUE(m.support_contains(c, 1e-12L));
}

// ---------------------------------------------------------------- cover runs

TEST(CoverNet, ConstantOrbitNeverCovers) {
  FunctionOrbit orbit([](std::uint64_t) { return OrbitPoint{0.3L, 0.0L}; });
  const auto map = doubling();
  auto run = cover_time_net(orbit, build_net(map, 0.25), {1000, 0});
  EXPECT_FALSE(run.completed());
  EXPECT_EQ(run.steps, 1000u);
  EXPECT_EQ(run.unvisited, 2u);  // 0.3 sees 1/8 and 3/8
}

TEST(CoverNet, OneThirdCoversQuarterNet) {
  Net net;
  net.mesh = net.rho = 0.25;
  net.centres = {0.25L, 0.75L};
  const auto map = doubling();
  MapOrbit orbit(map, SymbolStream::periodic({0, 1}), 1e-9);
  auto run = cover_time_net(orbit, net, {100, 0});
  ASSERT_TRUE(run.completed());
  EXPECT_EQ(run.steps, 1u);
}

TEST(CoverNet, SingleCellCompletesAtZero) {
  FunctionOrbit orbit([](std::uint64_t) { return OrbitPoint{0.9L, 0.0L}; });
  auto run = cover_time_net(orbit, build_net(doubling(), 2.0), {10, 0});
  ASSERT_TRUE(run.completed());
  EXPECT_EQ(run.steps, 0u);
}

TEST(CoverBracket, DoublingCoarseAndFine) {
  const double r = std::ldexp(1.0, -6);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto b = cover_time_bracket(doubling(), fair(), seed, r, {1000000, 0});
    ASSERT_TRUE(b.lower.completed());
    ASSERT_TRUE(b.upper.completed());
    EXPECT_LE(b.lower.steps, b.mid.steps);
    EXPECT_LE(b.mid.steps, b.upper.steps);
    EXPECT_LT(static_cast<double>(b.upper.steps) / std::max<std::uint64_t>(1, b.lower.steps), 16.0);
  }
  auto big = cover_time_bracket(doubling(), fair(), 1, 1.0, {100, 0});
  EXPECT_TRUE(big.lower.completed() && big.upper.completed());
  EXPECT_EQ(big.lower.steps, 0u);
  EXPECT_EQ(big.upper.steps, 0u);
}

TEST(CoverBracket, StretchedRegimeMayExhaust) {
  auto z = build_zeta_map(2.0L);
  auto geo = std::make_shared<const SymbolicMeasure>(make_geometric(2.0));
  auto b = cover_time_bracket(z.map, geo, 3, 0.004, {20000, 0});
  EXPECT_FALSE(b.upper.completed());
  EXPECT_GT(b.upper.unvisited, 0u);
  EXPECT_EQ(b.upper.steps, 20000u);
}

TEST(CoverDirect, MatchesHandComputedOrbit) {
  // orbit 0.1, 0.5, 0.9 with r = 0.21 covers [0,1] at step 2
  std::vector<OrbitPoint> pts = {{0.1L, 0}, {0.5L, 0}, {0.9L, 0}, {0.3L, 0}};
  Replay orbit(pts);
  auto run = cover_time_direct(orbit, kUnit, 0.21, {3, 0});
  ASSERT_TRUE(run.completed());
  EXPECT_EQ(run.steps, 2u);
  std::vector<OrbitPoint> gap = {{0.1L, 0}, {0.9L, 0}, {0.5L, 0}};
  Replay o2(gap);
  auto r2 = cover_time_direct(o2, kUnit, 0.15, {2, 0});
  EXPECT_FALSE(r2.completed());
  EXPECT_EQ(r2.unvisited, 2u);
  // points at distance exactly r from the orbit stay uncovered: 0 and 1 here
  std::vector<OrbitPoint> tie = {{0.25L, 0}, {0.75L, 0}, {0.5L, 0}};
  Replay o3(tie);
  auto r3 = cover_time_direct(o3, kUnit, 0.25, {2, 0});
  EXPECT_FALSE(r3.completed());
  EXPECT_EQ(r3.unvisited, 2u);
}

// ---------------------------------------------------------------- hitting / waiting

TEST(Hitting, Examples) {
  FunctionOrbit a([](std::uint64_t j) { return OrbitPoint{j == 0 ? 0.42L : 0.9L, 0.0L}; });
  EXPECT_EQ(hitting_time(a, 0.42L, 0.01, 10).steps, 0u);
  const auto map = doubling();
  MapOrbit b(map, SymbolStream::periodic({0, 1}), 1e-9);
  auto h = hitting_time(b, 0.7L, 0.05, 10);
  EXPECT_TRUE(h.hit);
  EXPECT_EQ(h.steps, 1u);
}

TEST(Hitting, GeometricMeanForSmallBall) {
  const double p = std::ldexp(1.0, -8);
  const auto map = doubling();
  double total = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    MapOrbit orbit(map, SymbolStream::sampled(fair(), seed), 1e-4);
    auto h = hitting_time(orbit, 0.3125L, p / 2, 1000000);
    ASSERT_TRUE(h.hit);
    total += static_cast<double>(h.steps);
  }
  const double mean = total / 200;
  EXPECT_GE(mean, 0.5 / p);
  EXPECT_LE(mean, 2.0 / p);
}

TEST(Waiting, Examples) {
  FunctionOrbit a([](std::uint64_t j) { return OrbitPoint{j == 1 ? 0.55L : 0.1L, 0.0L}; });
  EXPECT_EQ(waiting_time(a, 0.5L, 0.6L, 10).steps, 1u);
  FunctionOrbit full([](std::uint64_t) { return OrbitPoint{0.3L, 0.0L}; });
  EXPECT_EQ(waiting_time(full, 0.0L, 1.0L, 10).steps, 1u);
  // x_0 inside E does not count
  FunctionOrbit b([](std::uint64_t j) { return OrbitPoint{j == 0 ? 0.55L : (j == 4 ? 0.51L : 0.1L), 0.0L}; });
  EXPECT_EQ(waiting_time(b, 0.5L, 0.6L, 10).steps, 4u);
}

TEST(Waiting, GoldenRotationFirstReturn) {
  using F = boost::multiprecision::cpp_bin_float_50;
  const F theta = (boost::multiprecision::sqrt(F(5)) - 1) / 2;
  const long double th = theta.convert_to<long double>();
  FunctionOrbit rot([th](std::uint64_t j) {
    long double x = static_cast<long double>(j) * th;
    return OrbitPoint{x - std::floor(x), 1e-17L};
  });
  auto w = waiting_time(rot, 0.0L, 0.05L, 100000);
  // brute scan in 50-digit arithmetic
  std::uint64_t brute = 0;
  for (std::uint64_t n = 1; n < 100000; ++n) {
    F x = theta * n;
    x -= boost::multiprecision::floor(x);
    if (x < F("0.05")) {
      brute = n;
      break;
    }
  }
  EXPECT_EQ(w.steps, brute);
  EXPECT_EQ(brute, 13u);  // a denominator of the golden convergents
}

// ---------------------------------------------------------------- slopes

TEST(Slopes, ExactLaws) {
  std::vector<std::pair<double, double>> pow2, expo;
  for (int k = 2; k <= 8; ++k) {
    const double r = std::ldexp(1.0, -k);
    pow2.emplace_back(r, 1.0 / (r * r));
    expo.emplace_back(r, std::exp(1.0 / r));
  }
  auto a = slope_series(pow2);
  for (double s : a.single) EXPECT_NEAR(s, 2.0, 1e-12);
  auto b = slope_series(expo);
  for (double s : b.double_) EXPECT_NEAR(s, 1.0, 1e-12);
  EXPECT_NEAR(b.double_sup, 1.0, 1e-12);
  EXPECT_NEAR(b.double_inf, 1.0, 1e-12);
  auto c = slope_series(std::vector<std::pair<double, double>>{{0.5, 2.0}, {0.25, 1.0}});
  EXPECT_TRUE(std::isnan(c.double_[0]));
  EXPECT_NEAR(c.single[1], 0.0, 0.0);
}

TEST(Slopes, Errors) {
  CoverRun bad;
  bad.r = 0.1;
  EXPECT_THROW(slope_series(std::vector<CoverRun>{bad}), CoverError);
  EXPECT_THROW(slope_series(std::vector<std::pair<double, double>>{{0.25, 10.0}, {0.5, 3.0}}), CoverError);
}

TEST(Slopes, DoublingEmpiricalRange) {
  const auto map = doubling();
  std::vector<Net> nets;
  for (int k = 8; k <= 16; ++k) nets.push_back(build_net(map, std::ldexp(1.0, -k)));
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    MapOrbit orbit(map, SymbolStream::sampled(fair(), seed), std::ldexp(1.0, -16));
    auto runs = cover_time_multi(orbit, nets, {20000000, 0});
    auto s = slope_series(runs);
    EXPECT_GE(s.single_inf, 0.98);
    EXPECT_LE(s.single_sup, 1.40);
  }
}

// ---------------------------------------------------------------- properties

TEST(CoverProperties, MonotoneUnderRefinement) {
  const auto map = doubling();
  std::vector<Net> nets;
  for (int k = 3; k <= 9; ++k) nets.push_back(build_net(map, std::ldexp(1.0, -k)));
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    MapOrbit orbit(map, SymbolStream::sampled(fair(), seed), std::ldexp(1.0, -9));
    auto runs = cover_time_multi(orbit, nets, {10000000, 0});
    for (std::size_t i = 1; i < runs.size(); ++i) EXPECT_GE(runs[i].steps, runs[i - 1].steps);
  }
}

TEST(CoverProperties, SandwichAgainstDenseGridAndDirect) {
  auto map = doubling();
  for (int k : {5, 6}) {
    const double rho = std::ldexp(1.0, -k);
    const Net net = build_net(map, rho);
    for (std::uint64_t seed = 100; seed < 150; ++seed) {
      auto pts = record(map, seed, rho, 20000);
      Replay o1(pts), o2(pts), o3(pts);
      const auto q_run = cover_time_net(o1, net, {19999, 0});
      const auto fine = cover_time_direct(o2, kUnit, rho, {19999, 0});
      const auto coarse = cover_time_direct(o3, kUnit, 2 * rho, {19999, 0});
      ASSERT_TRUE(q_run.completed() && fine.completed() && coarse.completed());
      EXPECT_LE(coarse.steps, q_run.steps);
      EXPECT_LE(q_run.steps, fine.steps);
      const auto g2 = grid_cover_time(pts, 2 * rho, rho / 8);
      const auto g1 = grid_cover_time(pts, rho, rho / 8);
      EXPECT_LE(g2, q_run.steps);
      EXPECT_LE(q_run.steps, std::max(g1, fine.steps));
      EXPECT_LE(g1, fine.steps);
      EXPECT_LE(g2, coarse.steps);
    }
  }
}

TEST(CoverProperties, HittingTimesBoundedByCoverTime) {
  auto map = doubling();
  const Net net = build_net(map, std::ldexp(1.0, -5));
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    MapOrbit orbit(map, SymbolStream::sampled(fair(), seed), net.mesh);
    auto run = cover_time_net(orbit, net, {1000000, 0});
    ASSERT_TRUE(run.completed());
    for (long double c : net.centres) {
      MapOrbit again(map, SymbolStream::sampled(fair(), seed), net.mesh);
      auto h = hitting_time(again, c, net.rho, run.steps);
      EXPECT_TRUE(h.hit);
      EXPECT_LE(h.steps, run.steps);
    }
  }
}

TEST(CoverProperties, Deterministic) {
  for (std::uint64_t seed : {1ull, 77ull}) {
    auto a = cover_time_bracket(doubling(), fair(), seed, 1.0 / 64, {1000000, 1000});
    auto b = cover_time_bracket(doubling(), fair(), seed, 1.0 / 64, {1000000, 1000});
    EXPECT_EQ(a.upper.steps, b.upper.steps);
    EXPECT_EQ(a.lower.steps, b.lower.steps);
    EXPECT_EQ(a.mid.progress, b.mid.progress);
  }
}

TEST(Csv, Header) {
  CoverRun run;
  run.r = 0.25;
  run.mesh = 0.25;
  run.outcome = Outcome::completed;
  run.steps = 16;
  const std::string csv = cover_runs_csv({{"e1", "doubling", run}});
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "experiment_id,system,seed,r,mesh,outcome,steps_or_budget,unvisited,slope_single,"
            "slope_double");
  EXPECT_NE(csv.find("e1,doubling,0,0.25,0.25,completed,16,0,2,"), std::string::npos);
}
