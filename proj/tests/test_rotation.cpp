#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "coverlab/rotation.hpp"

using namespace coverlab;
namespace mp = boost::multiprecision;

namespace {

const char* kGolden =
    "0.61803398874989484820458683436563811772030917980576286213544862270526046281890244970720720418"
    "939113748475408807538689175212663386222353693179318006076672635443338908659593958290563832266"
    "131992829026788";
const char* kSqrt2m1 =
    "0.41421356237309504880168872420969807856967187537694807317667973799073247846210703885038753432"
    "764157273501384623091229702492483605585073721264412149709993583141322266592750559275579995050"
    "115278206057147";

double d(const Rational& x) { return static_cast<double>(to_long_double(x)); }

Rational frac(const Rational& x) {
  BigInt n = mp::numerator(x) / mp::denominator(x);
  Rational f = x - n;
  if (f < 0) f += 1;
  return f;
}

// Exact sorted-gap scan of {0, theta, ..., k theta} with a rational theta.
std::uint64_t exact_gap_scan(const Rational& theta, double r, std::uint64_t limit) {
  const Rational two_r = 2 * Rational(r);
  std::vector<Rational> pts;
  for (std::uint64_t k = 0; k <= limit; ++k) {
    pts.push_back(frac(theta * k));
    std::vector<Rational> s = pts;
    std::sort(s.begin(), s.end());
    Rational g = s.front() + 1 - s.back();
    for (std::size_t i = 1; i < s.size(); ++i) g = std::max(g, Rational(s[i] - s[i - 1]));
    if (g <= two_r) return k;
  }
  return limit + 1;
}

ContinuedFraction random_cf(std::mt19937_64& gen, std::size_t n) {
  std::uniform_int_distribution<int> u(1, 9);
  std::vector<BigInt> a;
  for (std::size_t i = 0; i < n; ++i) a.push_back(u(gen));
  return ContinuedFraction::from_quotients(a);
}

}  // namespace

TEST(CfExpand, GoldenAllOnes) {
  auto cf = cf_expand(kGolden, 50);
  ASSERT_EQ(cf.size(), 50u);
  for (std::size_t i = 1; i <= 50; ++i) EXPECT_EQ(cf.a(i), 1);
  auto cf2 = cf_expand(kGolden, 50, 200);
  for (std::size_t i = 1; i <= 50; ++i) EXPECT_EQ(cf2.a(i), 1);
}

TEST(CfExpand, SqrtTwoAllTwos) {
  auto cf = cf_expand(kSqrt2m1, 30, 200);
  for (std::size_t i = 1; i <= 30; ++i) EXPECT_EQ(cf.a(i), 2);
}

TEST(CfExpand, Errors) {
  try {
    cf_expand("1/2", 5);
    FAIL();
  } catch (const RotationError& e) {
    EXPECT_NE(std::string(e.what()).find("rational"), std::string::npos);
  }
  try {
    cf_expand(kGolden, 50, 10);
    FAIL();
  } catch (const RotationError& e) {
    EXPECT_NE(std::string(e.what()).find("precision"), std::string::npos);
  }
  EXPECT_THROW(cf_expand("1.5", 3), RotationError);
  EXPECT_THROW(ContinuedFraction::from_quotients({1, 0}), RotationError);
}

TEST(Convergents, Examples) {
  auto ones = ContinuedFraction::constant(1);
  auto c = convergents(ones, 6);
  const int fib[] = {1, 1, 2, 3, 5, 8, 13};
  for (int i = 0; i <= 6; ++i) EXPECT_EQ(c[i].q, fib[i]);
  EXPECT_EQ(c[0].p, 0);
  auto twos = ContinuedFraction::constant(2);
  auto c2 = convergents(twos, 4);
  const int pell[] = {1, 2, 5, 12, 29};
  for (int i = 0; i <= 4; ++i) EXPECT_EQ(c2[i].q, pell[i]);
  auto fixed = ContinuedFraction::from_quotients({3, 1});
  EXPECT_THROW(convergents(fixed, 3), RotationError);
  EXPECT_EQ(fixed.q(-1), 0);
  EXPECT_EQ(fixed.p(-1), 1);
}

TEST(ThetaBracket, ContainsTheta) {
  const Rational g = parse_rational(kGolden);
  auto cf = ContinuedFraction::constant(1);
  cf.ensure(60);
  for (std::size_t n = 0; n <= 60; ++n) {
    auto [lo, hi] = cf.theta_bracket(n);
    EXPECT_LE(lo, g);
    EXPECT_GE(hi, g);
  }
  auto t = ContinuedFraction::from_quotients({2}, true);
  auto [lo, hi] = t.theta_bracket();
  EXPECT_EQ(lo, Rational(1, 2));
  EXPECT_EQ(hi, Rational(1, 2));
}

TEST(CircleNorm, GoldenQ2) {
  auto cf = ContinuedFraction::constant(1);
  auto cn = circle_norm(cf, 2);
  EXPECT_NEAR(d(cn.value), 0.2360679775, 1e-9);
  EXPECT_LT(d(cn.error), 1e-3 / 2);
  EXPECT_GT(cn.value - cn.error, Rational(1, 5));
  EXPECT_LT(cn.value + cn.error, Rational(1, 3));
  auto b = circle_norm_bracket(cf, 2);
  EXPECT_LE(b.first, cn.value + cn.error);
  EXPECT_GE(b.second, cn.value - cn.error);
  EXPECT_THROW(circle_norm(cf, 0), RotationError);
}

TEST(CircleNorm, StrictDecreaseAlongDenominators) {
  std::mt19937_64 gen(5);
  for (int t = 0; t < 5; ++t) {
    auto cf = random_cf(gen, 40);
    for (long i = 2; i < 16; ++i) {
      auto cur = circle_norm_bracket(cf, cf.q(i));
      auto prev = circle_norm_bracket(cf, cf.q(i - 1));
      EXPECT_LT(cur.second, prev.first) << i;
    }
  }
}

TEST(CircleNorm, LargeQuotientIsCloseReturn) {
  auto cf = ContinuedFraction::from_quotients({1, 2, 1000, 1, 1, 1, 1, 1, 1, 1});
  auto b = circle_norm_bracket(cf, cf.q(2));
  EXPECT_LT(b.second, Rational(BigInt(1), 1000 * cf.q(2)));
}

TEST(CircleNorm, UnsupportedDepth) {
  auto cf = ContinuedFraction::from_quotients({1, 1});
  EXPECT_THROW(circle_norm(cf, BigInt(1) << 40), RotationError);
}

TEST(ThetaOfType, Construction) {
  auto one = build_theta_of_type(1.0, 30);
  for (std::size_t i = 1; i <= 30; ++i) EXPECT_EQ(one.a(i), 1);
  auto zero = build_theta_of_type(2.0, 0);
  EXPECT_EQ(zero.size(), 0u);
  EXPECT_EQ(zero.q(0), 1);
  auto two = build_theta_of_type(2.0, 24);
  for (std::size_t i = 1; i <= 24; ++i) {
    // a_{i} = q_{i-1} at boosted indices, 1 elsewhere
    if (i % 3 == 0)
      EXPECT_EQ(two.a(i), std::max(BigInt(1), two.q(static_cast<long>(i) - 1)));
    else
      EXPECT_EQ(two.a(i), 1);
  }
  for (long n = 8; n < 24; ++n)
    if ((n + 1) % 3 == 0) {
      const double ratio = log_big(two.q(n + 1)) / log_big(two.q(n));
      EXPECT_GT(ratio, 1.9);
      EXPECT_LE(ratio, 2.01);
    }
  EXPECT_THROW(build_theta_of_type(0.5, 3), RotationError);
  auto frac_type = build_theta_of_type(1.5, 12);
  EXPECT_GE(frac_type.a(12), 2);
}

TEST(Lemma, RandomContinuedFractions) {
  std::mt19937_64 gen(2024);
  std::size_t brute = 0;
  for (int t = 0; t < 10; ++t) {
    auto cf = random_cf(gen, 40);
    auto rep = lemma_checks(cf, 15, 100000);
    EXPECT_TRUE(rep.recurrence) << rep.first_failure;
    EXPECT_TRUE(rep.coprime) << rep.first_failure;
    EXPECT_TRUE(rep.bounds) << rep.first_failure;
    EXPECT_TRUE(rep.best_approximation) << rep.first_failure;
    EXPECT_EQ(rep.equality_flags, 0u);
    EXPECT_EQ(rep.bound_checks, 14u);
    brute += rep.brute_checks;
  }
  EXPECT_GT(brute, 1000u);
}

TEST(Lemma, BruteForceOracleOnGolden) {
  // direct exact scan with the 200-digit rational
  const Rational g = parse_rational(kGolden);
  auto cf = ContinuedFraction::constant(1);
  cf.ensure(30);
  for (long i = 1; i < 12; ++i) {
    const Rational nq = circle_distance(g * cf.q(i));
    EXPECT_GT(nq, Rational(BigInt(1), cf.q(i + 1) + cf.q(i)));
    EXPECT_LT(nq, Rational(BigInt(1), cf.q(i + 1)));
    for (BigInt j = 1; j < cf.q(i + 1); ++j) EXPECT_GE(circle_distance(g * j), nq);
  }
  auto rep = lemma_checks(cf, 20, 100000);
  EXPECT_TRUE(rep.bounds && rep.best_approximation);
}

TEST(RotationCover, Examples) {
  auto golden = ContinuedFraction::constant(1);
  EXPECT_EQ(rotation_cover_time(golden, 0.6).k, 0u);
  auto res = rotation_cover_time(golden, 0.2);
  EXPECT_EQ(res.k, 2u);
  EXPECT_NEAR(res.max_gap, 0.381966, 1e-6);
  EXPECT_NEAR(res.prev_max_gap, 0.618034, 1e-6);
  ASSERT_TRUE(res.incremental_checked);
  ASSERT_EQ(res.gaps.size(), 2u);
  EXPECT_NEAR(res.gaps[0], 0.236068, 1e-6);
  EXPECT_NEAR(res.gaps[1], 0.381966, 1e-6);
  EXPECT_THROW(rotation_cover_time(golden, 0.0), RotationError);
}

TEST(RotationCover, TieCountsAsCovered) {
  // theta = 1/4 + tiny: gap 2r exactly is covered; rational 1/4 gives 4 equal gaps
  auto quarter = ContinuedFraction::from_quotients({4}, true);
  EXPECT_EQ(rotation_cover_time(quarter, 0.125).k, 3u);
  EXPECT_THROW(rotation_cover_time(quarter, 0.1), RotationError);
}

TEST(RotationCover, MatchesExactGapScan) {
  const Rational g = parse_rational(kGolden), s = parse_rational(kSqrt2m1);
  auto golden = ContinuedFraction::constant(1);
  auto silver = ContinuedFraction::constant(2);
  for (double r : {0.3, 0.2, 0.1, 0.07, 0.03, 0.011, 0.005}) {
    EXPECT_EQ(rotation_cover_time(golden, r).k, exact_gap_scan(g, r, 400)) << r;
    EXPECT_EQ(rotation_cover_time(silver, r).k, exact_gap_scan(s, r, 400)) << r;
  }
}

TEST(RotationCover, MatchesBruteOnRandomCfs) {
  std::mt19937_64 gen(77);
  std::uniform_real_distribution<double> ur(0.002, 0.45);
  for (int t = 0; t < 8; ++t) {
    auto cf = random_cf(gen, 40);
    const auto th = cf.theta_bracket();
    const Rational theta = (th.first + th.second) / 2;
    for (int j = 0; j < 6; ++j) {
      const double r = ur(gen);
      auto res = rotation_cover_time(cf, r);
      EXPECT_EQ(res.k, rotation_cover_time_brute(cf, r, 3000)) << t << " " << r;
      if (res.k < 200) EXPECT_EQ(res.k, exact_gap_scan(theta, r, 200));
      EXPECT_LE(res.max_gap, 2 * r * (1 + 1e-12));
      if (res.k > 0) EXPECT_GT(res.prev_max_gap, 2 * r);
      EXPECT_LE(res.max_distinct_gaps, 3u);
      EXPECT_EQ(res.starts_checked, 10u);
    }
  }
}

TEST(RotationCover, MonotoneInScale) {
  auto cf = build_theta_of_type(2.0, 30);
  std::uint64_t prev = 0;
  for (int i = 0; i <= 60; ++i) {
    const double r = 0.5 * std::pow(0.85, i);
    const auto k = rotation_cover_time(cf, r).k;
    EXPECT_GE(k, prev) << r;
    prev = k;
  }
}

TEST(RotationCover, LargeTimesUseClosedForm) {
  auto cf = build_theta_of_type(2.0, 40);
  auto res = rotation_cover_time(cf, std::ldexp(1.0, -24));
  EXPECT_FALSE(res.incremental_checked);
  EXPECT_GT(res.k, 1u << 24);
  EXPECT_LE(res.max_gap, std::ldexp(1.0, -23));
  EXPECT_GT(res.prev_max_gap, std::ldexp(1.0, -23));
}

TEST(JnIndex, GoldenAndMonotone) {
  auto golden = ContinuedFraction::constant(1);
  EXPECT_EQ(jn_index(golden, 1), 0u);
  std::size_t prev = 0;
  for (int n = 1; n <= 30; ++n) {
    const auto j = jn_index(golden, n);
    EXPECT_GE(j, prev);
    prev = j;
    const Rational t(BigInt(1), BigInt(1) << n);
    EXPECT_LT(circle_norm_bracket(golden, golden.q(static_cast<long>(j))).second, t);
    if (j > 0) EXPECT_GE(circle_norm_bracket(golden, golden.q(static_cast<long>(j) - 1)).first, t);
  }
  auto fixed = ContinuedFraction::from_quotients({1, 1, 1});
  EXPECT_THROW(jn_index(fixed, 40), RotationError);
}

TEST(JnIndex, DenominatorBoundGolden) {
  auto cf = build_theta_of_type(1.0, 40);
  RotationCoverOptions opt;
  opt.start_count_check = 1;
  opt.incremental_limit = 1 << 16;
  for (int n = 2; n <= 24; ++n) {
    const auto j = static_cast<long>(jn_index(cf, n));
    const auto tau = rotation_cover_time(cf, std::ldexp(1.0, -n + 1), opt).k;
    EXPECT_LE(BigInt(tau), cf.q(j) + cf.q(j - 1)) << n;
  }
}

TEST(JnIndex, DenominatorBoundTypeTwo) {
  // q_{j+1} + q_j points leave gaps below ||q_j theta|| < 2^-n, so that bound always holds;
  // the bound with q_j + q_{j-1} fails whenever ||q_{j-1} theta|| exceeds 4 * 2^-n.
  auto cf = build_theta_of_type(2.0, 40);
  int violations = 0;
  for (int n = 2; n <= 24; ++n) {
    const auto j = static_cast<long>(jn_index(cf, n));
    const auto tau = rotation_cover_time(cf, std::ldexp(1.0, -n + 1)).k;
    EXPECT_LE(BigInt(tau), cf.q(j + 1) + cf.q(j)) << n;
    const auto prev = circle_norm_bracket(cf, cf.q(j - 1));
    const bool wide = prev.first > Rational(BigInt(4), BigInt(1) << n);
    if (BigInt(tau) > cf.q(j) + cf.q(j - 1)) {
      ++violations;
      EXPECT_TRUE(wide) << n;
    }
  }
  EXPECT_EQ(violations, 13);
}

TEST(JnIndex, SquaredGrowthAtBoostedIndices) {
  auto cf = build_theta_of_type(2.0, 40);
  int boosted = 0;
  for (int n = 4; n <= 60; ++n) {
    const auto j = static_cast<long>(jn_index(cf, n));
    if ((j + 1) % 3 == 0 && cf.q(j) > 100) {
      ++boosted;
      const double ratio = log_big(cf.q(j + 1)) / log_big(cf.q(j));
      EXPECT_GT(ratio, 1.9);
    }
  }
  EXPECT_GT(boosted, 0);
}

TEST(TypeEstimate, Examples) {
  auto golden = ContinuedFraction::constant(1);
  auto g = type_estimate(golden, 200, 20);
  EXPECT_NEAR(g.tail_sup, 1.0, 0.01);
  EXPECT_NEAR(g.tail_inf, 1.0, 0.01);
  auto silver = ContinuedFraction::constant(2);
  auto s = type_estimate(silver, 200, 20);
  EXPECT_NEAR(s.tail_sup, 1.0, 0.01);
  auto eta2 = build_theta_of_type(2.0, 40);
  auto e = type_estimate(eta2, 40, 12);
  EXPECT_GE(e.tail_sup, 1.9);
  EXPECT_LE(e.tail_sup, 2.1);
  EXPECT_LT(e.tail_inf, 1.1);
  ASSERT_TRUE(e.declared_eta);
  EXPECT_EQ(*e.declared_eta, 2.0);
  for (double x : e.ratios) EXPECT_GE(x, 1.0 - 1e-12);
  // beta below the type: q^beta ||q theta|| reaches very small values
  const auto below = std::find_if(e.beta_grid.begin(), e.beta_grid.end(),
                                  [](const BetaCheck& b) { return std::abs(b.beta - 1.5) < 1e-9; });
  ASSERT_NE(below, e.beta_grid.end());
  EXPECT_LT(below->log_min, -10.0);
  auto short_cf = ContinuedFraction::from_quotients({1, 2, 3});
  EXPECT_THROW(type_estimate(short_cf, 20, 5), RotationError);
}
