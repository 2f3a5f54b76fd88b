#include "coverlab/rotation.hpp"

#include <algorithm>
#include <boost/multiprecision/cpp_bin_float.hpp>
#include <boost/integer/common_factor.hpp>
#include <cmath>
#include <map>
#include <set>

#include "coverlab/rng.hpp"

namespace coverlab {

namespace mp = boost::multiprecision;

namespace {

BigInt floor_q(const Rational& x) {
  const BigInt n = mp::numerator(x), d = mp::denominator(x);
  BigInt q = n / d;
  if (n < 0 && q * d != n) q -= 1;
  return q;
}

BigInt ceil_q(const Rational& x) { return -floor_q(Rational(-x)); }

double to_double(const Rational& x) { return static_cast<double>(to_long_double(x)); }

using u128 = unsigned __int128;

}  // namespace

double log_big(const BigInt& x) {
  if (x <= 0) throw RotationError("log of a non-positive integer");
  const unsigned msb = mp::msb(x);
  if (msb < 60) return std::log(x.convert_to<double>());
  const unsigned shift = msb - 60;
  const BigInt top = x >> shift;
  return std::log(top.convert_to<double>()) + shift * std::log(2.0);
}

// ---------------------------------------------------------------------------
// ContinuedFraction

ContinuedFraction ContinuedFraction::from_quotients(const std::vector<BigInt>& a, bool terminating) {
  ContinuedFraction cf;
  for (const auto& x : a) {
    if (x < 1) throw RotationError("partial quotients must be >= 1");
    cf.push(x);
  }
  cf.terminating_ = terminating;
  return cf;
}

ContinuedFraction ContinuedFraction::constant(const BigInt& a) {
  if (a < 1) throw RotationError("partial quotients must be >= 1");
  ContinuedFraction cf;
  cf.rule_ = Rule::constant;
  cf.constant_ = a;
  return cf;
}

ContinuedFraction ContinuedFraction::of_type(double eta) {
  if (!(eta >= 1.0)) throw RotationError("type must be >= 1");
  ContinuedFraction cf;
  cf.rule_ = Rule::type_eta;
  cf.eta_ = eta;
  return cf;
}

void ContinuedFraction::push(const BigInt& a) {
  const std::size_t n = p_.size();
  a_.push_back(a);
  p_.push_back(a * p_[n - 1] + p_[n - 2]);
  q_.push_back(a * q_[n - 1] + q_[n - 2]);
}

BigInt ContinuedFraction::next_by_rule() const {
  if (rule_ == Rule::constant) return constant_;
  const std::size_t idx = a_.size() + 1;  // index of the quotient being produced
  if (idx % 3 != 0) return 1;
  const double e = *eta_ - 1.0;
  const BigInt& qi = q_.back();  // q_{idx-1}
  if (e == 0.0) return 1;
  BigInt v;
  if (e == std::floor(e)) {
    v = mp::pow(qi, static_cast<unsigned>(e));
  } else {
    using F = mp::cpp_bin_float_100;
    F x = mp::pow(F(qi), F(e));
    v = static_cast<BigInt>(mp::ceil(x));
  }
  return v < 1 ? BigInt(1) : v;
}

bool ContinuedFraction::ensure(std::size_t n) {
  if (a_.size() >= n) return true;
  if (rule_ == Rule::none) return false;
  while (a_.size() < n) push(next_by_rule());
  return true;
}

const BigInt& ContinuedFraction::a(std::size_t i) const {
  if (i < 1 || i > a_.size()) throw RotationError("quotient index out of range");
  return a_[i - 1];
}

const BigInt& ContinuedFraction::p(long i) const {
  if (i < -1 || static_cast<std::size_t>(i + 1) >= p_.size())
    throw RotationError("convergent index out of range");
  return p_[static_cast<std::size_t>(i + 1)];
}

const BigInt& ContinuedFraction::q(long i) const {
  if (i < -1 || static_cast<std::size_t>(i + 1) >= q_.size())
    throw RotationError("convergent index out of range");
  return q_[static_cast<std::size_t>(i + 1)];
}

std::pair<Rational, Rational> ContinuedFraction::theta_bracket(std::size_t n) const {
  if (n > size()) throw RotationError("bracket depth exceeds stored quotients");
  const long i = static_cast<long>(n);
  const Rational c(p(i), q(i));
  if (terminating_ && n == size()) return {c, c};
  Rational other = n < size() ? Rational(p(i + 1), q(i + 1))
                              : Rational(p(i) + p(i - 1), q(i) + q(i - 1));
  if (other < c) return {other, c};
  return {c, other};
}

// ---------------------------------------------------------------------------
// Expansion

ContinuedFraction cf_expand(const Rational& lo_in, const Rational& hi_in, std::size_t count) {
  if (!(lo_in > 0 && hi_in < 1 && lo_in <= hi_in)) throw RotationError("theta must lie in (0,1)");
  Rational lo = lo_in, hi = hi_in;
  std::vector<BigInt> a;
  while (a.size() < count) {
    if (lo == 0 && hi == 0)
      throw RotationError("theta is rational: expansion terminates after " +
                          std::to_string(a.size()) + " quotients");
    if (lo <= 0)
      throw RotationError("precision exhausted after " + std::to_string(a.size()) + " quotients");
    const Rational A = 1 / hi, B = 1 / lo;
    const BigInt fa = floor_q(A), fb = floor_q(B);
    if (fa != fb)
      throw RotationError("precision exhausted after " + std::to_string(a.size()) + " quotients");
    a.push_back(fa);
    lo = A - fa;
    hi = B - fa;
  }
  return ContinuedFraction::from_quotients(a, false);
}

ContinuedFraction cf_expand(const std::string& decimal, std::size_t count, std::optional<int> digits) {
  const Rational x = parse_rational(decimal);
  if (!digits) return cf_expand(x, x, count);
  if (*digits < 1) throw RotationError("digits must be positive");
  const Rational eps(BigInt(1), mp::pow(BigInt(10), static_cast<unsigned>(*digits)));
  Rational lo = x - eps, hi = x + eps;
  if (!(lo > 0 && hi < 1)) throw RotationError("theta must lie in (0,1)");
  return cf_expand(lo, hi, count);
}

std::vector<Convergent> convergents(ContinuedFraction& cf, std::size_t n) {
  if (!cf.ensure(n)) throw RotationError("insufficient quotients for requested convergents");
  std::vector<Convergent> out;
  for (std::size_t i = 0; i <= n; ++i) out.push_back({cf.p(i), cf.q(i)});
  return out;
}

// ---------------------------------------------------------------------------
// Circle norm

namespace {

// Smallest depth with q_d q_{d+1} > need, or the stored size when none is available.
std::size_t deep_depth(ContinuedFraction& cf, const BigInt& need) {
  for (std::size_t d = 1;; ++d) {
    if (!cf.ensure(d + 1)) return cf.size();
    if (cf.q(static_cast<long>(d)) * cf.q(static_cast<long>(d) + 1) > need) return d;
  }
}

}  // namespace

Rational circle_distance(const Rational& x) {
  const Rational f = x - floor_q(x);
  const Rational g = 1 - f;
  return f < g ? f : g;
}

CircleNorm circle_norm(ContinuedFraction& cf, const BigInt& j) {
  if (j < 1) throw RotationError("j must be >= 1");
  // the certified policy needs q_N q_{N+1} > 1000 j; a deeper surrogate is used when stored
  const std::size_t n = deep_depth(cf, j << 40);
  const long i = static_cast<long>(n);
  const Rational value = circle_distance(Rational(j * cf.p(i), cf.q(i)));
  if (cf.terminating() && n == cf.size()) return {value, Rational(0), n};
  if (n + 1 > cf.size()) {
    if (n == 0 || cf.q(i - 1) * cf.q(i) <= 1000 * j)
      throw RotationError("cannot certify circle norm at available depth");
    // open prefix: theta lies between p_n/q_n and the mediant with p_{n-1}/q_{n-1}
    return {value, Rational(j, cf.q(i) * (cf.q(i) + cf.q(i - 1))), n};
  }
  return {value, Rational(j, cf.q(i) * cf.q(i + 1)), n};
}

std::pair<Rational, Rational> circle_norm_bracket(ContinuedFraction& cf, const BigInt& j,
                                                  std::size_t depth) {
  if (depth == 0) {
    depth = deep_depth(cf, j << 40);
  } else if (!cf.ensure(depth)) {
    depth = cf.size();
  }
  const auto [lo, hi] = cf.theta_bracket(depth);
  const Rational xl = j * lo, xh = j * hi;
  const Rational d1 = circle_distance(xl), d2 = circle_distance(xh);
  Rational low = d1 < d2 ? d1 : d2, high = d1 < d2 ? d2 : d1;
  if (floor_q(xl) != floor_q(xh) || xl == floor_q(xl)) low = 0;
  const Rational half(1, 2);
  const Rational hl = xl - half, hh = xh - half;
  if (floor_q(hl) != floor_q(hh) || hl == floor_q(hl)) high = half;
  return {low, high};
}

ContinuedFraction build_theta_of_type(double eta, std::size_t count) {
  ContinuedFraction cf = ContinuedFraction::of_type(eta);
  cf.ensure(count);
  return cf;
}

// ---------------------------------------------------------------------------
// Cover times

namespace {

struct DeltaBracket {
  Rational lo, hi;
};

// |q_i theta - p_i| over the theta bracket at the given depth; delta_{-1} = 1.
DeltaBracket delta(const ContinuedFraction& cf, long i, const std::pair<Rational, Rational>& th) {
  if (i < 0) return {Rational(1), Rational(1)};
  Rational a = cf.q(i) * th.first - cf.p(i), b = cf.q(i) * th.second - cf.p(i);
  if (a > b) std::swap(a, b);
  if (a >= 0) return {a, b};
  if (b <= 0) return {-b, -a};
  return {Rational(0), std::max(Rational(-a), b)};
}

struct IncrementalResult {
  std::uint64_t k = 0;
  bool covered = false;
  std::size_t max_distinct = 0;
  std::vector<std::uint64_t> gaps;
};

// Points start + j*P (mod Q) inserted one by one; stops when the largest gap is <= T.
IncrementalResult incremental_cover(std::uint64_t P, std::uint64_t Q, std::uint64_t start,
                                    std::uint64_t T, std::uint64_t limit) {
  IncrementalResult res;
  std::set<std::uint64_t> pts;
  std::map<std::uint64_t, std::uint64_t> gaps;  // length -> count
  auto add_gap = [&](std::uint64_t g) { ++gaps[g]; };
  auto drop_gap = [&](std::uint64_t g) {
    auto it = gaps.find(g);
    if (--it->second == 0) gaps.erase(it);
  };
  pts.insert(start % Q);
  add_gap(Q);
  res.max_distinct = 1;
  std::uint64_t x = start % Q;
  for (std::uint64_t j = 0;; ++j) {
    if (j > 0) {
      x = static_cast<std::uint64_t>((static_cast<u128>(x) + P) % Q);
      auto nx = pts.upper_bound(x);
      const std::uint64_t succ = nx == pts.end() ? *pts.begin() + Q : *nx;
      const std::uint64_t pred = nx == pts.begin() ? *pts.rbegin() : *std::prev(nx);
      const std::uint64_t pred_u = pred > x ? pred - Q : pred;  // may wrap below zero
      // lengths in modular arithmetic
      const std::uint64_t old_gap = succ - pred_u;
      drop_gap(old_gap);
      add_gap(x - pred_u);
      add_gap(succ - x);
      pts.insert(x);
      res.max_distinct = std::max(res.max_distinct, gaps.size());
    }
    if (gaps.rbegin()->first <= T) {
      res.k = j;
      res.covered = true;
      for (const auto& g : gaps) res.gaps.push_back(g.first);
      return res;
    }
    if (j >= limit) return res;
  }
}

// Surrogate convergent index usable for machine-integer tracking up to k steps: the
// deepest q_M below 2^62, accepted when q_M > k+1 and q_M q_{M+1} > 1000 (k+1).
std::optional<std::size_t> surrogate_index(ContinuedFraction& cf, std::uint64_t k) {
  const BigInt cap = BigInt(1) << 62;
  std::optional<std::size_t> best;
  for (std::size_t n = 0;; ++n) {
    if (!cf.ensure(n + 1)) break;
    const long i = static_cast<long>(n);
    if (cf.q(i) >= cap) break;
    if (cf.q(i) > k + 1 && cf.q(i) * cf.q(i + 1) > BigInt(1000) * (k + 1)) best = n;
  }
  return best;
}

}  // namespace

RotationCoverResult rotation_cover_time(ContinuedFraction& cf, double r,
                                        const RotationCoverOptions& opt) {
  if (!(r > 0)) throw RotationError("scale must be positive");
  RotationCoverResult out;
  out.r = r;
  const Rational two_rho = 2 * Rational(r);
  for (long k = 0;; ++k) {
    if (!cf.ensure(static_cast<std::size_t>(k) + 1)) {
      if (cf.terminating())
        throw RotationError("rational rotation does not cover at this scale");
      throw RotationError("surrogate precision insufficient: no more quotients");
    }
    // certify r* for block k, deepening the theta bracket as needed
    std::size_t depth = static_cast<std::size_t>(k) + 3;
    std::optional<BigInt> rstar;
    DeltaBracket dk, dkm1;
    for (int attempt = 0; attempt < 64 && !rstar; ++attempt, depth += 2) {
      if (!cf.ensure(depth)) depth = cf.size();
      const auto th = cf.theta_bracket(depth);
      dkm1 = delta(cf, k - 1, th);
      dk = delta(cf, k, th);
      const Rational Dlo = dkm1.lo - two_rho, Dhi = dkm1.hi - two_rho;
      if (Dhi <= 0) {
        rstar = BigInt(1);
      } else if (Dlo > 0 && dk.lo > 0) {
        const BigInt c1 = ceil_q(Dlo / dk.hi), c2 = ceil_q(Dhi / dk.lo);
        if (c1 == c2) rstar = 1 + c1;
      }
      if (!rstar && depth >= cf.size() && !cf.extensible())
        throw RotationError("surrogate precision insufficient to certify cover time");
    }
    if (!rstar) throw RotationError("surrogate precision insufficient to certify cover time");
    if (*rstar > cf.a(static_cast<std::size_t>(k) + 1)) continue;
    const BigInt N = *rstar * cf.q(k) + cf.q(k - 1);
    if (N - 1 > BigInt(std::numeric_limits<std::uint64_t>::max()))
      throw RotationError("cover time exceeds 64-bit range");
    out.k = static_cast<std::uint64_t>(N - 1);
    out.block = static_cast<std::size_t>(k);
    out.multiplier = static_cast<std::uint64_t>(*rstar);
    {
      const auto th = cf.theta_bracket(deep_depth(cf, cf.q(k) << 60));
      dkm1 = delta(cf, k - 1, th);
      dk = delta(cf, k, th);
    }
    const double d1 = to_double((dkm1.lo + dkm1.hi) / 2), d0 = to_double((dk.lo + dk.hi) / 2);
    const double rs = static_cast<double>(out.multiplier);
    out.max_gap = d1 - (rs - 1) * d0;
    out.prev_max_gap = out.k == 0 ? 1.0 : (out.multiplier >= 2 ? d1 - (rs - 2) * d0 : d1 + d0);
    break;
  }

  if (out.k <= opt.incremental_limit) {
    if (auto M = surrogate_index(cf, out.k)) {
      const long m = static_cast<long>(*M);
      const std::uint64_t Q = static_cast<std::uint64_t>(cf.q(m));
      const std::uint64_t P = static_cast<std::uint64_t>(cf.p(m) % cf.q(m));
      const std::uint64_t T = static_cast<std::uint64_t>(floor_q(two_rho * Q));
      auto base = incremental_cover(P, Q, 0, T, out.k + 1);
      if (!base.covered || base.k != out.k)
        throw RotationError("closed-form and incremental cover times disagree");
      if (base.max_distinct > 3) throw RotationError("more than three distinct gap lengths");
      out.incremental_checked = true;
      out.max_distinct_gaps = base.max_distinct;
      for (auto g : base.gaps) out.gaps.push_back(static_cast<double>(g) / static_cast<double>(Q));
      CounterRng rng(trial_key(opt.seed, 0x726f74));
      for (std::size_t s = 0; s < opt.start_count_check; ++s) {
        const std::uint64_t start = rng.bits(s) % Q;
        auto again = incremental_cover(P, Q, start, T, out.k + 1);
        if (!again.covered || again.k != out.k)
          throw RotationError("cover time depends on the starting phase");
        out.max_distinct_gaps = std::max(out.max_distinct_gaps, again.max_distinct);
        ++out.starts_checked;
      }
    }
  }
  return out;
}

std::uint64_t rotation_cover_time_brute(ContinuedFraction& cf, double r, std::uint64_t limit) {
  auto M = surrogate_index(cf, limit);
  if (!M) throw RotationError("no machine-size surrogate for brute force");
  const long m = static_cast<long>(*M);
  const std::uint64_t Q = static_cast<std::uint64_t>(cf.q(m));
  const std::uint64_t P = static_cast<std::uint64_t>(cf.p(m) % cf.q(m));
  const std::uint64_t T = static_cast<std::uint64_t>(floor_q(2 * Rational(r) * Q));
  std::vector<std::uint64_t> pts;
  for (std::uint64_t k = 0; k <= limit; ++k) {
    pts.push_back(static_cast<std::uint64_t>((static_cast<u128>(k) * P) % Q));
    std::vector<std::uint64_t> s = pts;
    std::sort(s.begin(), s.end());
    std::uint64_t g = s.front() + Q - s.back();
    for (std::size_t i = 1; i < s.size(); ++i) g = std::max(g, s[i] - s[i - 1]);
    if (g <= T) return k;
  }
  throw RotationError("brute-force limit reached");
}

std::size_t jn_index(ContinuedFraction& cf, int n) {
  if (n < 0) throw RotationError("n must be >= 0");
  const Rational t(BigInt(1), BigInt(1) << n);
  for (std::size_t j = 0;; ++j) {
    if (!cf.ensure(j + 1)) throw RotationError("quotient depth insufficient for j_n");
    std::pair<Rational, Rational> b;
    std::size_t depth = j + 3;
    for (int attempt = 0;; ++attempt, depth += 2) {
      b = circle_norm_bracket(cf, cf.q(static_cast<long>(j)), depth);
      if (b.second < t || b.first >= t) break;
      if ((!cf.extensible() && depth >= cf.size()) || attempt > 64)
        throw RotationError("quotient depth insufficient for j_n");
    }
    if (b.second < t) return j;
  }
}

// ---------------------------------------------------------------------------
// Type estimate

TypeEstimate type_estimate(ContinuedFraction& cf, std::size_t count, std::size_t tail_window) {
  if (!cf.ensure(count) || count < 10) throw RotationError("type estimate needs >= 10 convergents");
  TypeEstimate te;
  te.declared_eta = cf.declared_eta();
  for (std::size_t n = 2; n + 1 <= count; ++n) {
    const double a = log_big(cf.q(static_cast<long>(n)));
    if (a <= 0) continue;
    te.ratios.push_back(log_big(cf.q(static_cast<long>(n) + 1)) / a);
  }
  const std::size_t w = std::min(tail_window, te.ratios.size());
  te.tail_sup = *std::max_element(te.ratios.end() - w, te.ratios.end());
  te.tail_inf = *std::min_element(te.ratios.end() - w, te.ratios.end());
  // best approximations: ||j theta|| over j <= q_i is minimised at q_i
  const double top = std::max(2.0, te.tail_sup + 1.0);
  const auto th = cf.theta_bracket(count);
  std::vector<double> log_q, log_delta;
  for (std::size_t i = 1; i + 1 < count; ++i) {
    const long ii = static_cast<long>(i);
    const Rational dlt = abs(cf.q(ii) * th.first - cf.p(ii));
    if (dlt <= 0) continue;
    log_q.push_back(log_big(cf.q(ii)));
    log_delta.push_back(log_big(mp::numerator(dlt)) - log_big(mp::denominator(dlt)));
  }
  for (double beta = 0.5; beta <= top + 1e-9; beta += 0.25) {
    BetaCheck bc;
    bc.beta = beta;
    bc.log_min = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < log_q.size(); ++i)
      bc.log_min = std::min(bc.log_min, beta * log_q[i] + log_delta[i]);
    te.beta_grid.push_back(bc);
  }
  return te;
}

// ---------------------------------------------------------------------------
// Lemma checks

LemmaReport lemma_checks(ContinuedFraction& cf, std::size_t count, std::uint64_t brute_limit) {
  LemmaReport rep;
  if (!cf.ensure(count + 1)) throw RotationError("lemma checks need count+1 quotients");
  auto fail = [&](bool& flag, const std::string& what) {
    flag = false;
    if (rep.first_failure.empty()) rep.first_failure = what;
  };
  for (long i = 1; i <= static_cast<long>(count); ++i) {
    const BigInt& a = cf.a(static_cast<std::size_t>(i));
    if (cf.p(i) != a * cf.p(i - 1) + cf.p(i - 2) || cf.q(i) != a * cf.q(i - 1) + cf.q(i - 2))
      fail(rep.recurrence, "recurrence at " + std::to_string(i));
    if (boost::integer::gcd(cf.p(i), cf.q(i)) != 1) fail(rep.coprime, "gcd at " + std::to_string(i));
  }
  // Surrogate for brute force: largest q_M below 2^62 within the stored prefix.
  long M = -1;
  for (long m = 0; m <= static_cast<long>(cf.size()); ++m)
    if (cf.q(m) < (BigInt(1) << 62)) M = m;
  const auto thM = cf.theta_bracket(static_cast<std::size_t>(M));
  const std::uint64_t Q = static_cast<std::uint64_t>(cf.q(M));
  const std::uint64_t P = static_cast<std::uint64_t>(cf.p(M) % cf.q(M));
  // |j theta - j p_M/q_M| <= j * width; width * Q as a double upper bound
  const double wq = to_double((thM.second - thM.first) * Q) * (1 + 1e-9) + 1e-300;

  for (long i = 1; i < static_cast<long>(count); ++i) {
    const BigInt& qi = cf.q(i);
    const BigInt& qn = cf.q(i + 1);
    const auto b = circle_norm_bracket(cf, qi, cf.size());
    const Rational lower(BigInt(1), qn + qi), upper(BigInt(1), qn);
    ++rep.bound_checks;
    if (b.first > lower && b.second < upper) {
    } else if (b.second < lower || b.first > upper) {
      fail(rep.bounds, "bounds at " + std::to_string(i));
    } else {
      ++rep.equality_flags;
    }
    if (qn > brute_limit || static_cast<long>(M) <= i + 1) continue;
    const std::uint64_t qi64 = static_cast<std::uint64_t>(qi), qn64 = static_cast<std::uint64_t>(qn);
    auto norm = [&](std::uint64_t j) {
      const std::uint64_t v = static_cast<std::uint64_t>((static_cast<u128>(j) * P) % Q);
      return std::min(v, Q - v);
    };
    const std::uint64_t nq = norm(qi64);
    for (std::uint64_t j = 1; j < qn64; ++j) {
      if (j == qi64) continue;
      ++rep.brute_checks;
      const std::uint64_t nj = norm(j);
      const double margin = static_cast<double>(j + qi64) * wq;
      if (nj > nq && static_cast<double>(nj - nq) > margin) continue;
      // undecided by the surrogate: exact brackets
      const auto bj = circle_norm_bracket(cf, BigInt(j), cf.size());
      if (bj.first >= b.second) continue;
      if (bj.second < b.first) {
        fail(rep.best_approximation, "best approximation at i=" + std::to_string(i) +
                                         " j=" + std::to_string(j));
      } else {
        ++rep.equality_flags;
      }
    }
  }
  return rep;
}

}  // namespace coverlab
