#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "coverlab/interval_map.hpp"  // BigInt, Rational

namespace coverlab {

class RotationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// theta = [0; a_1, a_2, ...] with convergents p_i/q_i, p_{-1}=1, q_{-1}=0, p_0=0, q_0=1.
class ContinuedFraction {
 public:
  enum class Rule { none, constant, type_eta };

  ContinuedFraction() = default;
  // A stored prefix. terminating=true means theta equals the last convergent exactly.
  static ContinuedFraction from_quotients(const std::vector<BigInt>& a, bool terminating = false);
  static ContinuedFraction constant(const BigInt& a);
  // Every third quotient a_{i+1} (i+1 divisible by 3) equals max(1, ceil(q_i^(eta-1))), others 1.
  static ContinuedFraction of_type(double eta);

  std::size_t size() const { return a_.size(); }
  bool extensible() const { return rule_ != Rule::none; }
  bool terminating() const { return terminating_; }
  Rule rule() const { return rule_; }
  std::optional<double> declared_eta() const { return eta_; }
  // Extends by the rule until n quotients are stored; false when that is impossible.
  bool ensure(std::size_t n);

  const BigInt& a(std::size_t i) const;  // i >= 1
  const BigInt& p(long i) const;         // i >= -1
  const BigInt& q(long i) const;

  // Closed rational interval containing theta, from convergents up to index n (n <= size()).
  std::pair<Rational, Rational> theta_bracket(std::size_t n) const;
  std::pair<Rational, Rational> theta_bracket() const { return theta_bracket(size()); }

 private:
  void push(const BigInt& a);
  BigInt next_by_rule() const;

  std::vector<BigInt> a_;
  std::vector<BigInt> p_{BigInt(1), BigInt(0)};  // index i+1
  std::vector<BigInt> q_{BigInt(0), BigInt(1)};
  Rule rule_ = Rule::none;
  BigInt constant_ = 1;
  std::optional<double> eta_;
  bool terminating_ = false;
};

// Interval Euclid on a decimal string. With digits, theta is only known to +-10^-digits and
// quotients are certified against that interval; without, the decimal is taken exactly and a
// terminating expansion is an error.
ContinuedFraction cf_expand(const std::string& decimal, std::size_t count,
                            std::optional<int> digits = std::nullopt);
ContinuedFraction cf_expand(const Rational& lo, const Rational& hi, std::size_t count);

struct Convergent {
  BigInt p, q;
};
std::vector<Convergent> convergents(ContinuedFraction& cf, std::size_t n);

// ||x|| distance to the nearest integer.
Rational circle_distance(const Rational& x);

struct CircleNorm {
  Rational value;  // ||j p_N / q_N||
  Rational error;  // certified bound on | ||j theta|| - value |
  std::size_t surrogate_index = 0;
};
CircleNorm circle_norm(ContinuedFraction& cf, const BigInt& j);

// Exact interval containing ||j theta||.
std::pair<Rational, Rational> circle_norm_bracket(ContinuedFraction& cf, const BigInt& j,
                                                  std::size_t depth = 0);

ContinuedFraction build_theta_of_type(double eta, std::size_t count);

struct RotationCoverResult {
  double r = 0.0;
  std::uint64_t k = 0;           // cover time
  std::size_t block = 0;          // convergent index driving the covering step
  std::uint64_t multiplier = 0;   // N = multiplier q_block + q_{block-1} points
  double max_gap = 0.0;           // at time k
  double prev_max_gap = 0.0;      // at time k-1 (1 when k = 0)
  std::vector<double> gaps;       // distinct gap lengths at time k (incremental check only)
  bool incremental_checked = false;
  std::size_t max_distinct_gaps = 0;
  std::size_t starts_checked = 0;
};

struct RotationCoverOptions {
  std::size_t start_count_check = 10;
  std::uint64_t incremental_limit = 1u << 21;
  std::uint64_t seed = 0;
};

RotationCoverResult rotation_cover_time(ContinuedFraction& cf, double r,
                                        const RotationCoverOptions& opt = {});

// Brute-force circular gap scan with a surrogate convergent; for small k only.
std::uint64_t rotation_cover_time_brute(ContinuedFraction& cf, double r, std::uint64_t limit);

// Minimal j >= 0 with ||q_j theta|| < 2^-n (||q_{-1} theta|| taken as 1).
std::size_t jn_index(ContinuedFraction& cf, int n);

// log of a positive big integer
double log_big(const BigInt& x);

struct BetaCheck {
  double beta = 0.0;
  double log_min = 0.0;  // min over convergent denominators q_i of log(q_i^beta ||q_i theta||)
};

struct TypeEstimate {
  std::vector<double> ratios;  // ratios[k] = log q_{n+1} / log q_n for n = k + 2
  double tail_sup = 0.0;
  double tail_inf = 0.0;
  std::optional<double> declared_eta;
  std::vector<BetaCheck> beta_grid;
};

TypeEstimate type_estimate(ContinuedFraction& cf, std::size_t count, std::size_t tail_window);

// Lemma checks on the stored prefix: recurrence, two-sided bounds on ||q_i theta||, and the
// best-approximation property by brute force while q_{i+1} <= brute_limit.
struct LemmaReport {
  bool recurrence = true;
  bool coprime = true;
  bool bounds = true;
  bool best_approximation = true;
  std::size_t bound_checks = 0;
  std::size_t brute_checks = 0;
  std::size_t equality_flags = 0;
  std::string first_failure;
};

LemmaReport lemma_checks(ContinuedFraction& cf, std::size_t count, std::uint64_t brute_limit);

}  // namespace coverlab
