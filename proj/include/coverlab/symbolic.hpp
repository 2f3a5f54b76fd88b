#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "coverlab/rng.hpp"

namespace coverlab {

using Symbol = std::int64_t;
using Word = std::vector<Symbol>;

enum class Sidedness { one_sided, two_sided };

struct SymbolicError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Subshift

class Subshift {
 public:
  static Subshift full(std::size_t alphabet_size, Sidedness side = Sidedness::one_sided,
                       Symbol first_label = 0);
  // Full shift on the labels first_label, first_label+1, ...
  static Subshift countable(Symbol first_label = 1, Sidedness side = Sidedness::one_sided);
  static Subshift markov(std::vector<std::vector<int>> transition,
                         Sidedness side = Sidedness::one_sided, Symbol first_label = 0);

  bool is_countable() const { return countable_; }
  std::size_t alphabet_size() const;
  Symbol first_label() const { return first_label_; }
  Sidedness sidedness() const { return side_; }
  bool has_transition_matrix() const { return !transition_.empty(); }
  const std::vector<std::vector<int>>& transition() const { return transition_; }

  bool contains(Symbol a) const;
  bool allowed(Symbol a, Symbol b) const;
  bool admissible(const Word& w) const;
  // Irreducibility of the transition graph (always true for full shifts).
  bool transitive() const { return transitive_; }
  std::vector<Symbol> symbols() const;
  std::vector<Symbol> successors(Symbol a) const;

 private:
  Subshift() = default;
  bool countable_ = false;
  std::size_t size_ = 0;
  Symbol first_label_ = 0;
  Sidedness side_ = Sidedness::one_sided;
  std::vector<std::vector<int>> transition_;
  bool transitive_ = true;
};

// Checks irreducibility of a 0/1 matrix by reachability.
bool matrix_irreducible(const std::vector<std::vector<int>>& m);

// ---------------------------------------------------------------------------
// Measures

// Countable Bernoulli weights given by a rule. tail(n) is the mass of labels > n.
struct CountableWeights {
  std::function<double(Symbol)> weight;
  std::function<double(Symbol)> tail;
  Symbol first_label = 1;
  bool tail_exact = false;
};

class SymbolicMeasure {
 public:
  enum class Kind { bernoulli, markov };

  Kind kind() const { return kind_; }
  const Subshift& subshift() const { return shift_; }
  bool countable() const { return shift_.is_countable(); }
  Symbol first_label() const { return shift_.first_label(); }
  // Largest label drawn by streams, and the mass of all labels above it.
  Symbol truncation() const { return truncation_; }
  double tail_mass() const { return tail_mass_; }
  bool tail_exact() const { return tail_exact_; }

  // Mass of the one-symbol cylinder [a].
  double weight(Symbol a) const;
  // Conditional mass of b following a.
  double transition(Symbol a, Symbol b) const;
  double cylinder(const Word& w) const;
  double log_cylinder(const Word& w) const;
  // Sum of the conditional masses of next symbols in [first, last] (open-ended when
  // last is empty). prev empty means the first symbol of a word.
  double range_mass(std::optional<Symbol> prev, Symbol first, std::optional<Symbol> last) const;

  // Sampling tables (truncated and renormalized for countable alphabets).
  const std::vector<double>& sampling_cdf() const { return cdf_; }
  const std::vector<double>& stationary() const { return pi_; }
  const std::vector<std::vector<double>>& matrix() const { return p_; }
  const std::vector<std::vector<double>>& forward_cdf() const { return fwd_cdf_; }
  const std::vector<std::vector<double>>& backward_cdf() const { return bwd_cdf_; }

  std::string describe() const;

 private:
  friend SymbolicMeasure make_bernoulli(const std::vector<double>&, Sidedness);
  friend SymbolicMeasure make_bernoulli(const CountableWeights&, double, std::optional<Symbol>,
                                        Sidedness);
  friend SymbolicMeasure make_markov(const std::vector<std::vector<double>>&, Sidedness);

  SymbolicMeasure(Kind kind, Subshift shift) : kind_(kind), shift_(std::move(shift)) {}
  double tail_after(Symbol n) const;  // Bernoulli: mass of labels > n

  Kind kind_;
  Subshift shift_;
  Symbol truncation_ = 0;
  double tail_mass_ = 0.0;
  bool tail_exact_ = true;
  std::vector<double> w_;       // Bernoulli weights for labels up to truncation
  std::vector<double> suffix_;  // suffix_[i] = mass of labels with index >= i (incl. tail)
  std::function<double(Symbol)> rule_weight_;
  std::function<double(Symbol)> rule_tail_;
  std::vector<double> cdf_;
  std::vector<double> pi_;
  std::vector<std::vector<double>> p_;
  std::vector<std::vector<double>> row_prefix_;
  std::vector<std::vector<double>> fwd_cdf_;
  std::vector<std::vector<double>> bwd_cdf_;
};

SymbolicMeasure make_bernoulli(const std::vector<double>& weights,
                               Sidedness side = Sidedness::one_sided);
// Countable alphabet; truncation N is the smallest label with tail(N) < tolerance unless
// given explicitly.
SymbolicMeasure make_bernoulli(const CountableWeights& rule, double tolerance = 1e-15,
                               std::optional<Symbol> truncation = std::nullopt,
                               Sidedness side = Sidedness::one_sided);
// Weights (omega-1) omega^{-i}, i >= 1.
SymbolicMeasure make_geometric(double omega, double tolerance = 1e-15,
                               Sidedness side = Sidedness::one_sided);
SymbolicMeasure make_markov(const std::vector<std::vector<double>>& P,
                            Sidedness side = Sidedness::one_sided);

double cylinder_measure(const SymbolicMeasure& m, const Word& w);

// ---------------------------------------------------------------------------
// Streams

// A (one- or two-sided) symbol sequence read relative to a movable offset.
class SymbolStream {
 public:
  static SymbolStream sampled(std::shared_ptr<const SymbolicMeasure> m, std::uint64_t seed);
  static SymbolStream from_function(std::function<Symbol(std::int64_t)> f);
  // Two-sided periodic extension: position p holds pattern[p mod len].
  static SymbolStream periodic(Word pattern);

  // Symbol at position offset() + j.
  Symbol at(std::int64_t j);
  void shift(std::int64_t k = 1) { offset_ += k; }
  std::int64_t offset() const { return offset_; }
  std::uint64_t seed() const { return seed_; }
  const SymbolicMeasure* measure() const { return measure_.get(); }
  // Number of already generated symbols kept behind the offset (Markov streams).
  void set_history(std::size_t keep) { history_ = keep; }

 private:
  enum class Source { bernoulli, markov, function };
  SymbolStream() = default;
  Symbol absolute(std::int64_t p);
  Symbol draw_cdf(const std::vector<double>& cdf, double u) const;

  Source source_ = Source::function;
  std::shared_ptr<const SymbolicMeasure> measure_;
  std::function<Symbol(std::int64_t)> fn_;
  CounterRng rng_;
  std::uint64_t seed_ = 0;
  std::int64_t offset_ = 0;
  std::size_t history_ = 1 << 16;
  std::deque<Symbol> fwd_;  // positions fwd_base_, fwd_base_+1, ...
  std::int64_t fwd_base_ = 0;
  std::vector<Symbol> bwd_;  // positions -1, -2, ...
  Symbol x0_ = 0;            // position 0, kept after trimming
};

SymbolStream sample_stream(const SymbolicMeasure& m, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Mixing

struct MixingReport {
  std::vector<int> gaps;
  std::vector<double> psi;  // worst |joint/(product) - 1| per gap
  int min_depth = 1;
  int max_depth = 1;
  std::size_t words_per_side = 0;
  std::size_t pairs_tested = 0;
  bool exact_zero = false;
  std::optional<double> rate;      // fitted decay rate
  std::optional<double> constant;  // fitted prefactor
  std::size_t fit_points = 0;
};

// Exact worst-case correlation ratios over all admissible cylinder pairs of depth
// <= max_depth, separated by each gap. Budget caps the number of pairs.
MixingReport psi_mixing_report(const SymbolicMeasure& m, int max_depth,
                               const std::vector<int>& gaps, std::size_t pair_budget = 1000000);

// All admissible words of exactly the given length (finite alphabets).
std::vector<Word> admissible_words(const Subshift& s, int length);

}  // namespace coverlab
