#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "coverlab/symbolic.hpp"

namespace coverlab {

using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

struct MapError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct BudgetError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// "p/q", decimal ("0.125", "-2.5e-3") or integer text, converted exactly.
Rational parse_rational(const std::string& text);
long double to_long_double(const Rational& q);

struct Branch {
  Symbol label;
  long double left, right;  // [left, right)
  long double slope;        // signed
  std::size_t image_first, image_last;  // f(P) spans these partition indices
};

// Piecewise affine expanding Markov map on [0,1). Finite maps keep exact rational
// geometry; the countable family keeps explicit branches up to a truncation and a
// tail interval [tail_start, 1) of certified small diameter.
class MarkovIntervalMap {
 public:
  std::size_t size() const { return slope_.size(); }
  Symbol first_label() const { return first_label_; }
  Branch branch(std::size_t idx) const;
  long double left(std::size_t idx) const { return lo_[idx]; }
  long double right(std::size_t idx) const { return hi_[idx]; }
  long double slope(std::size_t idx) const { return slope_[idx]; }
  std::size_t image_first(std::size_t idx) const { return full_ ? 0 : img_first_[idx]; }
  std::size_t image_last(std::size_t idx) const { return full_ ? size() - 1 : img_last_[idx]; }
  long double image_lo(std::size_t idx) const { return full_ ? 0.0L : img_lo_[idx]; }
  long double image_hi(std::size_t idx) const { return full_ ? 1.0L : img_hi_[idx]; }
  std::size_t index_of(Symbol label) const;
  Symbol label_of(std::size_t idx) const { return first_label_ + static_cast<Symbol>(idx); }

  long double gamma() const { return gamma_; }
  const Subshift& subshift() const { return shift_; }
  bool full_branch() const { return full_; }
  bool countable() const { return countable_; }
  // Countable maps: start of the untracked tail [tail_start, 1).
  long double tail_start() const { return countable_ ? hi_.back() : 1.0L; }
  bool exact() const { return !lo_q_.empty(); }
  const Rational& left_exact(std::size_t idx) const { return lo_q_.at(idx); }
  const Rational& right_exact(std::size_t idx) const { return hi_q_.at(idx); }
  const Rational& slope_exact(std::size_t idx) const { return slope_q_.at(idx); }

  long double support_lo() const { return lo_.front(); }
  long double support_hi() const { return countable_ ? 1.0L : hi_.back(); }
  // Branch index whose interval contains x.
  std::optional<std::size_t> locate(long double x) const;
  // y lies in the repeller up to tolerance tol (checked along 64 forward steps).
  bool support_contains(long double y, long double tol) const;
  // Image of x under the branch idx.
  long double apply(std::size_t idx, long double x) const;
  std::vector<long double>::const_iterator left_begin() const { return lo_.begin(); }
  std::vector<long double>::const_iterator left_end() const { return lo_.end(); }
  std::vector<long double>::const_iterator right_begin() const { return hi_.begin(); }

 private:
  friend MarkovIntervalMap build_affine_markov(const std::vector<std::pair<Rational, Rational>>&,
                                               const std::vector<Rational>&,
                                               const std::vector<std::vector<std::size_t>>&);
  friend struct ZetaBuilder;

  Symbol first_label_ = 0;
  bool full_ = false;
  bool countable_ = false;
  long double gamma_ = 0.0L;
  Subshift shift_ = Subshift::full(1);
  std::vector<long double> lo_, hi_, slope_, img_lo_, img_hi_;
  std::vector<std::size_t> img_first_, img_last_;
  std::vector<Rational> lo_q_, hi_q_, slope_q_;
};

// True when the branches tile the support without gaps, so the repeller is an interval.
bool interval_support(const MarkovIntervalMap& map);

// partition[i] = [left, right); images[i] = partition indices covered by f(P_i).
MarkovIntervalMap build_affine_markov(const std::vector<std::pair<Rational, Rational>>& partition,
                                      const std::vector<Rational>& slopes,
                                      const std::vector<std::vector<std::size_t>>& images);

// Sum_{j >= n} j^{-kappa} by direct summation plus an Euler-Maclaurin remainder.
struct CertifiedValue {
  long double value;
  long double error;
};
CertifiedValue zeta_tail(long double kappa, std::int64_t n);

struct ZetaFamilyMap {
  long double kappa;
  long double c;        // zeta(kappa)
  long double c_error;  // certified bound on |c - zeta(kappa)|
  std::size_t truncation;  // explicit branches 1..N; [a_N, 1) is the tail
  long double tolerance;
  MarkovIntervalMap map;
  // Partition point a_j (a_0 = 0).
  long double a(std::size_t j) const { return j == 0 ? 0.0L : map.right(j - 1); }
};

ZetaFamilyMap build_zeta_map(long double kappa, long double truncation_tolerance = 1e-6L);

// ---------------------------------------------------------------------------
// Coding and orbits

struct ProjectedPoint {
  long double x;      // left endpoint of the cylinder
  long double error;  // its diameter
  int depth;
};

// Left endpoint of the depth-cylinder of the stream (read from its current offset).
ProjectedPoint project(const MarkovIntervalMap& map, SymbolStream& stream, int depth);
// Stops at the first depth whose cylinder has diameter <= target (capped at max_depth).
ProjectedPoint project_adaptive(const MarkovIntervalMap& map, SymbolStream& stream,
                                long double target, int max_depth);
// Depth cap guaranteeing error < resolution/4.
int orbit_depth(const MarkovIntervalMap& map, double resolution);
// Points j = 0..steps of the orbit, each with error < resolution/4. The stream is advanced.
std::vector<ProjectedPoint> orbit_points(const MarkovIntervalMap& map, SymbolStream& stream,
                                         std::size_t steps, double resolution,
                                         std::size_t budget = 100000000);

// ---------------------------------------------------------------------------
// Words at scale r

struct ScaleWord {
  Word word;
  long double lo, hi;
  // The last symbol stands for itself and every larger label (countable tail lump).
  bool lump = false;
  long double diam() const { return hi - lo; }
};

struct ScaleWords {
  double r;
  std::vector<ScaleWord> words;  // sorted by lo
  std::size_t max_length = 0;
};

ScaleWords words_at_scale(const MarkovIntervalMap& map, double r, std::size_t budget = 20000000);
double word_mass(const SymbolicMeasure& m, const ScaleWord& w);
// Cylinder interval of an explicit word.
std::pair<long double, long double> cylinder_interval(const MarkovIntervalMap& map, const Word& w);

struct MassBracket {
  double lower;
  double upper;
};

// mu((lo, hi)) bracketed by descending cylinders up to depth_cap.
MassBracket interval_mass(const MarkovIntervalMap& map, const SymbolicMeasure& m, long double lo,
                          long double hi, int depth_cap = 64);

}  // namespace coverlab
