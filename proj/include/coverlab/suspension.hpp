#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <stdexcept>
#include <vector>

#include "coverlab/cover_time.hpp"
#include "coverlab/dimension.hpp"
#include "coverlab/interval_map.hpp"

namespace coverlab {

struct SuspensionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Locally constant roof: one value per centred cylinder of 2*depth-1 symbols
// (positions -(depth-1)..depth-1). depth 0 is a constant roof.
class RoofFunction {
 public:
  static RoofFunction constant(const Rational& value);
  static RoofFunction table(int depth, std::map<Word, Rational> values);

  int depth() const { return depth_; }
  std::size_t window() const { return depth_ == 0 ? 0 : static_cast<std::size_t>(2 * depth_ - 1); }
  const std::map<Word, Rational>& values() const { return values_; }
  // Value on a centred word of length window().
  const Rational& value(const Word& centred) const;
  const Rational& min() const { return min_; }
  const Rational& max() const { return max_; }
  // max |phi(x) - phi(y)| / d(x, y); locally constant values differ only when x^y < depth.
  double lipschitz() const;
  // Integral against the base measure: a finite sum over the depth cylinders.
  double integral(const SymbolicMeasure& m) const;

 private:
  int depth_ = 0;
  std::map<Word, Rational> values_;
  Rational min_, max_;
};

// A point (x, height) with x read from a two-sided stream at an absolute position.
struct FlowPoint {
  std::shared_ptr<SymbolStream> base;
  std::int64_t position = 0;  // x_j = stream symbol at position + j
  Rational height = 0;
  Symbol symbol(std::int64_t j) const;
};

class SuspensionSpace {
 public:
  SuspensionSpace(std::shared_ptr<const SymbolicMeasure> base, RoofFunction roof);

  const SymbolicMeasure& base() const { return *base_; }
  std::shared_ptr<const SymbolicMeasure> base_ptr() const { return base_; }
  const RoofFunction& roof() const { return roof_; }
  double phi_bar() const { return phi_bar_; }
  double roof_min() const { return static_cast<double>(to_long_double(roof_.min())); }
  // Time within which every point reaches the section.
  double sweep_time() const { return static_cast<double>(to_long_double(roof_.max())); }
  double speed_bound() const { return 1.0; }
  double metric_constant() const { return 1.0; }
  // Shift steps possible within the sweep time, and the resulting expansion bound 2^wraps.
  int wraps() const;
  double expansion_bound() const;
  double lambda() const { return 1.0 / expansion_bound(); }
  std::size_t alphabet_size() const { return alphabet_; }

  // phi(sigma^k x)
  const Rational& roof_at(const FlowPoint& p, std::int64_t k = 0) const;
  double roof_value_at(SymbolStream& s, std::int64_t pos) const;
  // Index of the centred window of the given length at pos (base-|A| digits).
  std::uint64_t window_index(SymbolStream& s, std::int64_t pos, std::size_t length) const;

 private:
  std::shared_ptr<const SymbolicMeasure> base_;
  RoofFunction roof_;
  std::size_t alphabet_ = 0;
  std::vector<Rational> roof_by_index_;
  std::vector<double> roof_double_;
  double phi_bar_ = 0.0;
};

FlowPoint make_flow_point(std::shared_ptr<SymbolStream> base, std::int64_t position,
                          const Rational& height = 0);
FlowPoint sample_flow_point(const SuspensionSpace& space, std::uint64_t seed,
                            const Rational& height = 0);
// Wraps the height into [0, phi(x)).
FlowPoint canonical(const SuspensionSpace& space, const FlowPoint& p);

struct FlowResult {
  FlowPoint point;
  std::uint64_t crossings = 0;
};

FlowResult flow(const SuspensionSpace& space, const FlowPoint& p, const Rational& t);

// Base distance 2^{-(x^y)} between sigma^a x and sigma^b y, compared over |j| < window.
struct BaseDistance {
  double value = 1.0;
  bool certified = true;  // false: agreement over the whole window, value is an upper bound
};
BaseDistance base_distance(const FlowPoint& p, std::int64_t shift_p, const FlowPoint& q,
                           std::int64_t shift_q, int window = 60);

double d_pi(const SuspensionSpace& space, const FlowPoint& p, const FlowPoint& q,
            int window = 60);

// ---------------------------------------------------------------------------
// Cover times

struct FlowNet {
  double r = 0.0;
  int base_depth = 0;         // base cells are centred cylinders of 2*depth-1 symbols
  std::size_t window = 0;
  std::vector<std::uint64_t> words;       // admissible window indices, sorted
  std::vector<std::size_t> height_cells;  // per word
  std::vector<double> cell_height;        // per word
  std::size_t cells = 0;
  std::size_t position(std::uint64_t index) const;
};

FlowNet build_flow_net(const SuspensionSpace& space, double r);

struct FlowCoverOptions {
  double time_budget = 1e7;
};

struct FlowCoverRun {
  double r = 0.0;
  Outcome outcome = Outcome::budget_exhausted;
  double time = 0.0;            // cover time, or the budget when exhausted
  std::uint64_t crossings = 0;  // section crossings consumed
  std::size_t cells = 0;
  std::size_t base_cells = 0;
  std::size_t unvisited = 0;    // base cells not fully swept at exhaustion
  bool completed() const { return outcome == Outcome::completed; }
};

// Time at which every net cell has been entered; event driven over section crossings.
FlowCoverRun flow_cover_time(const SuspensionSpace& space, const FlowPoint& start, double r,
                             const FlowCoverOptions& opt = {});

struct FlowCoverBracket {
  FlowCoverRun lower;  // net at 2r
  FlowCoverRun mid;    // net at r
  FlowCoverRun upper;  // net at r/2
};
FlowCoverBracket flow_cover_bracket(const SuspensionSpace& space, const FlowPoint& start,
                                    double r, const FlowCoverOptions& opt = {});

struct SectionReductionReport {
  double r = 0.0;
  double lambda = 0.0;
  double expansion = 0.0;
  FlowCoverRun flow_run;      // left side
  CoverRun section_run;       // discrete cover time of the return map at lambda r
  double right = 0.0;         // sweep time + sum_{j <= tau} roof(F^j x)
  double margin = 0.0;        // right - left
  bool holds = false;
  bool evaluated = false;     // both sides completed
};

SectionReductionReport section_reduction_check(const SuspensionSpace& space,
                                               const FlowPoint& start, double r,
                                               double time_budget, std::uint64_t step_budget);

// ---------------------------------------------------------------------------
// Flow-invariant measure

// nu(cylinder word x [lo, hi)) for a centred word of odd length.
double nu_cell(const SuspensionSpace& space, const Word& centred, double lo, double hi);
// mu of the base ball B(x, rho) = centred cylinder of x.
double base_ball_mass(const SuspensionSpace& space, const FlowPoint& p, std::int64_t shift,
                      double rho);
// Centred cylinder length of the open base ball of radius rho.
std::size_t ball_window(double rho);

struct NuBall {
  double lower = 0.0;
  double upper = 0.0;
};
NuBall nu_ball(const SuspensionSpace& space, const FlowPoint& p, double r);

// Bracket of min over points of nu(B(p, r)) along the grid.
MeasureCurve nu_min_ball_curve(const SuspensionSpace& space, const std::vector<double>& grid,
                               std::size_t sampled_points = 8, std::uint64_t seed = 0);

struct OccupationCheck {
  double frequency = 0.0;
  double expected = 0.0;
  double std_error = 0.0;  // batch means
  double z = 0.0;
  std::uint64_t samples = 0;
};

// Fraction of times j * t_step, j < samples, at which the orbit lies in word x [lo, hi).
OccupationCheck occupation_check(const SuspensionSpace& space, const FlowPoint& start,
                                 const Word& centred, double lo, double hi, double t_step,
                                 std::uint64_t samples, std::size_t batches = 50);

}  // namespace coverlab
