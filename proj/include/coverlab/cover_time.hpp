#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "coverlab/interval_map.hpp"

namespace coverlab {

class CoverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct OrbitPoint {
  long double x = 0.0L;
  long double err = 0.0L;
};

// Sequential source of orbit points f^0(x), f^1(x), ...
class OrbitSource {
 public:
  virtual ~OrbitSource() = default;
  virtual OrbitPoint next() = 0;
};

// Orbit of pi(stream) generated symbolically: project, then shift the stream.
// The map is referenced, not copied, and must outlive the orbit.
class MapOrbit : public OrbitSource {
 public:
  MapOrbit(const MarkovIntervalMap& map, SymbolStream stream, double resolution);
  OrbitPoint next() override;

 private:
  const MarkovIntervalMap* map_;
  SymbolStream stream_;
  long double target_;
  int cap_;
};

// Orbit given by a function of the step index.
class FunctionOrbit : public OrbitSource {
 public:
  explicit FunctionOrbit(std::function<OrbitPoint(std::uint64_t)> f) : f_(std::move(f)) {}
  OrbitPoint next() override { return f_(j_++); }

 private:
  std::function<OrbitPoint(std::uint64_t)> f_;
  std::uint64_t j_ = 0;
};

struct Net {
  double mesh = 1.0;
  double rho = 1.0;  // a point x visits centre c when |x - c| < rho + err(x)
  std::vector<long double> centres;  // sorted
};

Net build_net(const MarkovIntervalMap& map, double mesh, std::size_t budget = 20000000);

enum class Outcome { completed, budget_exhausted };

struct CoverRun {
  double r = 0.0;
  double mesh = 0.0;
  Outcome outcome = Outcome::budget_exhausted;
  std::uint64_t steps = 0;  // completion step, or the budget when exhausted
  std::size_t unvisited = 0;
  std::uint64_t seed = 0;
  std::string start;
  std::vector<std::pair<std::uint64_t, std::size_t>> progress;  // (step, unvisited), decimated
  bool completed() const { return outcome == Outcome::completed; }
};

// Visited flags over sorted centres with an unvisited counter.
class CoverageTracker {
 public:
  explicit CoverageTracker(const Net& net);
  // Marks centres within rho + err of x; returns true once everything is visited.
  bool visit(const OrbitPoint& p);
  std::size_t unvisited() const { return unvisited_; }
  const Net& net() const { return *net_; }

 private:
  const Net* net_;
  std::vector<char> seen_;
  std::size_t unvisited_;
};

struct CoverOptions {
  std::uint64_t budget = 1000000;
  std::uint64_t progress_every = 0;  // 0 disables the progress curve
};

// Steps j = 0..budget are examined.
CoverRun cover_time_net(OrbitSource& orbit, const Net& net, const CoverOptions& opt = {});
// One orbit pass tracking several nets.
std::vector<CoverRun> cover_time_multi(OrbitSource& orbit, const std::vector<Net>& nets,
                                       const CoverOptions& opt = {});

struct CoverBracket {
  CoverRun lower;  // mesh 2r
  CoverRun mid;    // mesh r
  CoverRun upper;  // mesh r/2
};

CoverBracket cover_time_bracket(const MarkovIntervalMap& map,
                                std::shared_ptr<const SymbolicMeasure> measure, std::uint64_t seed,
                                double r, const CoverOptions& opt = {});

// Exact tau_r: first k such that the open r-balls (widened by the point errors) around
// x_0..x_k cover the given closed support intervals. Uncovered pieces are closed, so a point
// at distance exactly r from every orbit point stays uncovered.
CoverRun cover_time_direct(OrbitSource& orbit,
                           const std::vector<std::pair<long double, long double>>& support,
                           double r, const CoverOptions& opt = {});

struct HitOutcome {
  bool hit = false;
  std::uint64_t steps = 0;  // first index, or the budget
};

// First j >= 0 with |x_j - centre| < r.
HitOutcome hitting_time(OrbitSource& orbit, long double centre, double r, std::uint64_t budget);
// First n >= 1 with x_n in [lo, hi).
HitOutcome waiting_time(OrbitSource& orbit, long double lo, long double hi, std::uint64_t budget);

enum class SlopeMode { single_log, double_log };

struct SlopeSeries {
  std::vector<double> r, tau;
  std::vector<double> neg_log_r, log_tau, log_log_tau;
  std::vector<double> single, double_;  // NaN where undefined
  double single_sup = 0, single_inf = 0, double_sup = 0, double_inf = 0;  // tail window
  double ratio(SlopeMode m, std::size_t i) const { return m == SlopeMode::single_log ? single[i] : double_[i]; }
};

SlopeSeries slope_series(const std::vector<std::pair<double, double>>& r_tau);
SlopeSeries slope_series(const std::vector<CoverRun>& runs);

double single_log_ratio(double tau, double r);
double double_log_ratio(double tau, double r);

struct CoverRecord {
  std::string experiment_id;
  std::string system;
  CoverRun run;
};

std::string cover_runs_csv(const std::vector<CoverRecord>& records);

}  // namespace coverlab
