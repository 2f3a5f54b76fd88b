#pragma once

#include <string>
#include <vector>

#include "coverlab/interval_map.hpp"
#include "coverlab/symbolic.hpp"

namespace coverlab {

class DimensionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Provenance { exact, net_approximate, closed_form_bracket };
std::string to_string(Provenance p);

// Masses are kept as natural logs so that closed-form curves (mass 2^-n, n ~ 1e6) do not
// underflow.
struct CurvePoint {
  double r = 0.0;
  double log_lower = 0.0;
  double log_upper = 0.0;
  Provenance provenance = Provenance::exact;
  double lower() const;
  double upper() const;
};

struct MeasureCurve {
  std::vector<CurvePoint> points;
  void add_exact(double r, double mass);
  void add_bracket(double r, double lower, double upper, Provenance p = Provenance::net_approximate);
  void add_log_bracket(double r, double log_lower, double log_upper,
                       Provenance p = Provenance::closed_form_bracket);
  // Throws DimensionError unless r is strictly decreasing and every bracket is ordered.
  void validate() const;
};

struct EstimateRange {
  double lo = 0.0;
  double hi = 0.0;
};

struct DimensionReport {
  // Tail sup (upper) and tail inf (lower) of secant slopes, as ranges over the lower and
  // upper mass curves.
  EstimateRange minkowski_upper, minkowski_lower;
  EstimateRange stretched_upper, stretched_lower;
  // Tail sup/inf of the plain ratios log M / log r and log|log M| / (-log r).
  EstimateRange raw_minkowski_upper, raw_minkowski_lower;
  EstimateRange raw_stretched_upper, raw_stretched_lower;
  double r_max = 0.0, r_min = 0.0;  // scale range of the tail window
  std::size_t tail_slopes = 0;
  bool minkowski_diverges = false;
};

DimensionReport dim_estimates(const MeasureCurve& curve);

enum class CentreDomain { interior, support };

struct MinBallOptions {
  CentreDomain domain = CentreDomain::interior;
  std::size_t word_budget = 20000000;
  int mass_depth_cap = 64;
};

struct MinBall {
  double value = 1.0;   // minimal mass of the union of W_r cylinders meeting B(centre, r)
  long double centre = 0.5L;
  double lower = 1.0;   // mass of B(centre, r), lower bound
  double upper = 1.0;   // mass of B(centre, 2r), upper bound
  std::size_t candidates = 0;
  std::size_t words = 0;
};

MinBall min_ball_measure(const MarkovIntervalMap& map, const SymbolicMeasure& m, double r,
                         const MinBallOptions& opt = {});

struct ZetaBallBounds {
  double r = 0.0;
  double r_error = 0.0;
  double lower = 0.0, upper = 0.0;          // may underflow for large n
  double log_lower = 0.0, log_upper = 0.0;  // natural logs
};

ZetaBallBounds zeta_min_ball_bounds(double kappa, double omega, std::int64_t n);

// Closed-form bracket curve over the given indices (must be increasing).
MeasureCurve zeta_bound_curve(double kappa, double omega, const std::vector<std::int64_t>& ns);

struct DoublingReport {
  double D = 0.0;
  double dim_bound = 0.0;
  double D_upper = 0.0;  // worst case from the mass brackets
  double argmax_r = 0.0;
  long double argmax_centre = 0.0L;
  std::vector<double> per_scale;  // max ratio at each grid scale
};

DoublingReport doubling_constant(const MarkovIntervalMap& map, const SymbolicMeasure& m,
                                 const std::vector<double>& r_grid,
                                 CentreDomain domain = CentreDomain::support);

std::vector<double> dyadic_grid(int k_min, int k_max);
std::vector<double> harmonic_grid(int n_min, int n_max);

std::string curve_to_csv(const MeasureCurve& curve);
std::string curve_to_json(const MeasureCurve& curve);
std::string report_to_json(const DimensionReport& report);

}  // namespace coverlab
