#include "coverlab/dimension.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "json.hpp"

namespace coverlab {

std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::exact: return "exact";
    case Provenance::net_approximate: return "net-approximate";
    case Provenance::closed_form_bracket: return "closed-form-bracket";
  }
  return "unknown";
}

double CurvePoint::lower() const { return std::exp(log_lower); }
double CurvePoint::upper() const { return std::exp(log_upper); }

void MeasureCurve::add_exact(double r, double mass) {
  points.push_back({r, std::log(mass), std::log(mass), Provenance::exact});
}

void MeasureCurve::add_bracket(double r, double lower, double upper, Provenance p) {
  points.push_back({r, std::log(lower), std::log(upper), p});
}

void MeasureCurve::add_log_bracket(double r, double log_lower, double log_upper, Provenance p) {
  points.push_back({r, log_lower, log_upper, p});
}

void MeasureCurve::validate() const {
  for (std::size_t k = 0; k < points.size(); ++k) {
    if (!(points[k].r > 0)) throw DimensionError("scales must be positive");
    if (k > 0 && !(points[k].r < points[k - 1].r))
      throw DimensionError("scales must be strictly decreasing");
    if (points[k].log_lower > points[k].log_upper)
      throw DimensionError("bracket lower exceeds upper");
  }
}

// ---------------------------------------------------------------------------
// Estimates

namespace {

struct CurveEstimates {
  double mink_sup, mink_inf, str_sup, str_inf;
  double raw_mink_sup, raw_mink_inf, raw_str_sup, raw_str_inf;
  bool diverges;
};

CurveEstimates estimate_one(const std::vector<double>& logr, const std::vector<double>& logM) {
  const std::size_t n = logr.size();
  const std::size_t S = n - 1;
  const std::size_t tail = (S + 1) / 2;
  CurveEstimates e{};
  const double inf = std::numeric_limits<double>::infinity();
  e.mink_sup = e.str_sup = e.raw_mink_sup = e.raw_str_sup = -inf;
  e.mink_inf = e.str_inf = e.raw_mink_inf = e.raw_str_inf = inf;
  std::vector<double> mink;
  for (std::size_t k = S - tail; k < S; ++k) {
    const double dr = logr[k + 1] - logr[k];
    const double m = (logM[k + 1] - logM[k]) / dr;
    const double s = (std::log(-logM[k + 1]) - std::log(-logM[k])) / (-dr);
    mink.push_back(m);
    e.mink_sup = std::max(e.mink_sup, m);
    e.mink_inf = std::min(e.mink_inf, m);
    e.str_sup = std::max(e.str_sup, s);
    e.str_inf = std::min(e.str_inf, s);
  }
  const std::size_t raw_tail = (n + 1) / 2;
  for (std::size_t k = n - raw_tail; k < n; ++k) {
    if (!(logr[k] < 0)) continue;
    const double m = logM[k] / logr[k];
    const double s = std::log(-logM[k]) / (-logr[k]);
    e.raw_mink_sup = std::max(e.raw_mink_sup, m);
    e.raw_mink_inf = std::min(e.raw_mink_inf, m);
    e.raw_str_sup = std::max(e.raw_str_sup, s);
    e.raw_str_inf = std::min(e.raw_str_inf, s);
  }
  e.diverges = mink.size() >= 2 && mink.front() > 0 &&
               std::is_sorted(mink.begin(), mink.end()) && mink.back() >= 1.5 * mink.front();
  return e;
}

EstimateRange range_of(double a, double b) { return {std::min(a, b), std::max(a, b)}; }

}  // namespace

DimensionReport dim_estimates(const MeasureCurve& curve) {
  curve.validate();
  const auto& P = curve.points;
  if (P.size() < 4) throw DimensionError("at least 4 sample points required");
  std::vector<double> logr, lo, hi;
  for (const auto& p : P) {
    if (!(p.log_upper < 0.0) || !std::isfinite(p.log_lower))
      throw DimensionError("curve values must lie in (0,1)");
    logr.push_back(std::log(p.r));
    lo.push_back(p.log_lower);
    hi.push_back(p.log_upper);
  }
  const CurveEstimates a = estimate_one(logr, lo), b = estimate_one(logr, hi);
  DimensionReport rep;
  rep.minkowski_upper = range_of(a.mink_sup, b.mink_sup);
  rep.minkowski_lower = range_of(a.mink_inf, b.mink_inf);
  rep.stretched_upper = range_of(a.str_sup, b.str_sup);
  rep.stretched_lower = range_of(a.str_inf, b.str_inf);
  rep.raw_minkowski_upper = range_of(a.raw_mink_sup, b.raw_mink_sup);
  rep.raw_minkowski_lower = range_of(a.raw_mink_inf, b.raw_mink_inf);
  rep.raw_stretched_upper = range_of(a.raw_str_sup, b.raw_str_sup);
  rep.raw_stretched_lower = range_of(a.raw_str_inf, b.raw_str_inf);
  rep.tail_slopes = (P.size()) / 2;
  rep.r_max = P[P.size() - 1 - rep.tail_slopes].r;
  rep.r_min = P.back().r;
  rep.minkowski_diverges = a.diverges && b.diverges;
  return rep;
}

// ---------------------------------------------------------------------------
// Minimal ball mass

namespace {

struct Domain {
  long double lo, hi;
  bool empty() const { return lo > hi; }
};

Domain centre_domain(const MarkovIntervalMap& map, double r, CentreDomain d) {
  if (d == CentreDomain::support) return {map.support_lo(), map.support_hi()};
  return {map.support_lo() + r - 1e-12L, map.support_hi() - r + 1e-12L};
}

// Candidate centres: endpoints and midpoints of the given words, restricted to the domain and
// (for Cantor-like repellers) to the support.
std::vector<long double> word_centres(const MarkovIntervalMap& map, const ScaleWords& ws,
                                      const Domain& dom, bool gapless) {
  std::vector<long double> out;
  for (const auto& w : ws.words) {
    for (long double y : {w.lo, (w.lo + w.hi) / 2, w.hi}) {
      if (y < dom.lo || y > dom.hi) continue;
      if (!gapless && !map.support_contains(y, 1e-12L)) continue;
      out.push_back(y);
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace

MinBall min_ball_measure(const MarkovIntervalMap& map, const SymbolicMeasure& m, double r,
                         const MinBallOptions& opt) {
  if (!(r > 0)) throw DimensionError("scale must be positive");
  MinBall out;
  const Domain dom = centre_domain(map, r, opt.domain);
  if (r >= map.support_hi() - map.support_lo() || dom.empty()) {
    out.centre = (map.support_lo() + map.support_hi()) / 2;
    return out;
  }
  const ScaleWords ws = words_at_scale(map, r, opt.word_budget);
  const std::size_t n = ws.words.size();
  out.words = n;
  std::vector<long double> L(n), H(n), mass(n);
  for (std::size_t i = 0; i < n; ++i) {
    L[i] = ws.words[i].lo;
    H[i] = ws.words[i].hi;
    mass[i] = word_mass(m, ws.words[i]);
  }
  // words are disjoint and sorted by lo, hence also by hi
  std::vector<long double> PL(n + 1, 0.0L), PH(n + 1, 0.0L);
  for (std::size_t i = 0; i < n; ++i) PL[i + 1] = PL[i] + mass[i];
  PH = PL;
  const long double rl = r;
  // mass of words with lo < y + r and hi > y - r
  auto g = [&](long double y) {
    const std::size_t a = static_cast<std::size_t>(std::lower_bound(L.begin(), L.end(), y + rl) - L.begin());
    const std::size_t b = static_cast<std::size_t>(std::upper_bound(H.begin(), H.end(), y - rl) - H.begin());
    return a > b ? PL[a] - PH[b] : 0.0L;
  };

  const bool gapless = interval_support(map);
  std::vector<long double> bp;
  bp.reserve(2 * n + 2);
  for (std::size_t i = 0; i < n; ++i) {
    bp.push_back(L[i] - rl);
    bp.push_back(H[i] + rl);
  }
  bp.push_back(dom.lo);
  bp.push_back(dom.hi);
  std::sort(bp.begin(), bp.end());
  bp.erase(std::unique(bp.begin(), bp.end()), bp.end());
  std::vector<long double> cand;
  cand.reserve(2 * bp.size());
  for (std::size_t i = 0; i < bp.size(); ++i) {
    cand.push_back(bp[i]);
    if (i + 1 < bp.size()) cand.push_back((bp[i] + bp[i + 1]) / 2);
  }
  if (!gapless) {
    const ScaleWords half = words_at_scale(map, r / 2, opt.word_budget);
    for (const auto& w : half.words) cand.push_back(w.lo);
  }
  long double best = std::numeric_limits<long double>::infinity();
  long double best_y = dom.lo;
  std::sort(cand.begin(), cand.end());
  for (long double y : cand) {
    if (y < dom.lo || y > dom.hi) continue;
    if (!gapless && !map.support_contains(y, 1e-12L)) continue;
    ++out.candidates;
    const long double v = g(y);
    if (v < best) {
      best = v;
      best_y = y;
    }
  }
  if (out.candidates == 0) throw DimensionError("no candidate centre in the support");
  out.value = static_cast<double>(best);
  out.centre = best_y;
  out.lower = interval_mass(map, m, best_y - rl, best_y + rl, opt.mass_depth_cap).lower;
  out.upper = interval_mass(map, m, best_y - 2 * rl, best_y + 2 * rl, opt.mass_depth_cap).upper;
  return out;
}

// ---------------------------------------------------------------------------
// Closed forms

ZetaBallBounds zeta_min_ball_bounds(double kappa, double omega, std::int64_t n) {
  if (!(kappa > 1)) throw DimensionError("kappa must exceed 1");
  if (!(omega > 1)) throw DimensionError("omega must exceed 1");
  if (n < 1) throw DimensionError("n must be >= 1");
  const CertifiedValue c = zeta_tail(kappa, 1);
  const CertifiedValue t = zeta_tail(kappa, n);
  ZetaBallBounds z;
  const long double r = t.value / (2.0L * c.value);
  z.r = static_cast<double>(r);
  z.r_error = static_cast<double>((t.error + r * 2.0L * c.error) / (2.0L * c.value));
  z.log_lower = -static_cast<double>(n) * std::log(omega);
  z.log_upper = z.log_lower - std::log1p(-1.0 / omega);
  z.lower = std::pow(omega, -static_cast<double>(n));
  z.upper = z.lower / (1.0 - 1.0 / omega);
  return z;
}

MeasureCurve zeta_bound_curve(double kappa, double omega, const std::vector<std::int64_t>& ns) {
  MeasureCurve c;
  for (std::int64_t n : ns) {
    const ZetaBallBounds z = zeta_min_ball_bounds(kappa, omega, n);
    c.add_log_bracket(z.r, z.log_lower, z.log_upper, Provenance::closed_form_bracket);
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Doubling constant

DoublingReport doubling_constant(const MarkovIntervalMap& map, const SymbolicMeasure& m,
                                 const std::vector<double>& r_grid, CentreDomain domain) {
  DoublingReport rep;
  rep.D = 0.0;
  const bool gapless = interval_support(map);
  for (double r : r_grid) {
    if (!(r > 0)) throw DimensionError("scale must be positive");
    const Domain dom = centre_domain(map, r, domain);
    double best = 0.0;
    if (!dom.empty()) {
      const ScaleWords ws = words_at_scale(map, r / 2);
      for (long double y : word_centres(map, ws, dom, gapless)) {
        const MassBracket b1 = interval_mass(map, m, y - r, y + r);
        const MassBracket b2 = interval_mass(map, m, y - 2.0L * r, y + 2.0L * r);
        if (b1.upper <= 0.0) throw DimensionError("tested ball has zero mass");
        const double ratio = (b2.lower + b2.upper) / (b1.lower + b1.upper);
        if (ratio > best) best = ratio;
        if (ratio > rep.D) {
          rep.D = ratio;
          rep.argmax_r = r;
          rep.argmax_centre = y;
        }
        if (b1.lower > 0) rep.D_upper = std::max(rep.D_upper, b2.upper / b1.lower);
        else rep.D_upper = std::numeric_limits<double>::infinity();
      }
    }
    rep.per_scale.push_back(best);
  }
  rep.dim_bound = rep.D > 0 ? std::log(rep.D) / std::log(2.0) : 0.0;
  return rep;
}

std::vector<double> dyadic_grid(int k_min, int k_max) {
  std::vector<double> g;
  for (int k = k_min; k <= k_max; ++k) g.push_back(std::ldexp(1.0, -k));
  return g;
}

std::vector<double> harmonic_grid(int n_min, int n_max) {
  std::vector<double> g;
  for (int n = n_min; n <= n_max; ++n) g.push_back(1.0 / n);
  return g;
}

// ---------------------------------------------------------------------------
// Serialization

std::string curve_to_csv(const MeasureCurve& curve) {
  std::ostringstream os;
  os << "r,M_lower,M_upper,provenance,log_M_lower,log_M_upper\n";
  char buf[256];
  for (const auto& p : curve.points) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%s,%.17g,%.17g\n", p.r, p.lower(), p.upper(),
                  to_string(p.provenance).c_str(), p.log_lower, p.log_upper);
    os << buf;
  }
  return os.str();
}

std::string curve_to_json(const MeasureCurve& curve) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& p : curve.points)
    j.push_back({{"r", p.r},
                 {"M_lower", p.lower()},
                 {"M_upper", p.upper()},
                 {"log_M_lower", p.log_lower},
                 {"log_M_upper", p.log_upper},
                 {"provenance", to_string(p.provenance)}});
  return j.dump(2);
}

std::string report_to_json(const DimensionReport& r) {
  auto rng = [](const EstimateRange& e) { return nlohmann::json::array({e.lo, e.hi}); };
  nlohmann::json j = {{"minkowski_upper", rng(r.minkowski_upper)},
                      {"minkowski_lower", rng(r.minkowski_lower)},
                      {"stretched_upper", rng(r.stretched_upper)},
                      {"stretched_lower", rng(r.stretched_lower)},
                      {"raw_minkowski_upper", rng(r.raw_minkowski_upper)},
                      {"raw_minkowski_lower", rng(r.raw_minkowski_lower)},
                      {"raw_stretched_upper", rng(r.raw_stretched_upper)},
                      {"raw_stretched_lower", rng(r.raw_stretched_lower)},
                      {"r_max", r.r_max},
                      {"r_min", r.r_min},
                      {"tail_slopes", r.tail_slopes},
                      {"minkowski_diverges", r.minkowski_diverges}};
  return j.dump(2);
}

}  // namespace coverlab
