#include "coverlab/cover_time.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace coverlab {

// ---------------------------------------------------------------------------
// Orbits

MapOrbit::MapOrbit(const MarkovIntervalMap& map, SymbolStream stream, double resolution)
    : map_(&map),
      stream_(std::move(stream)),
      target_(resolution / 4.0L * (1.0L - 1e-12L)),
      cap_(orbit_depth(map, resolution)) {}

OrbitPoint MapOrbit::next() {
  const ProjectedPoint p = project_adaptive(*map_, stream_, target_, cap_);
  stream_.shift(1);
  return {p.x, p.error};
}

// ---------------------------------------------------------------------------
// Nets

Net build_net(const MarkovIntervalMap& map, double mesh, std::size_t budget) {
  if (!(mesh > 0)) throw CoverError("mesh must be positive");
  Net net;
  net.mesh = mesh;
  net.rho = mesh;
  const long double lo = map.support_lo(), hi = map.support_hi();
  if (mesh >= hi - lo) {
    net.centres.push_back((lo + hi) / 2);
    return net;
  }
  if (interval_support(map)) {
    for (const auto& w : words_at_scale(map, mesh, budget).words)
      net.centres.push_back((w.lo + w.hi) / 2);
  } else {
    // Cantor-like repeller: one repeller point per cylinder of diameter <= mesh/2, so every
    // support point is within mesh/2 of a centre.
    for (const auto& w : words_at_scale(map, mesh / 2, budget).words) {
      Word ext = w.word;
      auto iv = cylinder_interval(map, ext);
      while (iv.second - iv.first > static_cast<long double>(mesh) * 1e-9L) {
        ext.push_back(map.label_of(map.image_first(map.index_of(ext.back()))));
        iv = cylinder_interval(map, ext);
      }
      net.centres.push_back(iv.first);
    }
  }
  std::sort(net.centres.begin(), net.centres.end());
  return net;
}

// ---------------------------------------------------------------------------
// Coverage

CoverageTracker::CoverageTracker(const Net& net)
    : net_(&net), seen_(net.centres.size(), 0), unvisited_(net.centres.size()) {}

bool CoverageTracker::visit(const OrbitPoint& p) {
  const long double reach = net_->rho + p.err;
  const auto& c = net_->centres;
  auto it = std::upper_bound(c.begin(), c.end(), p.x - reach);
  for (; it != c.end() && *it < p.x + reach; ++it) {
    const std::size_t i = static_cast<std::size_t>(it - c.begin());
    if (!seen_[i] && std::fabs(*it - p.x) < reach) {
      seen_[i] = 1;
      --unvisited_;
    }
  }
  return unvisited_ == 0;
}

std::vector<CoverRun> cover_time_multi(OrbitSource& orbit, const std::vector<Net>& nets,
                                       const CoverOptions& opt) {
  std::vector<CoverRun> runs(nets.size());
  std::vector<CoverageTracker> trackers;
  trackers.reserve(nets.size());
  std::size_t open = nets.size();
  for (std::size_t i = 0; i < nets.size(); ++i) {
    trackers.emplace_back(nets[i]);
    runs[i].r = nets[i].rho;
    runs[i].mesh = nets[i].mesh;
    runs[i].steps = opt.budget;
    runs[i].unvisited = nets[i].centres.size();
    if (nets[i].centres.empty()) throw CoverError("net without centres");
  }
  std::vector<char> done(nets.size(), 0);
  for (std::uint64_t j = 0; j <= opt.budget && open > 0; ++j) {
    const OrbitPoint p = orbit.next();
    for (std::size_t i = 0; i < nets.size(); ++i) {
      if (done[i]) continue;
      const bool full = trackers[i].visit(p);
      if (opt.progress_every && j % opt.progress_every == 0)
        runs[i].progress.emplace_back(j, trackers[i].unvisited());
      if (full) {
        done[i] = 1;
        --open;
        runs[i].outcome = Outcome::completed;
        runs[i].steps = j;
        runs[i].unvisited = 0;
      }
    }
  }
  for (std::size_t i = 0; i < nets.size(); ++i)
    if (!done[i]) runs[i].unvisited = trackers[i].unvisited();
  return runs;
}

CoverRun cover_time_net(OrbitSource& orbit, const Net& net, const CoverOptions& opt) {
  return cover_time_multi(orbit, {net}, opt).front();
}

CoverBracket cover_time_bracket(const MarkovIntervalMap& map,
                                std::shared_ptr<const SymbolicMeasure> measure, std::uint64_t seed,
                                double r, const CoverOptions& opt) {
  if (!(r > 0)) throw CoverError("scale must be positive");
  std::vector<Net> nets = {build_net(map, 2 * r), build_net(map, r), build_net(map, r / 2)};
  MapOrbit orbit(map, SymbolStream::sampled(std::move(measure), seed), r / 2);
  auto runs = cover_time_multi(orbit, nets, opt);
  for (auto& run : runs) {
    run.seed = seed;
    run.r = r;
    run.start = "sampled";
  }
  return {runs[0], runs[1], runs[2]};
}

CoverRun cover_time_direct(OrbitSource& orbit,
                           const std::vector<std::pair<long double, long double>>& support,
                           double r, const CoverOptions& opt) {
  // uncovered closed pieces keyed by left end
  std::map<long double, long double> gaps;
  for (const auto& [a, b] : support)
    if (b > a) gaps[a] = b;
  CoverRun run;
  run.r = r;
  run.mesh = 0.0;
  run.steps = opt.budget;
  for (std::uint64_t j = 0; j <= opt.budget; ++j) {
    const OrbitPoint p = orbit.next();
    const long double lo = p.x - r - p.err, hi = p.x + r + p.err;
    auto it = gaps.upper_bound(lo);
    if (it != gaps.begin()) --it;
    std::vector<std::pair<long double, long double>> keep;
    while (it != gaps.end() && it->first < hi) {
      const long double a = it->first, b = it->second;
      if (b <= lo) {
        ++it;
        continue;
      }
      it = gaps.erase(it);
      if (a <= lo) keep.emplace_back(a, lo);
      if (b >= hi) keep.emplace_back(hi, b);
    }
    for (const auto& k : keep) gaps[k.first] = k.second;
    if (opt.progress_every && j % opt.progress_every == 0) run.progress.emplace_back(j, gaps.size());
    if (gaps.empty()) {
      run.outcome = Outcome::completed;
      run.steps = j;
      run.unvisited = 0;
      return run;
    }
  }
  run.unvisited = gaps.size();
  return run;
}

// ---------------------------------------------------------------------------
// Hitting and waiting times

HitOutcome hitting_time(OrbitSource& orbit, long double centre, double r, std::uint64_t budget) {
  for (std::uint64_t j = 0; j <= budget; ++j) {
    const OrbitPoint p = orbit.next();
    if (std::fabs(p.x - centre) < r + p.err) return {true, j};
  }
  return {false, budget};
}

HitOutcome waiting_time(OrbitSource& orbit, long double lo, long double hi, std::uint64_t budget) {
  orbit.next();  // x_0 does not count
  for (std::uint64_t n = 1; n <= budget; ++n) {
    const OrbitPoint p = orbit.next();
    if (p.x >= lo - p.err && p.x < hi + p.err) return {true, n};
  }
  return {false, budget};
}

// ---------------------------------------------------------------------------
// Slopes

double single_log_ratio(double tau, double r) {
  if (!(tau >= 1) || !(r > 0 && r < 1)) return std::numeric_limits<double>::quiet_NaN();
  return std::log(tau) / -std::log(r);
}

double double_log_ratio(double tau, double r) {
  if (!(tau >= 3) || !(r > 0 && r < 1)) return std::numeric_limits<double>::quiet_NaN();
  return std::log(std::log(tau)) / -std::log(r);
}

SlopeSeries slope_series(const std::vector<std::pair<double, double>>& r_tau) {
  SlopeSeries s;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 0; i < r_tau.size(); ++i) {
    const auto [r, tau] = r_tau[i];
    if (i > 0 && !(r < r_tau[i - 1].first)) throw CoverError("scales must be strictly decreasing");
    s.r.push_back(r);
    s.tau.push_back(tau);
    s.neg_log_r.push_back(-std::log(r));
    s.log_tau.push_back(tau >= 1 ? std::log(tau) : nan);
    s.log_log_tau.push_back(tau >= 3 ? std::log(std::log(tau)) : nan);
    s.single.push_back(single_log_ratio(tau, r));
    s.double_.push_back(double_log_ratio(tau, r));
  }
  const std::size_t n = s.r.size();
  const std::size_t tail = (n + 1) / 2;
  const double inf = std::numeric_limits<double>::infinity();
  s.single_sup = s.double_sup = -inf;
  s.single_inf = s.double_inf = inf;
  for (std::size_t i = n - tail; i < n; ++i) {
    if (!std::isnan(s.single[i])) {
      s.single_sup = std::max(s.single_sup, s.single[i]);
      s.single_inf = std::min(s.single_inf, s.single[i]);
    }
    if (!std::isnan(s.double_[i])) {
      s.double_sup = std::max(s.double_sup, s.double_[i]);
      s.double_inf = std::min(s.double_inf, s.double_[i]);
    }
  }
  return s;
}

SlopeSeries slope_series(const std::vector<CoverRun>& runs) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& run : runs) {
    if (!run.completed()) throw CoverError("slope series needs completed runs");
    pts.emplace_back(run.r, static_cast<double>(run.steps));
  }
  return slope_series(pts);
}

// ---------------------------------------------------------------------------
// CSV

std::string cover_runs_csv(const std::vector<CoverRecord>& records) {
  std::ostringstream os;
  os << "experiment_id,system,seed,r,mesh,outcome,steps_or_budget,unvisited,slope_single,"
        "slope_double\n";
  char buf[512];
  for (const auto& rec : records) {
    const CoverRun& run = rec.run;
    const double tau = static_cast<double>(run.steps);
    const double s1 = run.completed() ? single_log_ratio(tau, run.r) : std::nan("");
    const double s2 = run.completed() ? double_log_ratio(tau, run.r) : std::nan("");
    std::snprintf(buf, sizeof buf, "%s,%s,%llu,%.17g,%.17g,%s,%llu,%zu,%.17g,%.17g\n",
                  rec.experiment_id.c_str(), rec.system.c_str(),
                  static_cast<unsigned long long>(run.seed), run.r, run.mesh,
                  run.completed() ? "completed" : "budget_exhausted",
                  static_cast<unsigned long long>(run.steps), run.unvisited, s1, s2);
    os << buf;
  }
  return os.str();
}

}  // namespace coverlab
