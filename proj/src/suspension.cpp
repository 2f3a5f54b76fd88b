#include "coverlab/suspension.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace coverlab {

namespace mp = boost::multiprecision;

namespace {

double to_double(const Rational& x) { return static_cast<double>(to_long_double(x)); }

BigInt ceil_q(const Rational& x) {
  const BigInt n = mp::numerator(x), d = mp::denominator(x);
  BigInt q = n / d;
  if (n > 0 && q * d != n) q += 1;
  return q;
}

// Smallest m >= 0 with 2^-m <= r.
int depth_for_diameter(double r) {
  int m = 0;
  while (std::ldexp(1.0, -m) > r) ++m;
  return m;
}

std::size_t window_of_depth(int m) { return m == 0 ? 0 : static_cast<std::size_t>(2 * m - 1); }

std::uint64_t word_index(const Word& w, Symbol first, std::size_t alphabet) {
  std::uint64_t idx = 0;
  for (Symbol a : w) idx = idx * alphabet + static_cast<std::uint64_t>(a - first);
  return idx;
}

// Centre subword of length len of an odd-length centred word.
Word centre_of(const Word& w, std::size_t len) {
  if (len >= w.size()) return w;
  const std::size_t off = (w.size() - len) / 2;
  return Word(w.begin() + static_cast<long>(off), w.begin() + static_cast<long>(off + len));
}

double overlap(double a, double b, double c, double d) {
  return std::max(0.0, std::min(b, d) - std::max(a, c));
}

void check_window_size(std::size_t alphabet, std::size_t len) {
  if (len > 0 && std::log2(static_cast<double>(alphabet)) * static_cast<double>(len) > 26.0)
    throw SuspensionError("cylinder window too long to enumerate");
}

}  // namespace

// ---------------------------------------------------------------------------
// Roof

RoofFunction RoofFunction::constant(const Rational& value) {
  if (value <= 0) throw SuspensionError("roof must be positive");
  RoofFunction f;
  f.values_[Word{}] = value;
  f.min_ = f.max_ = value;
  return f;
}

RoofFunction RoofFunction::table(int depth, std::map<Word, Rational> values) {
  if (depth < 1) throw SuspensionError("roof depth must be >= 1");
  if (values.empty()) throw SuspensionError("empty roof table");
  RoofFunction f;
  f.depth_ = depth;
  f.min_ = values.begin()->second;
  f.max_ = values.begin()->second;
  for (const auto& [w, v] : values) {
    if (w.size() != f.window()) throw SuspensionError("roof word length must be 2*depth-1");
    if (v <= 0) throw SuspensionError("roof must be positive");
    f.min_ = std::min(f.min_, v);
    f.max_ = std::max(f.max_, v);
  }
  f.values_ = std::move(values);
  return f;
}

const Rational& RoofFunction::value(const Word& centred) const {
  auto it = values_.find(centre_of(centred, window()));
  if (it == values_.end()) throw SuspensionError("roof undefined on cylinder");
  return it->second;
}

double RoofFunction::lipschitz() const {
  double best = 0.0;
  for (auto a = values_.begin(); a != values_.end(); ++a)
    for (auto b = std::next(a); b != values_.end(); ++b) {
      if (a->second == b->second) continue;
      // first k with a mismatch at position +-k from the centre
      const std::size_t c = window() / 2;
      std::size_t k = 0;
      while (a->first[c + k] == b->first[c + k] && a->first[c - k] == b->first[c - k]) ++k;
      const double dist = std::ldexp(1.0, -static_cast<int>(k));
      best = std::max(best, to_double(abs(Rational(a->second - b->second))) / dist);
    }
  return best;
}

double RoofFunction::integral(const SymbolicMeasure& m) const {
  double s = 0.0;
  for (const auto& [w, v] : values_)
    if (m.subshift().admissible(w)) s += to_double(v) * m.cylinder(w);
  return s;
}

// ---------------------------------------------------------------------------
// Space

Symbol FlowPoint::symbol(std::int64_t j) const { return base->at(position + j); }

SuspensionSpace::SuspensionSpace(std::shared_ptr<const SymbolicMeasure> base, RoofFunction roof)
    : base_(std::move(base)), roof_(std::move(roof)) {
  if (!base_) throw SuspensionError("missing base measure");
  if (base_->countable()) throw SuspensionError("suspension base must have a finite alphabet");
  if (base_->subshift().sidedness() != Sidedness::two_sided)
    throw SuspensionError("suspension base must be two-sided");
  alphabet_ = base_->subshift().alphabet_size();
  const std::size_t W = roof_.window();
  check_window_size(alphabet_, W);
  std::size_t total = 1;
  for (std::size_t i = 0; i < W; ++i) total *= alphabet_;
  roof_by_index_.assign(total, Rational(0));
  roof_double_.assign(total, 0.0);
  for (const Word& w : admissible_words(base_->subshift(), static_cast<int>(W))) {
    auto it = roof_.values().find(w);
    if (it == roof_.values().end()) throw SuspensionError("roof table misses an admissible cylinder");
    const auto idx = word_index(w, base_->first_label(), alphabet_);
    roof_by_index_[idx] = it->second;
    roof_double_[idx] = to_double(it->second);
  }
  phi_bar_ = roof_.integral(*base_);
}

int SuspensionSpace::wraps() const {
  return static_cast<int>(ceil_q(Rational(roof_.max() / roof_.min())));
}

double SuspensionSpace::expansion_bound() const { return std::ldexp(1.0, wraps()); }

std::uint64_t SuspensionSpace::window_index(SymbolStream& s, std::int64_t pos,
                                            std::size_t length) const {
  if (length == 0) return 0;
  const std::int64_t half = static_cast<std::int64_t>(length / 2);
  const Symbol first = base_->first_label();
  std::uint64_t idx = 0;
  for (std::int64_t j = -half; j <= half; ++j)
    idx = idx * alphabet_ + static_cast<std::uint64_t>(s.at(pos + j) - first);
  return idx;
}

const Rational& SuspensionSpace::roof_at(const FlowPoint& p, std::int64_t k) const {
  return roof_by_index_[window_index(*p.base, p.position + k, roof_.window())];
}

double SuspensionSpace::roof_value_at(SymbolStream& s, std::int64_t pos) const {
  return roof_double_[window_index(s, pos, roof_.window())];
}

FlowPoint make_flow_point(std::shared_ptr<SymbolStream> base, std::int64_t position,
                          const Rational& height) {
  if (!base) throw SuspensionError("missing base stream");
  if (base->offset() != 0) throw SuspensionError("flow points read streams at offset 0");
  if (height < 0) throw SuspensionError("height must be non-negative");
  return FlowPoint{std::move(base), position, height};
}

FlowPoint sample_flow_point(const SuspensionSpace& space, std::uint64_t seed,
                            const Rational& height) {
  auto s = std::make_shared<SymbolStream>(SymbolStream::sampled(space.base_ptr(), seed));
  return canonical(space, make_flow_point(s, 0, height));
}

FlowResult flow(const SuspensionSpace& space, const FlowPoint& p, const Rational& t) {
  if (t < 0) throw SuspensionError("flow time must be non-negative");
  if (p.height < 0) throw SuspensionError("height must be non-negative");
  FlowResult out{p, 0};
  Rational h = p.height + t;
  std::int64_t k = 0;
  while (true) {
    const Rational& phi = space.roof_at(p, k);
    if (h < phi) break;
    h -= phi;
    ++k;
  }
  out.point.position = p.position + k;
  out.point.height = h;
  out.crossings = static_cast<std::uint64_t>(k);
  return out;
}

FlowPoint canonical(const SuspensionSpace& space, const FlowPoint& p) {
  return flow(space, p, Rational(0)).point;
}

BaseDistance base_distance(const FlowPoint& p, std::int64_t shift_p, const FlowPoint& q,
                           std::int64_t shift_q, int window) {
  if (window < 1) throw SuspensionError("comparison window must be >= 1");
  const std::int64_t a = p.position + shift_p, b = q.position + shift_q;
  if (p.base == q.base && a == b) return {0.0, true};
  for (int k = 0; k < window; ++k) {
    if (p.base->at(a + k) != q.base->at(b + k) || p.base->at(a - k) != q.base->at(b - k))
      return {std::ldexp(1.0, -k), true};
  }
  return {std::ldexp(1.0, -window), false};
}

double d_pi(const SuspensionSpace& space, const FlowPoint& p, const FlowPoint& q, int window) {
  const Rational& phx = space.roof_at(p);
  const Rational& phy = space.roof_at(q);
  const BaseDistance d0 = base_distance(p, 0, q, 0, window);
  const BaseDistance d1 = base_distance(p, 1, q, 0, window);
  const BaseDistance d2 = base_distance(p, 0, q, 1, window);
  const double h1 = to_double(abs(Rational(p.height - q.height)));
  const double h2 = to_double(Rational(phx - p.height + q.height));
  const double h3 = to_double(Rational(phy - q.height + p.height));
  double lo = std::numeric_limits<double>::infinity(), hi = lo;
  for (const auto& [d, h] : {std::pair{d0, h1}, std::pair{d1, h2}, std::pair{d2, h3}}) {
    hi = std::min(hi, d.value + h);
    lo = std::min(lo, (d.certified ? d.value : 0.0) + h);
  }
  if (hi - lo > 1e-12) throw SuspensionError("insufficient stream window to certify d_pi");
  return hi;
}

// ---------------------------------------------------------------------------
// Cover times

std::size_t FlowNet::position(std::uint64_t index) const {
  auto it = std::lower_bound(words.begin(), words.end(), index);
  if (it == words.end() || *it != index) throw SuspensionError("inadmissible base window");
  return static_cast<std::size_t>(it - words.begin());
}

FlowNet build_flow_net(const SuspensionSpace& space, double r) {
  if (!(r > 0)) throw SuspensionError("scale must be positive");
  FlowNet net;
  net.r = r;
  net.base_depth = std::max(depth_for_diameter(r), space.roof().depth());
  net.window = window_of_depth(net.base_depth);
  check_window_size(space.alphabet_size(), net.window);
  const Symbol first = space.base().first_label();
  const Rational rq(r);
  std::vector<std::pair<std::uint64_t, Rational>> cells;
  for (const Word& w : admissible_words(space.base().subshift(), static_cast<int>(net.window)))
    cells.emplace_back(word_index(w, first, space.alphabet_size()), space.roof().value(w));
  std::sort(cells.begin(), cells.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  for (const auto& [idx, phi] : cells) {
    const BigInt n = ceil_q(Rational(phi / rq));
    const std::size_t cnt = static_cast<std::size_t>(std::max(BigInt(1), n));
    net.words.push_back(idx);
    net.height_cells.push_back(cnt);
    net.cell_height.push_back(to_double(phi) / static_cast<double>(cnt));
    net.cells += cnt;
  }
  return net;
}

FlowCoverRun flow_cover_time(const SuspensionSpace& space, const FlowPoint& start_in, double r,
                             const FlowCoverOptions& opt) {
  const FlowPoint start = canonical(space, start_in);
  const FlowNet net = build_flow_net(space, r);
  FlowCoverRun run;
  run.r = r;
  run.cells = net.cells;
  run.base_cells = net.words.size();
  SymbolStream& s = *start.base;
  std::int64_t pos = start.position;
  const double s0 = to_double(start.height);

  std::vector<char> done(net.words.size(), 0);
  std::size_t pending = net.words.size();
  double tmax = 0.0;
  // fiber 0: cells from the starting height upwards are entered as the height rises
  const std::size_t c0 = net.position(space.window_index(s, pos, net.window));
  const double h0 = net.cell_height[c0];
  const std::size_t n0 = net.height_cells[c0];
  const std::size_t i0 = std::min(n0 - 1, static_cast<std::size_t>(std::floor(s0 / h0)));
  const double partial = std::max(0.0, static_cast<double>(n0 - 1) * h0 - s0);
  tmax = partial;
  if (i0 == 0) {
    done[c0] = 1;
    --pending;
  }
  double t = space.roof_value_at(s, pos) - s0;
  ++pos;
  std::uint64_t k = 1;
  while (pending > 0) {
    if (t > opt.time_budget) {
      run.outcome = Outcome::budget_exhausted;
      run.time = opt.time_budget;
      run.crossings = k;
      run.unvisited = pending;
      return run;
    }
    const std::size_t c = net.position(space.window_index(s, pos, net.window));
    if (!done[c]) {
      const double finish = c == c0 ? t + static_cast<double>(i0 - 1) * h0
                                    : t + static_cast<double>(net.height_cells[c] - 1) *
                                              net.cell_height[c];
      tmax = std::max(tmax, finish);
      done[c] = 1;
      --pending;
    }
    t += space.roof_value_at(s, pos);
    ++pos;
    ++k;
  }
  run.outcome = Outcome::completed;
  run.time = tmax;
  run.crossings = k - 1;
  return run;
}

FlowCoverBracket flow_cover_bracket(const SuspensionSpace& space, const FlowPoint& start,
                                    double r, const FlowCoverOptions& opt) {
  return {flow_cover_time(space, start, 2 * r, opt), flow_cover_time(space, start, r, opt),
          flow_cover_time(space, start, r / 2, opt)};
}

SectionReductionReport section_reduction_check(const SuspensionSpace& space,
                                               const FlowPoint& start_in, double r,
                                               double time_budget, std::uint64_t step_budget) {
  const FlowPoint start = canonical(space, start_in);
  SectionReductionReport rep;
  rep.r = r;
  rep.lambda = space.lambda();
  rep.expansion = space.expansion_bound();
  rep.flow_run = flow_cover_time(space, start, r, {time_budget});

  // return map F = shift on the section; cells are base cylinders of diameter <= lambda r
  const double rs = rep.lambda * r;
  const std::size_t L = window_of_depth(depth_for_diameter(rs));
  check_window_size(space.alphabet_size(), L);
  Net net;
  net.mesh = rs;
  net.rho = 0.5;  // integer labels: a visit marks exactly its own cell
  const Symbol first = space.base().first_label();
  for (const Word& w : admissible_words(space.base().subshift(), static_cast<int>(L)))
    net.centres.push_back(static_cast<long double>(word_index(w, first, space.alphabet_size())));
  std::sort(net.centres.begin(), net.centres.end());
  SymbolStream& s = *start.base;
  const std::int64_t p0 = start.position;
  FunctionOrbit orbit([&](std::uint64_t j) {
    return OrbitPoint{static_cast<long double>(space.window_index(s, p0 + static_cast<std::int64_t>(j), L)),
                      0.0L};
  });
  CoverOptions copt;
  copt.budget = step_budget;
  rep.section_run = cover_time_net(orbit, net, copt);
  if (!rep.section_run.completed() || !rep.flow_run.completed()) return rep;
  Rational sum = 0;
  for (std::uint64_t j = 0; j <= rep.section_run.steps; ++j)
    sum += space.roof_at(start, static_cast<std::int64_t>(j));
  rep.right = space.sweep_time() + to_double(sum);
  rep.margin = rep.right - rep.flow_run.time;
  rep.holds = rep.margin >= 0;
  rep.evaluated = true;
  return rep;
}

// ---------------------------------------------------------------------------
// nu

std::size_t ball_window(double rho) {
  if (!(rho > 0)) throw SuspensionError("radius must be positive");
  int m = 0;
  while (std::ldexp(1.0, -m) >= rho) ++m;  // d < rho  <=>  x^y >= m
  return window_of_depth(m);
}

double nu_cell(const SuspensionSpace& space, const Word& centred, double lo, double hi) {
  if (centred.size() % 2 == 0 && !centred.empty()) throw SuspensionError("centred words have odd length");
  const auto& m = space.base();
  if (!m.subshift().admissible(centred)) return 0.0;
  const std::size_t W = space.roof().window();
  double mass = 0.0;
  if (centred.size() >= W) {
    const double phi = to_double(space.roof().value(centred));
    mass = m.cylinder(centred) * overlap(lo, hi, 0.0, phi);
  } else {
    for (const Word& w : admissible_words(m.subshift(), static_cast<int>(W))) {
      if (centre_of(w, centred.size()) != centred) continue;
      mass += m.cylinder(w) * overlap(lo, hi, 0.0, to_double(space.roof().value(w)));
    }
  }
  return mass / space.phi_bar();
}

namespace {

Word centred_word(const FlowPoint& p, std::int64_t shift, std::size_t len) {
  Word w;
  const std::int64_t half = static_cast<std::int64_t>(len / 2);
  for (std::int64_t j = -half; len > 0 && j <= half; ++j) w.push_back(p.symbol(shift + j));
  return w;
}

}  // namespace

double base_ball_mass(const SuspensionSpace& space, const FlowPoint& p, std::int64_t shift,
                      double rho) {
  const Word w = centred_word(p, shift, ball_window(rho));
  return space.base().subshift().admissible(w) ? space.base().cylinder(w) : 0.0;
}

NuBall nu_ball(const SuspensionSpace& space, const FlowPoint& p_in, double r) {
  if (!(r > 0)) throw SuspensionError("radius must be positive");
  if (r > 1.0 + space.sweep_time()) return {1.0, 1.0};  // d_pi <= 1 + max roof
  if (!(r < space.roof_min() / 2)) throw SuspensionError("radius too large for the box bound");
  const FlowPoint p = canonical(space, p_in);
  const double s = to_double(p.height);
  NuBall out;
  out.lower = nu_cell(space, centred_word(p, 0, ball_window(r / 2)), s - r / 2, s + r / 2);
  const double b1 = nu_cell(space, centred_word(p, 0, ball_window(r)), s - r, s + r);
  const double b2 = r * base_ball_mass(space, p, 1, r) / space.phi_bar();
  const double b3 = r * base_ball_mass(space, p, 0, r) / space.phi_bar();  // sigma^-1 B(x,r)
  out.upper = std::min(1.0, b1 + b2 + b3);
  return out;
}

MeasureCurve nu_min_ball_curve(const SuspensionSpace& space, const std::vector<double>& grid,
                               std::size_t sampled_points, std::uint64_t seed) {
  const auto& m = space.base();
  const auto symbols = m.subshift().symbols();
  // candidate centres: constant sequences and sampled points, at mid-fibre height
  std::vector<FlowPoint> cands;
  for (Symbol a : symbols) {
    if (!m.subshift().allowed(a, a)) continue;
    auto st = std::make_shared<SymbolStream>(SymbolStream::from_function([a](std::int64_t) { return a; }));
    FlowPoint p = make_flow_point(st, 0);
    p.height = space.roof_at(p) / 2;
    cands.push_back(p);
  }
  for (std::size_t i = 0; i < sampled_points; ++i) {
    FlowPoint p = sample_flow_point(space, trial_key(seed, i));
    p.height = space.roof_at(p) / 2;
    cands.push_back(p);
  }
  MeasureCurve curve;
  for (double r : grid) {
    // lower: every ball contains a base cylinder of radius r/2 times a height interval >= r/2
    const std::size_t L = ball_window(r / 2);
    std::vector<double> best(symbols.size());
    for (std::size_t i = 0; i < symbols.size(); ++i) best[i] = std::log(m.weight(symbols[i]));
    for (std::size_t step = 1; step < L; ++step) {
      std::vector<double> next(symbols.size(), std::numeric_limits<double>::infinity());
      for (std::size_t a = 0; a < symbols.size(); ++a)
        for (std::size_t b = 0; b < symbols.size(); ++b) {
          if (!m.subshift().allowed(symbols[a], symbols[b])) continue;
          next[b] = std::min(next[b], best[a] + std::log(m.transition(symbols[a], symbols[b])));
        }
      best = next;
    }
    const double log_min_word = L == 0 ? 0.0 : *std::min_element(best.begin(), best.end());
    const double log_lower = std::log(r / 2) + log_min_word - std::log(space.phi_bar());
    double upper = 1.0;
    for (const auto& p : cands) upper = std::min(upper, nu_ball(space, p, r).upper);
    curve.add_log_bracket(r, log_lower, std::log(upper), Provenance::closed_form_bracket);
  }
  return curve;
}

OccupationCheck occupation_check(const SuspensionSpace& space, const FlowPoint& start_in,
                                 const Word& centred, double lo, double hi, double t_step,
                                 std::uint64_t samples, std::size_t batches) {
  if (!(t_step > 0) || samples < batches || batches < 2)
    throw SuspensionError("invalid occupation sampling parameters");
  const FlowPoint start = canonical(space, start_in);
  OccupationCheck out;
  out.expected = nu_cell(space, centred, lo, hi);
  out.samples = samples;
  SymbolStream& s = *start.base;
  const std::uint64_t target = word_index(centred, space.base().first_label(), space.alphabet_size());
  std::int64_t pos = start.position;
  long double h = to_long_double(start.height);
  long double phi = space.roof_value_at(s, pos);
  const std::uint64_t per = samples / batches;
  std::vector<double> freq(batches, 0.0);
  std::uint64_t hits = 0, used = 0;
  for (std::size_t b = 0; b < batches; ++b) {
    std::uint64_t bh = 0;
    for (std::uint64_t j = 0; j < per; ++j) {
      if (h >= lo && h < hi && space.window_index(s, pos, centred.size()) == target) ++bh;
      h += t_step;
      while (h >= phi) {
        h -= phi;
        ++pos;
        phi = space.roof_value_at(s, pos);
      }
    }
    freq[b] = static_cast<double>(bh) / static_cast<double>(per);
    hits += bh;
    used += per;
  }
  out.samples = used;
  out.frequency = static_cast<double>(hits) / static_cast<double>(used);
  double var = 0.0;
  for (double f : freq) var += (f - out.frequency) * (f - out.frequency);
  var /= static_cast<double>(batches - 1);
  out.std_error = std::sqrt(var / static_cast<double>(batches));
  const double diff = out.frequency - out.expected;
  out.z = out.std_error > 0 ? diff / out.std_error : (diff == 0 ? 0.0 : std::numeric_limits<double>::infinity());
  return out;
}

}  // namespace coverlab
