#include "coverlab/interval_map.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <functional>
#include <limits>

namespace coverlab {

// ---------------------------------------------------------------------------
// Rationals

namespace {

Rational parse_decimal(const std::string& s) {
  std::size_t i = 0;
  bool neg = false;
  if (i < s.size() && (s[i] == '+' || s[i] == '-')) neg = s[i++] == '-';
  BigInt num = 0;
  long frac = 0;
  bool digits = false, dot = false;
  for (; i < s.size(); ++i) {
    const char ch = s[i];
    if (std::isdigit(static_cast<unsigned char>(ch))) {
      num = num * 10 + (ch - '0');
      digits = true;
      if (dot) ++frac;
    } else if (ch == '.' && !dot) {
      dot = true;
    } else {
      break;
    }
  }
  if (!digits) throw MapError("cannot parse number '" + s + "'");
  long exp10 = 0;
  if (i < s.size() && (s[i] == 'e' || s[i] == 'E')) {
    ++i;
    std::size_t used = 0;
    try {
      exp10 = std::stol(s.substr(i), &used);
    } catch (...) {
      throw MapError("cannot parse exponent in '" + s + "'");
    }
    i += used;
  }
  if (i != s.size()) throw MapError("trailing characters in number '" + s + "'");
  exp10 -= frac;
  Rational q(num);
  BigInt p10 = boost::multiprecision::pow(BigInt(10), static_cast<unsigned>(std::labs(exp10)));
  if (exp10 >= 0)
    q *= p10;
  else
    q /= p10;
  return neg ? Rational(-q) : q;
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\n\r");
  std::size_t b = s.find_last_not_of(" \t\n\r");
  return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
}

// Affine map y -> alpha + beta*y.
struct Affine {
  long double alpha = 0.0L;
  long double beta = 1.0L;
  long double operator()(long double y) const { return alpha + beta * y; }
};

// G o g_idx where g_idx is the inverse branch of idx.
Affine compose_inverse(const MarkovIntervalMap& map, const Affine& G, std::size_t idx) {
  const long double s = map.slope(idx);
  const long double f0 = s > 0 ? map.image_lo(idx) : map.image_hi(idx);
  Affine out;
  out.alpha = G.alpha + G.beta * (map.left(idx) - f0 / s);
  out.beta = G.beta / s;
  return out;
}

std::pair<long double, long double> image_of(const Affine& G, long double a, long double b) {
  long double u = G(a), v = G(b);
  if (u > v) std::swap(u, v);
  return {u, v};
}

}  // namespace

Rational parse_rational(const std::string& text) {
  const std::string s = trim(text);
  const auto slash = s.find('/');
  if (slash == std::string::npos) return parse_decimal(s);
  Rational den = parse_decimal(trim(s.substr(slash + 1)));
  if (den == 0) throw MapError("zero denominator in '" + s + "'");
  return parse_decimal(trim(s.substr(0, slash))) / den;
}

long double to_long_double(const Rational& q) {
  return boost::multiprecision::numerator(q).convert_to<long double>() /
         boost::multiprecision::denominator(q).convert_to<long double>();
}

// ---------------------------------------------------------------------------
// MarkovIntervalMap

Branch MarkovIntervalMap::branch(std::size_t idx) const {
  return Branch{label_of(idx), lo_[idx], hi_[idx], slope_[idx], image_first(idx), image_last(idx)};
}

std::size_t MarkovIntervalMap::index_of(Symbol label) const {
  if (label < first_label_ || static_cast<std::size_t>(label - first_label_) >= size())
    throw MapError("symbol " + std::to_string(label) + " has no explicit branch");
  return static_cast<std::size_t>(label - first_label_);
}

std::optional<std::size_t> MarkovIntervalMap::locate(long double x) const {
  auto it = std::upper_bound(lo_.begin(), lo_.end(), x);
  if (it == lo_.begin()) return std::nullopt;
  const std::size_t idx = static_cast<std::size_t>(it - lo_.begin()) - 1;
  if (x < hi_[idx]) return idx;
  return std::nullopt;
}

long double MarkovIntervalMap::apply(std::size_t idx, long double x) const {
  const long double s = slope_[idx];
  return (s > 0 ? image_lo(idx) : image_hi(idx)) + s * (x - lo_[idx]);
}

bool MarkovIntervalMap::support_contains(long double y, long double tol) const {
  // forward iteration; rounding grows by the slope each step, so stop once it is order one
  long double err = 4.0L * std::numeric_limits<long double>::epsilon();
  for (int step = 0; step < 4096; ++step) {
    const long double t = std::max(tol, err);
    if (t >= 0.5L) return true;
    if (countable_ && y >= tail_start() - t) return true;
    std::optional<std::size_t> idx = locate(y);
    if (!idx) {
      auto it = std::upper_bound(lo_.begin(), lo_.end(), y);
      const std::size_t cand = static_cast<std::size_t>(it - lo_.begin());
      if (cand < size() && lo_[cand] - y <= t) {
        y = lo_[cand];
        idx = cand;
      } else if (cand > 0 && y - hi_[cand - 1] <= t) {
        idx = cand - 1;
        y = hi_[cand - 1];
      } else {
        return false;
      }
    }
    const long double s = std::fabs(slope_[*idx]);
    y = std::clamp(apply(*idx, y), image_lo(*idx), image_hi(*idx));
    tol *= s;
    err *= s;
  }
  return true;
}

bool interval_support(const MarkovIntervalMap& map) {
  for (std::size_t i = 0; i + 1 < map.size(); ++i)
    if (map.right(i) != map.left(i + 1)) return false;
  return true;
}

MarkovIntervalMap build_affine_markov(const std::vector<std::pair<Rational, Rational>>& partition,
                                      const std::vector<Rational>& slopes,
                                      const std::vector<std::vector<std::size_t>>& images) {
  const std::size_t n = partition.size();
  if (n == 0) throw MapError("empty partition");
  if (slopes.size() != n || images.size() != n)
    throw MapError("partition, slopes and images must have equal length");
  for (std::size_t i = 0; i < n; ++i) {
    const auto& [l, r] = partition[i];
    if (!(l >= 0 && r <= 1 && l < r)) throw MapError("partition interval outside [0,1] or empty");
    if (i > 0 && partition[i - 1].second > l) throw MapError("overlapping or unsorted branches");
    if (abs(slopes[i]) <= 1) throw MapError("slope below expansion threshold");
  }
  MarkovIntervalMap m;
  m.first_label_ = 0;
  bool full = true;
  std::vector<std::vector<int>> M(n, std::vector<int>(n, 0));
  m.gamma_ = 1e300L;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> img = images[i];
    if (img.empty()) throw MapError("empty image");
    std::sort(img.begin(), img.end());
    for (std::size_t k = 0; k < img.size(); ++k) {
      if (img[k] >= n) throw MapError("image refers to unknown partition element");
      if (k > 0 && img[k] != img[k - 1] + 1)
        throw MapError("image is not a union of consecutive partition elements");
    }
    const std::size_t f = img.front(), l = img.back();
    const Rational width = partition[i].second - partition[i].first;
    const Rational span = partition[l].second - partition[f].first;
    if (abs(slopes[i]) * width != span)
      throw MapError("image inconsistent with affine geometry (branch " + std::to_string(i) + ")");
    for (std::size_t b = f; b <= l; ++b) M[i][b] = 1;
    full = full && f == 0 && l == n - 1;
    m.lo_q_.push_back(partition[i].first);
    m.hi_q_.push_back(partition[i].second);
    m.slope_q_.push_back(slopes[i]);
    m.lo_.push_back(to_long_double(partition[i].first));
    m.hi_.push_back(to_long_double(partition[i].second));
    m.slope_.push_back(to_long_double(slopes[i]));
    m.img_first_.push_back(f);
    m.img_last_.push_back(l);
    m.img_lo_.push_back(to_long_double(partition[f].first));
    m.img_hi_.push_back(to_long_double(partition[l].second));
    m.gamma_ = std::min(m.gamma_, std::fabs(m.slope_.back()));
  }
  m.full_ = full;
  m.shift_ = full ? Subshift::full(n) : Subshift::markov(M);
  return m;
}

// ---------------------------------------------------------------------------
// Zeta family

CertifiedValue zeta_tail(long double kappa, std::int64_t n) {
  if (!(kappa > 1.0L)) throw MapError("kappa must exceed 1");
  if (n < 1) throw MapError("tail index must be >= 1");
  const std::int64_t M = std::max<std::int64_t>(n, 64);
  long double direct = 0.0L, comp = 0.0L;
  for (std::int64_t j = M - 1; j >= n; --j) {  // small terms first
    const long double t = std::pow(static_cast<long double>(j), -kappa) - comp;
    const long double s = direct + t;
    comp = (s - direct) - t;
    direct = s;
  }
  const long double m = static_cast<long double>(M);
  const long double k = kappa;
  long double em = std::pow(m, 1.0L - k) / (k - 1.0L) + std::pow(m, -k) / 2.0L +
                   k * std::pow(m, -k - 1.0L) / 12.0L -
                   k * (k + 1) * (k + 2) * std::pow(m, -k - 3.0L) / 720.0L +
                   k * (k + 1) * (k + 2) * (k + 3) * (k + 4) * std::pow(m, -k - 5.0L) / 30240.0L;
  const long double next = k * (k + 1) * (k + 2) * (k + 3) * (k + 4) * (k + 5) * (k + 6) *
                           std::pow(m, -k - 7.0L) / 1209600.0L;
  const long double value = direct + em;
  return {value, 2.0L * next + value * 1e-18L};
}

struct ZetaBuilder {
  static ZetaFamilyMap build(long double kappa, long double tol) {
    if (!(kappa > 1.0L)) throw MapError("kappa must exceed 1");
    if (!(tol > 0.0L && tol <= 1e-6L)) throw MapError("truncation tolerance must lie in (0, 1e-6]");
    ZetaFamilyMap z;
    z.kappa = kappa;
    z.tolerance = tol;
    const CertifiedValue c = zeta_tail(kappa, 1);
    z.c = c.value;
    z.c_error = c.error;
    // smallest N with diam [a_N, 1) = T(N+1)/c < tol
    long double guess = std::pow((kappa - 1.0L) * z.c * tol, -1.0L / (kappa - 1.0L));
    std::int64_t N = std::max<std::int64_t>(1, static_cast<std::int64_t>(guess) - 2);
    while (zeta_tail(kappa, N + 1).value / z.c >= tol) ++N;
    while (N > 1 && zeta_tail(kappa, N).value / z.c < tol) --N;
    if (N > 50000000) throw MapError("truncation tolerance requires too many branches");
    z.truncation = static_cast<std::size_t>(N);

    // T(j) for j = N+1 down to 1 by compensated backward summation.
    std::vector<long double> T(static_cast<std::size_t>(N) + 2);
    T[N + 1] = zeta_tail(kappa, N + 1).value;
    long double comp = 0.0L;
    for (std::int64_t j = N; j >= 1; --j) {
      const long double t = std::pow(static_cast<long double>(j), -kappa) - comp;
      const long double s = T[j + 1] + t;
      comp = (s - T[j + 1]) - t;
      T[j] = s;
    }
    MarkovIntervalMap& m = z.map;
    m.first_label_ = 1;
    m.full_ = true;
    m.countable_ = true;
    m.gamma_ = z.c;
    m.shift_ = Subshift::countable(1);
    m.lo_.resize(N);
    m.hi_.resize(N);
    m.slope_.resize(N);
    for (std::int64_t j = 0; j < N; ++j) {
      m.lo_[j] = j == 0 ? 0.0L : 1.0L - T[j + 1] / z.c;  // a_j
      m.hi_[j] = 1.0L - T[j + 2] / z.c;                   // a_{j+1}
      m.slope_[j] = z.c * std::pow(static_cast<long double>(j + 1), kappa);
    }
    return z;
  }
};

ZetaFamilyMap build_zeta_map(long double kappa, long double truncation_tolerance) {
  return ZetaBuilder::build(kappa, truncation_tolerance);
}

// ---------------------------------------------------------------------------
// Projection

namespace {

ProjectedPoint project_impl(const MarkovIntervalMap& map, SymbolStream& stream, int depth,
                            long double target) {
  if (depth < 1) throw MapError("projection depth must be >= 1");
  Affine G;
  std::size_t prev = 0;
  for (int k = 0; k < depth; ++k) {
    const std::size_t idx = map.index_of(stream.at(k));
    if (k > 0 && !map.full_branch() && (idx < map.image_first(prev) || idx > map.image_last(prev)))
      throw MapError("inadmissible symbol in stream");
    const long double diam = std::fabs(G.beta) * (map.right(idx) - map.left(idx));
    if (k + 1 == depth || diam <= target) {
      auto [lo, hi] = image_of(G, map.left(idx), map.right(idx));
      (void)hi;
      return {lo, diam, k + 1};
    }
    G = compose_inverse(map, G, idx);
    prev = idx;
  }
  return {0.0L, 1.0L, 0};
}

}  // namespace

ProjectedPoint project(const MarkovIntervalMap& map, SymbolStream& stream, int depth) {
  return project_impl(map, stream, depth, -1.0L);
}

ProjectedPoint project_adaptive(const MarkovIntervalMap& map, SymbolStream& stream,
                                long double target, int max_depth) {
  return project_impl(map, stream, max_depth, target);
}

int orbit_depth(const MarkovIntervalMap& map, double resolution) {
  if (!(resolution > 0)) throw MapError("resolution must be positive");
  return static_cast<int>(std::ceil(std::log(4.0L / resolution) / std::log(map.gamma()))) + 1;
}

std::vector<ProjectedPoint> orbit_points(const MarkovIntervalMap& map, SymbolStream& stream,
                                         std::size_t steps, double resolution, std::size_t budget) {
  const int cap = orbit_depth(map, resolution);
  const long double target = resolution / 4.0L * (1.0L - 1e-12L);
  const std::size_t count = std::min(steps + 1, budget);
  std::vector<ProjectedPoint> out;
  out.reserve(count);
  for (std::size_t j = 0; j < count; ++j) {
    out.push_back(project_adaptive(map, stream, target, cap));
    stream.shift(1);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Words at scale

ScaleWords words_at_scale(const MarkovIntervalMap& map, double r, std::size_t budget) {
  if (!(r > 0)) throw MapError("scale must be positive");
  ScaleWords out;
  out.r = r;
  if (r >= map.support_hi() - map.support_lo()) {
    out.words.push_back(ScaleWord{{}, map.support_lo(), map.support_hi(), false});
    return out;
  }
  const long double rl = r;
  const long double slack = rl * 1e-15L;
  const Rational rq(r);
  const bool exact = map.exact();

  Word w;
  std::function<void(const Affine&, const Rational&, std::size_t, std::size_t)> rec;
  auto emit = [&](ScaleWord sw) {
    if (out.words.size() >= budget) throw BudgetError("words_at_scale: enumeration budget exceeded");
    out.max_length = std::max(out.max_length, sw.word.size());
    out.words.push_back(std::move(sw));
  };
  // Tie policy: diam == r counts as <= r, decided exactly for rational maps.
  auto small_enough = [&](const Affine& G, const Rational& beta_q, std::size_t b) {
    const long double d = std::fabs(G.beta) * (map.right(b) - map.left(b));
    if (!exact || std::fabs(d - rl) > rl * 1e-12L) return d <= rl + slack;
    return abs(beta_q) * (map.right_exact(b) - map.left_exact(b)) <= rq;
  };
  rec = [&](const Affine& G, const Rational& beta_q, std::size_t first, std::size_t last) {
    std::size_t stop = last + 1;
    if (map.countable()) {
      // children from index J on are lumped once their union has diameter <= r
      const long double thresh = 1.0L - rl * (1.0L + 1e-15L) / std::fabs(G.beta);
      auto it = std::lower_bound(map.left_begin(), map.left_end(), thresh);
      stop = static_cast<std::size_t>(it - map.left_begin());
      if (stop == 0) stop = 1;
      if (stop >= map.size()) {
        if (std::fabs(G.beta) * (1.0L - map.tail_start()) > rl + slack)
          throw MapError("scale below the truncation tolerance of the countable map");
        stop = map.size();
      }
    }
    for (std::size_t b = first; b < stop; ++b) {
      w.push_back(map.label_of(b));
      if (small_enough(G, beta_q, b)) {
        auto [lo, hi] = image_of(G, map.left(b), map.right(b));
        emit(ScaleWord{w, lo, hi, false});
      } else {
        Affine H = compose_inverse(map, G, b);
        Rational bq = exact ? Rational(beta_q / map.slope_exact(b)) : Rational(0);
        rec(H, bq, map.image_first(b), map.image_last(b));
      }
      w.pop_back();
    }
    if (map.countable()) {
      const long double start = stop < map.size() ? map.left(stop) : map.tail_start();
      auto [lo, hi] = image_of(G, start, 1.0L);
      w.push_back(map.label_of(stop));
      emit(ScaleWord{w, lo, hi, true});
      w.pop_back();
    }
  };
  rec(Affine{}, Rational(1), 0, map.size() - 1);
  std::sort(out.words.begin(), out.words.end(),
            [](const ScaleWord& a, const ScaleWord& b) { return a.lo < b.lo; });
  return out;
}

double word_mass(const SymbolicMeasure& m, const ScaleWord& sw) {
  if (!sw.lump) return m.cylinder(sw.word);
  Word prefix(sw.word.begin(), sw.word.end() - 1);
  const double base = m.cylinder(prefix);
  std::optional<Symbol> prev;
  if (!prefix.empty()) prev = prefix.back();
  return base * m.range_mass(prev, sw.word.back(), std::nullopt);
}

std::pair<long double, long double> cylinder_interval(const MarkovIntervalMap& map, const Word& w) {
  if (w.empty()) return {map.support_lo(), map.support_hi()};
  Affine G;
  for (std::size_t k = 0; k + 1 < w.size(); ++k) G = compose_inverse(map, G, map.index_of(w[k]));
  const std::size_t last = map.index_of(w.back());
  return image_of(G, map.left(last), map.right(last));
}

// ---------------------------------------------------------------------------
// Interval mass

MassBracket interval_mass(const MarkovIntervalMap& map, const SymbolicMeasure& m, long double lo,
                          long double hi, int depth_cap) {
  MassBracket out{0.0, 0.0};
  if (!(hi > lo)) return out;
  long double lower = 0.0L, upper = 0.0L;
  std::function<void(const Affine&, std::optional<Symbol>, long double, std::size_t, std::size_t, int)>
      rec;
  rec = [&](const Affine& G, std::optional<Symbol> prev, long double mass, std::size_t first,
            std::size_t last, int depth) {
    long double ylo = (lo - G.alpha) / G.beta, yhi = (hi - G.alpha) / G.beta;
    if (ylo > yhi) std::swap(ylo, yhi);
    // explicit children overlapping (ylo, yhi)
    auto hb = map.right_begin() + first, he = map.right_begin() + last + 1;
    std::size_t i0 = static_cast<std::size_t>(std::upper_bound(hb, he, ylo) - map.right_begin());
    auto lb = map.left_begin() + first, le = map.left_begin() + last + 1;
    std::size_t i1_end = static_cast<std::size_t>(std::lower_bound(lb, le, yhi) - map.left_begin());
    if (i0 < i1_end) {
      const std::size_t i1 = i1_end - 1;
      auto inside = [&](std::size_t b) { return map.left(b) >= ylo && map.right(b) <= yhi; };
      const std::int64_t f0 = static_cast<std::int64_t>(inside(i0) ? i0 : i0 + 1);
      const std::int64_t f1 = inside(i1) ? static_cast<std::int64_t>(i1) : static_cast<std::int64_t>(i1) - 1;
      if (f0 <= f1) {
        const long double add = mass * m.range_mass(prev, map.label_of(f0), map.label_of(f1));
        lower += add;
        upper += add;
      }
      std::vector<std::size_t> partial;
      if (!inside(i0)) partial.push_back(i0);
      if (i1 != i0 && !inside(i1)) partial.push_back(i1);
      for (std::size_t b : partial) {
        const Symbol lab = map.label_of(b);
        const long double cm = mass * (prev ? m.transition(*prev, lab) : m.weight(lab));
        if (cm == 0.0L) continue;
        if (depth + 1 >= depth_cap) {
          upper += cm;
        } else {
          rec(compose_inverse(map, G, b), lab, cm, map.image_first(b), map.image_last(b), depth + 1);
        }
      }
    }
    if (map.countable() && yhi > map.tail_start()) {
      const long double tm =
          mass * m.range_mass(prev, map.label_of(map.size()), std::nullopt);
      if (ylo <= map.tail_start() && yhi >= 1.0L) lower += tm;
      upper += tm;
    }
  };
  rec(Affine{}, std::nullopt, 1.0L, 0, map.size() - 1, 0);
  out.lower = static_cast<double>(lower);
  out.upper = static_cast<double>(std::min<long double>(upper, 1.0L));
  return out;
}

}  // namespace coverlab
