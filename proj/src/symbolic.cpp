#include "coverlab/symbolic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <Eigen/Dense>

namespace coverlab {

// ---------------------------------------------------------------------------
// Subshift

Subshift Subshift::full(std::size_t alphabet_size, Sidedness side, Symbol first_label) {
  if (alphabet_size == 0) throw SymbolicError("alphabet must be non-empty");
  Subshift s;
  s.size_ = alphabet_size;
  s.side_ = side;
  s.first_label_ = first_label;
  return s;
}

Subshift Subshift::countable(Symbol first_label, Sidedness side) {
  Subshift s;
  s.countable_ = true;
  s.first_label_ = first_label;
  s.side_ = side;
  return s;
}

Subshift Subshift::markov(std::vector<std::vector<int>> transition, Sidedness side,
                          Symbol first_label) {
  const std::size_t n = transition.size();
  if (n == 0) throw SymbolicError("transition matrix must be non-empty");
  for (const auto& row : transition) {
    if (row.size() != n) throw SymbolicError("transition matrix must be square");
    bool any = false;
    for (int v : row) {
      if (v != 0 && v != 1) throw SymbolicError("transition matrix entries must be 0 or 1");
      any = any || v == 1;
    }
    if (!any) throw SymbolicError("transition matrix has a row with no successor");
  }
  Subshift s;
  s.size_ = n;
  s.side_ = side;
  s.first_label_ = first_label;
  s.transitive_ = matrix_irreducible(transition);
  s.transition_ = std::move(transition);
  return s;
}

std::size_t Subshift::alphabet_size() const {
  if (countable_) throw SymbolicError("countable alphabet has no finite size");
  return size_;
}

bool Subshift::contains(Symbol a) const {
  if (a < first_label_) return false;
  return countable_ || static_cast<std::size_t>(a - first_label_) < size_;
}

bool Subshift::allowed(Symbol a, Symbol b) const {
  if (!contains(a) || !contains(b)) return false;
  if (transition_.empty()) return true;
  return transition_[a - first_label_][b - first_label_] == 1;
}

bool Subshift::admissible(const Word& w) const {
  for (std::size_t k = 0; k < w.size(); ++k) {
    if (!contains(w[k])) return false;
    if (k + 1 < w.size() && !allowed(w[k], w[k + 1])) return false;
  }
  return true;
}

std::vector<Symbol> Subshift::symbols() const {
  std::vector<Symbol> out(alphabet_size());
  std::iota(out.begin(), out.end(), first_label_);
  return out;
}

std::vector<Symbol> Subshift::successors(Symbol a) const {
  std::vector<Symbol> out;
  for (Symbol b : symbols())
    if (allowed(a, b)) out.push_back(b);
  return out;
}

bool matrix_irreducible(const std::vector<std::vector<int>>& m) {
  const std::size_t n = m.size();
  for (std::size_t start = 0; start < n; ++start) {
    std::vector<char> seen(n, 0);
    std::vector<std::size_t> stack{start};
    std::size_t count = 0;
    while (!stack.empty()) {
      std::size_t a = stack.back();
      stack.pop_back();
      for (std::size_t b = 0; b < n; ++b) {
        if (m[a][b] == 1 && !seen[b]) {
          seen[b] = 1;
          ++count;
          stack.push_back(b);
        }
      }
    }
    if (count != n) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Measures

namespace {

std::vector<double> cumulative(const std::vector<double>& w) {
  std::vector<double> c(w.size());
  double total = 0.0;
  for (double v : w) total += v;
  double run = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    run += w[i];
    c[i] = run / total;
  }
  if (!c.empty()) c.back() = 1.0;
  return c;
}

}  // namespace

SymbolicMeasure make_bernoulli(const std::vector<double>& weights, Sidedness side) {
  if (weights.empty()) throw SymbolicError("empty weight vector");
  long double total = 0.0L;
  for (double w : weights) {
    if (!(w > 0.0)) throw SymbolicError("Bernoulli weights must be strictly positive");
    total += w;
  }
  if (std::fabs(static_cast<double>(total - 1.0L)) > 1e-12)
    throw SymbolicError("Bernoulli weights must sum to 1");
  SymbolicMeasure m(SymbolicMeasure::Kind::bernoulli, Subshift::full(weights.size(), side, 0));
  m.w_ = weights;
  m.suffix_.assign(weights.size() + 1, 0.0);
  for (std::size_t i = weights.size(); i-- > 0;) m.suffix_[i] = m.suffix_[i + 1] + weights[i];
  m.truncation_ = static_cast<Symbol>(weights.size()) - 1;
  m.cdf_ = cumulative(weights);
  return m;
}

SymbolicMeasure make_bernoulli(const CountableWeights& rule, double tolerance,
                               std::optional<Symbol> truncation, Sidedness side) {
  if (!rule.weight) throw SymbolicError("countable Bernoulli measure needs a weight rule");
  if (!rule.tail) throw SymbolicError("countable Bernoulli measure needs a certified tail bound");
  if (!(tolerance > 0.0)) throw SymbolicError("tolerance must be positive");
  Symbol n = rule.first_label;
  if (truncation) {
    n = *truncation;
    if (n < rule.first_label) throw SymbolicError("truncation below first label");
  } else {
    while (!(rule.tail(n) < tolerance)) {
      if (n - rule.first_label > 10000000) throw SymbolicError("tail bound never drops below tolerance");
      ++n;
    }
  }
  SymbolicMeasure m(SymbolicMeasure::Kind::bernoulli, Subshift::countable(rule.first_label, side));
  const std::size_t count = static_cast<std::size_t>(n - rule.first_label + 1);
  m.w_.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    double w = rule.weight(rule.first_label + static_cast<Symbol>(i));
    if (!(w > 0.0)) throw SymbolicError("Bernoulli weights must be strictly positive");
    m.w_[i] = w;
  }
  m.tail_mass_ = rule.tail(n);
  m.tail_exact_ = rule.tail_exact;
  m.suffix_.assign(count + 1, 0.0);
  m.suffix_[count] = m.tail_mass_;
  for (std::size_t i = count; i-- > 0;) m.suffix_[i] = m.suffix_[i + 1] + m.w_[i];
  if (std::fabs(m.suffix_[0] - 1.0) > 1e-12)
    throw SymbolicError("Bernoulli weights plus tail must sum to 1");
  m.truncation_ = n;
  m.rule_weight_ = rule.weight;
  m.rule_tail_ = rule.tail;
  m.cdf_ = cumulative(m.w_);
  return m;
}

SymbolicMeasure make_geometric(double omega, double tolerance, Sidedness side) {
  if (!(omega > 1.0)) throw SymbolicError("omega must exceed 1");
  CountableWeights rule;
  rule.first_label = 1;
  rule.tail_exact = true;
  rule.weight = [omega](Symbol i) {
    return (omega - 1.0) * std::pow(omega, -static_cast<double>(i));
  };
  rule.tail = [omega](Symbol i) { return std::pow(omega, -static_cast<double>(i)); };
  return make_bernoulli(rule, tolerance, std::nullopt, side);
}

SymbolicMeasure make_markov(const std::vector<std::vector<double>>& P, Sidedness side) {
  const std::size_t n = P.size();
  if (n == 0) throw SymbolicError("empty transition matrix");
  std::vector<std::vector<int>> adj(n, std::vector<int>(n, 0));
  for (std::size_t a = 0; a < n; ++a) {
    if (P[a].size() != n) throw SymbolicError("transition matrix must be square");
    long double s = 0.0L;
    for (std::size_t b = 0; b < n; ++b) {
      if (P[a][b] < 0.0) throw SymbolicError("negative transition probability");
      s += P[a][b];
      adj[a][b] = P[a][b] > 0.0 ? 1 : 0;
    }
    if (std::fabs(static_cast<double>(s - 1.0L)) > 1e-12)
      throw SymbolicError("transition matrix is not row-stochastic");
  }
  if (!matrix_irreducible(adj)) throw SymbolicError("transition matrix is not irreducible");

  SymbolicMeasure m(SymbolicMeasure::Kind::markov, Subshift::markov(adj, side, 0));
  m.p_ = P;
  bool rows_equal = true;
  for (std::size_t a = 1; a < n; ++a) rows_equal = rows_equal && P[a] == P[0];
  if (rows_equal) {
    m.pi_ = P[0];
  } else {
    Eigen::MatrixXd A(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) A(i, j) = P[j][i] - (i == j ? 1.0 : 0.0);
    for (std::size_t j = 0; j < n; ++j) A(n - 1, j) = 1.0;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    rhs(n - 1) = 1.0;
    Eigen::VectorXd pi = A.fullPivLu().solve(rhs);
    m.pi_.assign(pi.data(), pi.data() + n);
  }
  for (std::size_t b = 0; b < n; ++b) {
    if (!(m.pi_[b] > 0.0)) throw SymbolicError("stationary vector is not positive");
    long double s = 0.0L;
    for (std::size_t a = 0; a < n; ++a) s += m.pi_[a] * P[a][b];
    if (std::fabs(static_cast<double>(s - m.pi_[b])) > 1e-12)
      throw SymbolicError("stationary vector failed the invariance check");
  }
  m.truncation_ = static_cast<Symbol>(n) - 1;
  m.cdf_ = cumulative(m.pi_);
  m.row_prefix_.assign(n, std::vector<double>(n + 1, 0.0));
  m.fwd_cdf_.resize(n);
  m.bwd_cdf_.resize(n);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) m.row_prefix_[a][b + 1] = m.row_prefix_[a][b] + P[a][b];
    m.fwd_cdf_[a] = cumulative(P[a]);
    std::vector<double> back(n);
    for (std::size_t b = 0; b < n; ++b) back[b] = m.pi_[b] * P[b][a] / m.pi_[a];
    m.bwd_cdf_[a] = cumulative(back);
  }
  return m;
}

double SymbolicMeasure::tail_after(Symbol n) const {
  const Symbol first = first_label();
  const Symbol idx = n - first + 1;  // index of label n+1
  if (idx <= 0) return suffix_[0];
  if (static_cast<std::size_t>(idx) >= w_.size()) {
    if (countable() && rule_tail_) return rule_tail_(n);
    return 0.0;
  }
  return suffix_[idx];
}

double SymbolicMeasure::weight(Symbol a) const {
  if (!shift_.contains(a)) throw SymbolicError("symbol outside alphabet");
  const std::size_t i = static_cast<std::size_t>(a - first_label());
  if (kind_ == Kind::markov) return pi_[i];
  if (i < w_.size()) return w_[i];
  return rule_weight_(a);
}

double SymbolicMeasure::transition(Symbol a, Symbol b) const {
  if (!shift_.contains(a) || !shift_.contains(b)) throw SymbolicError("symbol outside alphabet");
  if (kind_ == Kind::markov) return p_[a - first_label()][b - first_label()];
  return weight(b);
}

double SymbolicMeasure::cylinder(const Word& w) const {
  if (!shift_.admissible(w)) throw SymbolicError("inadmissible word");
  if (w.empty()) return 1.0;
  double v = weight(w[0]);
  for (std::size_t k = 1; k < w.size(); ++k) v *= transition(w[k - 1], w[k]);
  return v;
}

double SymbolicMeasure::log_cylinder(const Word& w) const {
  if (!shift_.admissible(w)) throw SymbolicError("inadmissible word");
  if (w.empty()) return 0.0;
  double v = std::log(weight(w[0]));
  for (std::size_t k = 1; k < w.size(); ++k) v += std::log(transition(w[k - 1], w[k]));
  return v;
}

double SymbolicMeasure::range_mass(std::optional<Symbol> prev, Symbol first,
                                   std::optional<Symbol> last) const {
  first = std::max(first, first_label());
  if (!countable()) {
    const Symbol top = first_label() + static_cast<Symbol>(shift_.alphabet_size()) - 1;
    last = last ? std::min(*last, top) : top;
  }
  if (last && *last < first) return 0.0;
  if (kind_ == Kind::bernoulli) {
    if (last && *last == first) return weight(first);
    double v = tail_after(first - 1) - (last ? tail_after(*last) : 0.0);
    return std::max(v, 0.0);
  }
  const std::size_t lo = static_cast<std::size_t>(first - first_label());
  const std::size_t hi = static_cast<std::size_t>(*last - first_label());
  if (!prev) {
    double s = 0.0;
    for (std::size_t b = lo; b <= hi; ++b) s += pi_[b];
    return s;
  }
  const auto& row = row_prefix_[*prev - first_label()];
  if (lo == hi) return p_[*prev - first_label()][lo];
  return row[hi + 1] - row[lo];
}

std::string SymbolicMeasure::describe() const {
  std::ostringstream os;
  if (kind_ == Kind::markov) {
    os << "markov(n=" << p_.size() << ")";
  } else if (countable()) {
    os << "bernoulli(countable, N=" << truncation_ << ", tail=" << tail_mass_ << ")";
  } else {
    os << "bernoulli(n=" << w_.size() << ")";
  }
  return os.str();
}

double cylinder_measure(const SymbolicMeasure& m, const Word& w) { return m.cylinder(w); }

// ---------------------------------------------------------------------------
// Streams

SymbolStream SymbolStream::sampled(std::shared_ptr<const SymbolicMeasure> m, std::uint64_t seed) {
  SymbolStream s;
  s.source_ = m->kind() == SymbolicMeasure::Kind::markov ? Source::markov : Source::bernoulli;
  s.measure_ = std::move(m);
  s.seed_ = seed;
  s.rng_ = CounterRng(mix64(seed ^ 0x5bd1e995ULL));
  return s;
}

SymbolStream SymbolStream::from_function(std::function<Symbol(std::int64_t)> f) {
  SymbolStream s;
  s.source_ = Source::function;
  s.fn_ = std::move(f);
  return s;
}

SymbolStream SymbolStream::periodic(Word pattern) {
  if (pattern.empty()) throw SymbolicError("empty periodic pattern");
  auto shared = std::make_shared<Word>(std::move(pattern));
  return from_function([shared](std::int64_t p) {
    const std::int64_t len = static_cast<std::int64_t>(shared->size());
    return (*shared)[static_cast<std::size_t>(((p % len) + len) % len)];
  });
}

Symbol SymbolStream::draw_cdf(const std::vector<double>& cdf, double u) const {
  auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  std::size_t i = static_cast<std::size_t>(it - cdf.begin());
  if (i >= cdf.size()) i = cdf.size() - 1;
  return measure_->first_label() + static_cast<Symbol>(i);
}

Symbol SymbolStream::at(std::int64_t j) { return absolute(offset_ + j); }

Symbol SymbolStream::absolute(std::int64_t p) {
  switch (source_) {
    case Source::function:
      return fn_(p);
    case Source::bernoulli:
      return draw_cdf(measure_->sampling_cdf(), rng_.uniform(static_cast<std::uint64_t>(p)));
    case Source::markov:
      break;
  }
  const Symbol first = measure_->first_label();
  if (fwd_.empty() && fwd_base_ == 0) fwd_.push_back(draw_cdf(measure_->sampling_cdf(), rng_.uniform(0)));
  if (p >= 0) {
    if (p < fwd_base_) throw std::out_of_range("stream position already discarded");
    while (fwd_base_ + static_cast<std::int64_t>(fwd_.size()) <= p) {
      const std::int64_t pos = fwd_base_ + static_cast<std::int64_t>(fwd_.size());
      const Symbol prev = fwd_.back();
      fwd_.push_back(draw_cdf(measure_->forward_cdf()[prev - first],
                              rng_.uniform(static_cast<std::uint64_t>(pos))));
    }
    const Symbol out = fwd_[static_cast<std::size_t>(p - fwd_base_)];
    const std::int64_t keep_from = offset_ - static_cast<std::int64_t>(history_);
    if (keep_from > fwd_base_ + 4096 && keep_from <= p) {
      if (fwd_base_ == 0) x0_ = fwd_.front();
      while (fwd_base_ < keep_from) {
        fwd_.pop_front();
        ++fwd_base_;
      }
    }
    return out;
  }
  const std::size_t need = static_cast<std::size_t>(-p);
  while (bwd_.size() < need) {
    const std::int64_t pos = -static_cast<std::int64_t>(bwd_.size()) - 1;
    const Symbol next_right = bwd_.empty() ? (fwd_base_ == 0 ? fwd_.front() : x0_) : bwd_.back();
    bwd_.push_back(draw_cdf(measure_->backward_cdf()[next_right - first],
                            rng_.uniform(static_cast<std::uint64_t>(pos))));
  }
  return bwd_[need - 1];
}

SymbolStream sample_stream(const SymbolicMeasure& m, std::uint64_t seed) {
  return SymbolStream::sampled(std::make_shared<const SymbolicMeasure>(m), seed);
}

// ---------------------------------------------------------------------------
// Mixing

std::vector<Word> admissible_words(const Subshift& s, int length) {
  std::vector<Word> out;
  if (length <= 0) {
    out.push_back({});
    return out;
  }
  std::vector<Symbol> alphabet = s.symbols();
  Word w;
  std::function<void()> rec = [&]() {
    if (static_cast<int>(w.size()) == length) {
      out.push_back(w);
      return;
    }
    for (Symbol a : alphabet) {
      if (!w.empty() && !s.allowed(w.back(), a)) continue;
      w.push_back(a);
      rec();
      w.pop_back();
    }
  };
  rec();
  return out;
}

MixingReport psi_mixing_report(const SymbolicMeasure& m, int max_depth, const std::vector<int>& gaps,
                               std::size_t pair_budget) {
  if (max_depth < 1) throw SymbolicError("max_depth must be at least 1");
  MixingReport rep;
  rep.gaps = gaps;
  rep.max_depth = max_depth;

  // Alphabet used for enumeration: finite alphabet, or the truncated labels.
  const Symbol first = m.first_label();
  const std::size_t n = m.countable() ? static_cast<std::size_t>(m.truncation() - first + 1)
                                      : m.subshift().alphabet_size();
  Subshift enum_shift = m.countable() ? Subshift::full(n, m.subshift().sidedness(), first)
                                      : m.subshift();

  // Count words per side and record which (last, first) symbol pairs occur.
  std::size_t words = 0;
  std::vector<char> ends(n, 0), starts(n, 0);
  for (int d = 1; d <= max_depth; ++d) {
    std::vector<Word> ws = admissible_words(enum_shift, d);
    words += ws.size();
    if (words * words > pair_budget) throw SymbolicError("enumeration budget exceeded");
    for (const Word& w : ws) {
      ends[w.back() - first] = 1;
      starts[w.front() - first] = 1;
    }
  }
  rep.words_per_side = words;
  rep.pairs_tested = words * words;

  // For a gap k the joint mass is mu[i] * P^{k+1}(a,b) * mu[j] / pi_b, so the
  // normalized deviation is (P^{k+1} - Pi)(a,b)/pi_b = D^{k+1}(a,b)/pi_b with D = P - Pi.
  std::vector<std::vector<double>> D(n, std::vector<double>(n, 0.0));
  if (m.kind() == SymbolicMeasure::Kind::markov) {
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b) D[a][b] = m.matrix()[a][b] - m.stationary()[b];
  }
  auto mul = [n](const std::vector<std::vector<double>>& X, const std::vector<std::vector<double>>& Y) {
    std::vector<std::vector<double>> Z(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < n; ++k) {
        if (X[i][k] == 0.0) continue;
        for (std::size_t j = 0; j < n; ++j) Z[i][j] += X[i][k] * Y[k][j];
      }
    return Z;
  };
  for (int k : gaps) {
    if (k < 0) throw SymbolicError("gaps must be non-negative");
    double worst = 0.0;
    if (m.kind() == SymbolicMeasure::Kind::markov) {
      std::vector<std::vector<double>> Dm = D;
      for (int s = 0; s < k; ++s) Dm = mul(Dm, D);
      for (std::size_t a = 0; a < n; ++a) {
        if (!ends[a]) continue;
        for (std::size_t b = 0; b < n; ++b) {
          if (!starts[b]) continue;
          worst = std::max(worst, std::fabs(Dm[a][b]) / m.stationary()[b]);
        }
      }
    }
    rep.psi.push_back(worst);
  }

  rep.exact_zero = std::all_of(rep.psi.begin(), rep.psi.end(), [](double v) { return v == 0.0; });
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < gaps.size(); ++i) {
    if (rep.psi[i] > 0.0) {
      xs.push_back(gaps[i]);
      ys.push_back(std::log(rep.psi[i]));
    }
  }
  rep.fit_points = xs.size();
  if (xs.size() >= 2) {
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      mx += xs[i];
      my += ys[i];
    }
    mx /= xs.size();
    my /= ys.size();
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      sxx += (xs[i] - mx) * (xs[i] - mx);
      sxy += (xs[i] - mx) * (ys[i] - my);
    }
    if (sxx > 0) {
      const double slope = sxy / sxx;
      rep.rate = -slope;
      rep.constant = std::exp(my - slope * mx);
    }
  }
  return rep;
}

}  // namespace coverlab
