#pragma once

#include <cstdint>
#include <limits>

namespace coverlab {

// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t z);

// Counter-based generator: the value at a counter depends only on (key, counter),
// so any position of a stream can be drawn without generating its predecessors.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key = 0) : key_(key) {}

  std::uint64_t key() const { return key_; }
  std::uint64_t bits(std::uint64_t counter) const;
  // Uniform on [0,1) with 53 random bits.
  double uniform(std::uint64_t counter) const;
  // Independent child generator for a named purpose.
  CounterRng derive(std::uint64_t salt) const;

 private:
  std::uint64_t key_;
};

// Sequential engine over a CounterRng; satisfies UniformRandomBitGenerator.
class CounterEngine {
 public:
  using result_type = std::uint64_t;
  explicit CounterEngine(CounterRng rng, std::uint64_t start = 0) : rng_(rng), counter_(start) {}
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()() { return rng_.bits(counter_++); }
  double uniform() { return rng_.uniform(counter_++); }

 private:
  CounterRng rng_;
  std::uint64_t counter_;
};

// Key for trial `trial_index` of an experiment seeded with `master_seed`.
std::uint64_t trial_key(std::uint64_t master_seed, std::uint64_t trial_index);

}  // namespace coverlab
