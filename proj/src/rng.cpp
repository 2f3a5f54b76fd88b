#include "coverlab/rng.hpp"

namespace coverlab {

namespace {
constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;
}

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t CounterRng::bits(std::uint64_t counter) const {
  return mix64(key_ + (counter + 1) * kGamma);
}

double CounterRng::uniform(std::uint64_t counter) const {
  return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
}

CounterRng CounterRng::derive(std::uint64_t salt) const {
  return CounterRng(mix64(key_ ^ mix64(salt + 0x632be59bd9b4e019ULL)));
}

std::uint64_t trial_key(std::uint64_t master_seed, std::uint64_t trial_index) {
  return mix64(mix64(master_seed) + mix64(trial_index ^ 0xd1b54a32d192ed03ULL));
}

}  // namespace coverlab
