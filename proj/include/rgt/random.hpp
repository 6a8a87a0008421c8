#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace rgt {

using Rng = std::mt19937_64;

// Independent generator for a (seed, stream...) tuple. Streams derived this way
// do not depend on how many draws other streams made, so work split across
// threads reproduces the serial result.
inline Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> stream = {}) {
  std::vector<std::uint32_t> words;
  words.reserve(2 + 2 * stream.size());
  auto push = [&](std::uint64_t v) {
    words.push_back(static_cast<std::uint32_t>(v & 0xffffffffu));
    words.push_back(static_cast<std::uint32_t>(v >> 32));
  };
  push(seed);
  for (std::uint64_t s : stream) push(s);
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

inline double uniform(Rng& rng, double lo = 0.0, double hi = 1.0) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double gaussian(Rng& rng, double sigma) {
  return std::normal_distribution<double>(0.0, sigma)(rng);
}

inline bool bernoulli(Rng& rng, double p) {
  if (p <= 0.0) return false;
  return uniform(rng) < p;
}

// Uniform integer in [0, n).
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

}  // namespace rgt
