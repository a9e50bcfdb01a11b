#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "rwre/hashing.hpp"
#include "rwre/model.hpp"

// A space-time field of environment states, i.i.d. over keys (t, x) with a
// fixed marginal law. Realized lazily: the state at a key is a pure function
// of (seed, t, x), so two walkers reading the same key always agree and no
// field storage is needed.

namespace rwre {

class QuenchedEnvironment {
 public:
  QuenchedEnvironment(std::uint64_t seed, EnvLaw law, std::size_t n_states,
                      std::size_t dimension);

  // State index at key (t, x). Pure; inverse-CDF over the alphabet in
  // canonical order, driven by the key hash.
  std::size_t state(std::uint64_t t, std::span<const std::int64_t> x) const {
    std::uint64_t h = stream_;
    h = absorb(h, t);
    for (const std::int64_t coord : x) h = absorb(h, zigzag(coord));
    const double u = u01(h);
    const std::size_t last = cdf_.size() - 1;
    for (std::size_t i = 0; i < last; ++i)
      if (u < cdf_[i]) return i;
    return last;  // final bucket absorbs the rounding remainder
  }

  std::uint64_t seed() const { return seed_; }
  std::size_t n_states() const { return cdf_.size(); }
  std::size_t dimension() const { return dimension_; }
  const EnvLaw& law() const { return law_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;  // absorb(seed, kEnvStream), cached
  EnvLaw law_;
  std::vector<double> cdf_;  // partial sums over the alphabet
  std::size_t dimension_;
};

// Counts states over a list of distinct keys. Duplicate keys throw
// InputError: a histogram over repeated keys would double-count the field.
std::vector<std::uint64_t> env_histogram(
    const QuenchedEnvironment& env,
    const std::vector<std::pair<std::uint64_t, LatticeVector>>& keys);

}  // namespace rwre
