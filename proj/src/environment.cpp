#include "rwre/environment.hpp"

#include <algorithm>
#include <cmath>

#include "rwre/errors.hpp"

namespace rwre {

QuenchedEnvironment::QuenchedEnvironment(std::uint64_t seed, EnvLaw law, std::size_t n_states,
                                         std::size_t dimension)
    : seed_(seed), stream_(absorb(seed, kEnvStream)), law_(std::move(law)), dimension_(dimension) {
  if (law_.probs.size() != n_states || n_states == 0)
    throw InputError("environment law does not match the alphabet size");
  if (dimension_ == 0) throw InputError("environment dimension must be positive");
  double mass = 0.0;
  for (const double p : law_.probs) {
    if (!(p >= 0.0 && p <= 1.0)) throw InputError("environment law entries must lie in [0,1]");
    mass += p;
  }
  if (std::abs(mass - 1.0) > 1e-12) throw InputError("environment law must sum to 1");
  cdf_.resize(n_states);
  double acc = 0.0;
  for (std::size_t i = 0; i < n_states; ++i) {
    acc += law_.probs[i];
    cdf_[i] = acc;
  }
}

std::vector<std::uint64_t> env_histogram(
    const QuenchedEnvironment& env,
    const std::vector<std::pair<std::uint64_t, LatticeVector>>& keys) {
  {
    auto sorted = keys;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw InputError("env_histogram keys must be distinct");
  }
  std::vector<std::uint64_t> counts(env.n_states(), 0);
  for (const auto& [t, x] : keys) {
    if (x.size() != env.dimension())
      throw InputError("env_histogram key dimension mismatch");
    ++counts[env.state(t, x)];
  }
  return counts;
}

}  // namespace rwre
