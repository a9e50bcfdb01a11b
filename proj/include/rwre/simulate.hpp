#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "rwre/environment.hpp"
#include "rwre/model.hpp"

// Sampling layer. A walker at (t, x) reads the environment state, samples
// its displacement from that state's row by inverse CDF in canonical support
// order, and moves. Walker randomness comes from a counter stream keyed by
// (walker seed, step index); it never touches the environment stream, so
// environment and walk noise stay independent by construction. Ensemble
// results are a pure function of (model, env seed, master seed, x0, T, M):
// the worker count changes scheduling only, never output bits.

namespace rwre {

// Per-state inverse-CDF tables over the support, partial sums in canonical
// (lexicographic) order. Shared by every sampling path so a draw maps to the
// same displacement everywhere.
struct SamplerTables {
  explicit SamplerTables(const Kernel& kernel);

  std::size_t sample(std::size_t state, double draw) const {
    const auto& c = cdf[state];
    const std::size_t last = c.size() - 1;
    for (std::size_t i = 0; i < last; ++i)
      if (draw < c[i]) return i;
    return last;
  }

  std::vector<std::vector<double>> cdf;  // [state][support index]
};

// Uniform draw for one step of one walker.
inline double walker_draw(std::uint64_t walker_seed, std::uint64_t step) {
  return u01(absorb(absorb(walker_seed, kWalkerStream), step));
}

// One transition: returns the sampled displacement. Diagnostic form of the
// inner loop; run_walk / run_ensemble produce identical samples.
LatticeVector step(const Model& model, const QuenchedEnvironment& env, std::uint64_t t,
                   std::span<const std::int64_t> x, double draw);

struct WalkPath {
  LatticeVector x0;
  std::vector<std::uint32_t> steps;       // indices into the support, length T
  std::vector<LatticeVector> positions;   // length T+1, positions[0] == x0

  std::uint64_t horizon() const { return steps.size(); }
};

// Centered position Y_r = X_r - r b for a recorded path.
Eigen::VectorXd centered_position(const WalkPath& path, std::size_t r, const Eigen::VectorXd& b);

WalkPath run_walk(const Model& model, const QuenchedEnvironment& env, LatticeVector x0,
                  std::uint64_t T, std::uint64_t walker_seed);

enum class EnvironmentMode { kQuenched, kAnnealed };

struct EnsembleOptions {
  EnvironmentMode mode = EnvironmentMode::kQuenched;
  unsigned workers = 1;  // execution detail; results do not depend on it
};

struct Ensemble {
  std::size_t dimension = 0;
  std::uint64_t horizon = 0;           // T
  std::uint64_t env_seed = 0;
  std::uint64_t master_seed = 0;
  EnvironmentMode mode = EnvironmentMode::kQuenched;
  LatticeVector x0;

  // Row w holds walker w.
  Eigen::MatrixXd terminal_y;                                  // M x n, Y_T
  Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> terminal_x;  // M x n, X_T
  Eigen::MatrixXd qv;                                          // M x n^2, [Y]_T entries row-major
  Eigen::MatrixXd qv_sq;                                       // M x n^2, sums of squared increments
  std::vector<std::uint64_t> occupation;                       // pooled state counts at visited keys, r < T

  std::size_t walker_count() const { return static_cast<std::size_t>(terminal_y.rows()); }
};

// Walker w is seeded by absorb(master_seed, w). In annealed mode walker w
// sees its own environment with seed absorb(absorb(env.seed(), kAnnealedStream), w);
// in quenched mode all walkers share env.
Ensemble run_ensemble(const Model& model, const QuenchedEnvironment& env, const LatticeVector& x0,
                      std::uint64_t T, std::size_t M, std::uint64_t master_seed,
                      const EnsembleOptions& options = {});

// Terminal CLT samples Y_T / sqrt(T), one row per walker.
Eigen::MatrixXd clt_samples(const Ensemble& ensemble);

// Mean over walkers of [Y]_T / T.
Eigen::MatrixXd mean_quadratic_variation(const Ensemble& ensemble);

// samples.csv: header walker_id,Y_1..Y_n; 17 significant digits; rows in
// walker order. Byte-identical for identical inputs.
void write_samples_csv(const Ensemble& ensemble, std::ostream& out);

}  // namespace rwre
