#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <vector>

#include "rwre/environment.hpp"
#include "rwre/model.hpp"

// Exact small-horizon laws by dynamic programming: push the full
// distribution over sites through the site-dependent rows one epoch at a
// time. Feasible only for short horizons, which is the point; these laws are
// the ground truth the samplers are checked against.

namespace rwre {

// Exact distribution over sites at one epoch. Ordered map keys make
// iteration (and hence every derived float sum) canonical.
struct LatticeDistribution {
  std::map<LatticeVector, double> entries;
  double mass_deficit = 0.0;  // probability pruned below threshold so far

  double total_mass() const;
};

struct MomentMatrix {
  std::uint64_t t = 0;
  Eigen::MatrixXd matrix;
};

inline constexpr std::uint64_t kDefaultHorizonCap = 25;
inline constexpr double kPruneThreshold = 1e-300;

// Laws of X_0..X_T from x0 under one environment realization. Throws
// CapExceeded when T > cap.
std::vector<LatticeDistribution> quenched_distribution(const Model& model,
                                                       const QuenchedEnvironment& env,
                                                       const LatticeVector& x0, std::uint64_t T,
                                                       std::uint64_t cap = kDefaultHorizonCap);

// Laws of X_0..X_T from the origin under the state-averaged kernel.
std::vector<LatticeDistribution> annealed_distribution(const Model& model, std::uint64_t T,
                                                       std::uint64_t cap = kDefaultHorizonCap);

// Second moment of Y_t = X_t - t b under one exact law.
MomentMatrix distribution_moment(const Model& model, const LatticeDistribution& dist,
                                 std::uint64_t t);

// Moments for every level of a distribution sequence.
std::vector<MomentMatrix> quenched_moment(const Model& model,
                                          const std::vector<LatticeDistribution>& levels);

// Max entrywise gap between H_{t+1} - H_t and its one-step formula
// sum_x P(X_t = x) * V(state at (t, x)), V(s) the centered second moment of
// row s. Algebraically zero; measures float noise only.
double increment_check(const Model& model, const QuenchedEnvironment& env,
                       const std::vector<LatticeDistribution>& levels, std::uint64_t t);

// Max over t <= T of the entrywise gap between the annealed moment at t and
// t * eta2. Algebraically zero.
double annealed_moment_identity(const Model& model, std::uint64_t T,
                                std::uint64_t cap = kDefaultHorizonCap);

// Max entry of E[(Y_{t+1} - Y_t) Y_t^T] under one environment realization;
// algebraically zero because every row is centered at b.
double quenched_cross_term(const Model& model, const QuenchedEnvironment& env,
                           const std::vector<LatticeDistribution>& levels, std::uint64_t t);

// Same under the state-averaged kernel.
double annealed_cross_term(const Model& model, const std::vector<LatticeDistribution>& levels,
                           std::uint64_t t);

}  // namespace rwre
