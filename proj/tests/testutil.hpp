#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "rwre/hashing.hpp"
#include "rwre/model.hpp"

// Fixtures and generators shared by the test binaries. The fixture values
// mirror the shipped model files; tests compare the two.

namespace rwre::testutil {

inline Kernel e1_kernel() {
  Kernel k;
  k.alphabet.states = {"A", "B"};
  k.support.dimension = 1;
  k.support.displacements = {{-1}, {0}, {1}};
  k.p0 = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  k.c = {{1.0 / 8, -1.0 / 4, 1.0 / 8}, {-1.0 / 8, 1.0 / 4, -1.0 / 8}};
  return k;
}

inline EnvLaw half_half() { return EnvLaw{{0.5, 0.5}}; }

inline Model e1() { return Model::make(e1_kernel(), half_half()); }

inline Model e3() {
  Kernel k;
  k.alphabet.states = {"A", "B"};
  k.support.dimension = 2;
  k.support.displacements = {{-1, 0}, {0, -1}, {0, 1}, {1, 0}};
  k.p0 = {0.25, 0.25, 0.25, 0.25};
  k.c = {{0, 0, 0, 0}, {0, 0, 0, 0}};
  return Model::make(std::move(k), half_half());
}

inline Kernel e4_kernel() {
  Kernel k = e1_kernel();
  k.p0 = {1.0 / 6, 1.0 / 3, 1.0 / 2};
  return k;
}

inline Model e4() { return Model::make(e4_kernel(), half_half()); }

// Fails only prob-bounds: row A overshoots 1 at u=1 by exactly 1/4.
inline Kernel invalid_prob_bounds_kernel() {
  Kernel k;
  k.alphabet.states = {"A", "B"};
  k.support.dimension = 1;
  k.support.displacements = {{0}, {1}, {2}};
  k.p0 = {1.0 / 8, 3.0 / 4, 1.0 / 8};
  k.c = {{-1.0 / 4, 1.0 / 2, -1.0 / 4}, {1.0 / 4, -1.0 / 2, 1.0 / 4}};
  return k;
}

// Fails only constant-drift: per-state drifts 1/4 and -1/4.
inline Kernel invalid_drift_kernel() {
  Kernel k;
  k.alphabet.states = {"A", "B"};
  k.support.dimension = 1;
  k.support.displacements = {{-1}, {1}};
  k.p0 = {0.5, 0.5};
  k.c = {{-1.0 / 8, 1.0 / 8}, {1.0 / 8, -1.0 / 8}};
  return k;
}

// Fails only pi-mean-zero: both states share the same nonzero perturbation.
inline Kernel invalid_pi_mean_kernel() {
  Kernel k = invalid_drift_kernel();
  k.c = {{-1.0 / 8, 1.0 / 8}, {-1.0 / 8, 1.0 / 8}};
  return k;
}

// Deterministic uniform helper for test-side draws.
class TestRng {
 public:
  explicit TestRng(std::uint64_t seed) : state_(absorb(seed, 0x746573742d726e67ULL)) {}

  double uniform() {
    state_ = absorb(state_, counter_++);
    return u01_open(state_);
  }

  std::uint64_t integer(std::uint64_t bound) {
    state_ = absorb(state_, counter_++);
    return state_ % bound;
  }

 private:
  std::uint64_t state_;
  std::uint64_t counter_ = 0;
};

// Random admissible model: random support and p0, a random perturbation
// projected onto the admissibility constraints and scaled into the
// probability bounds. Exercises dimensions 1 and 2 and alphabets up to 3.
inline Model random_valid_model(std::uint64_t seed) {
  TestRng rng(seed);
  const std::size_t n = 1 + rng.integer(2);
  const std::size_t S = 2 + rng.integer(2);

  // Support: a box of side 3 around the origin, subsampled.
  std::vector<LatticeVector> points;
  if (n == 1) {
    for (std::int64_t a = -2; a <= 2; ++a) points.push_back({a});
  } else {
    for (std::int64_t a = -1; a <= 1; ++a)
      for (std::int64_t b = -1; b <= 1; ++b) points.push_back({a, b});
  }
  std::vector<LatticeVector> support;
  for (const auto& p : points)
    if (rng.uniform() < 0.7) support.push_back(p);
  while (support.size() < n + 2) support = points;  // ensure room for the projection

  Kernel k;
  for (std::size_t s = 0; s < S; ++s) k.alphabet.states.push_back(std::string(1, char('A' + s)));
  k.support.dimension = n;
  k.support.displacements = support;
  const std::size_t U = support.size();

  k.p0.resize(U);
  double mass = 0.0;
  for (auto& p : k.p0) {
    p = 0.05 + rng.uniform();
    mass += p;
  }
  for (auto& p : k.p0) p /= mass;

  EnvLaw law;
  law.probs.resize(S);
  mass = 0.0;
  for (auto& p : law.probs) {
    p = 0.1 + rng.uniform();
    mass += p;
  }
  for (auto& p : law.probs) p /= mass;

  // Raw rows, then the three linear constraints, then scaling into bounds.
  std::vector<std::vector<double>> c(S, std::vector<double>(U));
  for (auto& row : c)
    for (auto& v : row) v = rng.uniform() - 0.5;

  // sum_s pi(s) c(u,s) = 0.
  for (std::size_t u = 0; u < U; ++u) {
    double avg = 0.0;
    for (std::size_t s = 0; s < S; ++s) avg += law.probs[s] * c[s][u];
    for (std::size_t s = 0; s < S; ++s) c[s][u] -= avg;
  }

  // Per state, project onto {sum_u v = 0} and {sum_u u_i v = 0 for all i}.
  // The same projection applied to every state preserves the pi-average.
  Eigen::MatrixXd constraints(1 + n, U);
  for (std::size_t u = 0; u < U; ++u) {
    constraints(0, static_cast<Eigen::Index>(u)) = 1.0;
    for (std::size_t i = 0; i < n; ++i)
      constraints(1 + static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(u)) =
          static_cast<double>(support[u][i]);
  }
  const Eigen::MatrixXd gram = constraints * constraints.transpose();
  const Eigen::MatrixXd pinv = gram.ldlt().solve(constraints).transpose();
  for (std::size_t s = 0; s < S; ++s) {
    Eigen::VectorXd row(U);
    for (std::size_t u = 0; u < U; ++u) row[static_cast<Eigen::Index>(u)] = c[s][u];
    row -= pinv * (constraints * row);
    for (std::size_t u = 0; u < U; ++u) c[s][u] = row[static_cast<Eigen::Index>(u)];
  }

  // Scale so every p0 + c stays inside [0.01, 0.99].
  double limit = 1.0;
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t u = 0; u < U; ++u) {
      const double v = c[s][u];
      if (v < 0.0) limit = std::min(limit, (k.p0[u] - 0.01) / -v);
      if (v > 0.0) limit = std::min(limit, (0.99 - k.p0[u]) / v);
    }
  const double scale = 0.9 * std::max(0.0, limit);
  for (auto& row : c)
    for (auto& v : row) v *= scale;
  k.c = std::move(c);

  return Model::make(std::move(k), std::move(law));
}

// Brute-force step covariance: direct double loop over the averaged kernel.
inline Eigen::MatrixXd brute_force_eta2(const Model& m) {
  const auto n = static_cast<Eigen::Index>(m.dimension());
  const auto& support = m.kernel.support.displacements;
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      for (std::size_t u = 0; u < support.size(); ++u)
        out(i, j) += m.derived.pbar[u] *
                     (static_cast<double>(support[u][i]) - m.derived.b[i]) *
                     (static_cast<double>(support[u][j]) - m.derived.b[j]);
  return out;
}

}  // namespace rwre::testutil
