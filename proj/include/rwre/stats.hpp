#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rwre/model.hpp"
#include "rwre/simulate.hpp"

// Statistical verdicts. Every test here is a deterministic function of its
// inputs (seeds included), reports its statistic next to its threshold, and
// never hides a margin: pass means statistic within threshold, nothing else.

namespace rwre {

struct TestReport {
  std::string id;
  double statistic = 0.0;
  double threshold = 0.0;
  bool pass = false;
  std::size_t sample_size = 0;
  std::uint64_t seed = 0;                 // randomness consumed by the test, 0 if none
  std::map<std::string, double> details;  // per-component values, deterministic order
};

// Covariance with denominator M (population form), mean subtracted.
// Requires at least two rows.
Eigen::MatrixXd empirical_covariance(const Eigen::MatrixXd& samples);

struct StandardizedSample {
  Eigen::MatrixXd vectors;             // M x rank
  Eigen::VectorXd eigenvalues;         // of the target covariance, ascending
  std::vector<std::size_t> dropped;    // eigendirection indices removed as degenerate
};

// Whitens samples against a target covariance: full-rank targets use the
// symmetric inverse square root (identity targets map samples to themselves);
// degenerate eigendirections (eigenvalue <= 1e-12) are dropped and reported.
// Asymmetric targets and eigenvalues below -1e-10 throw InputError.
StandardizedSample standardize(const Eigen::MatrixXd& samples, const Eigen::MatrixXd& target);

// Standard normal CDF.
double normal_cdf(double z);

// Asymptotic two-sided Kolmogorov critical value: the c with
// P(sup_t |B(t)| > c) = alpha for a Brownian bridge B.
double ks_critical(double alpha);

// One-sample Kolmogorov statistic against the standard normal CDF.
double ks_statistic_vs_normal(std::vector<double> values);

// Projects whitened samples onto `directions` uniformly random unit vectors
// (seeded) and applies a Bonferroni-corrected KS test per direction:
// pass iff every D < ks_critical(alpha / directions) / sqrt(M).
// Requires M >= 100. A rank-0 sample (fully degenerate target) passes
// trivially with a note in details.
TestReport ks_projection_test(const StandardizedSample& sample, std::size_t directions,
                              std::uint64_t seed, double alpha = 0.01);

// Seeded standard normal draws, one sample per row; Box-Muller over the
// counter stream. Deterministic in (seed, count, dim).
Eigen::MatrixXd standard_normal_samples(std::uint64_t seed, std::size_t count, std::size_t dim);

// Mean over walkers of [Y]_T / T against a target matrix, each entry within
// sigma estimated-standard-errors of the pooled per-step increments.
// statistic = max_ij |deviation_ij| / band_ij, threshold 1. Requires T >= 100.
TestReport qv_convergence(const Ensemble& ensemble, const Eigen::MatrixXd& target,
                          double sigma = 4.0);

// Pooled occupation fractions against the environment law, per state within
// sigma binomial standard deviations. statistic = max_s |dev_s| / band_s,
// threshold 1. Requires pooled count M*T >= 1e4.
TestReport occupation_lln(const Ensemble& ensemble, const EnvLaw& law, double sigma = 4.0);

// Max over visited sites of the infinity norm of sum_u (u - b) row(u) at the
// site's state: the per-step martingale residual along a recorded path.
double martingale_residual(const Model& model, const QuenchedEnvironment& env,
                           const WalkPath& path);

}  // namespace rwre
