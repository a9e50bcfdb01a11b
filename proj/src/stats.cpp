#include "rwre/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>

#include "rwre/errors.hpp"
#include "rwre/hashing.hpp"

namespace rwre {

Eigen::MatrixXd empirical_covariance(const Eigen::MatrixXd& samples) {
  const Eigen::Index M = samples.rows();
  if (M < 2) throw InputError("empirical_covariance: need at least two samples");
  const Eigen::RowVectorXd mean = samples.colwise().mean();
  const Eigen::MatrixXd centered = samples.rowwise() - mean;
  Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(M);
  return ((cov + cov.transpose()) / 2.0).eval();
}

StandardizedSample standardize(const Eigen::MatrixXd& samples, const Eigen::MatrixXd& target) {
  const Eigen::Index n = target.rows();
  if (target.cols() != n) throw InputError("standardize: target must be square");
  if (samples.cols() != n) throw InputError("standardize: sample dimension mismatch");
  const double scale = std::max(1.0, target.cwiseAbs().maxCoeff());
  if ((target - target.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw InputError("standardize: target is not symmetric");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(((target + target.transpose()) / 2.0).eval());
  if (es.info() != Eigen::Success) throw InputError("standardize: eigendecomposition failed");
  const Eigen::VectorXd& lambda = es.eigenvalues();
  if (lambda.minCoeff() < -1e-10)
    throw InputError("standardize: target has a negative eigenvalue");

  StandardizedSample out;
  out.eigenvalues = lambda;
  std::vector<Eigen::Index> kept;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (lambda[i] <= 1e-12)
      out.dropped.push_back(static_cast<std::size_t>(i));
    else
      kept.push_back(i);
  }

  const auto rank = static_cast<Eigen::Index>(kept.size());
  if (rank == n) {
    // Symmetric inverse square root: Q diag(1/sqrt(lambda)) Q^T. Keeps an
    // identity target an exact identity map.
    Eigen::MatrixXd w = es.eigenvectors() *
                        lambda.cwiseSqrt().cwiseInverse().asDiagonal() *
                        es.eigenvectors().transpose();
    out.vectors = samples * ((w + w.transpose()) / 2.0);
  } else {
    // Project onto the surviving eigendirections, each scaled to unit variance.
    Eigen::MatrixXd basis(n, rank);
    for (Eigen::Index k = 0; k < rank; ++k)
      basis.col(k) = es.eigenvectors().col(kept[static_cast<std::size_t>(k)]) /
                     std::sqrt(lambda[kept[static_cast<std::size_t>(k)]]);
    out.vectors = samples * basis;
  }
  return out;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

namespace {

// P(sup |bridge| > c) = 2 sum_{j>=1} (-1)^{j-1} exp(-2 j^2 c^2).
double ks_tail(double c) {
  double acc = 0.0;
  for (int j = 1; j <= 100; ++j) {
    const double term = 2.0 * std::exp(-2.0 * static_cast<double>(j) * j * c * c);
    acc += (j % 2 == 1) ? term : -term;
    if (term < 1e-17) break;
  }
  return acc;
}

}  // namespace

double ks_critical(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("ks_critical: alpha must lie in (0,1)");
  double lo = 1e-6, hi = 4.0;
  while (ks_tail(hi) > alpha) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = (lo + hi) / 2.0;
    if (ks_tail(mid) > alpha)
      lo = mid;
    else
      hi = mid;
  }
  return (lo + hi) / 2.0;
}

double ks_statistic_vs_normal(std::vector<double> values) {
  if (values.empty()) throw InputError("ks_statistic_vs_normal: empty sample");
  std::sort(values.begin(), values.end());
  const auto n = static_cast<double>(values.size());
  double d = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double f = normal_cdf(values[i]);
    d = std::max(d, (static_cast<double>(i) + 1.0) / n - f);
    d = std::max(d, f - static_cast<double>(i) / n);
  }
  return d;
}

namespace {

// Gaussian counter stream: pair m uses key words 2m, 2m+1.
double gaussian_at(std::uint64_t base, std::size_t index) {
  const std::uint64_t pair = index / 2;
  const double u1 = u01_open(absorb(base, 2 * pair));
  const double u2 = u01_open(absorb(base, 2 * pair + 1));
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  return (index % 2 == 0) ? r * std::cos(angle) : r * std::sin(angle);
}

}  // namespace

Eigen::MatrixXd standard_normal_samples(std::uint64_t seed, std::size_t count, std::size_t dim) {
  if (dim == 0) throw InputError("standard_normal_samples: dim must be positive");
  const std::uint64_t base = absorb(seed, kNormalStream);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(dim));
  for (std::size_t r = 0; r < count; ++r)
    for (std::size_t c = 0; c < dim; ++c)
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          gaussian_at(base, r * dim + c);
  return out;
}

TestReport ks_projection_test(const StandardizedSample& sample, std::size_t directions,
                              std::uint64_t seed, double alpha) {
  TestReport report;
  report.id = "ks-projection";
  report.seed = seed;
  report.sample_size = static_cast<std::size_t>(sample.vectors.rows());
  report.details["alpha"] = alpha;
  report.details["directions"] = static_cast<double>(directions);

  const Eigen::Index rank = sample.vectors.cols();
  if (rank == 0) {
    // Fully degenerate target: nothing to test, vacuously consistent.
    report.pass = true;
    report.details["rank"] = 0.0;
    return report;
  }
  if (report.sample_size < 100) throw InputError("ks_projection_test: need at least 100 samples");
  if (directions == 0) throw InputError("ks_projection_test: need at least one direction");

  const double critical = ks_critical(alpha / static_cast<double>(directions));
  report.threshold = critical / std::sqrt(static_cast<double>(report.sample_size));
  report.details["rank"] = static_cast<double>(rank);

  const std::uint64_t base = absorb(seed, kDirectionStream);
  std::size_t gaussian_index = 0;
  Eigen::VectorXd dir(rank);
  char key[64];
  for (std::size_t k = 0; k < directions; ++k) {
    double norm2 = 0.0;
    do {
      for (Eigen::Index i = 0; i < rank; ++i) {
        dir[i] = gaussian_at(base, gaussian_index++);
      }
      norm2 = dir.squaredNorm();
    } while (norm2 == 0.0);
    dir /= std::sqrt(norm2);

    Eigen::VectorXd projected = sample.vectors * dir;
    std::vector<double> values(projected.data(), projected.data() + projected.size());
    const double d = ks_statistic_vs_normal(std::move(values));

    std::snprintf(key, sizeof key, "D_%zu", k);
    report.details[key] = d;
    for (Eigen::Index i = 0; i < rank; ++i) {
      std::snprintf(key, sizeof key, "dir_%zu_%lld", k, static_cast<long long>(i));
      report.details[key] = dir[i];
    }
    report.statistic = std::max(report.statistic, d);
  }
  report.pass = report.statistic < report.threshold;
  return report;
}

TestReport qv_convergence(const Ensemble& ensemble, const Eigen::MatrixXd& target, double sigma) {
  if (ensemble.horizon < 100) throw InputError("qv_convergence: need horizon T >= 100");
  const auto n = static_cast<Eigen::Index>(ensemble.dimension);
  if (target.rows() != n || target.cols() != n)
    throw InputError("qv_convergence: target dimension mismatch");

  const auto M = static_cast<Eigen::Index>(ensemble.walker_count());
  const double count = static_cast<double>(M) * static_cast<double>(ensemble.horizon);

  TestReport report;
  report.id = "qv-convergence";
  report.sample_size = ensemble.walker_count();
  report.details["sigma"] = sigma;
  report.details["horizon"] = static_cast<double>(ensemble.horizon);
  report.threshold = 1.0;

  const Eigen::MatrixXd mean_qv = mean_quadratic_variation(ensemble);

  char key[48];
  double worst = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      double second = 0.0;
      for (Eigen::Index w = 0; w < M; ++w) second += ensemble.qv_sq(w, i * n + j);
      second /= count;
      const double mean_inc = mean_qv(i, j);
      const double var = std::max(0.0, second - mean_inc * mean_inc);
      const double band = sigma * std::sqrt(var / count);
      const double dev = std::abs(mean_inc - target(i, j));

      std::snprintf(key, sizeof key, "dev_%lld_%lld", static_cast<long long>(i),
                    static_cast<long long>(j));
      report.details[key] = dev;
      std::snprintf(key, sizeof key, "band_%lld_%lld", static_cast<long long>(i),
                    static_cast<long long>(j));
      report.details[key] = band;

      const double ratio =
          band > 0.0 ? dev / band : (dev == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
      worst = std::max(worst, ratio);
    }
  report.statistic = worst;
  report.pass = report.statistic <= report.threshold;
  return report;
}

TestReport occupation_lln(const Ensemble& ensemble, const EnvLaw& law, double sigma) {
  if (law.probs.size() != ensemble.occupation.size())
    throw InputError("occupation_lln: law does not match the occupation table");
  std::uint64_t total = 0;
  for (const auto c : ensemble.occupation) total += c;
  const double expected_total =
      static_cast<double>(ensemble.walker_count()) * static_cast<double>(ensemble.horizon);
  if (static_cast<double>(total) != expected_total)
    throw InputError("occupation_lln: occupation counts do not sum to M*T");
  if (expected_total < 1e4) throw InputError("occupation_lln: need pooled count M*T >= 1e4");

  TestReport report;
  report.id = "occupation-lln";
  report.sample_size = static_cast<std::size_t>(total);
  report.details["sigma"] = sigma;
  report.threshold = 1.0;

  char key[64];
  double worst = 0.0;
  for (std::size_t s = 0; s < law.probs.size(); ++s) {
    const double pi = law.probs[s];
    const double frac = static_cast<double>(ensemble.occupation[s]) / expected_total;
    const double band = sigma * std::sqrt(pi * (1.0 - pi) / expected_total);
    const double dev = std::abs(frac - pi);

    std::snprintf(key, sizeof key, "frac_%zu", s);
    report.details[key] = frac;
    std::snprintf(key, sizeof key, "band_%zu", s);
    report.details[key] = band;

    const double ratio =
        band > 0.0 ? dev / band : (dev == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
    worst = std::max(worst, ratio);
  }
  report.statistic = worst;
  report.pass = report.statistic <= report.threshold;
  return report;
}

double martingale_residual(const Model& model, const QuenchedEnvironment& env,
                           const WalkPath& path) {
  const std::size_t S = model.kernel.alphabet.size();
  const auto n = static_cast<Eigen::Index>(model.dimension());

  // The residual depends on the site only through its state.
  std::vector<double> residual_by_state(S);
  for (std::size_t s = 0; s < S; ++s) {
    const auto row = row_kernel(model.kernel, s);
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(n);
    for (std::size_t u = 0; u < row.size(); ++u)
      for (Eigen::Index i = 0; i < n; ++i)
        acc[i] += row[u] *
                  (static_cast<double>(model.kernel.support.displacements[u][i]) -
                   model.derived.b[i]);
    residual_by_state[s] = acc.lpNorm<Eigen::Infinity>();
  }

  double worst = 0.0;
  for (std::uint64_t r = 0; r < path.horizon(); ++r) {
    const std::size_t s = env.state(r, path.positions[r]);
    worst = std::max(worst, residual_by_state[s]);
  }
  return worst;
}

}  // namespace rwre
