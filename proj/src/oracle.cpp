#include "rwre/oracle.hpp"

#include <cmath>
#include <string>

#include "rwre/errors.hpp"

namespace rwre {
namespace {

// Per-state row probabilities, cached once per propagation.
std::vector<std::vector<double>> state_rows(const Kernel& kernel) {
  std::vector<std::vector<double>> rows(kernel.alphabet.size());
  for (std::size_t s = 0; s < rows.size(); ++s) rows[s] = row_kernel(kernel, s);
  return rows;
}

// One push-forward epoch. row_at(x) selects the row used at site x.
template <typename RowAt>
LatticeDistribution propagate(const Model& model, const LatticeDistribution& level,
                              RowAt&& row_at) {
  const auto& support = model.kernel.support.displacements;
  const std::size_t n = model.dimension();
  LatticeDistribution next;
  next.mass_deficit = level.mass_deficit;
  LatticeVector target(n);
  for (const auto& [x, p] : level.entries) {
    if (p < kPruneThreshold) {
      next.mass_deficit += p;
      continue;
    }
    const std::vector<double>& row = row_at(x);
    for (std::size_t u = 0; u < support.size(); ++u) {
      if (row[u] == 0.0) continue;
      for (std::size_t i = 0; i < n; ++i) target[i] = x[i] + support[u][i];
      next.entries[target] += p * row[u];
    }
  }
  return next;
}

std::vector<LatticeDistribution> propagate_levels(const Model& model, const LatticeVector& x0,
                                                  std::uint64_t T, std::uint64_t cap,
                                                  const QuenchedEnvironment* env) {
  if (T > cap)
    throw CapExceeded("exact propagation horizon " + std::to_string(T) +
                      " exceeds cap " + std::to_string(cap));
  if (x0.size() != model.dimension()) throw InputError("propagation: x0 dimension mismatch");

  const auto rows = state_rows(model.kernel);
  std::vector<LatticeDistribution> levels(T + 1);
  levels[0].entries[x0] = 1.0;

  for (std::uint64_t t = 0; t < T; ++t) {
    if (env) {
      levels[t + 1] = propagate(model, levels[t], [&](const LatticeVector& x) -> const std::vector<double>& {
        return rows[env->state(t, x)];
      });
    } else {
      levels[t + 1] = propagate(model, levels[t], [&](const LatticeVector&) -> const std::vector<double>& {
        return model.derived.pbar;
      });
    }
  }
  return levels;
}

}  // namespace

double LatticeDistribution::total_mass() const {
  double acc = 0.0;
  for (const auto& [x, p] : entries) acc += p;
  return acc;
}

std::vector<LatticeDistribution> quenched_distribution(const Model& model,
                                                       const QuenchedEnvironment& env,
                                                       const LatticeVector& x0, std::uint64_t T,
                                                       std::uint64_t cap) {
  if (env.dimension() != model.dimension())
    throw InputError("quenched_distribution: env dimension mismatch");
  return propagate_levels(model, x0, T, cap, &env);
}

std::vector<LatticeDistribution> annealed_distribution(const Model& model, std::uint64_t T,
                                                       std::uint64_t cap) {
  const LatticeVector origin(model.dimension(), 0);
  return propagate_levels(model, origin, T, cap, nullptr);
}

MomentMatrix distribution_moment(const Model& model, const LatticeDistribution& dist,
                                 std::uint64_t t) {
  const auto n = static_cast<Eigen::Index>(model.dimension());
  const Eigen::VectorXd& b = model.derived.b;
  MomentMatrix m;
  m.t = t;
  m.matrix = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd y(n);
  for (const auto& [x, p] : dist.entries) {
    for (Eigen::Index i = 0; i < n; ++i)
      y[i] = static_cast<double>(x[i]) - static_cast<double>(t) * b[i];
    m.matrix.noalias() += p * y * y.transpose();
  }
  m.matrix = ((m.matrix + m.matrix.transpose()) / 2.0).eval();
  return m;
}

std::vector<MomentMatrix> quenched_moment(const Model& model,
                                          const std::vector<LatticeDistribution>& levels) {
  std::vector<MomentMatrix> out;
  out.reserve(levels.size());
  for (std::size_t t = 0; t < levels.size(); ++t)
    out.push_back(distribution_moment(model, levels[t], t));
  return out;
}

namespace {

// Centered second moment of one row: V(s) = sum_u (u - b)(u - b)^T row_s(u).
Eigen::MatrixXd row_second_moment(const Model& model, const std::vector<double>& row) {
  const auto n = static_cast<Eigen::Index>(model.dimension());
  const auto& support = model.kernel.support.displacements;
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd centered(n);
  for (std::size_t u = 0; u < support.size(); ++u) {
    for (Eigen::Index i = 0; i < n; ++i)
      centered[i] = static_cast<double>(support[u][i]) - model.derived.b[i];
    v.noalias() += row[u] * centered * centered.transpose();
  }
  return v;
}

// Centered first moment of one row: m(s) = sum_u (u - b) row_s(u).
Eigen::VectorXd row_first_moment(const Model& model, const std::vector<double>& row) {
  const auto n = static_cast<Eigen::Index>(model.dimension());
  const auto& support = model.kernel.support.displacements;
  Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
  for (std::size_t u = 0; u < support.size(); ++u)
    for (Eigen::Index i = 0; i < n; ++i)
      v[i] += row[u] * (static_cast<double>(support[u][i]) - model.derived.b[i]);
  return v;
}

void require_level(const std::vector<LatticeDistribution>& levels, std::uint64_t t,
                   const char* what) {
  if (t + 1 >= levels.size())
    throw InputError(std::string(what) + ": level " + std::to_string(t + 1) +
                     " not present in the distribution sequence");
}

}  // namespace

double increment_check(const Model& model, const QuenchedEnvironment& env,
                       const std::vector<LatticeDistribution>& levels, std::uint64_t t) {
  require_level(levels, t, "increment_check");
  const auto rows = state_rows(model.kernel);
  std::vector<Eigen::MatrixXd> v_by_state;
  v_by_state.reserve(rows.size());
  for (const auto& row : rows) v_by_state.push_back(row_second_moment(model, row));

  const Eigen::MatrixXd direct = distribution_moment(model, levels[t + 1], t + 1).matrix -
                                 distribution_moment(model, levels[t], t).matrix;

  const auto n = static_cast<Eigen::Index>(model.dimension());
  Eigen::MatrixXd one_step = Eigen::MatrixXd::Zero(n, n);
  for (const auto& [x, p] : levels[t].entries)
    one_step.noalias() += p * v_by_state[env.state(t, x)];

  return (direct - one_step).cwiseAbs().maxCoeff();
}

double annealed_moment_identity(const Model& model, std::uint64_t T, std::uint64_t cap) {
  const auto levels = annealed_distribution(model, T, cap);
  double worst = 0.0;
  for (std::uint64_t t = 0; t <= T; ++t) {
    const Eigen::MatrixXd expected = static_cast<double>(t) * model.derived.eta2;
    const double gap = (distribution_moment(model, levels[t], t).matrix - expected)
                           .cwiseAbs()
                           .maxCoeff();
    worst = std::max(worst, gap);
  }
  return worst;
}

namespace {

double cross_term_impl(const Model& model, const std::vector<LatticeDistribution>& levels,
                       std::uint64_t t, const QuenchedEnvironment* env) {
  const auto n = static_cast<Eigen::Index>(model.dimension());
  const auto rows = state_rows(model.kernel);
  std::vector<Eigen::VectorXd> m_by_state;
  m_by_state.reserve(rows.size());
  for (const auto& row : rows) m_by_state.push_back(row_first_moment(model, row));
  const Eigen::VectorXd m_avg = row_first_moment(model, model.derived.pbar);

  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd y(n);
  for (const auto& [x, p] : levels[t].entries) {
    for (Eigen::Index i = 0; i < n; ++i)
      y[i] = static_cast<double>(x[i]) - static_cast<double>(t) * model.derived.b[i];
    const Eigen::VectorXd& m = env ? m_by_state[env->state(t, x)] : m_avg;
    acc.noalias() += p * m * y.transpose();
  }
  return acc.cwiseAbs().maxCoeff();
}

}  // namespace

double quenched_cross_term(const Model& model, const QuenchedEnvironment& env,
                           const std::vector<LatticeDistribution>& levels, std::uint64_t t) {
  if (t >= levels.size()) throw InputError("quenched_cross_term: level out of range");
  return cross_term_impl(model, levels, t, &env);
}

double annealed_cross_term(const Model& model, const std::vector<LatticeDistribution>& levels,
                           std::uint64_t t) {
  if (t >= levels.size()) throw InputError("annealed_cross_term: level out of range");
  return cross_term_impl(model, levels, t, nullptr);
}

}  // namespace rwre
