#include "rwre/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <thread>

#include "rwre/errors.hpp"

namespace rwre {

SamplerTables::SamplerTables(const Kernel& kernel) {
  const std::size_t S = kernel.alphabet.size();
  cdf.resize(S);
  for (std::size_t s = 0; s < S; ++s) {
    const auto row = row_kernel(kernel, s);
    cdf[s].resize(row.size());
    double acc = 0.0;
    for (std::size_t u = 0; u < row.size(); ++u) {
      acc += row[u];
      cdf[s][u] = acc;
    }
  }
}

LatticeVector step(const Model& model, const QuenchedEnvironment& env, std::uint64_t t,
                   std::span<const std::int64_t> x, double draw) {
  if (x.size() != model.dimension()) throw InputError("step: position dimension mismatch");
  if (!(draw >= 0.0 && draw < 1.0)) throw InputError("step: draw must lie in [0,1)");
  const SamplerTables tables(model.kernel);
  const std::size_t s = env.state(t, x);
  return model.kernel.support.displacements[tables.sample(s, draw)];
}

Eigen::VectorXd centered_position(const WalkPath& path, std::size_t r, const Eigen::VectorXd& b) {
  if (r >= path.positions.size()) throw InputError("centered_position: index out of range");
  const auto n = static_cast<Eigen::Index>(path.x0.size());
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i)
    y[i] = static_cast<double>(path.positions[r][i]) - static_cast<double>(r) * b[i];
  return y;
}

namespace {

// Accumulators for one walker; reused across walkers of a chunk.
struct WalkerScratch {
  LatticeVector x;
  std::vector<double> dy;       // n
  std::vector<double> qv;       // n^2
  std::vector<double> qv_sq;    // n^2
  std::vector<std::uint64_t> occupation;

  WalkerScratch(std::size_t n, std::size_t n_states)
      : x(n), dy(n), qv(n * n), qv_sq(n * n), occupation(n_states) {}
};

void simulate_walker(const Model& model, const SamplerTables& tables,
                     const QuenchedEnvironment& env, const LatticeVector& x0, std::uint64_t T,
                     std::uint64_t walker_seed, WalkerScratch& w, WalkPath* record) {
  const std::size_t n = model.dimension();
  const auto& support = model.kernel.support.displacements;
  const Eigen::VectorXd& b = model.derived.b;

  w.x = x0;
  std::fill(w.qv.begin(), w.qv.end(), 0.0);
  std::fill(w.qv_sq.begin(), w.qv_sq.end(), 0.0);
  std::fill(w.occupation.begin(), w.occupation.end(), 0);
  if (record) {
    record->x0 = x0;
    record->steps.clear();
    record->steps.reserve(T);
    record->positions.clear();
    record->positions.reserve(T + 1);
    record->positions.push_back(x0);
  }

  const std::uint64_t stream = absorb(walker_seed, kWalkerStream);
  for (std::uint64_t r = 0; r < T; ++r) {
    const std::size_t s = env.state(r, w.x);
    ++w.occupation[s];
    const double draw = u01(absorb(stream, r));
    const std::size_t idx = tables.sample(s, draw);
    const LatticeVector& u = support[idx];
    for (std::size_t i = 0; i < n; ++i) {
      w.dy[i] = static_cast<double>(u[i]) - b[static_cast<Eigen::Index>(i)];
      w.x[i] += u[i];
    }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const double inc = w.dy[i] * w.dy[j];
        w.qv[i * n + j] += inc;
        w.qv_sq[i * n + j] += inc * inc;
      }
    if (record) {
      record->steps.push_back(static_cast<std::uint32_t>(idx));
      record->positions.push_back(w.x);
    }
  }
}

}  // namespace

WalkPath run_walk(const Model& model, const QuenchedEnvironment& env, LatticeVector x0,
                  std::uint64_t T, std::uint64_t walker_seed) {
  if (x0.size() != model.dimension()) throw InputError("run_walk: x0 dimension mismatch");
  if (env.dimension() != model.dimension()) throw InputError("run_walk: env dimension mismatch");
  const SamplerTables tables(model.kernel);
  WalkerScratch scratch(model.dimension(), model.kernel.alphabet.size());
  WalkPath path;
  simulate_walker(model, tables, env, x0, T, walker_seed, scratch, &path);
  return path;
}

Ensemble run_ensemble(const Model& model, const QuenchedEnvironment& env, const LatticeVector& x0,
                      std::uint64_t T, std::size_t M, std::uint64_t master_seed,
                      const EnsembleOptions& options) {
  if (M == 0) throw InputError("run_ensemble: M must be positive");
  if (x0.size() != model.dimension()) throw InputError("run_ensemble: x0 dimension mismatch");
  if (env.dimension() != model.dimension())
    throw InputError("run_ensemble: env dimension mismatch");

  const std::size_t n = model.dimension();
  const std::size_t S = model.kernel.alphabet.size();
  const SamplerTables tables(model.kernel);

  Ensemble ens;
  ens.dimension = n;
  ens.horizon = T;
  ens.env_seed = env.seed();
  ens.master_seed = master_seed;
  ens.mode = options.mode;
  ens.x0 = x0;
  ens.terminal_y.resize(static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(n));
  ens.terminal_x.resize(static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(n));
  ens.qv.resize(static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(n * n));
  ens.qv_sq.resize(static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(n * n));
  ens.occupation.assign(S, 0);

  const unsigned workers = std::max(1u, options.workers);
  const std::size_t chunk = (M + workers - 1) / workers;
  std::vector<std::vector<std::uint64_t>> occ_partials(workers,
                                                       std::vector<std::uint64_t>(S, 0));

  auto run_chunk = [&](unsigned worker_id, std::size_t begin, std::size_t end) {
    WalkerScratch scratch(n, S);
    auto& occ_total = occ_partials[worker_id];
    const double tb = static_cast<double>(T);
    for (std::size_t w = begin; w < end; ++w) {
      const std::uint64_t walker_seed = absorb(master_seed, w);
      if (options.mode == EnvironmentMode::kAnnealed) {
        const std::uint64_t env_seed_w = absorb(absorb(env.seed(), kAnnealedStream), w);
        const QuenchedEnvironment env_w(env_seed_w, env.law(), S, n);
        simulate_walker(model, tables, env_w, x0, T, walker_seed, scratch, nullptr);
      } else {
        simulate_walker(model, tables, env, x0, T, walker_seed, scratch, nullptr);
      }
      const auto row = static_cast<Eigen::Index>(w);
      for (std::size_t i = 0; i < n; ++i) {
        ens.terminal_x(row, static_cast<Eigen::Index>(i)) = scratch.x[i];
        ens.terminal_y(row, static_cast<Eigen::Index>(i)) =
            static_cast<double>(scratch.x[i]) -
            tb * model.derived.b[static_cast<Eigen::Index>(i)];
      }
      for (std::size_t e = 0; e < n * n; ++e) {
        ens.qv(row, static_cast<Eigen::Index>(e)) = scratch.qv[e];
        ens.qv_sq(row, static_cast<Eigen::Index>(e)) = scratch.qv_sq[e];
      }
      for (std::size_t s = 0; s < S; ++s) occ_total[s] += scratch.occupation[s];
    }
  };

  if (workers == 1 || M <= 1) {
    run_chunk(0, 0, M);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned t = 0; t < workers; ++t) {
      const std::size_t begin = std::min<std::size_t>(static_cast<std::size_t>(t) * chunk, M);
      const std::size_t end = std::min<std::size_t>(begin + chunk, M);
      pool.emplace_back(run_chunk, t, begin, end);
    }
    for (auto& th : pool) th.join();
  }

  // Integer sums are exact, so partial order cannot matter.
  for (const auto& part : occ_partials)
    for (std::size_t s = 0; s < S; ++s) ens.occupation[s] += part[s];

  return ens;
}

Eigen::MatrixXd clt_samples(const Ensemble& ensemble) {
  if (ensemble.horizon == 0) throw InputError("clt_samples: horizon must be positive");
  return ensemble.terminal_y / std::sqrt(static_cast<double>(ensemble.horizon));
}

Eigen::MatrixXd mean_quadratic_variation(const Ensemble& ensemble) {
  const auto n = static_cast<Eigen::Index>(ensemble.dimension);
  const auto M = static_cast<Eigen::Index>(ensemble.walker_count());
  if (ensemble.horizon == 0)
    throw InputError("mean_quadratic_variation: horizon must be positive");
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
  // Walker-ordered accumulation keeps the float sum independent of workers.
  for (Eigen::Index w = 0; w < M; ++w)
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) out(i, j) += ensemble.qv(w, i * n + j);
  out /= static_cast<double>(M) * static_cast<double>(ensemble.horizon);
  return out;
}

void write_samples_csv(const Ensemble& ensemble, std::ostream& out) {
  const auto n = static_cast<Eigen::Index>(ensemble.dimension);
  out << "walker_id";
  for (Eigen::Index i = 0; i < n; ++i) out << ",Y_" << (i + 1);
  out << '\n';
  char buf[64];
  for (Eigen::Index w = 0; w < ensemble.terminal_y.rows(); ++w) {
    out << w;
    for (Eigen::Index i = 0; i < n; ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", ensemble.terminal_y(w, i));
      out << ',' << buf;
    }
    out << '\n';
  }
}

}  // namespace rwre
