// Command line front end: validate a model file, simulate an ensemble,
// run the verification pipeline, or emit exact laws. Exit codes: 0 pass,
// 1 malformed input, 2 failed check or refused request, 3 infrastructure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "rwre/errors.hpp"
#include "rwre/model.hpp"
#include "rwre/oracle.hpp"
#include "rwre/simulate.hpp"
#include "rwre/stats.hpp"
#include "rwre/verify.hpp"

namespace {

constexpr int kExitPass = 0;
constexpr int kExitInput = 1;
constexpr int kExitCheckFailed = 2;
constexpr int kExitInfrastructure = 3;

struct CliOptions {
  std::string config_file;
  std::string model_file;
  std::uint64_t env_seed = 0;
  std::uint64_t master_seed = 0;
  std::uint64_t horizon = 0;
  std::uint64_t ensemble_size = 0;
  unsigned workers = 0;
  std::string mode;
  std::string out_dir;
  std::string tests_csv;
  std::vector<std::string> tolerance_overrides;
  std::uint64_t cap = 0;
  std::uint64_t ks_directions = 0;
};

// Attach the shared flag set to a subcommand; presence is detected through
// CLI11 counts so explicit flags override config-file values.
void attach_common(CLI::App* cmd, CliOptions& opt) {
  cmd->add_option("--config", opt.config_file, "JSON run configuration");
  cmd->add_option("--model", opt.model_file, "model file (JSON)");
  cmd->add_option("--env-seed", opt.env_seed, "environment seed");
  cmd->add_option("--seed", opt.master_seed, "master seed for walker randomness");
  cmd->add_option("-T,--horizon", opt.horizon, "number of steps T");
  cmd->add_option("-M,--walkers", opt.ensemble_size, "ensemble size M");
  cmd->add_option("--workers", opt.workers, "worker threads (never changes results)");
  cmd->add_option("--mode", opt.mode, "environment mode: quenched or annealed");
  cmd->add_option("--out", opt.out_dir, "output directory");
  cmd->add_option("--tests", opt.tests_csv, "comma-separated stage selection");
  cmd->add_option("--tolerance", opt.tolerance_overrides, "tolerance override KEY=VALUE");
  cmd->add_option("--cap", opt.cap, "exact-propagation horizon cap");
  cmd->add_option("--ks-directions", opt.ks_directions, "projection count for the KS stage");
}

rwre::RunConfig build_config(const CLI::App* cmd, const CliOptions& opt) {
  rwre::RunConfig cfg;
  if (cmd->count("--config")) cfg = rwre::load_config(opt.config_file);
  if (cmd->count("--model")) cfg.model_file = opt.model_file;
  if (cmd->count("--env-seed")) cfg.env_seed = opt.env_seed;
  if (cmd->count("--seed")) cfg.master_seed = opt.master_seed;
  if (cmd->count("--horizon")) cfg.horizon = opt.horizon;
  if (cmd->count("--walkers")) {
    if (opt.ensemble_size == 0) throw rwre::InputError("M must be positive");
    cfg.ensemble_size = static_cast<std::size_t>(opt.ensemble_size);
  }
  if (cmd->count("--workers")) {
    if (opt.workers == 0) throw rwre::InputError("workers must be positive");
    cfg.workers = opt.workers;
  }
  if (cmd->count("--mode")) {
    if (opt.mode == "quenched")
      cfg.mode = rwre::EnvironmentMode::kQuenched;
    else if (opt.mode == "annealed")
      cfg.mode = rwre::EnvironmentMode::kAnnealed;
    else
      throw rwre::InputError("mode must be 'quenched' or 'annealed'");
  }
  if (cmd->count("--out")) cfg.out_dir = opt.out_dir;
  if (cmd->count("--tests")) {
    cfg.tests.clear();
    std::string rest = opt.tests_csv;
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      cfg.tests.push_back(rest.substr(0, comma));
      rest = comma == std::string::npos ? std::string{} : rest.substr(comma + 1);
    }
  }
  for (const auto& spec : opt.tolerance_overrides) rwre::apply_tolerance_override(cfg, spec);
  if (cmd->count("--cap")) cfg.cap = opt.cap;
  if (cmd->count("--ks-directions")) {
    if (opt.ks_directions == 0) throw rwre::InputError("ks_directions must be positive");
    cfg.ks_directions = static_cast<std::size_t>(opt.ks_directions);
  }
  if (cfg.model_file.empty()) throw rwre::InputError("no model file given (--model or --config)");
  return cfg;
}

std::ofstream open_output(const std::filesystem::path& dir, const std::string& name) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  const auto path = dir / name;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  return out;
}

int cmd_validate(const CliOptions& opt) {
  auto [kernel, law] = rwre::load_kernel(opt.model_file);
  const auto report = rwre::validate_kernel(kernel, law);
  for (const auto& check : report.checks) {
    std::printf("%-16s %s", check.id.c_str(), check.pass ? "pass" : "FAIL");
    if (!check.pass) {
      std::printf("  violation %.6g", check.violation);
      if (check.u_index >= 0) {
        const auto& u = kernel.support.displacements[static_cast<std::size_t>(check.u_index)];
        std::printf("  u=(");
        for (std::size_t i = 0; i < u.size(); ++i)
          std::printf("%s%lld", i ? "," : "", static_cast<long long>(u[i]));
        std::printf(")");
      }
      if (check.s_index >= 0)
        std::printf("  s=%s", kernel.alphabet.states[static_cast<std::size_t>(check.s_index)].c_str());
    }
    std::printf("\n");
  }
  return report.all_pass() ? kExitPass : kExitCheckFailed;
}

int cmd_simulate(const CLI::App* cmd, const CliOptions& opt) {
  const auto cfg = build_config(cmd, opt);
  if (cfg.horizon == 0) throw rwre::InputError("simulate needs a positive horizon T");
  const rwre::Model model = rwre::load_model(cfg.model_file);
  const rwre::QuenchedEnvironment env(cfg.env_seed, model.law, model.kernel.alphabet.size(),
                                      model.dimension());
  const rwre::LatticeVector x0(model.dimension(), 0);
  const auto ensemble = rwre::run_ensemble(model, env, x0, cfg.horizon, cfg.ensemble_size,
                                           cfg.master_seed, {cfg.mode, cfg.workers});

  auto csv = open_output(cfg.out_dir, "samples.csv");
  rwre::write_samples_csv(ensemble, csv);
  auto summary = open_output(cfg.out_dir, "summary.json");
  const auto hash = rwre::model_content_hash(model.kernel, model.law);
  summary << rwre::summary_to_json(ensemble, model, cfg.model_file.string(), hash);
  std::printf("wrote %s and %s\n", (cfg.out_dir / "samples.csv").string().c_str(),
              (cfg.out_dir / "summary.json").string().c_str());
  return kExitPass;
}

int cmd_verify(const CLI::App* cmd, const CliOptions& opt) {
  const auto cfg = build_config(cmd, opt);
  const auto report = rwre::run_verification(cfg);
  for (const auto& t : report.tests)
    std::printf("%-18s %s  statistic %.6g  threshold %.6g\n", t.id.c_str(),
                t.pass ? "pass" : "FAIL", t.statistic, t.threshold);
  auto out = open_output(cfg.out_dir, "report.json");
  out << rwre::report_to_json(report, cfg);
  std::printf("wrote %s\n", (cfg.out_dir / "report.json").string().c_str());
  return report.all_pass ? kExitPass : kExitCheckFailed;
}

int cmd_oracle(const CLI::App* cmd, const CliOptions& opt) {
  const auto cfg = build_config(cmd, opt);
  const rwre::Model model = rwre::load_model(cfg.model_file);
  const rwre::QuenchedEnvironment env(cfg.env_seed, model.law, model.kernel.alphabet.size(),
                                      model.dimension());
  const rwre::LatticeVector x0(model.dimension(), 0);
  const auto levels = rwre::quenched_distribution(model, env, x0, cfg.horizon, cfg.cap);
  const auto moments = rwre::quenched_moment(model, levels);

  const auto n = model.dimension();
  auto dist_csv = open_output(cfg.out_dir, "distributions.csv");
  dist_csv << "t";
  for (std::size_t i = 0; i < n; ++i) dist_csv << ",x_" << (i + 1);
  dist_csv << ",prob\n";
  char buf[64];
  for (std::size_t t = 0; t < levels.size(); ++t)
    for (const auto& [x, p] : levels[t].entries) {
      dist_csv << t;
      for (std::size_t i = 0; i < n; ++i) dist_csv << ',' << x[i];
      std::snprintf(buf, sizeof buf, "%.17g", p);
      dist_csv << ',' << buf << '\n';
    }

  auto moment_csv = open_output(cfg.out_dir, "moments.csv");
  moment_csv << "t";
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k) moment_csv << ",H_" << (i + 1) << (k + 1);
  moment_csv << ",increment_discrepancy\n";
  double worst = 0.0;
  for (std::size_t t = 0; t < moments.size(); ++t) {
    moment_csv << t;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < n; ++k) {
        std::snprintf(buf, sizeof buf, "%.17g",
                      moments[t].matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)));
        moment_csv << ',' << buf;
      }
    if (t + 1 < levels.size()) {
      const double gap = rwre::increment_check(model, env, levels, t);
      worst = std::max(worst, gap);
      std::snprintf(buf, sizeof buf, "%.17g", gap);
      moment_csv << ',' << buf << '\n';
    } else {
      moment_csv << ",\n";
    }
  }

  nlohmann::json j;
  j["schema_version"] = rwre::kReportSchemaVersion;
  j["artifact_version"] = rwre::kArtifactVersion;
  j["model_file"] = cfg.model_file.string();
  j["model_hash"] = rwre::model_content_hash(model.kernel, model.law);
  j["env_seed"] = cfg.env_seed;
  j["T"] = cfg.horizon;
  j["cap"] = cfg.cap;
  j["mass_deficit"] = levels.back().mass_deficit;
  j["max_increment_discrepancy"] = worst;
  auto json_out = open_output(cfg.out_dir, "oracle.json");
  json_out << j.dump(2) << "\n";

  std::printf("max increment discrepancy %.6g over t < %llu\n", worst,
              static_cast<unsigned long long>(cfg.horizon));
  std::printf("wrote %s\n", (cfg.out_dir / "distributions.csv").string().c_str());
  return kExitPass;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"random walk in a dynamical random environment: simulate and verify"};
  app.require_subcommand(1);

  CliOptions opt;
  auto* validate = app.add_subcommand("validate", "check a model file's admissibility conditions");
  validate->add_option("--model", opt.model_file, "model file (JSON)")->required();

  auto* simulate = app.add_subcommand("simulate", "sample an ensemble and write CSV + summary");
  attach_common(simulate, opt);
  auto* verify = app.add_subcommand("verify", "run the verification pipeline");
  attach_common(verify, opt);
  auto* oracle = app.add_subcommand("oracle", "exact laws and moments by dynamic programming");
  attach_common(oracle, opt);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitPass : kExitInput;
  }

  try {
    if (validate->parsed()) return cmd_validate(opt);
    if (simulate->parsed()) return cmd_simulate(simulate, opt);
    if (verify->parsed()) return cmd_verify(verify, opt);
    if (oracle->parsed()) return cmd_oracle(oracle, opt);
    return kExitInput;
  } catch (const rwre::InputError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInput;
  } catch (const rwre::CapExceeded& e) {
    std::fprintf(stderr, "refused: %s\n", e.what());
    return kExitCheckFailed;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return kExitInfrastructure;
  }
}
