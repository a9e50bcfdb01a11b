#include "rwre/verify.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"
#include "rwre/errors.hpp"
#include "rwre/hashing.hpp"

namespace rwre {

using nlohmann::json;

const std::map<std::string, double>& RunConfig::defaults() {
  static const std::map<std::string, double> table = {
      {"check", 1e-10},        {"martingale", 1e-12}, {"increment", 1e-12},
      {"annealed-identity", 1e-10}, {"qv-sigma", 4.0},     {"occ-sigma", 4.0},
      {"ks-alpha", 0.01},      {"cov-rel", 0.0},
  };
  return table;
}

double RunConfig::tolerance(const std::string& key) const {
  if (const auto it = tolerances.find(key); it != tolerances.end()) return it->second;
  const auto it = defaults().find(key);
  if (it == defaults().end()) throw InputError("unknown tolerance key '" + key + "'");
  return it->second;
}

bool RunConfig::test_selected(const std::string& id) const {
  if (tests.empty()) return true;
  return std::find(tests.begin(), tests.end(), id) != tests.end();
}

namespace {

const std::vector<std::string>& known_stages() {
  static const std::vector<std::string> stages = {
      "validate", "martingale", "increment", "annealed-identity", "qv", "occupation", "ks"};
  return stages;
}

void require_known_tolerance(const std::string& key) {
  if (!RunConfig::defaults().count(key)) throw InputError("unknown tolerance key '" + key + "'");
}

std::uint64_t read_u64(const json& v, const std::string& where) {
  if (!v.is_number_unsigned()) throw InputError(where + ": expected a nonnegative integer");
  return v.get<std::uint64_t>();
}

}  // namespace

RunConfig load_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw InputError("cannot open config file '" + file.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError("config file '" + file.string() + "': " + e.what());
  }
  if (!j.is_object()) throw InputError("config must be a JSON object");

  static const std::vector<std::string> known = {
      "model", "env_seed", "master_seed", "T",   "M",          "workers",
      "mode",  "out",      "tests",       "cap", "tolerances", "ks_directions"};
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw InputError("config: unknown field '" + key + "'");
  }

  RunConfig cfg;
  if (j.contains("model")) {
    if (!j["model"].is_string()) throw InputError("config: 'model' must be a string path");
    cfg.model_file = j["model"].get<std::string>();
  }
  if (j.contains("env_seed")) cfg.env_seed = read_u64(j["env_seed"], "config.env_seed");
  if (j.contains("master_seed")) cfg.master_seed = read_u64(j["master_seed"], "config.master_seed");
  if (j.contains("T")) cfg.horizon = read_u64(j["T"], "config.T");
  if (j.contains("M")) {
    cfg.ensemble_size = static_cast<std::size_t>(read_u64(j["M"], "config.M"));
    if (cfg.ensemble_size == 0) throw InputError("config: M must be positive");
  }
  if (j.contains("workers")) {
    cfg.workers = static_cast<unsigned>(read_u64(j["workers"], "config.workers"));
    if (cfg.workers == 0) throw InputError("config: workers must be positive");
  }
  if (j.contains("mode")) {
    const std::string mode = j["mode"].get<std::string>();
    if (mode == "quenched")
      cfg.mode = EnvironmentMode::kQuenched;
    else if (mode == "annealed")
      cfg.mode = EnvironmentMode::kAnnealed;
    else
      throw InputError("config: mode must be 'quenched' or 'annealed'");
  }
  if (j.contains("out")) {
    if (!j["out"].is_string()) throw InputError("config: 'out' must be a string path");
    cfg.out_dir = j["out"].get<std::string>();
  }
  if (j.contains("tests")) {
    if (!j["tests"].is_array()) throw InputError("config: 'tests' must be an array");
    for (const auto& t : j["tests"]) {
      const std::string id = t.get<std::string>();
      if (std::find(known_stages().begin(), known_stages().end(), id) == known_stages().end())
        throw InputError("config: unknown test '" + id + "'");
      cfg.tests.push_back(id);
    }
  }
  if (j.contains("cap")) cfg.cap = read_u64(j["cap"], "config.cap");
  if (j.contains("tolerances")) {
    if (!j["tolerances"].is_object()) throw InputError("config: 'tolerances' must be an object");
    for (const auto& [key, value] : j["tolerances"].items()) {
      require_known_tolerance(key);
      if (!value.is_number()) throw InputError("config: tolerance '" + key + "' must be a number");
      cfg.tolerances[key] = value.get<double>();
    }
  }
  if (j.contains("ks_directions")) {
    cfg.ks_directions = static_cast<std::size_t>(read_u64(j["ks_directions"], "config.ks_directions"));
    if (cfg.ks_directions == 0) throw InputError("config: ks_directions must be positive");
  }
  return cfg;
}

void apply_tolerance_override(RunConfig& config, const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size())
    throw InputError("tolerance override must look like KEY=VALUE, got '" + spec + "'");
  const std::string key = spec.substr(0, eq);
  require_known_tolerance(key);
  try {
    std::size_t pos = 0;
    const double value = std::stod(spec.substr(eq + 1), &pos);
    if (pos != spec.size() - eq - 1) throw std::invalid_argument("trailing characters");
    config.tolerances[key] = value;
  } catch (const std::exception&) {
    throw InputError("tolerance override '" + spec + "' has a malformed value");
  }
}

namespace {

TestReport validate_stage(const ValidationReport& validation, double tol) {
  TestReport report;
  report.id = "validate";
  report.threshold = tol;
  for (const auto& check : validation.checks) {
    report.details[check.id] = check.violation;
    report.statistic = std::max(report.statistic, check.violation);
  }
  report.pass = validation.all_pass();
  return report;
}

TestReport martingale_stage(const Model& model, const QuenchedEnvironment& env,
                            const RunConfig& config) {
  TestReport report;
  report.id = "martingale";
  report.threshold = config.tolerance("martingale");
  report.seed = config.master_seed;
  const std::uint64_t horizon = std::min<std::uint64_t>(config.horizon, 5000);
  constexpr std::size_t kPaths = 16;
  const LatticeVector x0(model.dimension(), 0);
  for (std::size_t i = 0; i < kPaths; ++i) {
    const auto path =
        run_walk(model, env, x0, horizon, absorb(absorb(config.master_seed, kWalkerStream), i));
    report.statistic = std::max(report.statistic, martingale_residual(model, env, path));
  }
  report.sample_size = kPaths;
  report.details["horizon"] = static_cast<double>(horizon);
  report.pass = report.statistic <= report.threshold;
  return report;
}

TestReport increment_stage(const Model& model, const QuenchedEnvironment& env,
                           const RunConfig& config) {
  TestReport report;
  report.id = "increment";
  report.threshold = config.tolerance("increment");
  const std::uint64_t horizon = std::min<std::uint64_t>({config.horizon, config.cap, 10});
  const LatticeVector x0(model.dimension(), 0);
  const auto levels = quenched_distribution(model, env, x0, horizon, config.cap);
  for (std::uint64_t t = 0; t + 1 <= horizon; ++t)
    report.statistic = std::max(report.statistic, increment_check(model, env, levels, t));
  report.details["dp_horizon"] = static_cast<double>(horizon);
  report.details["mass_deficit"] = levels.back().mass_deficit;
  report.pass = report.statistic <= report.threshold;
  return report;
}

TestReport annealed_identity_stage(const Model& model, const RunConfig& config) {
  TestReport report;
  report.id = "annealed-identity";
  report.threshold = config.tolerance("annealed-identity");
  const std::uint64_t horizon = std::min<std::uint64_t>({config.horizon, config.cap, 20});
  report.statistic = annealed_moment_identity(model, horizon, config.cap);
  report.details["dp_horizon"] = static_cast<double>(horizon);
  report.pass = report.statistic <= report.threshold;
  return report;
}

TestReport covariance_stage(const Ensemble& ensemble, const Model& model,
                            const RunConfig& config) {
  TestReport report;
  report.id = "clt-covariance";
  report.sample_size = ensemble.walker_count();
  const Eigen::MatrixXd cov = empirical_covariance(clt_samples(ensemble));
  const double scale = model.derived.eta2.cwiseAbs().maxCoeff();
  const double rel = scale > 0.0
                         ? (cov - model.derived.eta2).cwiseAbs().maxCoeff() / scale
                         : (cov.cwiseAbs().maxCoeff() == 0.0 ? 0.0 : 1.0);
  report.statistic = rel;
  const double configured = config.tolerance("cov-rel");
  report.threshold =
      configured > 0.0
          ? configured
          : std::max(0.03, 4.0 * std::sqrt(2.0 / static_cast<double>(ensemble.walker_count())));
  report.pass = report.statistic <= report.threshold;
  return report;
}

}  // namespace

VerificationReport run_verification(const RunConfig& config) {
  VerificationReport out;
  out.model_file = config.model_file.string();

  auto [kernel, law] = load_kernel(config.model_file);
  out.model_hash = model_content_hash(kernel, law);

  const auto validation = validate_kernel(kernel, law);
  if (config.test_selected("validate"))
    out.tests.push_back(validate_stage(validation, config.tolerance("check")));
  if (!validation.all_pass()) {
    // Nothing downstream is meaningful without an admissible kernel.
    out.all_pass = false;
    return out;
  }

  const Model model = Model::make(std::move(kernel), std::move(law));
  const QuenchedEnvironment env(config.env_seed, model.law, model.kernel.alphabet.size(),
                                model.dimension());

  if (config.test_selected("martingale"))
    out.tests.push_back(martingale_stage(model, env, config));
  if (config.test_selected("increment"))
    out.tests.push_back(increment_stage(model, env, config));
  if (config.test_selected("annealed-identity"))
    out.tests.push_back(annealed_identity_stage(model, config));

  const bool needs_ensemble = config.test_selected("qv") || config.test_selected("occupation") ||
                              config.test_selected("ks");
  if (needs_ensemble) {
    const LatticeVector x0(model.dimension(), 0);
    const Ensemble ensemble =
        run_ensemble(model, env, x0, config.horizon, config.ensemble_size, config.master_seed,
                     {config.mode, config.workers});
    if (config.test_selected("qv"))
      out.tests.push_back(qv_convergence(ensemble, model.derived.eta2,
                                         config.tolerance("qv-sigma")));
    if (config.test_selected("occupation"))
      out.tests.push_back(occupation_lln(ensemble, model.law, config.tolerance("occ-sigma")));
    if (config.test_selected("ks")) {
      const auto standardized = standardize(clt_samples(ensemble), model.derived.eta2);
      out.tests.push_back(ks_projection_test(standardized, config.ks_directions,
                                             config.master_seed, config.tolerance("ks-alpha")));
      out.tests.push_back(covariance_stage(ensemble, model, config));
    }
  }

  out.all_pass = std::all_of(out.tests.begin(), out.tests.end(),
                             [](const TestReport& t) { return t.pass; });
  return out;
}

namespace {

json test_to_json(const TestReport& t) {
  json j;
  j["id"] = t.id;
  j["statistic"] = t.statistic;
  j["threshold"] = t.threshold;
  j["pass"] = t.pass;
  j["sample_size"] = t.sample_size;
  j["seed"] = t.seed;
  j["details"] = t.details;
  return j;
}

}  // namespace

std::string report_to_json(const VerificationReport& report, const RunConfig& config) {
  json j;
  j["schema_version"] = kReportSchemaVersion;
  j["artifact_version"] = kArtifactVersion;
  j["model_file"] = report.model_file;
  j["model_hash"] = report.model_hash;
  j["env_seed"] = config.env_seed;
  j["master_seed"] = config.master_seed;
  j["T"] = config.horizon;
  j["M"] = config.ensemble_size;
  j["mode"] = config.mode == EnvironmentMode::kQuenched ? "quenched" : "annealed";
  j["cap"] = config.cap;
  j["ks_directions"] = config.ks_directions;
  json tests = json::array();
  for (const auto& t : report.tests) tests.push_back(test_to_json(t));
  j["tests"] = std::move(tests);
  j["all_pass"] = report.all_pass;
  return j.dump(2) + "\n";
}

std::string summary_to_json(const Ensemble& ensemble, const Model& model,
                            const std::string& model_file, const std::string& model_hash) {
  const auto n = static_cast<Eigen::Index>(ensemble.dimension);
  json j;
  j["schema_version"] = kReportSchemaVersion;
  j["artifact_version"] = kArtifactVersion;
  j["model_file"] = model_file;
  j["model_hash"] = model_hash;
  j["env_seed"] = ensemble.env_seed;
  j["master_seed"] = ensemble.master_seed;
  j["mode"] = ensemble.mode == EnvironmentMode::kQuenched ? "quenched" : "annealed";
  j["T"] = ensemble.horizon;
  j["M"] = ensemble.walker_count();
  j["x0"] = ensemble.x0;

  const Eigen::MatrixXd samples = clt_samples(ensemble);
  const Eigen::RowVectorXd mean = samples.colwise().mean();
  json mean_json = json::array();
  for (Eigen::Index i = 0; i < n; ++i) mean_json.push_back(mean[i]);
  j["clt_mean"] = std::move(mean_json);

  auto matrix_json = [n](const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < n; ++i) {
      json row = json::array();
      for (Eigen::Index k = 0; k < n; ++k) row.push_back(m(i, k));
      rows.push_back(std::move(row));
    }
    return rows;
  };
  if (ensemble.walker_count() >= 2)
    j["clt_covariance"] = matrix_json(empirical_covariance(samples));
  else
    j["clt_covariance"] = nullptr;
  j["eta2"] = matrix_json(model.derived.eta2);
  json drift = json::array();
  for (Eigen::Index i = 0; i < n; ++i) drift.push_back(model.derived.b[i]);
  j["b"] = std::move(drift);
  j["samples_csv"] = "samples.csv";
  return j.dump(2) + "\n";
}

}  // namespace rwre
