#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "rwre/model.hpp"
#include "rwre/oracle.hpp"
#include "rwre/simulate.hpp"
#include "rwre/stats.hpp"

// End-to-end verification: one configured run that validates the model,
// checks the exact identities at short horizons, simulates an ensemble, and
// applies the statistical tests. The CLI is a thin wrapper around this.

namespace rwre {

struct RunConfig {
  std::filesystem::path model_file;
  std::uint64_t env_seed = 1;
  std::uint64_t master_seed = 1;
  std::uint64_t horizon = 30000;  // T
  std::size_t ensemble_size = 300;  // M
  unsigned workers = 1;
  EnvironmentMode mode = EnvironmentMode::kQuenched;
  std::filesystem::path out_dir = "out";
  std::vector<std::string> tests;  // empty selects every stage
  std::map<std::string, double> tolerances;  // overrides over defaults()
  std::uint64_t cap = kDefaultHorizonCap;
  std::size_t ks_directions = 5;

  // Tolerance table: check 1e-10, martingale 1e-12, increment 1e-12,
  // annealed-identity 1e-10, qv-sigma 4, occ-sigma 4, ks-alpha 0.01,
  // cov-rel 0 (0 selects max(0.03, 4*sqrt(2/M))).
  static const std::map<std::string, double>& defaults();

  double tolerance(const std::string& key) const;
  bool test_selected(const std::string& id) const;
};

// Strict JSON config: unknown fields or unknown tolerance keys throw.
RunConfig load_config(const std::filesystem::path& file);

// "KEY=VALUE" tolerance override; unknown keys throw.
void apply_tolerance_override(RunConfig& config, const std::string& spec);

struct VerificationReport {
  std::string model_file;
  std::string model_hash;
  std::vector<TestReport> tests;
  bool all_pass = false;
};

// Pipeline stages in order: validate, martingale, increment,
// annealed-identity, qv, occupation, ks (ks also emits clt-covariance).
// A failed validation short-circuits the rest.
VerificationReport run_verification(const RunConfig& config);

// Versioned JSON form of a report. Excludes the worker count: results never
// depend on it, so neither does the artifact.
std::string report_to_json(const VerificationReport& report, const RunConfig& config);

// Versioned JSON summary for a simulated ensemble.
std::string summary_to_json(const Ensemble& ensemble, const Model& model,
                            const std::string& model_file, const std::string& model_hash);

inline constexpr int kReportSchemaVersion = 1;
inline constexpr const char* kArtifactVersion = "0.1.0";

}  // namespace rwre
