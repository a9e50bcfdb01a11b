#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

// Model layer: a walk on Z^n whose one-step law at a site is a base
// distribution p0 over a finite displacement support plus a perturbation
// c(u, s) selected by the local environment state s. Validation enforces
// the admissibility conditions; derivation produces the drift b, the
// state-averaged kernel pbar, and the step covariance eta2 that the
// simulation and verification layers consume.

namespace rwre {

using LatticeVector = std::vector<std::int64_t>;

struct EnvAlphabet {
  std::vector<std::string> states;  // distinct labels, file order is canonical

  std::size_t size() const { return states.size(); }
  std::optional<std::size_t> index_of(std::string_view label) const;
};

// Distribution over the alphabet; entries in [0,1] summing to 1 (structural,
// enforced on construction paths).
struct EnvLaw {
  std::vector<double> probs;
};

struct DisplacementSupport {
  std::size_t dimension = 0;
  std::vector<LatticeVector> displacements;  // distinct, lexicographically sorted
};

struct Kernel {
  EnvAlphabet alphabet;
  DisplacementSupport support;
  std::vector<double> p0;               // indexed like support.displacements
  std::vector<std::vector<double>> c;   // c[state][support index]
};

struct CheckResult {
  std::string id;
  bool pass = true;
  double violation = 0.0;          // max violation magnitude, 0 when passing
  std::ptrdiff_t u_index = -1;     // offending support index, -1 if n/a
  std::ptrdiff_t s_index = -1;     // offending state index, -1 if n/a
};

// Always carries exactly the five condition ids, fixed order:
// prob-bounds, c-zero-sum, pi-mean-zero, constant-drift, p0-normalized.
struct ValidationReport {
  std::vector<CheckResult> checks;

  bool all_pass() const;
  const CheckResult* find(std::string_view id) const;
};

struct DerivedModel {
  Eigen::VectorXd b0;          // mean displacement of p0
  Eigen::VectorXd bc;          // environment part of the drift (0 for valid kernels)
  Eigen::VectorXd b;           // total drift, b0 + bc
  std::vector<double> pbar;    // state-averaged kernel, indexed like support
  Eigen::MatrixXd eta2;        // step covariance about b under pbar, symmetric PSD
};

// Structural problems (shape mismatches, empty support, bad law) throw
// InputError; admissibility failures come back as failed checks.
ValidationReport validate_kernel(const Kernel& kernel, const EnvLaw& law);

// Requires a kernel passing all five checks; otherwise throws InputError
// naming the failed check.
DerivedModel derive_model(const Kernel& kernel, const EnvLaw& law);

// Row of the site kernel for one state: p0 + c(., s). Pure arithmetic; the
// probability posts hold when the kernel is valid.
std::vector<double> row_kernel(const Kernel& kernel, std::size_t state_index);
std::vector<double> row_kernel(const Kernel& kernel, std::string_view state_label);

// Validated bundle used by everything downstream.
struct Model {
  Kernel kernel;
  EnvLaw law;
  DerivedModel derived;

  std::size_t dimension() const { return kernel.support.dimension; }

  // Validates, then derives. Throws InputError when any check fails.
  static Model make(Kernel kernel, EnvLaw law);

  // Skips validation and takes the drift from the state-averaged kernel.
  // For diagnostics on inadmissible kernels only; agrees with make() on
  // valid input.
  static Model make_unchecked(Kernel kernel, EnvLaw law);
};

// Strict JSON loader; rejects unknown fields, unsorted or duplicate support
// rows, and shape mismatches. Numeric entries may be JSON numbers or exact
// fraction strings like "1/3".
Model load_model(const std::filesystem::path& file);

// Parses without validating, for inspecting inadmissible files.
std::pair<Kernel, EnvLaw> load_kernel(const std::filesystem::path& file);

// FNV-1a fingerprint of the canonicalized (parsed and re-serialized with
// sorted keys) model content. Formatting changes do not alter it.
std::string model_content_hash(const Kernel& kernel, const EnvLaw& law);

}  // namespace rwre
