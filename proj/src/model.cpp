#include "rwre/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "rwre/errors.hpp"
#include "rwre/hashing.hpp"

namespace rwre {
namespace {

constexpr double kCheckTol = 1e-10;

std::string format_point(const LatticeVector& u) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (i) os << ',';
    os << u[i];
  }
  os << ')';
  return os.str();
}

void require_structure(const Kernel& k, const EnvLaw& law) {
  const std::size_t n_states = k.alphabet.size();
  const std::size_t n_support = k.support.displacements.size();
  if (n_states == 0) throw InputError("alphabet is empty");
  if (n_support == 0) throw InputError("displacement support is empty");
  if (k.support.dimension == 0) throw InputError("dimension must be positive");
  for (const auto& u : k.support.displacements)
    if (u.size() != k.support.dimension)
      throw InputError("support row " + format_point(u) + " does not match dimension");
  if (!std::is_sorted(k.support.displacements.begin(), k.support.displacements.end()))
    throw InputError("support must be sorted lexicographically");
  if (std::adjacent_find(k.support.displacements.begin(), k.support.displacements.end()) !=
      k.support.displacements.end())
    throw InputError("support contains duplicate displacements");
  {
    std::vector<std::string> labels = k.alphabet.states;
    std::sort(labels.begin(), labels.end());
    if (std::adjacent_find(labels.begin(), labels.end()) != labels.end())
      throw InputError("alphabet contains duplicate labels");
  }
  if (k.p0.size() != n_support) throw InputError("p0 length does not match support");
  if (k.c.size() != n_states) throw InputError("c must have one row per alphabet state");
  for (const auto& row : k.c)
    if (row.size() != n_support) throw InputError("c row length does not match support");
  if (law.probs.size() != n_states) throw InputError("law length does not match alphabet");
  double mass = 0.0;
  for (double p : law.probs) {
    if (!(p >= 0.0 && p <= 1.0)) throw InputError("law entries must lie in [0,1]");
    mass += p;
  }
  if (std::abs(mass - 1.0) > 1e-12) throw InputError("law must sum to 1");
}

}  // namespace

std::optional<std::size_t> EnvAlphabet::index_of(std::string_view label) const {
  for (std::size_t i = 0; i < states.size(); ++i)
    if (states[i] == label) return i;
  return std::nullopt;
}

bool ValidationReport::all_pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.pass; });
}

const CheckResult* ValidationReport::find(std::string_view id) const {
  for (const auto& c : checks)
    if (c.id == id) return &c;
  return nullptr;
}

ValidationReport validate_kernel(const Kernel& kernel, const EnvLaw& law) {
  require_structure(kernel, law);
  const std::size_t S = kernel.alphabet.size();
  const std::size_t U = kernel.support.displacements.size();
  const std::size_t n = kernel.support.dimension;

  ValidationReport report;

  // 0 <= p0(u) + c(u,s) <= 1 for every pair.
  {
    CheckResult r{.id = "prob-bounds"};
    for (std::size_t s = 0; s < S; ++s)
      for (std::size_t u = 0; u < U; ++u) {
        const double q = kernel.p0[u] + kernel.c[s][u];
        const double viol = std::max(q - 1.0, -q);
        if (viol > r.violation) {
          r.violation = viol;
          r.u_index = static_cast<std::ptrdiff_t>(u);
          r.s_index = static_cast<std::ptrdiff_t>(s);
        }
      }
    r.pass = r.violation <= kCheckTol;
    if (r.pass) r.violation = std::max(r.violation, 0.0);
    report.checks.push_back(std::move(r));
  }

  // sum_u c(u,s) = 0 for every state.
  {
    CheckResult r{.id = "c-zero-sum"};
    for (std::size_t s = 0; s < S; ++s) {
      double acc = 0.0;
      for (std::size_t u = 0; u < U; ++u) acc += kernel.c[s][u];
      if (std::abs(acc) > r.violation) {
        r.violation = std::abs(acc);
        r.s_index = static_cast<std::ptrdiff_t>(s);
      }
    }
    r.pass = r.violation <= kCheckTol;
    report.checks.push_back(std::move(r));
  }

  // sum_s pi(s) c(u,s) = 0 for every displacement.
  {
    CheckResult r{.id = "pi-mean-zero"};
    for (std::size_t u = 0; u < U; ++u) {
      double acc = 0.0;
      for (std::size_t s = 0; s < S; ++s) acc += law.probs[s] * kernel.c[s][u];
      if (std::abs(acc) > r.violation) {
        r.violation = std::abs(acc);
        r.u_index = static_cast<std::ptrdiff_t>(u);
      }
    }
    r.pass = r.violation <= kCheckTol;
    report.checks.push_back(std::move(r));
  }

  // sum_u u c(u,s) identical across states, coordinatewise.
  {
    CheckResult r{.id = "constant-drift"};
    std::vector<double> first(n, 0.0);
    for (std::size_t s = 0; s < S; ++s) {
      std::vector<double> drift(n, 0.0);
      for (std::size_t u = 0; u < U; ++u)
        for (std::size_t i = 0; i < n; ++i)
          drift[i] += static_cast<double>(kernel.support.displacements[u][i]) * kernel.c[s][u];
      if (s == 0) {
        first = drift;
        continue;
      }
      for (std::size_t i = 0; i < n; ++i) {
        const double gap = std::abs(drift[i] - first[i]);
        if (gap > r.violation) {
          r.violation = gap;
          r.s_index = static_cast<std::ptrdiff_t>(s);
        }
      }
    }
    r.pass = r.violation <= kCheckTol;
    report.checks.push_back(std::move(r));
  }

  // p0 is a probability vector.
  {
    CheckResult r{.id = "p0-normalized"};
    double mass = 0.0;
    for (std::size_t u = 0; u < U; ++u) {
      mass += kernel.p0[u];
      const double neg = -kernel.p0[u];
      if (neg > r.violation) {
        r.violation = neg;
        r.u_index = static_cast<std::ptrdiff_t>(u);
      }
    }
    if (std::abs(mass - 1.0) > r.violation) {
      r.violation = std::abs(mass - 1.0);
      r.u_index = -1;
    }
    r.pass = r.violation <= kCheckTol;
    report.checks.push_back(std::move(r));
  }

  return report;
}

std::vector<double> row_kernel(const Kernel& kernel, std::size_t state_index) {
  if (state_index >= kernel.alphabet.size()) throw InputError("state index out of range");
  const std::size_t U = kernel.support.displacements.size();
  std::vector<double> row(U);
  for (std::size_t u = 0; u < U; ++u) row[u] = kernel.p0[u] + kernel.c[state_index][u];
  return row;
}

std::vector<double> row_kernel(const Kernel& kernel, std::string_view state_label) {
  const auto idx = kernel.alphabet.index_of(state_label);
  if (!idx) throw InputError("unknown state label '" + std::string(state_label) + "'");
  return row_kernel(kernel, *idx);
}

namespace {

// Shared derivation. pi_average_drift selects where bc comes from: the first
// state (valid kernels, cross-checked by validation) or the pi-average
// (diagnostic path; identical for valid kernels).
DerivedModel derive_impl(const Kernel& k, const EnvLaw& law, bool pi_average_drift) {
  const std::size_t S = k.alphabet.size();
  const std::size_t U = k.support.displacements.size();
  const auto n = static_cast<Eigen::Index>(k.support.dimension);

  DerivedModel d;
  d.b0 = Eigen::VectorXd::Zero(n);
  d.bc = Eigen::VectorXd::Zero(n);
  d.pbar.assign(U, 0.0);

  for (std::size_t u = 0; u < U; ++u)
    for (Eigen::Index i = 0; i < n; ++i)
      d.b0[i] += static_cast<double>(k.support.displacements[u][i]) * k.p0[u];

  if (pi_average_drift) {
    for (std::size_t s = 0; s < S; ++s)
      for (std::size_t u = 0; u < U; ++u)
        for (Eigen::Index i = 0; i < n; ++i)
          d.bc[i] += law.probs[s] * static_cast<double>(k.support.displacements[u][i]) * k.c[s][u];
  } else {
    for (std::size_t u = 0; u < U; ++u)
      for (Eigen::Index i = 0; i < n; ++i)
        d.bc[i] += static_cast<double>(k.support.displacements[u][i]) * k.c[0][u];
  }
  d.b = d.b0 + d.bc;

  for (std::size_t u = 0; u < U; ++u) {
    double acc = k.p0[u];
    for (std::size_t s = 0; s < S; ++s) acc += law.probs[s] * k.c[s][u];
    d.pbar[u] = acc;
  }

  d.eta2 = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd centered(n);
  for (std::size_t u = 0; u < U; ++u) {
    for (Eigen::Index i = 0; i < n; ++i)
      centered[i] = static_cast<double>(k.support.displacements[u][i]) - d.b[i];
    d.eta2.noalias() += d.pbar[u] * centered * centered.transpose();
  }
  d.eta2 = ((d.eta2 + d.eta2.transpose()) / 2.0).eval();
  return d;
}

void assert_derived_invariants(const Kernel& k, const EnvLaw& law, const DerivedModel& d) {
  // The admissibility conditions force the environment drift to vanish and
  // the averaged kernel to collapse onto p0.
  if (d.bc.lpNorm<Eigen::Infinity>() > kCheckTol)
    throw std::logic_error("derived drift invariant violated: bc != 0");
  for (std::size_t u = 0; u < k.p0.size(); ++u)
    if (std::abs(d.pbar[u] - k.p0[u]) > kCheckTol)
      throw std::logic_error("derived kernel invariant violated: pbar != p0");

  // Every state's row has mean b.
  const auto n = static_cast<Eigen::Index>(k.support.dimension);
  for (std::size_t s = 0; s < k.alphabet.size(); ++s) {
    const auto row = row_kernel(k, s);
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(n);
    for (std::size_t u = 0; u < row.size(); ++u)
      for (Eigen::Index i = 0; i < n; ++i)
        mean[i] += static_cast<double>(k.support.displacements[u][i]) * row[u];
    if ((mean - d.b).lpNorm<Eigen::Infinity>() > kCheckTol)
      throw std::logic_error("derived drift invariant violated: row mean != b");
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(d.eta2);
  if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() < -kCheckTol)
    throw std::logic_error("derived covariance invariant violated: eta2 not PSD");
  (void)law;
}

}  // namespace

DerivedModel derive_model(const Kernel& kernel, const EnvLaw& law) {
  const auto report = validate_kernel(kernel, law);
  if (!report.all_pass()) {
    for (const auto& c : report.checks)
      if (!c.pass)
        throw InputError("cannot derive from invalid kernel: check '" + c.id +
                         "' failed with violation " + std::to_string(c.violation));
  }
  DerivedModel d = derive_impl(kernel, law, /*pi_average_drift=*/false);
  assert_derived_invariants(kernel, law, d);
  return d;
}

Model Model::make(Kernel kernel, EnvLaw law) {
  DerivedModel d = derive_model(kernel, law);
  return Model{std::move(kernel), std::move(law), std::move(d)};
}

Model Model::make_unchecked(Kernel kernel, EnvLaw law) {
  require_structure(kernel, law);
  DerivedModel d = derive_impl(kernel, law, /*pi_average_drift=*/true);
  return Model{std::move(kernel), std::move(law), std::move(d)};
}

namespace {

using nlohmann::json;

double number_or_fraction(const json& v, const std::string& where) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    const auto slash = s.find('/');
    if (slash != std::string::npos) {
      long long num = 0, den = 0;
      const char* b = s.data();
      auto r1 = std::from_chars(b, b + slash, num);
      auto r2 = std::from_chars(b + slash + 1, b + s.size(), den);
      if (r1.ec != std::errc{} || r2.ec != std::errc{} || r1.ptr != b + slash ||
          r2.ptr != b + s.size() || den == 0)
        throw InputError(where + ": malformed fraction '" + s + "'");
      return static_cast<double>(num) / static_cast<double>(den);
    }
    try {
      std::size_t pos = 0;
      const double x = std::stod(s, &pos);
      if (pos == s.size()) return x;
    } catch (const std::exception&) {
    }
    throw InputError(where + ": malformed number '" + s + "'");
  }
  throw InputError(where + ": expected a number or fraction string");
}

std::vector<double> number_list(const json& v, const std::string& where) {
  if (!v.is_array()) throw InputError(where + ": expected an array");
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& e : v) out.push_back(number_or_fraction(e, where));
  return out;
}

void reject_unknown_fields(const json& obj, std::initializer_list<std::string_view> known,
                           const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw InputError(where + ": unknown field '" + key + "'");
  }
}

std::pair<Kernel, EnvLaw> parse_kernel(const json& j, const std::string& where) {
  if (!j.is_object()) throw InputError(where + ": top level must be an object");
  reject_unknown_fields(j, {"dimension", "states", "pi", "support", "p0", "c"}, where);
  for (const char* field : {"dimension", "states", "pi", "support", "p0", "c"})
    if (!j.contains(field)) throw InputError(where + ": missing field '" + field + "'");

  Kernel k;
  if (!j["dimension"].is_number_unsigned() || j["dimension"].get<std::uint64_t>() == 0)
    throw InputError(where + ": 'dimension' must be a positive integer");
  k.support.dimension = j["dimension"].get<std::size_t>();

  if (!j["states"].is_array() || j["states"].empty())
    throw InputError(where + ": 'states' must be a nonempty array");
  for (const auto& s : j["states"]) {
    if (!s.is_string()) throw InputError(where + ": state labels must be strings");
    k.alphabet.states.push_back(s.get<std::string>());
  }

  EnvLaw law{number_list(j["pi"], where + ".pi")};

  if (!j["support"].is_array() || j["support"].empty())
    throw InputError(where + ": 'support' must be a nonempty array");
  for (const auto& row : j["support"]) {
    if (!row.is_array()) throw InputError(where + ": support rows must be arrays");
    LatticeVector u;
    for (const auto& coord : row) {
      if (!coord.is_number_integer())
        throw InputError(where + ": support coordinates must be integers");
      u.push_back(coord.get<std::int64_t>());
    }
    k.support.displacements.push_back(std::move(u));
  }

  k.p0 = number_list(j["p0"], where + ".p0");

  if (!j["c"].is_object()) throw InputError(where + ": 'c' must map state labels to arrays");
  if (j["c"].size() != k.alphabet.size())
    throw InputError(where + ": 'c' must have exactly one row per state");
  k.c.resize(k.alphabet.size());
  for (const auto& [label, row] : j["c"].items()) {
    const auto idx = k.alphabet.index_of(label);
    if (!idx) throw InputError(where + ": 'c' contains unknown state '" + label + "'");
    k.c[*idx] = number_list(row, where + ".c." + label);
  }

  return {std::move(k), std::move(law)};
}

json kernel_to_json(const Kernel& k, const EnvLaw& law) {
  json j;
  j["dimension"] = k.support.dimension;
  j["states"] = k.alphabet.states;
  j["pi"] = law.probs;
  json support = json::array();
  for (const auto& u : k.support.displacements) support.push_back(u);
  j["support"] = std::move(support);
  j["p0"] = k.p0;
  json c = json::object();
  for (std::size_t s = 0; s < k.alphabet.size(); ++s) c[k.alphabet.states[s]] = k.c[s];
  j["c"] = std::move(c);
  return j;
}

}  // namespace

std::pair<Kernel, EnvLaw> load_kernel(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw InputError("cannot open model file '" + file.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError("model file '" + file.string() + "': " + e.what());
  }
  auto parsed = parse_kernel(j, file.filename().string());
  // Surface structural problems at load time; admissibility stays a check.
  require_structure(parsed.first, parsed.second);
  return parsed;
}

Model load_model(const std::filesystem::path& file) {
  auto [kernel, law] = load_kernel(file);
  return Model::make(std::move(kernel), std::move(law));
}

std::string model_content_hash(const Kernel& kernel, const EnvLaw& law) {
  const std::string canonical = kernel_to_json(kernel, law).dump();
  char buf[32];
  std::snprintf(buf, sizeof buf, "fnv1a64:%016llx",
                static_cast<unsigned long long>(fnv1a64(canonical)));
  return buf;
}

}  // namespace rwre
