#ifndef FENE_DIAGNOSTICS_HPP_
#define FENE_DIAGNOSTICS_HPP_

// Run configuration, report serialization and the scenario/check drivers
// behind the command-line tool.

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "fene/errors.hpp"
#include "fene/galerkin.hpp"
#include "fene/geometry.hpp"
#include "fene/scenarios.hpp"
#include "fene/weighted_spaces.hpp"

namespace fene {

inline constexpr const char* kVersion = "1.0.0";
inline constexpr const char* kOutputRootEnv = "FENE_OUTPUT_ROOT";

/// Fixed-point tolerance of the time stepper; separations below 1e3 times it are noise.
inline constexpr double kSolverTolerance = 1e-10;

enum ExitCode : int { kExitOk = 0, kExitInvariant = 1, kExitConfig = 2, kExitNumerical = 3 };

using Json = nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration

namespace detail {

inline Json scenario_defaults(const std::string& scenario) {
  Json d = {
      {"model", {{"n", 2}, {"b", 4.0}, {"T", 1.0}, {"kappa", {{"type", "zero"}}}}},
      {"initial", {{"type", "equilibrium"}, {"amplitude", 0.3}, {"sharpness", 1.0}, {"center", {0.5, 0.0}}, {"seed", 1}}},
      {"resolution",
       {{"K_r", 10}, {"K_theta", 10}, {"N_radial_quad", 64}, {"N_angular_quad", 64}, {"N_timesteps", 200}}},
      {"nonunique", {{"g", "t|m|^2"}, {"scale", 1.0}, {"gamma", nullptr}, {"pair_scale", 2.0}}},
      {"sweep", {{"b_values", {2.0, 2.5, 3.0, 4.0, 6.0}}, {"equivalence", true}}},
      {"outputs", {{"directory", scenario}, {"report", true}, {"timeseries", true}, {"trace_profile", true}}},
  };
  if (scenario == "relax") d["initial"]["type"] = "perturbed";
  if (scenario == "shear") d["model"]["kappa"] = {{"type", "shear"}, {"rate", 1.0}};
  if (scenario == "corotational") {
    d["model"]["kappa"] = {{"type", "corotational"}, {"rate", 1.0}};
    d["initial"]["type"] = "perturbed";
  }
  if (scenario == "nonunique") {
    const Resolution r = Resolution::relaxed();
    d["resolution"] = {{"K_r", r.K_r},
                       {"K_theta", r.K_theta},
                       {"N_radial_quad", r.n_radial},
                       {"N_angular_quad", r.n_angular},
                       {"N_timesteps", r.n_steps}};
  }
  return d;
}

inline void require_keys(const Json& j, const std::string& where, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ConfigError("'" + where + "' must be an object");
  for (const auto& [k, v] : j.items()) {
    if (!allowed.count(k)) throw ConfigError("unknown key '" + where + (where.empty() ? "" : ".") + k + "'");
  }
}

template <class T>
T get(const Json& j, const std::string& path) {
  try {
    return j.get<T>();
  } catch (const Json::exception&) {
    throw ConfigError("config value '" + path + "' has the wrong type");
  }
}

inline Mat matrix_from(const Json& j, int n, const std::string& path) {
  if (!j.is_array() || static_cast<int>(j.size()) != n) throw ConfigError("'" + path + "' must be an n x n array");
  Mat k(n, n);
  for (int a = 0; a < n; ++a) {
    const Json& row = j[static_cast<std::size_t>(a)];
    if (!row.is_array() || static_cast<int>(row.size()) != n) throw ConfigError("'" + path + "' must be an n x n array");
    for (int c = 0; c < n; ++c) k(a, c) = get<double>(row[static_cast<std::size_t>(c)], path);
  }
  return k;
}

/// Parses "1.5", "true", "[1,2]" as JSON; anything else is a string.
inline Json parse_override_value(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const Json::exception&) {
    return Json(text);
  }
}

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace detail

inline KappaSchedule kappa_from_json(const Json& j, int n) {
  detail::require_keys(j, "model.kappa", {"type", "rate", "matrix", "times", "matrices"});
  const std::string type = detail::get<std::string>(j.value("type", Json("zero")), "model.kappa.type");
  if (type == "zero") return KappaSchedule::zero(n);
  if (type == "shear" || type == "corotational") {
    if (!j.contains("rate")) throw ConfigError("model.kappa.rate is required for " + type);
    const double rate = detail::get<double>(j["rate"], "model.kappa.rate");
    if (!std::isfinite(rate)) throw ConfigError("model.kappa.rate must be finite");
    return type == "shear" ? KappaSchedule::shear(n, rate) : KappaSchedule::corotational(n, rate);
  }
  if (type == "constant") {
    if (!j.contains("matrix")) throw ConfigError("model.kappa.matrix is required for constant kappa");
    return KappaSchedule::constant(detail::matrix_from(j["matrix"], n, "model.kappa.matrix"));
  }
  if (type == "table") {
    if (!j.contains("times") || !j.contains("matrices")) throw ConfigError("kappa table needs 'times' and 'matrices'");
    std::vector<double> times = detail::get<std::vector<double>>(j["times"], "model.kappa.times");
    std::vector<Mat> mats;
    if (!j["matrices"].is_array()) throw ConfigError("model.kappa.matrices must be an array");
    for (const Json& m : j["matrices"]) mats.push_back(detail::matrix_from(m, n, "model.kappa.matrices"));
    return KappaSchedule::table(std::move(times), std::move(mats));
  }
  throw ConfigError("unknown kappa type '" + type + "'");
}

struct RunConfig {
  std::string scenario;
  Json tree;  ///< merged configuration after defaults and overrides
  int n = 2;
  double b = 4.0;
  double T = 1.0;
  Json kappa;
  Resolution resolution;
  Json initial;
  Json nonunique;
  std::vector<double> b_values;
  bool sweep_equivalence = true;
  std::string directory;
  bool write_report = true;
  bool write_timeseries = true;
  bool write_trace = true;

  ModelParams params() const { return ModelParams(n, b, kappa_from_json(kappa, n), T); }
  ModelParams params_with(double b_value) const { return ModelParams(n, b_value, kappa_from_json(kappa, n), T); }
  std::string hash() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, detail::fnv1a(tree.dump()));
    return buf;
  }
};

inline const std::set<std::string>& scenario_names() {
  static const std::set<std::string> names = {"equilibrium", "relax",     "shear", "corotational",
                                              "nonunique",   "sweep",     "check"};
  return names;
}

/// Merges scenario defaults, the file contents and key=value overrides, then validates.
inline RunConfig make_config(Json user, const std::vector<std::string>& overrides = {}) {
  if (!user.is_object()) throw ConfigError("configuration must be a JSON object");
  for (const std::string& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + o + "' is not of the form key=value");
    const std::string key = o.substr(0, eq);
    Json* node = &user;
    std::stringstream ss(key);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ss, part, '.')) parts.push_back(part);
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
      if (parts[i].empty()) throw ConfigError("override key '" + key + "' is malformed");
      Json& child = (*node)[parts[i]];
      if (child.is_null()) child = Json::object();
      if (!child.is_object()) throw ConfigError("override key '" + key + "' descends into a non-object");
      node = &child;
    }
    if (parts.empty() || parts.back().empty()) throw ConfigError("override key '" + key + "' is malformed");
    (*node)[parts.back()] = detail::parse_override_value(o.substr(eq + 1));
  }
  detail::require_keys(user, "", {"scenario", "model", "initial", "resolution", "nonunique", "sweep", "outputs"});
  if (!user.contains("scenario")) throw ConfigError("configuration needs a 'scenario'");
  const std::string scenario = detail::get<std::string>(user["scenario"], "scenario");
  if (!scenario_names().count(scenario)) throw ConfigError("unknown scenario '" + scenario + "'");

  Json tree = detail::scenario_defaults(scenario);
  // A user-supplied kappa replaces the default one wholesale.
  if (user.contains("model") && user["model"].is_object() && user["model"].contains("kappa")) {
    tree["model"].erase("kappa");
  }
  tree.merge_patch(user);
  tree["scenario"] = scenario;

  detail::require_keys(tree["model"], "model", {"n", "b", "T", "kappa"});
  detail::require_keys(tree["initial"], "initial", {"type", "amplitude", "sharpness", "center", "seed"});
  detail::require_keys(tree["resolution"], "resolution",
                       {"K_r", "K_theta", "N_radial_quad", "N_angular_quad", "N_timesteps"});
  detail::require_keys(tree["nonunique"], "nonunique", {"g", "scale", "gamma", "pair_scale"});
  detail::require_keys(tree["sweep"], "sweep", {"b_values", "equivalence"});
  detail::require_keys(tree["outputs"], "outputs", {"directory", "report", "timeseries", "trace_profile"});

  RunConfig c;
  c.scenario = scenario;
  c.n = detail::get<int>(tree["model"]["n"], "model.n");
  c.b = detail::get<double>(tree["model"]["b"], "model.b");
  c.T = detail::get<double>(tree["model"]["T"], "model.T");
  c.kappa = tree["model"]["kappa"];
  const Json& r = tree["resolution"];
  c.resolution.K_r = detail::get<int>(r["K_r"], "resolution.K_r");
  c.resolution.K_theta = detail::get<int>(r["K_theta"], "resolution.K_theta");
  c.resolution.n_radial = detail::get<int>(r["N_radial_quad"], "resolution.N_radial_quad");
  c.resolution.n_angular = detail::get<int>(r["N_angular_quad"], "resolution.N_angular_quad");
  c.resolution.n_steps = detail::get<int>(r["N_timesteps"], "resolution.N_timesteps");
  c.resolution.validate();
  c.initial = tree["initial"];
  c.nonunique = tree["nonunique"];
  c.b_values = detail::get<std::vector<double>>(tree["sweep"]["b_values"], "sweep.b_values");
  c.sweep_equivalence = detail::get<bool>(tree["sweep"]["equivalence"], "sweep.equivalence");
  c.directory = detail::get<std::string>(tree["outputs"]["directory"], "outputs.directory");
  c.write_report = detail::get<bool>(tree["outputs"]["report"], "outputs.report");
  c.write_timeseries = detail::get<bool>(tree["outputs"]["timeseries"], "outputs.timeseries");
  c.write_trace = detail::get<bool>(tree["outputs"]["trace_profile"], "outputs.trace_profile");
  c.tree = tree;
  if (c.n != 2) throw ConfigError("scenario drivers support n = 2 only");
  if (!std::isfinite(c.b) || !std::isfinite(c.T)) throw ConfigError("model.b and model.T must be finite");
  if (scenario != "sweep") (void)c.params();  // validates b > 2, T > 0 and kappa
  if (scenario == "sweep" && c.b_values.empty()) throw ConfigError("sweep.b_values must not be empty");
  return c;
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open configuration file '" + path + "'");
  try {
    return Json::parse(in, nullptr, true, true);
  } catch (const Json::exception& e) {
    throw ConfigError("configuration file '" + path + "' is not valid JSON: " + e.what());
  }
}

inline RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {}) {
  return make_config(read_json_file(path), overrides);
}

inline InitialData initial_from(const RunConfig& c, const ModelParams& p) {
  const std::string type = detail::get<std::string>(c.initial["type"], "initial.type");
  if (type == "equilibrium") return initial::equilibrium(p);
  if (type == "perturbed") return initial::perturbed(p, detail::get<double>(c.initial["amplitude"], "initial.amplitude"));
  if (type == "bump") {
    const auto ctr = detail::get<std::vector<double>>(c.initial["center"], "initial.center");
    if (static_cast<int>(ctr.size()) != p.n()) throw ConfigError("initial.center must have n entries");
    Vec m(p.n());
    for (int a = 0; a < p.n(); ++a) m(a) = ctr[static_cast<std::size_t>(a)];
    return initial::bump(p, detail::get<double>(c.initial["sharpness"], "initial.sharpness"), m);
  }
  if (type == "zero") return initial::zero();
  if (type == "negative") return initial::negative(p);
  if (type == "random") return initial::random(p, detail::get<unsigned>(c.initial["seed"], "initial.seed"));
  throw ConfigError("unknown initial type '" + type + "'");
}

inline NonUniqueProblem nonunique_from(const RunConfig& c, double scale_factor = 1.0) {
  const ModelParams p = c.params();
  const std::string g = detail::get<std::string>(c.nonunique["g"], "nonunique.g");
  const double s = detail::get<double>(c.nonunique["scale"], "nonunique.scale");
  std::optional<double> gamma;
  if (!c.nonunique["gamma"].is_null()) gamma = detail::get<double>(c.nonunique["gamma"], "nonunique.gamma");
  return NonUniqueProblem{p, Lift::named(g, s * scale_factor), gamma, c.resolution};
}

// ---------------------------------------------------------------------------
// Serialization

/// 17 significant digits; "nan" and "inf" spelled out.
inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

/// Stride so that at most max_rows rows are written; the last row is always kept.
inline std::vector<std::size_t> thinned_rows(std::size_t count, std::size_t max_rows = 2000) {
  std::vector<std::size_t> rows;
  if (count == 0) return rows;
  const std::size_t stride = (count + max_rows - 1) / max_rows;
  for (std::size_t i = 0; i < count; i += stride) rows.push_back(i);
  if (rows.back() != count - 1) {
    if (rows.size() == max_rows) rows.back() = count - 1;
    else rows.push_back(count - 1);
  }
  return rows;
}

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  void add_column(std::vector<double> values) { cols_.push_back(std::move(values)); }
  void add_text_column(std::vector<std::string> values) { text_[cols_.size()] = std::move(values); cols_.emplace_back(); }

  std::string str(std::size_t max_rows = 2000) const {
    std::ostringstream os;
    for (std::size_t i = 0; i < header_.size(); ++i) os << (i ? "," : "") << header_[i];
    os << "\n";
    std::size_t count = 0;
    for (std::size_t c = 0; c < cols_.size(); ++c) count = std::max(count, text_.count(c) ? text_.at(c).size() : cols_[c].size());
    for (std::size_t r : thinned_rows(count, max_rows)) {
      for (std::size_t c = 0; c < cols_.size(); ++c) {
        if (c) os << ",";
        if (text_.count(c)) os << text_.at(c)[r];
        else os << format_double(cols_[c][r]);
      }
      os << "\n";
    }
    return os.str();
  }

  void write(const std::filesystem::path& path, std::size_t max_rows = 2000) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + path.string() + "'");
    out << str(max_rows);
  }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<double>> cols_;
  std::map<std::size_t, std::vector<std::string>> text_;
};

inline CsvTable trace_table(const TraceProfile& t) {
  CsvTable tab({"r", "d", "trace_norm_f_over_d"});
  tab.add_column(t.radius);
  tab.add_column(t.distance);
  tab.add_column(t.value);
  return tab;
}

inline Json json_number(double x) { return std::isfinite(x) ? Json(x) : Json(format_double(x)); }

inline Json json_series(const std::vector<double>& v) {
  Json a = Json::array();
  for (std::size_t r : thinned_rows(v.size())) a.push_back(json_number(v[r]));
  return a;
}

inline Json json_limit(const BoundaryLimit& l) {
  return {{"value", json_number(l.value)}, {"converged", l.converged}, {"diverged", l.diverged},
          {"aitken_level", l.level},       {"spread", json_number(l.spread)}};
}

inline std::filesystem::path output_dir(const RunConfig& c) {
  const char* root = std::getenv(kOutputRootEnv);
  std::filesystem::path base = root && *root ? std::filesystem::path(root) : std::filesystem::path("out");
  return base / c.directory;
}

// ---------------------------------------------------------------------------
// Runs

struct InvariantResult {
  std::string name;
  bool pass;
  double measured;
  double limit;
};

struct RunOutcome {
  Json report;
  std::vector<InvariantResult> invariants;
  std::vector<std::filesystem::path> files;

  bool ok() const {
    for (const auto& i : invariants) {
      if (!i.pass) return false;
    }
    return true;
  }
};

inline Json metadata(const RunConfig& c) {
  return {{"version", kVersion}, {"config_hash", c.hash()}, {"scenario", c.scenario}, {"config", c.tree},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)}};
}

inline void check_finite(const std::vector<double>& v, const std::string& name) {
  for (double x : v) {
    if (!std::isfinite(x)) throw NumericalError(name, "series '" + name + "' contains a non-finite value");
  }
}

inline RunOutcome run_fpf(const RunConfig& c) {
  const ModelParams p = c.params();
  const FPFProblem prob{p, initial_from(c, p), c.resolution};
  const FPFResult res = solve_fpf(prob);
  const FPFReport& r = res.report;
  for (const auto* s : {&r.mass, &r.min_f, &r.norm_f, &r.norm_w, &r.norm_w_h1, &r.identity_defect}) {
    check_finite(*s, "series");
  }
  RunOutcome out;
  double max_defect = 0.0;
  for (double d : r.identity_defect) max_defect = std::max(max_defect, d);
  out.invariants.push_back({"mass_conservation", r.mass_drift < 1e-8, r.mass_drift, 1e-8});
  out.invariants.push_back({"norm_identity", max_defect < 1e-10, max_defect, 1e-10});
  if (prob.f0.name != "negative") {
    out.invariants.push_back({"positivity", r.min_value >= -1e-6 || r.min_f.front() < -1e-6, r.min_value, -1e-6});
  }
  if (!r.perturbation.empty()) {
    bool mono = true;
    for (std::size_t k = 1; k < r.perturbation.size(); ++k) mono = mono && r.perturbation[k] <= r.perturbation[k - 1];
    out.invariants.push_back({"equilibrium_attraction", mono, r.perturbation.back(), r.perturbation.front()});
  }
  const PositivityReport pos = check_positivity(res);
  Json rep = metadata(c);
  rep["basis_size"] = r.basis_size;
  rep["gram_condition"] = json_number(r.gram_condition);
  rep["projection_error"] = json_number(r.projection_error);
  rep["mass_drift"] = json_number(r.mass_drift);
  rep["min_value"] = json_number(r.min_value);
  rep["positivity"] = {{"min", json_number(pos.min_value)}, {"time_of_min", json_number(pos.time_of_min)},
                       {"negative_initial", pos.negative_initial}, {"pass", pos.pass}};
  rep["C_emp"] = json_number(r.C_emp);
  rep["norm_drift"] = json_number(r.norm_drift);
  rep["weak_residual"] = json_number(r.weak_residual);
  rep["garding"] = {{"C1", json_number(r.garding.C1)}, {"C2", json_number(r.garding.C2)}, {"certified", r.garding.certified}};
  rep["trace"] = {{"limit", json_limit(r.trace.limit)}, {"decay_exponent", json_number(r.trace.decay_exponent)}};
  rep["series"] = {{"t", json_series(r.times)},         {"mass", json_series(r.mass)},
                   {"min_f", json_series(r.min_f)},     {"norm_f_L2_mb2", json_series(r.norm_f)},
                   {"norm_w_L2_beta", json_series(r.norm_w)}, {"norm_w_H1_beta", json_series(r.norm_w_h1)}};
  if (!r.perturbation.empty()) rep["series"]["perturbation_L2_beta"] = json_series(r.perturbation);
  out.report = rep;

  const auto dir = output_dir(c);
  std::filesystem::create_directories(dir);
  if (c.write_timeseries) {
    std::vector<std::string> head = {"t", "mass", "min_f", "norm_f_L2_mb2", "norm_w_L2_beta", "norm_w_H1_beta",
                                     "norm_identity_defect"};
    if (!r.perturbation.empty()) head.push_back("perturbation_L2_beta");
    CsvTable ts(head);
    for (const auto* s : {&r.times, &r.mass, &r.min_f, &r.norm_f, &r.norm_w, &r.norm_w_h1, &r.identity_defect}) ts.add_column(*s);
    if (!r.perturbation.empty()) ts.add_column(r.perturbation);
    ts.write(dir / "timeseries.csv");
    out.files.push_back(dir / "timeseries.csv");
  }
  if (c.write_trace) {
    trace_table(r.trace).write(dir / "trace_profile.csv");
    out.files.push_back(dir / "trace_profile.csv");
  }
  return out;
}

inline RunOutcome run_nonunique(const RunConfig& c) {
  const NonUniqueProblem p1 = nonunique_from(c, 1.0);
  const double pair = detail::get<double>(c.nonunique["pair_scale"], "nonunique.pair_scale");
  const NonUniqueResult r1 = solve_nonunique(p1);
  const NonUniqueProblem p2 = nonunique_from(c, pair);
  SolveOptions lean;
  lean.garding = false;
  const NonUniqueResult r2 = solve_nonunique(p2, lean);
  const std::size_t kT = r1.trajectory.size() - 1;
  const double sep = interior_distance(r1.trajectory, kT, r2.trajectory, kT);
  check_finite(r1.report.interior_norm, "interior_norm");
  check_finite(r1.report.trace.value, "trace_profile");
  RunOutcome out;
  const double delta = 1e3 * kSolverTolerance;
  out.invariants.push_back({"zero_initial_data", r1.report.initial_norm == 0.0, r1.report.initial_norm, 0.0});
  out.invariants.push_back({"weak_residual_g1", r1.report.weak_residual < 1e-6, r1.report.weak_residual, 1e-6});
  out.invariants.push_back({"weak_residual_g2", r2.report.weak_residual < 1e-6, r2.report.weak_residual, 1e-6});
  if (!p1.g.is_zero() && std::abs(pair - 1.0) > 0.0) {
    out.invariants.push_back({"pair_separation", sep > delta, sep, delta});
  }
  Json rep = metadata(c);
  rep["gamma"] = r1.report.gamma;
  rep["basis_size"] = r1.report.basis_size;
  rep["weak_residual"] = {json_number(r1.report.weak_residual), json_number(r2.report.weak_residual)};
  rep["pair_separation"] = json_number(sep);
  rep["separation_threshold"] = delta;
  rep["garding"] = {{"C1", json_number(r1.report.garding.C1)}, {"C2", json_number(r1.report.garding.C2)},
                    {"certified", r1.report.garding.certified}};
  rep["trace"] = {{"g1", json_limit(r1.report.trace.limit)}, {"g2", json_limit(r2.report.trace.limit)}};
  rep["series"] = {{"t", json_series(r1.report.times)}, {"interior_norm_f", json_series(r1.report.interior_norm)},
                   {"norm_w_L2_gamma", json_series(r1.report.norm_w)}};
  out.report = rep;
  const auto dir = output_dir(c);
  std::filesystem::create_directories(dir);
  if (c.write_timeseries) {
    CsvTable ts({"t", "interior_norm_f", "norm_w_L2_gamma", "interior_norm_f_pair"});
    ts.add_column(r1.report.times);
    ts.add_column(r1.report.interior_norm);
    ts.add_column(r1.report.norm_w);
    ts.add_column(r2.report.interior_norm);
    ts.write(dir / "timeseries.csv");
    out.files.push_back(dir / "timeseries.csv");
  }
  if (c.write_trace) {
    CsvTable tt({"r", "d", "trace_norm_f_over_d", "trace_norm_f_over_d_pair"});
    tt.add_column(r1.report.trace.radius);
    tt.add_column(r1.report.trace.distance);
    tt.add_column(r1.report.trace.value);
    tt.add_column(r2.report.trace.value);
    tt.write(dir / "trace_profile.csv");
    out.files.push_back(dir / "trace_profile.csv");
  }
  return out;
}

inline RunOutcome run_sweep(const RunConfig& c) {
  std::optional<Resolution> eqres;
  if (c.sweep_equivalence) eqres = c.resolution;
  const std::vector<SweepRow> rows = threshold_sweep(c.b_values, c.n, eqres);
  RunOutcome out;
  const auto dir = output_dir(c);
  std::filesystem::create_directories(dir);
  CsvTable tab({"b", "status", "beta", "decay_exponent", "expected_exponent", "trace_limit", "equivalence_bound"});
  std::vector<double> b, beta, de, ee, tl, eb;
  std::vector<std::string> st;
  Json jrows = Json::array();
  for (const SweepRow& r : rows) {
    b.push_back(r.b);
    st.push_back(r.status);
    beta.push_back(r.beta);
    de.push_back(r.decay_exponent);
    ee.push_back(r.expected_exponent);
    tl.push_back(r.trace_limit);
    eb.push_back(r.equivalence_bound);
    jrows.push_back({{"b", r.b}, {"status", r.status}, {"decay_exponent", json_number(r.decay_exponent)},
                     {"equivalence_bound", json_number(r.equivalence_bound)}});
    if (r.status == "ok") {
      const double err = std::abs(r.decay_exponent - r.expected_exponent);
      out.invariants.push_back({"decay_exponent_b=" + format_double(r.b), err <= 0.05, r.decay_exponent, r.expected_exponent});
      if (c.write_trace) {
        const auto sub = dir / ("b_" + format_double(r.b));
        std::filesystem::create_directories(sub);
        trace_table(r.profile).write(sub / "trace_profile.csv");
        out.files.push_back(sub / "trace_profile.csv");
      }
    }
  }
  tab.add_column(b);
  tab.add_text_column(st);
  tab.add_column(beta);
  tab.add_column(de);
  tab.add_column(ee);
  tab.add_column(tl);
  tab.add_column(eb);
  tab.write(dir / "sweep.csv");
  out.files.push_back(dir / "sweep.csv");
  Json rep = metadata(c);
  rep["rows"] = jrows;
  out.report = rep;
  return out;
}

// ---------------------------------------------------------------------------
// Check suites

struct SuiteResult {
  std::string name;
  bool pass = true;
  std::vector<std::pair<std::string, double>> measured;
  std::string note;
};

namespace suites {

inline SuiteResult embedding(const RunConfig& c) {
  SuiteResult s{"embedding"};
  const ModelParams p = c.params();
  Resolution lo = c.resolution;
  lo.K_r = std::max(2, lo.K_r / 2);
  lo.K_theta = std::max(2, lo.K_theta / 2);
  for (const auto& [label, mu] : {std::pair<std::string, double>{"beta", p.beta()}, {"b/2", 0.5 * p.b()}}) {
    const double c1 = embedding_family(p, mu, lo).max_ratio;
    const double c2 = embedding_family(p, mu, lo.doubled()).max_ratio;
    const double rel = std::abs(c2 - c1) / c1;
    s.measured.push_back({"C0[" + label + "]", c2});
    s.measured.push_back({"C0_change[" + label + "]", rel});
    s.pass = s.pass && std::isfinite(c2) && rel <= 0.10;
  }
  return s;
}

inline SuiteResult trace(const RunConfig& c) {
  SuiteResult s{"trace"};
  const ModelParams p = c.params();
  const InitialData eq = initial::equilibrium(p);
  const TraceProfile tp = trace_profile(p, eq.f);
  const double expected = 0.5 * p.b() - 1.0;
  s.measured.push_back({"equilibrium_decay_exponent", tp.decay_exponent});
  s.measured.push_back({"equilibrium_trace_limit", tp.limit.value});
  s.pass = std::abs(tp.decay_exponent - expected) <= 0.05 && std::abs(tp.limit.value) < 1e-6;
  return s;
}

inline SuiteResult equivalence(const RunConfig& c) {
  SuiteResult s{"equivalence"};
  Resolution r = c.resolution;
  r.K_r = std::min(r.K_r, 7);
  r.K_theta = std::min(r.K_theta, 7);
  double prev = 0.0;
  for (double b : {std::max(c.b, 4.0), 3.0, 2.5, 2.1}) {
    const ModelParams p(c.n, b, KappaSchedule::zero(c.n), 1.0);
    const double bound = equivalence_family(p, r).max_ratio;
    s.measured.push_back({"bound[b=" + format_double(b) + "]", bound});
    s.pass = s.pass && std::isfinite(bound) && bound >= prev;
    prev = bound;
  }
  return s;
}

inline SuiteResult garding(const RunConfig& c) {
  SuiteResult s{"garding"};
  const ModelParams p = c.params();
  auto sys = make_system(p, p.beta(), c.resolution);
  const GardingConstants g = garding_over_horizon(*sys);
  s.measured.push_back({"C1", g.C1});
  s.measured.push_back({"C2", g.C2});
  s.pass = g.certified && g.C1 > 0.0;
  return s;
}

inline SuiteResult radial_sign(const RunConfig& c) {
  SuiteResult s{"radial_sign"};
  const ModelParams p = c.params();
  const double gam = 0.5 * (std::max(p.beta(), -1.0) + 1.0);
  Resolution r = c.resolution;
  auto sys = make_system(p, gam, r);
  std::mt19937_64 gen(2024);
  std::normal_distribution<double> nd(0.0, 1.0);
  double max_lhs = -std::numeric_limits<double>::infinity();
  double max_rel = 0.0;
  for (int t = 0; t < 100; ++t) {
    Eigen::VectorXd d(sys->size());
    for (Eigen::Index i = 0; i < d.size(); ++i) d(i) = nd(gen);
    const RadialSignPair pr = radial_sign_pair(*sys, d);
    max_lhs = std::max(max_lhs, pr.lhs);
    max_rel = std::max(max_rel, std::abs(pr.lhs - pr.rhs) / std::abs(pr.rhs));
  }
  s.measured.push_back({"max_lhs", max_lhs});
  s.measured.push_back({"max_relative_mismatch", max_rel});
  s.pass = max_lhs <= 1e-10 && max_rel <= 1e-9;
  return s;
}

inline SuiteResult conservation(const RunConfig& c) {
  SuiteResult s{"conservation"};
  const ModelParams p = c.params();
  SolveOptions lean{false, false, false};
  const FPFResult r = solve_fpf({p, initial_from(c, p), c.resolution}, lean);
  s.measured.push_back({"mass_drift", r.report.mass_drift});
  s.pass = r.report.mass_drift < 1e-8;
  return s;
}

inline SuiteResult uniqueness(const RunConfig& c) {
  SuiteResult s{"uniqueness"};
  const ModelParams p = c.params();
  SolveOptions lean{false, false, false};
  const FPFResult r = solve_fpf({p, initial::zero(), c.resolution}, lean);
  const double nrm = r.report.norm_f.back();
  s.measured.push_back({"norm_f_T", nrm});
  s.pass = nrm < 1e-12;
  return s;
}

inline SuiteResult nonuniqueness(const RunConfig& c) {
  SuiteResult s{"nonuniqueness"};
  const ModelParams p = c.params();
  NonUniqueProblem a{p, Lift::named("t|m|^2", 1.0), std::nullopt, Resolution::relaxed()};
  NonUniqueProblem b2 = a;
  b2.g = Lift::named("t|m|^2", 2.0);
  SolveOptions opt{true, true, false};
  const NonUniqueResult r1 = solve_nonunique(a, opt);
  const NonUniqueResult r2 = solve_nonunique(b2, opt);
  const std::size_t kT = r1.trajectory.size() - 1;
  const double sep = interior_distance(r1.trajectory, kT, r2.trajectory, kT);
  s.measured.push_back({"separation", sep});
  s.measured.push_back({"weak_residual", std::max(r1.report.weak_residual, r2.report.weak_residual)});
  s.measured.push_back({"trace_limit_g1", r1.report.trace.limit.value});
  s.measured.push_back({"trace_limit_g2", r2.report.trace.limit.value});
  s.pass = sep > 1e3 * kSolverTolerance && r1.report.weak_residual < 1e-6 && r2.report.weak_residual < 1e-6 &&
           !r1.report.trace.limit.diverged && r1.report.trace.limit.value >= 0.1 * r1.report.trace.value.front() &&
           !r2.report.trace.limit.diverged && r2.report.trace.limit.value >= 0.1 * r2.report.trace.value.front();
  return s;
}

}  // namespace suites

inline std::vector<SuiteResult> run_checks(const RunConfig& c, std::ostream& log) {
  using Fn = SuiteResult (*)(const RunConfig&);
  const std::vector<std::pair<std::string, Fn>> all = {
      {"embedding", suites::embedding},       {"trace", suites::trace},
      {"equivalence", suites::equivalence},   {"garding", suites::garding},
      {"radial_sign", suites::radial_sign},                 {"conservation", suites::conservation},
      {"uniqueness", suites::uniqueness},     {"nonuniqueness", suites::nonuniqueness}};
  std::vector<SuiteResult> out;
  for (const auto& [name, fn] : all) {
    SuiteResult r;
    try {
      r = fn(c);
    } catch (const NumericalError& e) {
      r.name = name;
      r.pass = false;
      r.note = std::string("numerical failure [") + e.invariant() + "]: " + e.what();
    }
    log << (r.pass ? "PASS " : "FAIL ") << r.name;
    for (const auto& [k, v] : r.measured) log << " " << k << "=" << format_double(v);
    if (!r.note.empty()) log << " (" << r.note << ")";
    log << "\n";
    out.push_back(std::move(r));
  }
  return out;
}

/// Executes one configuration and writes its artifacts; returns the process exit code.
inline int execute(const RunConfig& c, const std::string& mode, std::ostream& log, std::ostream& err) {
  if (mode == "check" || (mode == "run" && c.scenario == "check")) {
    const auto res = run_checks(c, log);
    Json j = metadata(c);
    bool ok = true;
    Json js = Json::array();
    for (const auto& r : res) {
      Json m = Json::object();
      for (const auto& [k, v] : r.measured) m[k] = json_number(v);
      js.push_back({{"suite", r.name}, {"pass", r.pass}, {"measured", m}, {"note", r.note}});
      ok = ok && r.pass;
    }
    j["suites"] = js;
    j["pass"] = ok;
    const auto dir = output_dir(c);
    std::filesystem::create_directories(dir);
    std::ofstream(dir / "check.json") << j.dump(2) << "\n";
    if (!ok) {
      err << "failing suites:";
      for (const auto& r : res) {
        if (!r.pass) err << " " << r.name;
      }
      err << "\n";
    }
    return ok ? kExitOk : kExitInvariant;
  }
  RunOutcome out;
  if (mode == "sweep" || c.scenario == "sweep") out = run_sweep(c);
  else if (c.scenario == "nonunique") out = run_nonunique(c);
  else out = run_fpf(c);
  Json inv = Json::array();
  for (const auto& i : out.invariants) {
    inv.push_back({{"name", i.name}, {"pass", i.pass}, {"measured", json_number(i.measured)}, {"limit", json_number(i.limit)}});
  }
  out.report["invariants"] = inv;
  const auto dir = output_dir(c);
  if (c.write_report) {
    std::filesystem::create_directories(dir);
    std::ofstream(dir / "report.json") << out.report.dump(2) << "\n";
  }
  log << "scenario " << c.scenario << " -> " << dir.string() << "\n";
  for (const auto& i : out.invariants) {
    log << (i.pass ? "PASS " : "FAIL ") << i.name << " measured=" << format_double(i.measured)
        << " limit=" << format_double(i.limit) << "\n";
  }
  if (!out.ok()) {
    for (const auto& i : out.invariants) {
      if (!i.pass) err << "invariant failed: " << i.name << "\n";
    }
    return kExitInvariant;
  }
  return kExitOk;
}

/// Maps exceptions to exit codes around execute().
inline int guarded_execute(const std::string& mode, const std::string& path, const std::vector<std::string>& overrides,
                           std::ostream& log, std::ostream& err) {
  try {
    const RunConfig c = load_config(path, overrides);
    return execute(c, mode, log, err);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DomainError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericalError& e) {
    err << "numerical failure [" << e.invariant() << "]: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "numerical failure [unexpected]: " << e.what() << "\n";
    return kExitNumerical;
  }
}

}  // namespace fene

#endif  // FENE_DIAGNOSTICS_HPP_
