#pragma once

// Scenario configuration (a flat key = value text format), the runner that
// turns a configuration into CSV trajectories and summary reports, and the
// figure presets.
//
// Rotating-frame quantities (nu, d, j, lambda, eta, times) are dimensionless,
// measured in units of the chemical shift rate d. Laboratory quantities carry
// their SI unit in the key name.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "inlprobe/analysis.hpp"
#include "inlprobe/dynamics.hpp"
#include "inlprobe/error.hpp"
#include "inlprobe/hamiltonian.hpp"
#include "inlprobe/spin_state.hpp"

namespace inlprobe {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr std::size_t kFigureSamples = 4096;
inline constexpr double kFigureSpan = 1.2;  // figure grids cover [0, 1.2 t_e]

enum class Mode { Linear, Inl, Linearized, Sweep, Figure };

inline const char* to_string(Mode m) {
  switch (m) {
    case Mode::Linear: return "linear";
    case Mode::Inl: return "inl";
    case Mode::Linearized: return "linearized";
    case Mode::Sweep: return "sweep";
    case Mode::Figure: return "figure";
  }
  return "?";
}

struct SweepSpec {
  std::size_t nodes = 0;  // 0 = no sweep section
  double nu_min = 1.0;
  double nu_max = 10.0;
  double slab_thickness_m = 0.0;  // > 0 derives nodes from the field gradient instead
  Evolver evolver = Evolver::Linear;

  friend bool operator==(const SweepSpec&, const SweepSpec&) = default;
};

struct ScenarioConfig {
  Mode mode = Mode::Linear;
  int figure_id = 0;
  std::string name = "run";
  RotatingFrameParams params = canonical_params();
  IntegratorConfig integrator;
  std::string initial_state = "down-down";  // down-down | up-up | bell | custom
  std::array<cplx, 4> amplitudes{};         // used when initial_state == custom
  double t_start = 0.0;
  double t_end = 0.0;  // 0 = 1.2 t_e
  std::size_t samples = kFigureSamples;
  double frozen_phase_rad = kDefaultFrozenPhase;
  std::optional<PhysicalParams> physical;
  SweepSpec sweep;
  std::string output_dir = ".";

  friend bool operator==(const ScenarioConfig& a, const ScenarioConfig& b) {
    auto phys_eq = [](const std::optional<PhysicalParams>& x, const std::optional<PhysicalParams>& y) {
      if (x.has_value() != y.has_value()) return false;
      if (!x) return true;
      return x->B == y->B && x->b == y->b && x->gamma1 == y->gamma1 && x->gamma2 == y->gamma2 &&
             x->omega_rf == y->omega_rf && x->D == y->D && x->grad == y->grad;
    };
    return a.mode == b.mode && a.figure_id == b.figure_id && a.name == b.name && a.params == b.params &&
           a.integrator == b.integrator && a.initial_state == b.initial_state && a.amplitudes == b.amplitudes &&
           a.t_start == b.t_start && a.t_end == b.t_end && a.samples == b.samples &&
           a.frozen_phase_rad == b.frozen_phase_rad && phys_eq(a.physical, b.physical) && a.sweep == b.sweep &&
           a.output_dir == b.output_dir;
  }
};

namespace detail {

inline std::string fmt17(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline double parse_double(const std::string& field, const std::string& text) {
  if (text.empty()) throw ConfigError(field, "empty value");
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (end != text.c_str() + text.size()) throw ConfigError(field, "not a number: '" + text + "'");
  if (std::isnan(v)) throw ConfigError(field, "NaN is not allowed");
  return v;
}

inline long parse_int(const std::string& field, const std::string& text) {
  if (text.empty()) throw ConfigError(field, "empty value");
  char* end = nullptr;
  const long v = std::strtol(text.c_str(), &end, 10);
  if (end != text.c_str() + text.size()) throw ConfigError(field, "not an integer: '" + text + "'");
  return v;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(trim(cur));
  return out;
}

inline Evolver parse_evolver(const std::string& field, const std::string& v) {
  if (v == "linear") return Evolver::Linear;
  if (v == "inl") return Evolver::Inl;
  if (v == "linearized") return Evolver::Linearized;
  throw ConfigError(field, "expected linear, inl or linearized");
}

}  // namespace detail

/// Named initial states; "custom" uses cfg.amplitudes.
inline SpinState initial_state(const ScenarioConfig& cfg) {
  if (cfg.initial_state == "down-down") return SpinState::down_down();
  if (cfg.initial_state == "up-up") return SpinState::up_up();
  if (cfg.initial_state == "bell") return SpinState::bell();
  if (cfg.initial_state == "custom") return SpinState::from_array(cfg.amplitudes);
  throw ConfigError("initial_state", "unknown state '" + cfg.initial_state + "'");
}

/// Checks cross-field consistency; throws ConfigError naming the field.
inline void validate(const ScenarioConfig& cfg) {
  auto wrap = [](const char* field, auto&& fn) {
    try {
      fn();
    } catch (const InvalidArgument& e) {
      throw ConfigError(field, e.what());
    }
  };
  if (cfg.mode == Mode::Figure && (cfg.figure_id < 1 || cfg.figure_id > 4))
    throw ConfigError("figure_id", "must be 1, 2, 3 or 4");
  if (cfg.name.empty() || cfg.name.find_first_of("/\\ ") != std::string::npos)
    throw ConfigError("name", "must be a non-empty file stem without spaces or slashes");
  wrap("params", [&] { cfg.params.validate(); });
  wrap("integrator", [&] { cfg.integrator.validate(); });
  if (cfg.params.collapse_sign != 1.0 && cfg.params.collapse_sign != -1.0)
    throw ConfigError("collapse_sign", "must be +1 or -1");
  const SpinState s0 = initial_state(cfg);
  if (std::abs(s0.norm() - 1.0) > kInitialNormTolerance) throw ConfigError("amplitudes", "state is not normalized");
  if (!std::isfinite(cfg.t_start)) throw ConfigError("t_start", "must be finite");
  if (cfg.t_end != 0.0 && !(cfg.t_end > cfg.t_start)) throw ConfigError("t_end", "must exceed t_start");
  if (cfg.t_end == 0.0 && !(cfg.params.j > 0.0))
    throw ConfigError("t_end", "required when j = 0 (no entanglement period)");
  if (cfg.samples < 2 && cfg.integrator.sample_interval == 0.0) throw ConfigError("samples", "must be >= 2");
  if (!std::isfinite(cfg.frozen_phase_rad)) throw ConfigError("frozen_phase_rad", "must be finite");
  if (cfg.physical) wrap("physical", [&] { (void)cfg.physical->validate(); });
  if (cfg.mode == Mode::Sweep) {
    if (cfg.sweep.nodes < 1) throw ConfigError("sweep_nodes", "must be >= 1 in sweep mode");
    if (cfg.sweep.slab_thickness_m > 0.0) {
      if (!cfg.physical) throw ConfigError("slab_thickness_m", "needs the laboratory parameters");
      if (cfg.sweep.nodes < 2) throw ConfigError("sweep_nodes", "a slab profile needs >= 2 nodes");
    } else if (cfg.sweep.nu_max < cfg.sweep.nu_min) {
      throw ConfigError("sweep_nu_max", "must be >= sweep_nu_min");
    }
  }
}

/// Parses the key = value format. Blank lines and '#' comments are skipped.
/// Keys outside any section or inside [config] are read; other sections are
/// ignored, so a run manifest re-parses to the configuration it echoes.
inline ScenarioConfig parse_config(std::string_view text) {
  ScenarioConfig cfg;
  std::map<std::string, std::string> kv;
  std::istringstream in{std::string(text)};
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    if (t.front() == '[') {
      if (t.back() != ']') throw ConfigError("line " + std::to_string(lineno), "malformed section header");
      section = detail::trim(std::string_view(t).substr(1, t.size() - 2));
      continue;
    }
    if (!section.empty() && section != "config") continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno), "expected key = value");
    const std::string key = detail::trim(std::string_view(t).substr(0, eq));
    const std::string value = detail::trim(std::string_view(t).substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno), "empty key");
    if (!kv.emplace(key, value).second) throw ConfigError(key, "duplicate key");
  }

  auto take = [&](const char* key) -> std::optional<std::string> {
    const auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    std::string v = it->second;
    kv.erase(it);
    return v;
  };
  auto num = [&](const char* key, double& dst) {
    if (auto v = take(key)) dst = detail::parse_double(key, *v);
  };

  if (auto v = take("mode")) {
    if (*v == "linear") cfg.mode = Mode::Linear;
    else if (*v == "inl") cfg.mode = Mode::Inl;
    else if (*v == "linearized") cfg.mode = Mode::Linearized;
    else if (*v == "sweep") cfg.mode = Mode::Sweep;
    else if (*v == "figure") cfg.mode = Mode::Figure;
    else throw ConfigError("mode", "expected linear, inl, linearized, sweep or figure");
  }
  if (auto v = take("figure_id")) cfg.figure_id = static_cast<int>(detail::parse_int("figure_id", *v));
  if (auto v = take("name")) cfg.name = *v;
  num("nu", cfg.params.nu);
  num("d", cfg.params.d);
  num("j", cfg.params.j);
  num("lambda", cfg.params.lambda);
  num("eta", cfg.params.eta);
  if (auto v = take("evolution_sign")) {
    if (*v == "plus") cfg.params.sign = EvolutionSign::Plus;
    else if (*v == "minus") cfg.params.sign = EvolutionSign::Minus;
    else throw ConfigError("evolution_sign", "expected plus or minus");
  }
  num("collapse_sign", cfg.params.collapse_sign);
  bool state_given = false;
  if (auto v = take("initial_state")) {
    cfg.initial_state = *v;
    state_given = true;
  }
  if (auto v = take("amplitudes")) {
    const auto parts = detail::split(*v, ',');
    if (parts.size() != 8) throw ConfigError("amplitudes", "expected 8 numbers: re,im for c11,c22,c12,c21");
    for (std::size_t k = 0; k < 4; ++k)
      cfg.amplitudes[k] = {detail::parse_double("amplitudes", parts[2 * k]),
                           detail::parse_double("amplitudes", parts[2 * k + 1])};
    if (!state_given) cfg.initial_state = "custom";
  }
  num("t_start", cfg.t_start);
  num("t_end", cfg.t_end);
  if (auto v = take("samples")) {
    const long n = detail::parse_int("samples", *v);
    if (n < 2) throw ConfigError("samples", "must be >= 2");
    cfg.samples = static_cast<std::size_t>(n);
  }
  num("sample_interval", cfg.integrator.sample_interval);
  num("rel_tol", cfg.integrator.rel_tol);
  num("abs_tol", cfg.integrator.abs_tol);
  num("max_step", cfg.integrator.max_step);
  num("min_step", cfg.integrator.min_step);
  num("initial_step", cfg.integrator.initial_step);
  num("eps_det", cfg.integrator.eps_det);
  num("slide_band", cfg.integrator.slide_band);
  if (auto v = take("max_steps")) cfg.integrator.max_steps = detail::parse_int("max_steps", *v);
  num("frozen_phase_rad", cfg.frozen_phase_rad);
  if (auto v = take("output_dir")) cfg.output_dir = *v;

  static constexpr const char* phys_keys[] = {"B_T", "b_T", "gamma1_rad_per_s_T", "gamma2_rad_per_s_T",
                                              "omega_rf_rad_per_s", "D_m", "grad_T_per_m"};
  if (std::any_of(std::begin(phys_keys), std::end(phys_keys), [&](const char* k) { return kv.count(k) > 0; })) {
    PhysicalParams p;
    num("B_T", p.B);
    num("b_T", p.b);
    num("gamma1_rad_per_s_T", p.gamma1);
    num("gamma2_rad_per_s_T", p.gamma2);
    num("omega_rf_rad_per_s", p.omega_rf);
    num("D_m", p.D);
    num("grad_T_per_m", p.grad);
    cfg.physical = p;
  }

  if (auto v = take("sweep_nodes")) {
    const long n = detail::parse_int("sweep_nodes", *v);
    if (n < 1) throw ConfigError("sweep_nodes", "must be >= 1");
    cfg.sweep.nodes = static_cast<std::size_t>(n);
  }
  num("sweep_nu_min", cfg.sweep.nu_min);
  num("sweep_nu_max", cfg.sweep.nu_max);
  num("slab_thickness_m", cfg.sweep.slab_thickness_m);
  if (auto v = take("sweep_evolver")) cfg.sweep.evolver = detail::parse_evolver("sweep_evolver", *v);

  if (!kv.empty()) throw ConfigError(kv.begin()->first, "unknown key");
  validate(cfg);
  return cfg;
}

inline ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

/// Canonical text form; parse_config(to_text(c)) == c.
inline std::string to_text(const ScenarioConfig& c) {
  using detail::fmt17;
  std::ostringstream o;
  o << "mode = " << to_string(c.mode) << '\n';
  if (c.mode == Mode::Figure) o << "figure_id = " << c.figure_id << '\n';
  o << "name = " << c.name << '\n';
  o << "nu = " << fmt17(c.params.nu) << '\n';
  o << "d = " << fmt17(c.params.d) << '\n';
  o << "j = " << fmt17(c.params.j) << '\n';
  o << "lambda = " << fmt17(c.params.lambda) << '\n';
  o << "eta = " << fmt17(c.params.eta) << '\n';
  o << "evolution_sign = " << (c.params.sign == EvolutionSign::Plus ? "plus" : "minus") << '\n';
  o << "collapse_sign = " << fmt17(c.params.collapse_sign) << '\n';
  o << "initial_state = " << c.initial_state << '\n';
  if (c.initial_state == "custom") {
    o << "amplitudes = ";
    for (std::size_t k = 0; k < 4; ++k)
      o << (k ? ", " : "") << fmt17(c.amplitudes[k].real()) << ", " << fmt17(c.amplitudes[k].imag());
    o << '\n';
  }
  o << "t_start = " << fmt17(c.t_start) << '\n';
  o << "t_end = " << fmt17(c.t_end) << '\n';
  o << "samples = " << c.samples << '\n';
  o << "sample_interval = " << fmt17(c.integrator.sample_interval) << '\n';
  o << "rel_tol = " << fmt17(c.integrator.rel_tol) << '\n';
  o << "abs_tol = " << fmt17(c.integrator.abs_tol) << '\n';
  o << "max_step = " << fmt17(c.integrator.max_step) << '\n';
  o << "min_step = " << fmt17(c.integrator.min_step) << '\n';
  o << "initial_step = " << fmt17(c.integrator.initial_step) << '\n';
  o << "eps_det = " << fmt17(c.integrator.eps_det) << '\n';
  o << "slide_band = " << fmt17(c.integrator.slide_band) << '\n';
  o << "max_steps = " << c.integrator.max_steps << '\n';
  o << "frozen_phase_rad = " << fmt17(c.frozen_phase_rad) << '\n';
  o << "output_dir = " << c.output_dir << '\n';
  if (c.physical) {
    const auto& p = *c.physical;
    o << "B_T = " << fmt17(p.B) << '\n';
    o << "b_T = " << fmt17(p.b) << '\n';
    o << "gamma1_rad_per_s_T = " << fmt17(p.gamma1) << '\n';
    o << "gamma2_rad_per_s_T = " << fmt17(p.gamma2) << '\n';
    o << "omega_rf_rad_per_s = " << fmt17(p.omega_rf) << '\n';
    o << "D_m = " << fmt17(p.D) << '\n';
    o << "grad_T_per_m = " << fmt17(p.grad) << '\n';
  }
  if (c.sweep.nodes > 0) {
    o << "sweep_nodes = " << c.sweep.nodes << '\n';
    o << "sweep_nu_min = " << fmt17(c.sweep.nu_min) << '\n';
    o << "sweep_nu_max = " << fmt17(c.sweep.nu_max) << '\n';
    o << "slab_thickness_m = " << fmt17(c.sweep.slab_thickness_m) << '\n';
    o << "sweep_evolver = " << to_string(c.sweep.evolver) << '\n';
  }
  return o.str();
}

/// Preset for figure `id`: nu = 5, d = 1, lambda = 10, initial down,down,
/// grid [0, 1.2 t_e] with t_e = pi / (2 * 0.0025).
///   1: j = 0,      eta = 0       2: j = 0.0025, eta = 0
///   3: j = 0.0025, eta = 0 plus the frozen-phase run at eta = 0.005
///   4: j = 0.0025, eta = 0.005   (with the frozen-phase run for comparison)
inline ScenarioConfig figure_config(int id) {
  if (id < 1 || id > 4) throw ConfigError("figure_id", "must be 1, 2, 3 or 4");
  ScenarioConfig c;
  c.mode = Mode::Figure;
  c.figure_id = id;
  c.name = "figure" + std::to_string(id);
  c.params = canonical_params(id == 4 ? 0.005 : 0.0);
  if (id == 1) c.params.j = 0.0;
  c.t_end = kFigureSpan * entanglement_period(canonical_params().j);
  c.samples = kFigureSamples;
  return c;
}

/// Output grid of a scenario.
inline std::vector<double> time_grid(const ScenarioConfig& c) {
  const double t_end = c.t_end != 0.0 ? c.t_end : c.t_start + kFigureSpan * entanglement_period(c.params.j);
  if (c.integrator.sample_interval > 0.0) {
    const double dt = c.integrator.sample_interval;
    const auto n = static_cast<std::size_t>(std::floor((t_end - c.t_start) / dt + 1e-9)) + 1;
    if (n < 2) throw ConfigError("sample_interval", "longer than the time span");
    std::vector<double> g(n);
    for (std::size_t k = 0; k < n; ++k) g[k] = c.t_start + dt * static_cast<double>(k);
    return g;
  }
  return uniform_grid(c.t_start, t_end, c.samples);
}

struct Constants {
  double kappa0 = 0.0;
  double kappa1 = 0.0;
  std::array<double, 4> shifted{};  // {k0+j, -k0+j, k1-j, -k1-j}
  Vector4 exact{};                   // spectrum of H', ascending
  double t_e = std::numeric_limits<double>::infinity();
  double prefactor = 0.0;  // (1 + nu^2/lambda^2)^-1
  std::optional<double> t_sg_s;
  std::optional<double> d_rate_per_s;
  std::optional<double> timing_ratio;
};

inline Constants compute_constants(const ScenarioConfig& c) {
  Constants k;
  const auto kp = kappas(c.params);
  k.kappa0 = kp.kappa0;
  k.kappa1 = kp.kappa1;
  k.shifted = perturbed_eigenvalues(c.params);
  k.exact = eigensystem(build_hamiltonian(c.params)).values;
  if (c.params.j > 0.0) k.t_e = entanglement_period(c.params.j);
  const double l2 = c.params.lambda * c.params.lambda;
  const double n2 = c.params.nu * c.params.nu;
  k.prefactor = l2 + n2 > 0.0 ? l2 / (l2 + n2) : 0.0;
  if (c.physical) {
    k.t_sg_s = stern_gerlach_time(*c.physical);
    const double dr = chemical_shift_rate(*c.physical);
    if (dr > 0.0) {
      k.d_rate_per_s = dr;
      if (c.params.j > 0.0) k.timing_ratio = timing_condition(c.params, *c.physical);
    }
  }
  return k;
}

inline std::string constants_text(const Constants& k) {
  using detail::fmt17;
  std::ostringstream o;
  o << "kappa0 = " << fmt17(k.kappa0) << '\n';
  o << "kappa1 = " << fmt17(k.kappa1) << '\n';
  o << "shifted_eigenvalues = " << fmt17(k.shifted[0]) << ", " << fmt17(k.shifted[1]) << ", "
    << fmt17(k.shifted[2]) << ", " << fmt17(k.shifted[3]) << '\n';
  o << "exact_eigenvalues = " << fmt17(k.exact[0]) << ", " << fmt17(k.exact[1]) << ", " << fmt17(k.exact[2])
    << ", " << fmt17(k.exact[3]) << '\n';
  o << "t_e = " << fmt17(k.t_e) << '\n';
  o << "prefactor = " << fmt17(k.prefactor) << '\n';
  if (k.t_sg_s) o << "t_sg_s = " << fmt17(*k.t_sg_s) << '\n';
  if (k.d_rate_per_s) o << "d_rate_per_s = " << fmt17(*k.d_rate_per_s) << '\n';
  if (k.timing_ratio) {
    o << "timing_ratio = " << fmt17(*k.timing_ratio) << '\n';
    o << "timing_condition = " << (timing_condition_satisfied(*k.timing_ratio) ? "satisfied" : "violated") << '\n';
  }
  return o.str();
}

inline std::string csv_header() {
  return "t,re_c11,im_c11,re_c22,im_c22,re_c12,im_c12,re_c21,im_c21,norm,M,E,arg_det,arg_det_valid\n";
}

/// Trajectory as CSV text, 17 significant digits.
inline std::string trajectory_csv(const Trajectory& traj) {
  using detail::fmt17;
  std::string out = csv_header();
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const auto& s = traj.samples[i];
    const auto& c = traj.states[i];
    out += fmt17(s.t);
    for (const cplx a : c.to_array()) {
      out += ',' + fmt17(a.real());
      out += ',' + fmt17(a.imag());
    }
    out += ',' + fmt17(s.norm) + ',' + fmt17(s.m) + ',' + fmt17(s.e) + ',' + fmt17(s.arg_det.angle) + ',' +
           (s.arg_det.valid ? '1' : '0') + '\n';
  }
  return out;
}

inline std::string averaged_csv(const AveragedSeries& avg) {
  using detail::fmt17;
  std::string out = "t,M_avg,E_avg\n";
  for (std::size_t i = 0; i < avg.times.size(); ++i)
    out += fmt17(avg.times[i]) + ',' + fmt17(avg.m[i]) + ',' + fmt17(avg.e[i]) + '\n';
  return out;
}

struct RunManifest {
  std::string config_text;
  std::vector<std::filesystem::path> artifacts;
  Constants constants;
  std::string version = kVersion;
  double duration_s = 0.0;
  bool ok = true;
  bool partial = false;
  std::string error;

  /// [config], [artifacts], [constants] and [run] sections. The [config]
  /// section re-parses with parse_config.
  std::string text() const {
    std::ostringstream o;
    o << "[config]\n" << config_text << "\n[artifacts]\n";
    for (std::size_t i = 0; i < artifacts.size(); ++i) o << "artifact" << i << " = " << artifacts[i].string() << '\n';
    o << "\n[constants]\n" << constants_text(constants) << "\n[run]\n";
    o << "version = " << version << '\n';
    o << "status = " << (ok ? "ok" : "numerical-failure") << '\n';
    if (partial) o << "partial_output = true\n";
    if (!error.empty()) o << "error = " << error << '\n';
    o << "duration_s = " << detail::fmt17(duration_s) << '\n';
    return o.str();
  }
};

namespace detail {

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

inline std::string trajectory_summary(const std::string& label, const Trajectory& traj) {
  std::ostringstream o;
  o << "[" << label << "]\n";
  o << "method = " << traj.method << '\n';
  o << "samples = " << traj.size() << '\n';
  if (traj.size() == 0) return o.str();
  std::size_t imax = 0;
  double msum = 0.0;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    if (traj.samples[i].e > traj.samples[imax].e) imax = i;
    msum += traj.samples[i].m;
  }
  o << "E_max = " << fmt17(traj.samples[imax].e) << '\n';
  o << "t_at_E_max = " << fmt17(traj.samples[imax].t) << '\n';
  o << "E_final = " << fmt17(traj.samples.back().e) << '\n';
  o << "M_mean = " << fmt17(msum / static_cast<double>(traj.size())) << '\n';
  o << "max_norm_drift = " << fmt17(traj.max_norm_drift()) << '\n';
  if (traj.params.j > 0.0 && traj.size() >= 2) {
    const auto te = entanglement_period(traj.params.j);
    const double te_sample = interpolate(traj.times(), [&] {
      std::vector<double> e;
      for (const auto& s : traj.samples) e.push_back(s.e);
      return e;
    }(), te);
    if (te <= traj.samples.back().t) o << "E_at_t_e = " << fmt17(te_sample) << '\n';
    const auto sc = self_consistency(traj, kDefaultFrozenPhase, 0.3, 0.05);
    if (sc.first_half_max_dev) o << "arg_det_dev_first_half = " << fmt17(*sc.first_half_max_dev) << '\n';
    if (sc.second_half_max_dev) o << "arg_det_dev_second_half = " << fmt17(*sc.second_half_max_dev) << '\n';
  }
  if (traj.stats.accepted > 0) {
    o << "steps_accepted = " << traj.stats.accepted << '\n';
    o << "steps_rejected = " << traj.stats.rejected << '\n';
  }
  return o.str();
}

struct RunOutput {
  std::vector<std::pair<std::string, Trajectory>> trajectories;  // (file stem, run)
  std::optional<AveragedSeries> average;
  std::vector<std::string> extra;  // additional summary lines
};

inline Trajectory run_single(Mode mode, const ScenarioConfig& c, const std::vector<double>& grid) {
  const SpinState s0 = initial_state(c);
  switch (mode) {
    case Mode::Linear: return evolve_linear(c.params, s0, grid, c.integrator.eps_det);
    case Mode::Inl: return evolve_inl(c.params, s0, grid, c.integrator);
    case Mode::Linearized: return evolve_linearized(c.params, s0, grid, c.frozen_phase_rad, c.integrator.eps_det);
    default: break;
  }
  throw InvalidArgument("run_single: not a single-run mode");
}

inline DetuningProfile sweep_profile(const ScenarioConfig& c) {
  if (c.sweep.slab_thickness_m > 0.0) {
    const auto& p = *c.physical;
    return detuning_profile(c.sweep.slab_thickness_m, p.grad, p.gamma_bar(), chemical_shift_rate(p), c.params.nu,
                            c.sweep.nodes, c.params.lambda);
  }
  std::vector<DetuningNode> nodes;
  const std::size_t n = c.sweep.nodes;
  for (std::size_t k = 0; k < n; ++k) {
    const double f = n == 1 ? 0.5 : static_cast<double>(k) / static_cast<double>(n - 1);
    nodes.push_back({c.sweep.nu_min + f * (c.sweep.nu_max - c.sweep.nu_min), 1.0});
  }
  return profile_from_nodes(std::move(nodes), c.params.lambda);
}

inline void run_figure(const ScenarioConfig& c, const std::vector<double>& grid, RunOutput& out) {
  const SpinState s0 = initial_state(c);
  const std::string stem = c.name;
  switch (c.figure_id) {
    case 1:
      out.trajectories.emplace_back(stem, evolve_linear(c.params, s0, grid, c.integrator.eps_det));
      break;
    case 2: {
      auto traj = evolve_linear(c.params, s0, grid, c.integrator.eps_det);
      const auto env = magnetization_envelope(traj);
      const auto r = correlate(env, traj.times(), disentanglement_series(traj));
      out.extra.push_back("envelope_window = " + fmt17(env.window));
      out.extra.push_back("envelope_disentanglement_correlation = " + (r ? fmt17(*r) : std::string("undefined")));
      out.trajectories.emplace_back(stem, std::move(traj));
      break;
    }
    case 3: {
      RotatingFrameParams lin = c.params;
      lin.eta = 2.0 * c.params.j;
      out.trajectories.emplace_back(stem, evolve_linear(c.params, s0, grid, c.integrator.eps_det));
      out.trajectories.emplace_back(stem + "_linearized",
                                    evolve_linearized(lin, s0, grid, c.frozen_phase_rad, c.integrator.eps_det));
      break;
    }
    case 4: {
      out.trajectories.emplace_back(stem, evolve_inl(c.params, s0, grid, c.integrator));
      out.trajectories.emplace_back(stem + "_linearized",
                                    evolve_linearized(c.params, s0, grid, c.frozen_phase_rad, c.integrator.eps_det));
      DepressionOptions opt;
      opt.samples = grid.size();
      opt.span_factor = (grid.back() - grid.front()) / entanglement_period(c.params.j);
      const auto dep = envelope_depression(c.params, s0, c.integrator, opt);
      out.extra.push_back("envelope_mean_with_collapse = " + fmt17(dep.mean_with_collapse));
      out.extra.push_back("envelope_mean_without_collapse = " + fmt17(dep.mean_without_collapse));
      out.extra.push_back("envelope_depression_ratio = " + fmt17(dep.ratio));
      break;
    }
    default: throw ConfigError("figure_id", "must be 1, 2, 3 or 4");
  }
}

}  // namespace detail

/// Executes a scenario and writes <name>.csv (one per trajectory),
/// <name>_summary.txt and <name>_manifest.txt under cfg.output_dir. CSV and
/// summary files are byte-identical for identical configurations; the
/// manifest additionally records the wall-clock duration.
///
/// Integrator failures are recorded in the returned manifest (ok = false)
/// with whatever samples were produced written as partial output.
inline RunManifest run(const ScenarioConfig& cfg) {
  using detail::fmt17;
  validate(cfg);
  const auto started = std::chrono::steady_clock::now();
  RunManifest man;
  man.config_text = to_text(cfg);
  man.constants = compute_constants(cfg);

  const std::filesystem::path dir(cfg.output_dir);
  std::filesystem::create_directories(dir);
  const auto grid = time_grid(cfg);

  detail::RunOutput out;
  try {
    switch (cfg.mode) {
      case Mode::Linear:
      case Mode::Inl:
      case Mode::Linearized:
        out.trajectories.emplace_back(cfg.name, detail::run_single(cfg.mode, cfg, grid));
        break;
      case Mode::Figure: detail::run_figure(cfg, grid, out); break;
      case Mode::Sweep: {
        const auto profile = detail::sweep_profile(cfg);
        out.average = sample_average(profile, cfg.params, initial_state(cfg), grid, cfg.integrator,
                                     cfg.sweep.evolver, cfg.frozen_phase_rad);
        out.extra.push_back("evolver = " + std::string(to_string(cfg.sweep.evolver)));
        out.extra.push_back("nodes = " + std::to_string(profile.nodes.size()));
        out.extra.push_back("fraction_in_range = " + fmt17(profile.fraction_in_range));
        for (std::size_t k = 0; k < profile.nodes.size(); ++k)
          out.extra.push_back("node" + std::to_string(k) + " = " + fmt17(profile.nodes[k].nu) + ", " +
                              fmt17(profile.nodes[k].weight));
        break;
      }
    }
  } catch (const IntegrationFailure& e) {
    man.ok = false;
    man.partial = true;
    man.error = e.what();
    out.trajectories.emplace_back(cfg.name + "_partial", e.partial());
  } catch (const NumericalError& e) {
    man.ok = false;
    man.error = e.what();
  }

  std::ostringstream summary;
  summary << "[scenario]\nname = " << cfg.name << "\nmode = " << to_string(cfg.mode) << '\n';
  if (cfg.mode == Mode::Figure) summary << "figure_id = " << cfg.figure_id << '\n';
  summary << "status = " << (man.ok ? "ok" : "numerical-failure") << '\n';
  if (!man.error.empty()) summary << "error = " << man.error << '\n';
  summary << "\n[constants]\n" << constants_text(man.constants);
  for (const auto& [stem, traj] : out.trajectories) {
    const auto path = dir / (stem + ".csv");
    detail::write_file(path, trajectory_csv(traj));
    man.artifacts.push_back(path);
    summary << '\n' << detail::trajectory_summary(stem, traj);
  }
  if (out.average) {
    const auto path = dir / (cfg.name + "_average.csv");
    detail::write_file(path, averaged_csv(*out.average));
    man.artifacts.push_back(path);
    const auto peak = std::max_element(out.average->e.begin(), out.average->e.end());
    summary << "\n[average]\nE_avg_max = " << fmt17(*peak) << '\n';
  }
  if (!out.extra.empty()) {
    summary << "\n[analysis]\n";
    for (const auto& line : out.extra) summary << line << '\n';
  }
  const auto summary_path = dir / (cfg.name + "_summary.txt");
  detail::write_file(summary_path, summary.str());
  man.artifacts.push_back(summary_path);

  const auto manifest_path = dir / (cfg.name + "_manifest.txt");
  man.artifacts.push_back(manifest_path);
  man.duration_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  detail::write_file(manifest_path, man.text());
  return man;
}

}  // namespace inlprobe
