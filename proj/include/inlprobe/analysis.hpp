#pragma once

// Post-processing of trajectories: envelope of the transverse magnetization,
// its correlation with disentanglement, the collapse-induced envelope
// depression, the collapse-coupling matrix in the Hamiltonian eigenbasis,
// and ensemble averaging over a detuning profile across a sample slab.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "inlprobe/dynamics.hpp"
#include "inlprobe/error.hpp"
#include "inlprobe/hamiltonian.hpp"
#include "inlprobe/linalg.hpp"
#include "inlprobe/spin_state.hpp"

namespace inlprobe {

struct EnvelopeSeries {
  std::vector<double> times;
  std::vector<double> values;
  double window = 0.0;
  std::string method = "sliding-max";
};

/// Four periods of the fastest (kappa1) oscillation.
inline double default_envelope_window(const RotatingFrameParams& rp) {
  return 4.0 * (2.0 * std::numbers::pi / kappas(rp).kappa1);
}

/// Centered sliding-window maximum. Windows are truncated at the ends but
/// always span at least three source samples.
inline EnvelopeSeries envelope(std::span<const double> times, std::span<const double> values, double window) {
  if (times.size() != values.size()) throw InvalidArgument("envelope: times and values differ in length");
  if (times.size() < 3) throw InvalidArgument("envelope: series too short");
  const std::size_t n = times.size();
  const double dt = (times.back() - times.front()) / static_cast<double>(n - 1);
  if (!(dt > 0.0)) throw InvalidArgument("envelope: times must increase");
  for (std::size_t i = 1; i < n; ++i)
    if (std::abs((times[i] - times[i - 1]) - dt) > 1e-6 * dt)
      throw InvalidArgument("envelope: series must be uniformly sampled");
  if (window < 3.0 * dt * (1.0 - 1e-12)) throw InvalidArgument("envelope: window shorter than 3 sample intervals");

  const auto half = static_cast<std::size_t>(std::floor(window / (2.0 * dt) + 1e-9));
  EnvelopeSeries env;
  env.times.assign(times.begin(), times.end());
  env.values.resize(n);
  env.window = window;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t lo = i >= half ? i - half : 0;
    std::size_t hi = std::min(n - 1, i + half);
    while (hi - lo + 1 < 3) {
      if (lo > 0) --lo;
      else ++hi;
    }
    env.values[i] = *std::max_element(values.begin() + static_cast<std::ptrdiff_t>(lo),
                                      values.begin() + static_cast<std::ptrdiff_t>(hi) + 1);
  }
  return env;
}

inline std::vector<double> magnetization_series(const Trajectory& traj) {
  std::vector<double> m;
  m.reserve(traj.size());
  for (const auto& s : traj.samples) m.push_back(s.m);
  return m;
}

inline std::vector<double> disentanglement_series(const Trajectory& traj) {
  std::vector<double> d;
  d.reserve(traj.size());
  for (const auto& s : traj.samples) d.push_back(1.0 - s.e);
  return d;
}

/// Envelope of M(t); window <= 0 selects default_envelope_window().
inline EnvelopeSeries magnetization_envelope(const Trajectory& traj, double window = 0.0) {
  if (window <= 0.0) window = default_envelope_window(traj.params);
  const auto t = traj.times();
  const auto m = magnetization_series(traj);
  return envelope(t, m, window);
}

/// Pearson correlation; nullopt when either input has zero variance.
inline std::optional<double> pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) throw InvalidArgument("pearson: need two equal series of length >= 2");
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa <= 0.0 || sbb <= 0.0) return std::nullopt;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

/// Linear interpolation of (xs, ys) at x, clamped to the end values.
inline double interpolate(std::span<const double> xs, std::span<const double> ys, double x) {
  if (x <= xs.front()) return ys.front();
  if (x >= xs.back()) return ys.back();
  const auto it = std::upper_bound(xs.begin(), xs.end(), x);
  const auto i = static_cast<std::size_t>(it - xs.begin());
  const double w = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
  return ys[i - 1] + w * (ys[i] - ys[i - 1]);
}

/// Correlation between an envelope and a (t, value) series, with the
/// envelope resampled onto the series' times.
inline std::optional<double> correlate(const EnvelopeSeries& env, std::span<const double> times,
                                       std::span<const double> values) {
  if (times.size() != values.size()) throw InvalidArgument("correlate: times and values differ in length");
  std::vector<double> resampled;
  resampled.reserve(times.size());
  for (const double t : times) resampled.push_back(interpolate(env.times, env.values, t));
  return pearson(resampled, values);
}

struct DepressionOptions {
  std::size_t samples = 4096;
  double span_factor = 1.2;  // grid covers [0, span_factor * t_e]
  double window = 0.0;       // 0 = default_envelope_window
  double band_lo = 0.4;      // middle fifth of [0, t_e]
  double band_hi = 0.6;
};

struct DepressionReport {
  double ratio = 1.0;
  double mean_with_collapse = 0.0;
  double mean_without_collapse = 0.0;
  double period = 0.0;
};

namespace detail {

inline double band_mean(const EnvelopeSeries& env, double lo, double hi) {
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < env.times.size(); ++i)
    if (env.times[i] >= lo && env.times[i] <= hi) {
      sum += env.values[i];
      ++count;
    }
  if (count == 0) throw InvalidArgument("envelope band contains no samples");
  return sum / static_cast<double>(count);
}

}  // namespace detail

/// Mean envelope of M over the middle fifth of [0, t_e] with the collapse
/// term, divided by the same without it. Both runs use evolve_inl.
inline DepressionReport envelope_depression(const RotatingFrameParams& rp, const SpinState& s0,
                                            const IntegratorConfig& cfg = {}, const DepressionOptions& opt = {}) {
  if (!(rp.j > 0.0)) throw InvalidArgument("envelope_depression: j must be > 0");
  DepressionReport rep;
  rep.period = entanglement_period(rp.j);
  const auto grid = uniform_grid(0.0, opt.span_factor * rep.period, opt.samples);
  const double window = opt.window > 0.0 ? opt.window : default_envelope_window(rp);

  RotatingFrameParams free = rp;
  free.eta = 0.0;
  const auto with = magnetization_envelope(evolve_inl(rp, s0, grid, cfg), window);
  const auto without = magnetization_envelope(evolve_inl(free, s0, grid, cfg), window);
  rep.mean_with_collapse = detail::band_mean(with, opt.band_lo * rep.period, opt.band_hi * rep.period);
  rep.mean_without_collapse = detail::band_mean(without, opt.band_lo * rep.period, opt.band_hi * rep.period);
  rep.ratio = rep.mean_with_collapse / rep.mean_without_collapse;
  return rep;
}

/// The collapse-term coupling matrix: -1 at (uu, dd), +1 at (dd, uu).
inline Matrix4 upsilon() {
  Matrix4 u;
  u(0, 1) = -1.0;
  u(1, 0) = 1.0;
  return u;
}

struct UpsilonReport {
  Matrix4 transformed;    // V^T Upsilon V
  Matrix4 basis;          // V
  Vector4 eigenvalues{};  // filled by upsilon_eigenbasis, in column order
  double antisymmetry_residual = 0.0;
  double dominance = 0.0;  // |U'_12| / largest other off-diagonal magnitude
};

/// Upsilon transformed to the orthonormal columns of `v`.
inline UpsilonReport upsilon_in_basis(const Matrix4& v) {
  UpsilonReport rep;
  rep.basis = v;
  rep.transformed = v.transposed() * upsilon() * v;
  rep.antisymmetry_residual = antisymmetry_residual(rep.transformed);
  double other = 0.0;
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 4; ++c) {
      if (r == c || (r == 0 && c == 1) || (r == 1 && c == 0)) continue;
      other = std::max(other, std::abs(rep.transformed(r, c)));
    }
  const double main = std::abs(rep.transformed(0, 1));
  rep.dominance = other > 0.0 ? main / other : std::numeric_limits<double>::infinity();
  return rep;
}

/// Upsilon in the eigenbasis of H'. Eigenvectors are ordered by branch:
/// the two kappa0 states first (positive, then negative), then the kappa1
/// states, so entry (0,1) couples the kappa0 pair.
inline UpsilonReport upsilon_eigenbasis(const RotatingFrameParams& rp) {
  const auto es = eigensystem(build_hamiltonian(rp));
  constexpr std::array<std::size_t, 4> order = {2, 1, 3, 0};
  Matrix4 v;
  Vector4 values{};
  for (std::size_t k = 0; k < 4; ++k) {
    values[k] = es.values[order[k]];
    for (std::size_t r = 0; r < 4; ++r) v(r, k) = es.vectors(r, order[k]);
  }
  auto rep = upsilon_in_basis(v);
  rep.eigenvalues = values;
  return rep;
}

struct DetuningNode {
  double nu = 0.0;
  double weight = 0.0;
};

struct DetuningProfile {
  double thickness = 0.0;    // m
  double grad = 0.0;         // T/m
  double gamma_bar = 0.0;    // rad s^-1 T^-1
  double d_rate = 0.0;       // s^-1, converts rates to d units
  double center_nu = 0.0;    // d units
  std::vector<DetuningNode> nodes;
  double lambda = 0.0;              // reference for the in-range fraction
  double fraction_in_range = 0.0;   // share of weight with 1 <= nu <= lambda
};

/// Equal-weight slices of a slab in a linear field gradient:
/// nu(z) = center_nu + gamma_bar * grad * z / d_rate for z in [-L/2, L/2],
/// evaluated at the slice midpoints.
inline DetuningProfile detuning_profile(double thickness, double grad, double gamma_bar, double d_rate,
                                        double center_nu, std::size_t n_nodes, double lambda) {
  if (n_nodes < 2) throw InvalidArgument("detuning_profile: need at least 2 nodes");
  if (!(thickness > 0.0) || !(d_rate > 0.0) || !(gamma_bar > 0.0) || grad < 0.0)
    throw InvalidArgument("detuning_profile: thickness, gamma_bar and d_rate must be > 0, grad >= 0");
  DetuningProfile p{thickness, grad, gamma_bar, d_rate, center_nu, {}, lambda, 0.0};
  const double w = 1.0 / static_cast<double>(n_nodes);
  for (std::size_t k = 0; k < n_nodes; ++k) {
    const double z = -0.5 * thickness + (static_cast<double>(k) + 0.5) * thickness * w;
    const double nu = center_nu + gamma_bar * grad * z / d_rate;
    p.nodes.push_back({nu, w});
    if (nu >= 1.0 && nu <= lambda) p.fraction_in_range += w;
  }
  return p;
}

/// Profile from explicit nodes (weights are renormalized to sum to 1).
inline DetuningProfile profile_from_nodes(std::vector<DetuningNode> nodes, double lambda = 0.0) {
  if (nodes.empty()) throw InvalidArgument("profile_from_nodes: no nodes");
  double total = 0.0;
  for (const auto& n : nodes) {
    if (!(n.weight > 0.0)) throw InvalidArgument("profile_from_nodes: weights must be positive");
    total += n.weight;
  }
  DetuningProfile p;
  p.lambda = lambda;
  for (auto& n : nodes) {
    n.weight /= total;
    if (n.nu >= 1.0 && n.nu <= lambda) p.fraction_in_range += n.weight;
  }
  p.nodes = std::move(nodes);
  return p;
}

enum class Evolver { Linear, Inl, Linearized };

inline const char* to_string(Evolver e) {
  switch (e) {
    case Evolver::Linear: return "linear";
    case Evolver::Inl: return "inl";
    case Evolver::Linearized: return "linearized";
  }
  return "?";
}

inline Trajectory run_evolver(Evolver e, const RotatingFrameParams& rp, const SpinState& s0,
                              std::span<const double> t_grid, const IntegratorConfig& cfg,
                              double frozen_phase = kDefaultFrozenPhase) {
  switch (e) {
    case Evolver::Linear: return evolve_linear(rp, s0, t_grid, cfg.eps_det);
    case Evolver::Inl: return evolve_inl(rp, s0, t_grid, cfg);
    case Evolver::Linearized: return evolve_linearized(rp, s0, t_grid, frozen_phase, cfg.eps_det);
  }
  throw InvalidArgument("unknown evolver");
}

struct AveragedSeries {
  std::vector<double> times;
  std::vector<double> m;  // weighted mean of M
  std::vector<double> e;  // weighted mean of E
  std::vector<Trajectory> nodes;
};

/// Runs one evolution per detuning node and averages M and E with the node
/// weights. Nodes run concurrently on up to `threads` workers (0 = hardware
/// concurrency); the sums are taken in node order so results do not depend
/// on scheduling.
inline AveragedSeries sample_average(const DetuningProfile& profile, const RotatingFrameParams& base,
                                     const SpinState& s0, std::span<const double> t_grid,
                                     const IntegratorConfig& cfg = {}, Evolver method = Evolver::Linear,
                                     double frozen_phase = kDefaultFrozenPhase, unsigned threads = 0) {
  if (profile.nodes.empty()) throw InvalidArgument("sample_average: profile has no nodes");
  const std::size_t n = profile.nodes.size();
  std::vector<Trajectory> runs(n);
  std::vector<std::string> errors(n);
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        RotatingFrameParams rp = base;
        rp.nu = profile.nodes[i].nu;
        runs[i] = run_evolver(method, rp, s0, t_grid, cfg, frozen_phase);
      } catch (const std::exception& ex) {
        errors[i] = ex.what();
      }
    }
  };
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 1; w < threads; ++w) pool.emplace_back(worker);
    worker();
  }

  std::string failures;
  for (std::size_t i = 0; i < n; ++i)
    if (!errors[i].empty()) failures += (failures.empty() ? "" : "; ") + ("node " + std::to_string(i) + ": " + errors[i]);
  if (!failures.empty()) throw NumericalError("sample_average: " + failures);

  AveragedSeries out;
  out.times.assign(t_grid.begin(), t_grid.end());
  out.m.assign(t_grid.size(), 0.0);
  out.e.assign(t_grid.size(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double w = profile.nodes[i].weight;
    for (std::size_t k = 0; k < t_grid.size(); ++k) {
      out.m[k] += w * runs[i].samples[k].m;
      out.e[k] += w * runs[i].samples[k].e;
    }
  }
  out.nodes = std::move(runs);
  return out;
}

}  // namespace inlprobe
