#pragma once

// Time evolution of the two-spin state:
//  - evolve_linear:      exact spectral propagation of the linear equation
//  - evolve_inl:         adaptive integration with the collapse term
//                        eta * exp(i arg det C) * Upsilon * C^*
//  - evolve_linearized:  the same equation with arg det C frozen to a constant,
//                        which makes it linear in (Re C, Im C) and exactly
//                        solvable by a matrix exponential

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "inlprobe/error.hpp"
#include "inlprobe/hamiltonian.hpp"
#include "inlprobe/integrator.hpp"
#include "inlprobe/linalg.hpp"
#include "inlprobe/spin_state.hpp"

namespace inlprobe {

inline constexpr double kDefaultFrozenPhase = std::numbers::pi / 2.0;
inline constexpr double kInitialNormTolerance = 1e-8;

struct IntegratorConfig {
  double rel_tol = 1e-11;
  double abs_tol = 1e-14;
  double max_step = 0.5;
  double min_step = 1e-13;
  double eps_det = kDefaultDetThreshold;
  double sample_interval = 0.0;  // used by scenario runners to build grids
  double initial_step = 0.0;     // 0 = automatic
  long max_steps = 20'000'000;   // accepted + rejected steps per run
  double slide_band = 1e-9;      // |det C| below which sliding on det C = 0 may start

  void validate() const {
    if (!(rel_tol > 0.0) || !(abs_tol > 0.0) || !(max_step > 0.0) || !(eps_det > 0.0) || min_step < 0.0)
      throw InvalidArgument("IntegratorConfig: rel_tol, abs_tol, max_step and eps_det must be positive");
    if (sample_interval < 0.0 || initial_step < 0.0)
      throw InvalidArgument("IntegratorConfig: sample_interval and initial_step must be non-negative");
    if (max_steps < 1) throw InvalidArgument("IntegratorConfig: max_steps must be >= 1");
    if (!(slide_band >= eps_det)) throw InvalidArgument("IntegratorConfig: slide_band must be >= eps_det");
  }

  friend bool operator==(const IntegratorConfig&, const IntegratorConfig&) = default;
};

struct Trajectory {
  RotatingFrameParams params;
  std::string method;
  std::vector<ObservableSample> samples;
  std::vector<SpinState> states;
  IntegratorConfig config;
  StepperStats stats;
  double frozen_phase = std::numeric_limits<double>::quiet_NaN();

  std::size_t size() const { return samples.size(); }

  std::vector<double> times() const {
    std::vector<double> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(s.t);
    return out;
  }

  /// Largest |norm - 1| over the samples.
  double max_norm_drift() const {
    double d = 0.0;
    for (const auto& s : samples) d = std::max(d, std::abs(s.norm - 1.0));
    return d;
  }
};

/// Integrator failure that keeps the samples produced before it.
class IntegrationFailure : public NumericalError {
 public:
  IntegrationFailure(const std::string& what, Trajectory partial)
      : NumericalError(what), partial_(std::move(partial)) {}
  const Trajectory& partial() const noexcept { return partial_; }

 private:
  Trajectory partial_;
};

/// Evenly spaced grid of `count` times covering [t0, t1].
inline std::vector<double> uniform_grid(double t0, double t1, std::size_t count) {
  if (count < 2 || !(t1 > t0)) throw InvalidArgument("uniform_grid: need count >= 2 and t1 > t0");
  std::vector<double> g(count);
  const double dt = (t1 - t0) / static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i) g[i] = t0 + dt * static_cast<double>(i);
  g.back() = t1;
  return g;
}

namespace detail {

inline void check_inputs(const RotatingFrameParams& rp, const SpinState& s0, std::span<const double> t_grid) {
  rp.validate();
  if (std::abs(s0.norm() - 1.0) > kInitialNormTolerance)
    throw InvalidArgument("initial state is not normalized");
  if (t_grid.empty()) throw InvalidArgument("time grid is empty");
  for (std::size_t i = 1; i < t_grid.size(); ++i)
    if (!(t_grid[i] > t_grid[i - 1])) throw InvalidArgument("time grid must be strictly increasing");
}

using RealState = std::array<double, 8>;

inline RealState to_real(const SpinState& s) {
  const auto a = s.to_array();
  RealState y{};
  for (std::size_t i = 0; i < 4; ++i) {
    y[i] = a[i].real();
    y[i + 4] = a[i].imag();
  }
  return y;
}

inline SpinState from_real(const RealState& y) {
  return {cplx(y[0], y[4]), cplx(y[1], y[5]), cplx(y[2], y[6]), cplx(y[3], y[7])};
}

inline void record(Trajectory& traj, double t, const SpinState& s) {
  traj.states.push_back(s);
  traj.samples.push_back(observe(t, s, traj.config.eps_det));
}

}  // namespace detail

/// Collapse-term phase factor: exp(i arg det C), or 0 when |det C| < eps_det.
inline cplx collapse_phase(const SpinState& s, double eps_det) {
  const cplx d = s.det();
  const double a = std::abs(d);
  if (a < eps_det) return 0.0;
  return d / a;
}

/// Time derivative of the amplitudes for a given collapse-term phase factor.
/// The collapse term couples only the up,up and down,down amplitudes:
///   dC11 += -eta p conj(C22),  dC22 += eta p conj(C11).
inline std::array<cplx, 4> amplitude_derivative(const Matrix4& h, const RotatingFrameParams& rp,
                                                const SpinState& s, cplx phase) {
  const auto c = s.to_array();
  const cplx gen(0.0, sign_value(rp.sign));
  std::array<cplx, 4> dc{};
  for (std::size_t r = 0; r < 4; ++r) {
    cplx acc = 0.0;
    for (std::size_t k = 0; k < 4; ++k) acc += h(r, k) * c[k];
    dc[r] = gen * acc;
  }
  if (rp.eta != 0.0 && phase != 0.0) {
    const cplx k = rp.collapse_sign * rp.eta * phase;
    dc[0] += k * -std::conj(c[1]);
    dc[1] += k * std::conj(c[0]);
  }
  return dc;
}

namespace detail {

struct SlidingTerms {
  double a = 0.0;  // det C rate per unit phase from the collapse term
  cplx drive;      // d(det C)/dt of the linear part
};

inline SlidingTerms sliding_terms(const RotatingFrameParams& rp, const SpinState& s,
                                  const std::array<cplx, 4>& linear_dc) {
  return {rp.collapse_sign * rp.eta * (std::norm(s.c11) - std::norm(s.c22)),
          linear_dc[0] * s.c22 + s.c11 * linear_dc[1] - linear_dc[2] * s.c21 - s.c12 * linear_dc[3]};
}

// Relaxation rate of det C towards zero while sliding.
inline constexpr double kSlideRelaxRate = 1.0;

// Equivalent control -(L + r det) / a, clipped to the unit disc.
inline cplx equivalent_phase(const SlidingTerms& st, cplx det = 0.0) {
  if (st.a == 0.0) return 0.0;
  cplx p = -(st.drive + kSlideRelaxRate * det) / st.a;
  if (std::abs(p) > 1.0) p /= std::abs(p);
  return p;
}

inline bool can_slide(const SlidingTerms& st) { return st.a < 0.0 && std::abs(st.drive) <= -st.a; }

}  // namespace detail

/// Phase factor of the collapse term as used by evolve_inl.
///
/// Outside the band |det C| < eps_det this is exp(i arg det C). The collapse
/// term changes det C at the rate
///   a p,  a = collapse_sign * eta * (|C11|^2 - |C22|^2),
/// so for a < 0 the surface det C = 0 attracts from both sides. Inside the
/// band the phase is the equivalent control p = -L / a (clipped to
/// |p| <= 1) that cancels the linear drive L of det C, so the state stays on
/// det C = 0 for as long as |L| <= |a|. During a sliding phase the control
/// also relaxes the residual det C at rate kSlideRelaxRate. Where the surface
/// repels (a >= 0) the term is off inside the band.
inline cplx inl_phase(const RotatingFrameParams& rp, const SpinState& s, const std::array<cplx, 4>& linear_dc,
                      double eps_det, bool sliding = false) {
  const cplx d = s.det();
  const double m = std::abs(d);
  const auto st = detail::sliding_terms(rp, s, linear_dc);
  if (sliding) return detail::equivalent_phase(st, d);
  if (m >= eps_det) return d / m;
  if (!(st.a < 0.0)) return 0.0;
  return detail::equivalent_phase(st);
}

/// Exact propagation psi(t) = sum_k exp(+-i kappa_k (t - t0)) <v_k|psi0> v_k,
/// with t0 = t_grid.front().
inline Trajectory evolve_linear(const RotatingFrameParams& rp, const SpinState& s0,
                                std::span<const double> t_grid, double eps_det = kDefaultDetThreshold) {
  detail::check_inputs(rp, s0, t_grid);
  const auto es = eigensystem(build_hamiltonian(rp));
  const auto c0 = s0.to_array();
  std::array<cplx, 4> overlap{};
  for (std::size_t k = 0; k < 4; ++k)
    for (std::size_t r = 0; r < 4; ++r) overlap[k] += es.vectors(r, k) * c0[r];

  Trajectory traj;
  traj.params = rp;
  traj.method = "spectral";
  traj.config.eps_det = eps_det;
  traj.samples.reserve(t_grid.size());
  traj.states.reserve(t_grid.size());
  const double sgn = sign_value(rp.sign);
  for (const double t : t_grid) {
    const double tau = t - t_grid.front();
    std::array<cplx, 4> c{};
    for (std::size_t k = 0; k < 4; ++k) {
      const cplx w = std::polar(1.0, sgn * es.values[k] * tau) * overlap[k];
      for (std::size_t r = 0; r < 4; ++r) c[r] += w * es.vectors(r, k);
    }
    detail::record(traj, t, SpinState::from_array(c));
  }
  return traj;
}

/// Integrates the full nonlinear equation with the collapse phase recomputed
/// at every right-hand-side evaluation (see inl_phase for |det C| < eps_det).
inline Trajectory evolve_inl(const RotatingFrameParams& rp, const SpinState& s0, std::span<const double> t_grid,
                             const IntegratorConfig& cfg = {}) {
  detail::check_inputs(rp, s0, t_grid);
  cfg.validate();
  const Matrix4 h = build_hamiltonian(rp);

  Trajectory traj;
  traj.params = rp;
  traj.method = "dopri5";
  traj.config = cfg;
  traj.samples.reserve(t_grid.size());
  traj.states.reserve(t_grid.size());

  // Sliding along det C = 0 is entered and left only between accepted
  // steps, so the right-hand side is smooth within every step.
  bool sliding = false;
  auto rhs = [&](double, const detail::RealState& y, detail::RealState& dy) {
    const SpinState s = detail::from_real(y);
    auto dc = amplitude_derivative(h, rp, s, 0.0);
    if (rp.eta != 0.0) {
      const cplx k = rp.collapse_sign * rp.eta * inl_phase(rp, s, dc, cfg.eps_det, sliding);
      dc[0] += k * -std::conj(s.c22);
      dc[1] += k * std::conj(s.c11);
    }
    for (std::size_t i = 0; i < 4; ++i) {
      dy[i] = dc[i].real();
      dy[i + 4] = dc[i].imag();
    }
  };
  auto hook = [&](double, const detail::RealState& y) {
    if (rp.eta == 0.0) return false;
    const SpinState s = detail::from_real(y);
    const auto st = detail::sliding_terms(rp, s, amplitude_derivative(h, rp, s, 0.0));
    const bool next = sliding ? detail::can_slide(st) : (std::abs(s.det()) < cfg.slide_band && detail::can_slide(st));
    const bool changed = next != sliding;
    sliding = next;
    return changed;
  };

  DormandPrince<8> stepper({cfg.rel_tol, cfg.abs_tol, cfg.max_step, cfg.initial_step, cfg.min_step, cfg.max_steps});
  try {
    traj.stats = stepper.integrate(
        rhs, detail::to_real(s0), t_grid,
        [&](std::size_t, double t, const detail::RealState& y) { detail::record(traj, t, detail::from_real(y)); },
        hook);
  } catch (const NumericalError& e) {
    throw IntegrationFailure(e.what(), std::move(traj));
  }
  return traj;
}

/// Real 8x8 generator of the frozen-phase system acting on (Re C, Im C).
inline RealMatrix<8> linearized_generator(const RotatingFrameParams& rp, double frozen_phase) {
  const Matrix4 h = build_hamiltonian(rp);
  const double s = sign_value(rp.sign);
  RealMatrix<8> a;
  // d(x + iy)/dt = s i H (x + iy)  =>  dx = -s H y,  dy = s H x
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 4; ++c) {
      a(r, c + 4) = -s * h(r, c);
      a(r + 4, c) = s * h(r, c);
    }
  // eta (p_re + i p_im) applied to -conj(C22) in dC11 and +conj(C11) in dC22
  const double pr = rp.collapse_sign * rp.eta * std::cos(frozen_phase);
  const double pi = rp.collapse_sign * rp.eta * std::sin(frozen_phase);
  constexpr std::size_t x1 = 0, x2 = 1, y1 = 4, y2 = 5;
  a(x1, x2) += -pr;
  a(x1, y2) += -pi;
  a(y1, x2) += -pi;
  a(y1, y2) += pr;
  a(x2, x1) += pr;
  a(x2, y1) += pi;
  a(y2, x1) += pi;
  a(y2, y1) += -pr;
  return a;
}

/// Solves the frozen-phase system exactly: y(t) = exp(A (t - t0)) y(t0).
inline Trajectory evolve_linearized(const RotatingFrameParams& rp, const SpinState& s0,
                                    std::span<const double> t_grid, double frozen_phase = kDefaultFrozenPhase,
                                    double eps_det = kDefaultDetThreshold) {
  detail::check_inputs(rp, s0, t_grid);
  if (!std::isfinite(frozen_phase)) throw InvalidArgument("evolve_linearized: frozen_phase must be finite");
  const RealMatrix<8> gen = linearized_generator(rp, frozen_phase);
  const detail::RealState y0 = detail::to_real(s0);

  Trajectory traj;
  traj.params = rp;
  traj.method = "expm";
  traj.config.eps_det = eps_det;
  traj.frozen_phase = frozen_phase;
  traj.samples.reserve(t_grid.size());
  traj.states.reserve(t_grid.size());
  for (const double t : t_grid) {
    const RealMatrix<8> prop = expm((t - t_grid.front()) * gen);
    detail::record(traj, t, detail::from_real(mat_vec(prop, y0)));
  }
  return traj;
}

struct SelfConsistencyReport {
  std::vector<double> times;
  std::vector<DetPhase> phases;
  double reference = kDefaultFrozenPhase;
  double period = 0.0;                       // t_e used for the split
  std::optional<double> first_half_max_dev;  // over valid samples in (0, t_e/2]
  std::optional<double> second_half_max_dev; // over valid samples in (t_e/2, t_e]
  double bound = 0.3;
  bool indeterminate = false;  // no valid samples at all
  bool passed = false;         // first half within bound
};

/// Deviation of arg det C from `reference` over the two halves of [0, t_e].
/// Samples flagged invalid (|det C| < eps_det) are skipped; `skip_fraction`
/// additionally drops samples within that fraction of t_e of either end.
inline SelfConsistencyReport self_consistency(const Trajectory& traj, double reference = kDefaultFrozenPhase,
                                              double bound = 0.3, double skip_fraction = 0.0) {
  if (traj.samples.size() < 2) throw InvalidArgument("self_consistency: need at least two samples");
  SelfConsistencyReport rep;
  rep.reference = reference;
  rep.bound = bound;
  const double t0 = traj.samples.front().t;
  rep.period = traj.params.j > 0.0 ? entanglement_period(traj.params.j) : traj.samples.back().t - t0;
  const double half = rep.period / 2.0;
  const double lo = skip_fraction * rep.period;
  const double hi = (1.0 - skip_fraction) * rep.period;

  for (const auto& s : traj.samples) {
    rep.times.push_back(s.t);
    rep.phases.push_back(s.arg_det);
    const double tau = s.t - t0;
    if (!s.arg_det.valid || tau <= 0.0 || tau <= lo || tau >= hi || tau > rep.period) continue;
    double dev = std::abs(std::remainder(s.arg_det.angle - reference, 2.0 * std::numbers::pi));
    auto& slot = tau <= half ? rep.first_half_max_dev : rep.second_half_max_dev;
    slot = std::max(slot.value_or(0.0), dev);
  }
  rep.indeterminate = !rep.first_half_max_dev && !rep.second_half_max_dev;
  rep.passed = rep.first_half_max_dev.has_value() && *rep.first_half_max_dev <= bound;
  return rep;
}

}  // namespace inlprobe
