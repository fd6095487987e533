#pragma once

// Adaptive Dormand-Prince 5(4) integrator with the standard fourth-order
// continuous extension, so requested output times never influence the step
// sequence.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>

#include "inlprobe/error.hpp"

namespace inlprobe {

struct StepperOptions {
  double rel_tol = 1e-9;
  double abs_tol = 1e-12;
  double max_step = std::numeric_limits<double>::infinity();
  double initial_step = 0.0;  // 0 selects automatically
  double min_step = 0.0;      // steps the controller shrinks below this raise StepUnderflow
  long max_steps = 5'000'000;
};

struct StepperStats {
  long accepted = 0;
  long rejected = 0;
  long rhs_evaluations = 0;
  long switches = 0;  // accepted steps after which the step hook changed the right-hand side
  double min_step = std::numeric_limits<double>::infinity();
  double max_step = 0.0;
};

template <std::size_t N>
class DormandPrince {
 public:
  using State = std::array<double, N>;

  explicit DormandPrince(StepperOptions opts) : opts_(opts) {
    if (!(opts_.rel_tol > 0.0) || !(opts_.abs_tol > 0.0) || !(opts_.max_step > 0.0))
      throw InvalidArgument("DormandPrince: tolerances and max_step must be positive");
  }

  /// Integrates y' = rhs(t, y) from times.front() (where y = y0) through
  /// times.back(), calling out(index, t, y) at every requested time.
  template <typename Rhs, typename Output>
  StepperStats integrate(Rhs&& rhs, const State& y0, std::span<const double> times, Output&& out) {
    return integrate(rhs, y0, times, out, [](double, const State&) { return false; });
  }

  /// As above; hook(t, y) runs after every accepted step and returns true if
  /// it switched the right-hand side to a different branch, in which case the
  /// derivative at (t, y) is re-evaluated before the next step.
  template <typename Rhs, typename Output, typename Hook>
  StepperStats integrate(Rhs&& rhs, const State& y0, std::span<const double> times, Output&& out, Hook&& hook) {
    StepperStats stats;
    if (times.empty()) return stats;
    for (std::size_t i = 1; i < times.size(); ++i)
      if (!(times[i] > times[i - 1])) throw InvalidArgument("DormandPrince: output times must increase");

    auto eval = [&](double t, const State& y, State& dy) {
      rhs(t, y, dy);
      ++stats.rhs_evaluations;
    };

    double t = times.front();
    const double t_end = times.back();
    State y = y0;
    State k1, k2, k3, k4, k5, k6, k7, ytmp, ynew;
    eval(t, y, k1);

    std::size_t next = 0;
    out(next++, t, y);
    if (next == times.size()) return stats;

    double h = opts_.initial_step > 0.0 ? opts_.initial_step : initial_step(rhs, t, y, k1, stats);
    h = std::min(h, opts_.max_step);
    double err_prev = 1e-4;

    while (t < t_end) {
      if (stats.accepted + stats.rejected >= opts_.max_steps)
        throw NumericalError("DormandPrince: step budget exhausted at t = " + std::to_string(t));
      bool last = false;
      if (t + h >= t_end || t + 1.01 * h >= t_end) {
        h = t_end - t;
        last = true;
      }
      if (h < std::max(opts_.min_step, 1e-14 * std::max(1.0, std::abs(t))) && !last) throw StepUnderflow(t, h);

      for (std::size_t i = 0; i < N; ++i) ytmp[i] = y[i] + h * a21 * k1[i];
      eval(t + c2 * h, ytmp, k2);
      for (std::size_t i = 0; i < N; ++i) ytmp[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
      eval(t + c3 * h, ytmp, k3);
      for (std::size_t i = 0; i < N; ++i) ytmp[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
      eval(t + c4 * h, ytmp, k4);
      for (std::size_t i = 0; i < N; ++i)
        ytmp[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
      eval(t + c5 * h, ytmp, k5);
      for (std::size_t i = 0; i < N; ++i)
        ytmp[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
      const double t_new = last ? t_end : t + h;
      eval(t_new, ytmp, k6);
      for (std::size_t i = 0; i < N; ++i)
        ynew[i] = y[i] + h * (a71 * k1[i] + a73 * k3[i] + a74 * k4[i] + a75 * k5[i] + a76 * k6[i]);
      eval(t_new, ynew, k7);

      double err = 0.0;
      for (std::size_t i = 0; i < N; ++i) {
        const double e = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
        const double sc = opts_.abs_tol + opts_.rel_tol * std::max(std::abs(y[i]), std::abs(ynew[i]));
        err += (e / sc) * (e / sc);
      }
      err = std::sqrt(err / N);
      if (!std::isfinite(err)) throw NumericalError("DormandPrince: non-finite error estimate at t = " + std::to_string(t));

      if (err <= 1.0) {
        // Dense output coefficients for t in [t, t_new].
        std::array<State, 5> cont;
        for (std::size_t i = 0; i < N; ++i) {
          const double ydiff = ynew[i] - y[i];
          const double bspl = h * k1[i] - ydiff;
          cont[0][i] = y[i];
          cont[1][i] = ydiff;
          cont[2][i] = bspl;
          cont[3][i] = ydiff - h * k7[i] - bspl;
          cont[4][i] = h * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] + d6 * k6[i] + d7 * k7[i]);
        }
        while (next < times.size() && times[next] <= t_new) {
          if (times[next] == t_new) {
            out(next, times[next], ynew);
          } else {
            const double theta = (times[next] - t) / h;
            const double theta1 = 1.0 - theta;
            State yi;
            for (std::size_t i = 0; i < N; ++i)
              yi[i] = cont[0][i] +
                      theta * (cont[1][i] + theta1 * (cont[2][i] + theta * (cont[3][i] + theta1 * cont[4][i])));
            out(next, times[next], yi);
          }
          ++next;
        }

        ++stats.accepted;
        stats.min_step = std::min(stats.min_step, h);
        stats.max_step = std::max(stats.max_step, h);
        t = t_new;
        y = ynew;
        k1 = k7;
        if (last) break;
        if (hook(t, y)) {
          ++stats.switches;
          eval(t, y, k1);
        }

        // PI step-size control (Hairer & Wanner, beta = 0.04).
        double fac = 0.9 * std::pow(err, -0.2 + 0.08) * std::pow(err_prev, 0.04);
        if (err == 0.0) fac = 10.0;
        fac = std::clamp(fac, 0.2, 10.0);
        err_prev = std::max(err, 1e-4);
        h = std::min(h * fac, opts_.max_step);
      } else {
        ++stats.rejected;
        h *= std::max(0.2, 0.9 * std::pow(err, -0.2));
      }
    }
    return stats;
  }

 private:
  template <typename Rhs>
  double initial_step(Rhs& rhs, double t, const State& y, const State& f0, StepperStats& stats) const {
    double d0 = 0.0, d1n = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      const double sc = opts_.abs_tol + opts_.rel_tol * std::abs(y[i]);
      d0 += (y[i] / sc) * (y[i] / sc);
      d1n += (f0[i] / sc) * (f0[i] / sc);
    }
    d0 = std::sqrt(d0 / N);
    d1n = std::sqrt(d1n / N);
    double h0 = (d0 < 1e-5 || d1n < 1e-5) ? 1e-6 : 0.01 * d0 / d1n;
    h0 = std::min(h0, opts_.max_step);

    State y1, f1;
    for (std::size_t i = 0; i < N; ++i) y1[i] = y[i] + h0 * f0[i];
    rhs(t + h0, y1, f1);
    ++stats.rhs_evaluations;
    double d2 = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      const double sc = opts_.abs_tol + opts_.rel_tol * std::abs(y[i]);
      d2 += ((f1[i] - f0[i]) / sc) * ((f1[i] - f0[i]) / sc);
    }
    d2 = std::sqrt(d2 / N) / h0;
    const double dmax = std::max(d1n, d2);
    const double h1 = dmax <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dmax, 0.2);
    return std::min({100.0 * h0, h1, opts_.max_step});
  }

  StepperOptions opts_;

  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                          a65 = -5103.0 / 18656;
  static constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                          a76 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                          e6 = 22.0 / 525, e7 = -1.0 / 40;
  static constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                          d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                          d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;
};

}  // namespace inlprobe
