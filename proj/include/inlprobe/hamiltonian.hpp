#pragma once

// Rotating-frame Hamiltonian of two chemically shifted, j-coupled protons
// driven by an rf field, its spectrum, and the time scales of the probe.
//
// Units: all rates are angular (s^-1). Simulation units fix the chemical
// shift half-difference d = 1, so one time unit is 1/d seconds.

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "inlprobe/error.hpp"
#include "inlprobe/linalg.hpp"

namespace inlprobe {

inline constexpr double kHbar = 1.054571817e-34;  // J s

/// Sign of the linear generator: dC/dt = -iH'C (Minus) or +iH'C (Plus).
///
/// The two choices are complex conjugates of each other for real initial
/// amplitudes: M, E and the norm coincide while arg det C flips sign. Plus
/// yields the arg det C ~ +pi/2 plateau that the frozen-phase linearization
/// is built around, and is the default.
enum class EvolutionSign { Minus, Plus };

inline double sign_value(EvolutionSign s) { return s == EvolutionSign::Plus ? 1.0 : -1.0; }

struct RotatingFrameParams {
  double nu = 5.0;       // detuning
  double d = 1.0;        // chemical shift half-difference (unit scale)
  double j = 0.0025;     // j-coupling
  double lambda = 10.0;  // rf coupling
  double eta = 0.0;      // collapse-term strength
  EvolutionSign sign = EvolutionSign::Plus;
  double collapse_sign = -1.0;  // +1 or -1; multiplies the collapse term

  void validate() const {
    if (!(d > 0.0)) throw InvalidArgument("RotatingFrameParams: d must be > 0");
    if (!(j >= 0.0)) throw InvalidArgument("RotatingFrameParams: j must be >= 0");
    if (!(lambda >= 0.0)) throw InvalidArgument("RotatingFrameParams: lambda must be >= 0");
    if (!(eta >= 0.0)) throw InvalidArgument("RotatingFrameParams: eta must be >= 0");
    if (!std::isfinite(nu)) throw InvalidArgument("RotatingFrameParams: nu must be finite");
  }

  /// Soft checks of the j << nu <~ lambda regime the probe is designed for.
  std::vector<std::string> regime_warnings() const {
    std::vector<std::string> w;
    if (j > 0.0 && !(j < 0.1 * std::abs(nu))) w.emplace_back("j is not small compared to |nu|");
    if (std::abs(nu) > 2.0 * lambda) w.emplace_back("|nu| exceeds lambda; entanglement is suppressed");
    return w;
  }

  friend bool operator==(const RotatingFrameParams&, const RotatingFrameParams&) = default;
};

/// Reference parameter set: nu = 5, d = 1, lambda = 10, j = 1/400 (1 Hz at d = 400 Hz).
inline RotatingFrameParams canonical_params(double eta = 0.0) {
  return {5.0, 1.0, 0.0025, 10.0, eta, EvolutionSign::Plus, -1.0};
}

struct PhysicalParams {
  double B = 1.0;             // static field, T
  double b = 1e-4;            // rf field, T
  double gamma1 = 0.0;        // rad s^-1 T^-1
  double gamma2 = 0.0;        // rad s^-1 T^-1
  double omega_rf = 0.0;      // rad/s
  double D = 1e-9;            // molecular diameter, m
  double grad = 100.0;        // dB/dz, T/m

  double gamma_bar() const { return 0.5 * (gamma1 + gamma2); }

  /// Throws on non-positive inputs; returns soft warnings.
  std::vector<std::string> validate() const {
    auto pos = [](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v))
        throw InvalidArgument(std::string("PhysicalParams: ") + name + " must be > 0");
    };
    pos(B, "B");
    pos(b, "b");
    pos(gamma1, "gamma1");
    pos(gamma2, "gamma2");
    pos(omega_rf, "omega_rf");
    pos(D, "D");
    if (!(grad >= 0.0)) throw InvalidArgument("PhysicalParams: grad must be >= 0");
    std::vector<std::string> w;
    if (b / B > 0.01) w.emplace_back("b/B > 0.01: rotating-frame reduction assumes b << B");
    return w;
  }
};

/// d in s^-1: half the Larmor frequency difference.
inline double chemical_shift_rate(const PhysicalParams& p) {
  return 0.5 * (p.gamma1 - p.gamma2) * p.B;
}

/// Dimensionless rotating-frame parameters (d = 1). j and eta are not
/// derivable from the lab quantities and are returned as zero.
inline RotatingFrameParams to_rotating_frame(const PhysicalParams& p) {
  p.validate();
  const double w1 = p.gamma1 * p.B;
  const double w2 = p.gamma2 * p.B;
  if (w1 == w2) throw InvalidArgument("to_rotating_frame: equal Larmor frequencies give d = 0");
  if (w1 < w2) throw InvalidArgument("to_rotating_frame: label spins so that gamma1 > gamma2");
  const double wbar = 0.5 * (w1 + w2);
  const double d = 0.5 * (w1 - w2);
  RotatingFrameParams rp;
  rp.nu = (wbar - p.omega_rf) / d;
  rp.d = 1.0;
  rp.lambda = (p.b / p.B) * wbar / d;
  rp.j = 0.0;
  rp.eta = 0.0;
  return rp;
}

/// Real symmetric matrix of H' in the (uu, dd, ud, du) basis.
inline Matrix4 build_hamiltonian(const RotatingFrameParams& rp) {
  const double l = rp.lambda / 2.0;
  const double j = rp.j;
  Matrix4 h;
  h.data = {j - rp.nu, 0.0,       l,           l,
            0.0,       j + rp.nu, l,           l,
            l,         l,         -j + rp.d,   2.0 * j,
            l,         l,         2.0 * j,     -j - rp.d};
  return h;
}

/// d H' / d j, the j-coupling operator in the same basis.
inline Matrix4 coupling_operator() {
  Matrix4 h;
  h.data = {1, 0, 0, 0,
            0, 1, 0, 0,
            0, 0, -1, 2,
            0, 0, 2, -1};
  return h;
}

struct EigenSystem {
  Vector4 values{};  // ascending
  Matrix4 vectors;   // orthonormal columns
  double residual = 0.0;  // max_k |H v_k - value_k v_k|
};

inline EigenSystem eigensystem(const Matrix4& h) {
  if (hermiticity_residual(h) > 1e-12) throw InvalidArgument("eigensystem: matrix is not symmetric");
  const auto eig = jacobi_eigen(h);
  EigenSystem out{eig.values, eig.vectors, 0.0};
  for (std::size_t k = 0; k < 4; ++k) {
    double r2 = 0.0;
    for (std::size_t r = 0; r < 4; ++r) {
      double hv = 0.0;
      for (std::size_t c = 0; c < 4; ++c) hv += h(r, c) * out.vectors(c, k);
      r2 += std::pow(hv - out.values[k] * out.vectors(r, k), 2);
    }
    out.residual = std::max(out.residual, std::sqrt(r2));
  }
  return out;
}

struct KappaPair {
  double kappa0 = 0.0;  // smaller magnitude
  double kappa1 = 0.0;
};

/// Eigenvalue magnitudes of the j = 0 Hamiltonian, whose spectrum is
/// {-kappa1, -kappa0, kappa0, kappa1}.
inline KappaPair kappas(RotatingFrameParams rp) {
  rp.j = 0.0;
  const auto es = eigensystem(build_hamiltonian(rp));
  return {es.values[2], es.values[3]};
}

/// First-order shifted eigenvalues as printed: +-kappa0 -> +-kappa0 + j and
/// +-kappa1 -> +-kappa1 - j. Order: {kappa0+j, -kappa0+j, kappa1-j, -kappa1-j}.
///
/// Note: the exact spectrum of build_hamiltonian moves the other way
/// (kappa0 pair down, kappa1 pair up) with slope ~0.987 j at the canonical
/// parameters; see first_order_eigenvalues().
inline std::array<double, 4> perturbed_eigenvalues(const RotatingFrameParams& rp) {
  const auto k = kappas(rp);
  return {k.kappa0 + rp.j, -k.kappa0 + rp.j, k.kappa1 - rp.j, -k.kappa1 - rp.j};
}

/// Rayleigh-Schrodinger first-order eigenvalues, kappa + j <v|dH/dj|v>,
/// ascending (labels follow the j = 0 ordering).
inline Vector4 first_order_eigenvalues(const RotatingFrameParams& rp) {
  RotatingFrameParams base = rp;
  base.j = 0.0;
  const auto es = eigensystem(build_hamiltonian(base));
  const Matrix4 v = coupling_operator();
  Vector4 out{};
  for (std::size_t k = 0; k < 4; ++k) {
    double shift = 0.0;
    for (std::size_t r = 0; r < 4; ++r)
      for (std::size_t c = 0; c < 4; ++c) shift += es.vectors(r, k) * v(r, c) * es.vectors(c, k);
    out[k] = es.values[k] + rp.j * shift;
  }
  return out;
}

/// Lowest-order entanglement of the beat: (1 + nu^2/lambda^2)^-1 |sin 2jt|.
inline double entanglement_approx(const RotatingFrameParams& rp, double t) {
  const double l2 = rp.lambda * rp.lambda;
  const double n2 = rp.nu * rp.nu;
  const double prefactor = (l2 + n2) > 0.0 ? l2 / (l2 + n2) : 0.0;
  return prefactor * std::abs(std::sin(2.0 * rp.j * t));
}

/// t_e = pi / (2j), in the time unit of j.
inline double entanglement_period(double j) {
  if (!(j > 0.0)) throw InvalidArgument("entanglement_period: j must be > 0");
  return std::numbers::pi / (2.0 * j);
}

/// t_sg = hbar / (mu D dB/dz) for a spin magnetic moment mu (J/T).
inline double stern_gerlach_time_from_moment(double moment, double D, double grad) {
  if (!(moment > 0.0) || !(D > 0.0)) throw InvalidArgument("stern_gerlach_time: moment and D must be > 0");
  if (!(grad >= 0.0)) throw InvalidArgument("stern_gerlach_time: grad must be >= 0");
  if (grad == 0.0) return std::numeric_limits<double>::infinity();
  return kHbar / (moment * D * grad);
}

/// Mean spin-1/2 magnetic moment hbar * gamma_bar / 2 (J/T).
inline double mean_moment(const PhysicalParams& p) { return 0.5 * kHbar * p.gamma_bar(); }

/// Stern-Gerlach separation time in seconds; +inf for a homogeneous field.
inline double stern_gerlach_time(const PhysicalParams& p) {
  p.validate();
  return stern_gerlach_time_from_moment(mean_moment(p), p.D, p.grad);
}

/// t_e / t_sg in seconds. rp.j is in units of d, converted with the
/// chemical shift of `p`. Values in [0.1, 10] count as t_e ~ t_sg.
inline double timing_condition(const RotatingFrameParams& rp, const PhysicalParams& p) {
  if (!(rp.j > 0.0)) throw InvalidArgument("timing_condition: j must be > 0");
  const double d_rate = chemical_shift_rate(p);
  if (!(d_rate > 0.0)) throw InvalidArgument("timing_condition: gamma1 must exceed gamma2");
  const double te_seconds = entanglement_period(rp.j / rp.d) / d_rate;
  return te_seconds / stern_gerlach_time(p);
}

inline bool timing_condition_satisfied(double ratio) { return ratio >= 0.1 && ratio <= 10.0; }

}  // namespace inlprobe
