#pragma once

// Two proton spin state in the product basis
//   |1> = up,up   |2> = down,down   |3> = up,down   |4> = down,up
// and the observables used throughout: entanglement 2|det C|, transverse
// magnetization of the total spin, and the determinant phase.

#include <array>
#include <cmath>
#include <numbers>

#include "inlprobe/error.hpp"
#include "inlprobe/linalg.hpp"

namespace inlprobe {

inline constexpr double kDefaultDetThreshold = 1e-12;
inline constexpr double kDefaultNormTolerance = 1e-6;

/// Basis positions of the amplitudes.
enum class Basis : std::size_t { UpUp = 0, DownDown = 1, UpDown = 2, DownUp = 3 };

struct SpinState {
  cplx c11{};  // up,up
  cplx c22{};  // down,down
  cplx c12{};  // up,down
  cplx c21{};  // down,up

  static SpinState down_down() { return {0.0, 1.0, 0.0, 0.0}; }
  static SpinState up_up() { return {1.0, 0.0, 0.0, 0.0}; }
  static SpinState bell() {
    const double h = std::numbers::sqrt2 / 2.0;
    return {h, h, 0.0, 0.0};
  }

  static SpinState from_array(const std::array<cplx, 4>& a) { return {a[0], a[1], a[2], a[3]}; }
  std::array<cplx, 4> to_array() const { return {c11, c22, c12, c21}; }

  /// The 2x2 amplitude matrix C = [[c11, c12], [c21, c22]] determinant.
  cplx det() const { return c11 * c22 - c12 * c21; }

  double norm_squared() const {
    return std::norm(c11) + std::norm(c22) + std::norm(c12) + std::norm(c21);
  }
  double norm() const { return std::sqrt(norm_squared()); }

  friend bool operator==(const SpinState&, const SpinState&) = default;
};

/// 2 |c11 c22 - c12 c21|; computed on the amplitudes as given.
inline double entanglement(const SpinState& s) { return 2.0 * std::abs(s.det()); }

struct DetPhase {
  double angle = 0.0;  // principal value in (-pi, pi]
  bool valid = false;
};

/// Principal argument of det C; invalid (angle 0) when |det C| < eps_det.
inline DetPhase arg_det(const SpinState& s, double eps_det = kDefaultDetThreshold) {
  if (!(eps_det > 0.0)) throw InvalidArgument("arg_det: eps_det must be positive");
  const cplx d = s.det();
  if (std::abs(d) < eps_det) return {0.0, false};
  double a = std::arg(d);
  if (a == -std::numbers::pi) a = std::numbers::pi;
  return {a, true};
}

namespace detail {

// Product-basis index (spin1, spin2) with up = 0, down = 1, mapped to the
// ordering above.
constexpr std::size_t basis_index(std::size_t s1, std::size_t s2) {
  constexpr std::size_t table[2][2] = {{0, 2}, {3, 1}};
  return table[s1][s2];
}

// u1 (x) u2 expressed in the spin basis ordering.
inline ComplexMatrix<4> kron_in_basis(const ComplexMatrix<2>& u1, const ComplexMatrix<2>& u2) {
  ComplexMatrix<4> out;
  for (std::size_t a1 = 0; a1 < 2; ++a1)
    for (std::size_t a2 = 0; a2 < 2; ++a2)
      for (std::size_t b1 = 0; b1 < 2; ++b1)
        for (std::size_t b2 = 0; b2 < 2; ++b2)
          out(basis_index(a1, a2), basis_index(b1, b2)) = u1(a1, b1) * u2(a2, b2);
  return out;
}

inline cplx expectation(const ComplexMatrix<4>& op, const std::array<cplx, 4>& v) {
  cplx acc = 0.0;
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 4; ++c) acc += std::conj(v[r]) * op(r, c) * v[c];
  return acc;
}

}  // namespace detail

namespace pauli {

inline ComplexMatrix<2> identity() { return ComplexMatrix<2>::identity(); }

inline ComplexMatrix<2> x() {
  ComplexMatrix<2> m;
  m(0, 1) = 1.0;
  m(1, 0) = 1.0;
  return m;
}

inline ComplexMatrix<2> y() {
  ComplexMatrix<2> m;
  m(0, 1) = cplx(0.0, -1.0);
  m(1, 0) = cplx(0.0, 1.0);
  return m;
}

inline ComplexMatrix<2> z() {
  ComplexMatrix<2> m;
  m(0, 0) = 1.0;
  m(1, 1) = -1.0;
  return m;
}

/// Total spin component sigma1 + sigma2 for a single-spin Pauli matrix.
inline ComplexMatrix<4> total(const ComplexMatrix<2>& sigma) {
  return detail::kron_in_basis(sigma, identity()) + detail::kron_in_basis(identity(), sigma);
}

}  // namespace pauli

/// M = sqrt(<Sx/2>^2 + <Sy/2>^2) for the total spin S = sigma1 + sigma2.
///
/// Throws InvalidArgument if the state norm deviates from 1 by more than
/// `norm_tol`; states are never renormalized here so drift stays visible.
inline double transverse_magnetization(const SpinState& s, double norm_tol = kDefaultNormTolerance) {
  if (std::abs(s.norm() - 1.0) > norm_tol)
    throw InvalidArgument("transverse_magnetization: state is not normalized (norm = " +
                          std::to_string(s.norm()) + ")");
  static const ComplexMatrix<4> sx = pauli::total(pauli::x());
  static const ComplexMatrix<4> sy = pauli::total(pauli::y());
  const auto v = s.to_array();
  const double mx = detail::expectation(sx, v).real() / 2.0;
  const double my = detail::expectation(sy, v).real() / 2.0;
  return std::hypot(mx, my);
}

/// Largest entry of |U^dagger U - I|.
inline double unitarity_residual(const ComplexMatrix<2>& u) {
  return max_abs(adjoint(u) * u - ComplexMatrix<2>::identity());
}

/// Applies u1 (x) u2, u1 acting on the first spin.
inline SpinState local_unitary(const SpinState& s, const ComplexMatrix<2>& u1,
                               const ComplexMatrix<2>& u2, double tol = 1e-10) {
  if (unitarity_residual(u1) > tol || unitarity_residual(u2) > tol)
    throw InvalidArgument("local_unitary: factor is not unitary");
  return SpinState::from_array(mat_vec(detail::kron_in_basis(u1, u2), s.to_array()));
}

/// One time point of a trajectory.
struct ObservableSample {
  double t = 0.0;
  double m = 0.0;
  double e = 0.0;
  DetPhase arg_det;
  double norm = 0.0;
};

inline ObservableSample observe(double t, const SpinState& s, double eps_det = kDefaultDetThreshold,
                                double norm_tol = kDefaultNormTolerance) {
  return {t, transverse_magnetization(s, norm_tol), entanglement(s), arg_det(s, eps_det), s.norm()};
}

}  // namespace inlprobe
