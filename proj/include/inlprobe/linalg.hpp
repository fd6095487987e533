#pragma once

// Small fixed-size dense linear algebra: just enough for 4x4 Hamiltonians
// and the 8x8 real generator of the frozen-phase system.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numeric>

#include "inlprobe/error.hpp"

namespace inlprobe {

using cplx = std::complex<double>;

template <typename T, std::size_t N>
struct Matrix {
  std::array<T, N * N> data{};

  static constexpr std::size_t size() { return N; }

  constexpr T& operator()(std::size_t r, std::size_t c) { return data[r * N + c]; }
  constexpr const T& operator()(std::size_t r, std::size_t c) const { return data[r * N + c]; }

  static constexpr Matrix identity() {
    Matrix m;
    for (std::size_t i = 0; i < N; ++i) m(i, i) = T{1};
    return m;
  }

  constexpr Matrix transposed() const {
    Matrix m;
    for (std::size_t r = 0; r < N; ++r)
      for (std::size_t c = 0; c < N; ++c) m(c, r) = (*this)(r, c);
    return m;
  }

  friend constexpr Matrix operator*(const Matrix& a, const Matrix& b) {
    Matrix m;
    for (std::size_t r = 0; r < N; ++r)
      for (std::size_t k = 0; k < N; ++k) {
        const T ark = a(r, k);
        for (std::size_t c = 0; c < N; ++c) m(r, c) += ark * b(k, c);
      }
    return m;
  }

  friend constexpr Matrix operator+(Matrix a, const Matrix& b) {
    for (std::size_t i = 0; i < N * N; ++i) a.data[i] += b.data[i];
    return a;
  }

  friend constexpr Matrix operator-(Matrix a, const Matrix& b) {
    for (std::size_t i = 0; i < N * N; ++i) a.data[i] -= b.data[i];
    return a;
  }

  friend constexpr Matrix operator*(T s, Matrix a) {
    for (auto& v : a.data) v *= s;
    return a;
  }

  friend constexpr bool operator==(const Matrix&, const Matrix&) = default;
};

template <std::size_t N>
using RealMatrix = Matrix<double, N>;
template <std::size_t N>
using ComplexMatrix = Matrix<cplx, N>;

using Matrix4 = RealMatrix<4>;
using Vector4 = std::array<double, 4>;

template <typename T, std::size_t N>
std::array<T, N> mat_vec(const Matrix<T, N>& m, const std::array<T, N>& v) {
  std::array<T, N> out{};
  for (std::size_t r = 0; r < N; ++r)
    for (std::size_t c = 0; c < N; ++c) out[r] += m(r, c) * v[c];
  return out;
}

template <typename T, std::size_t N>
ComplexMatrix<N> adjoint(const Matrix<T, N>& m) {
  ComplexMatrix<N> out;
  for (std::size_t r = 0; r < N; ++r)
    for (std::size_t c = 0; c < N; ++c) out(c, r) = std::conj(cplx(m(r, c)));
  return out;
}

/// Frobenius norm.
template <typename T, std::size_t N>
double frobenius_norm(const Matrix<T, N>& m) {
  double s = 0.0;
  for (const auto& v : m.data) s += std::norm(v);
  return std::sqrt(s);
}

template <typename T, std::size_t N>
double max_abs(const Matrix<T, N>& m) {
  double s = 0.0;
  for (const auto& v : m.data) s = std::max(s, std::abs(v));
  return s;
}

/// Largest |m(r,c) - conj(m(c,r))|.
template <typename T, std::size_t N>
double hermiticity_residual(const Matrix<T, N>& m) {
  double s = 0.0;
  for (std::size_t r = 0; r < N; ++r)
    for (std::size_t c = 0; c < N; ++c)
      s = std::max(s, std::abs(cplx(m(r, c)) - std::conj(cplx(m(c, r)))));
  return s;
}

/// Largest |m(r,c) + m(c,r)|.
template <std::size_t N>
double antisymmetry_residual(const RealMatrix<N>& m) {
  double s = 0.0;
  for (std::size_t r = 0; r < N; ++r)
    for (std::size_t c = 0; c < N; ++c) s = std::max(s, std::abs(m(r, c) + m(c, r)));
  return s;
}

template <std::size_t N>
struct SymmetricEigen {
  std::array<double, N> values{};  // ascending
  RealMatrix<N> vectors;           // column k is the eigenvector of values[k]
  int sweeps = 0;
};

/// Cyclic Jacobi diagonalization of a real symmetric matrix.
///
/// Sweeps over all off-diagonal pairs until the off-diagonal Frobenius norm
/// falls below `off_tol`. Eigenvalues are returned ascending with the
/// eigenvector columns permuted to match; each column is sign-normalized so
/// its largest-magnitude component is positive, which keeps the output
/// deterministic.
template <std::size_t N>
SymmetricEigen<N> jacobi_eigen(RealMatrix<N> a, double off_tol = 1e-12, int max_sweeps = 100) {
  RealMatrix<N> v = RealMatrix<N>::identity();
  auto off_norm = [&a] {
    double s = 0.0;
    for (std::size_t r = 0; r < N; ++r)
      for (std::size_t c = 0; c < N; ++c)
        if (r != c) s += a(r, c) * a(r, c);
    return std::sqrt(s);
  };

  int sweep = 0;
  for (; sweep < max_sweeps && off_norm() >= off_tol; ++sweep) {
    for (std::size_t p = 0; p + 1 < N; ++p) {
      for (std::size_t q = p + 1; q < N; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < N; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < N; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < N; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  if (off_norm() >= off_tol) throw NumericalError("Jacobi eigensolver did not converge");

  std::array<std::size_t, N> order;
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&a](std::size_t x, std::size_t y) { return a(x, x) < a(y, y); });

  SymmetricEigen<N> out;
  out.sweeps = sweep;
  for (std::size_t k = 0; k < N; ++k) {
    const std::size_t src = order[k];
    out.values[k] = a(src, src);
    std::size_t big = 0;
    for (std::size_t r = 1; r < N; ++r)
      if (std::abs(v(r, src)) > std::abs(v(big, src))) big = r;
    const double sign = v(big, src) < 0.0 ? -1.0 : 1.0;
    for (std::size_t r = 0; r < N; ++r) out.vectors(r, k) = sign * v(r, src);
  }
  return out;
}

/// exp(A) by scaling and squaring with a truncated Taylor series.
template <std::size_t N>
RealMatrix<N> expm(const RealMatrix<N>& a) {
  double norm1 = 0.0;
  for (std::size_t c = 0; c < N; ++c) {
    double col = 0.0;
    for (std::size_t r = 0; r < N; ++r) col += std::abs(a(r, c));
    norm1 = std::max(norm1, col);
  }
  if (!std::isfinite(norm1)) throw NumericalError("matrix exponential of a non-finite matrix");

  int squarings = 0;
  if (norm1 > 0.25) squarings = static_cast<int>(std::ceil(std::log2(norm1 / 0.25)));
  const RealMatrix<N> scaled = std::ldexp(1.0, -squarings) * a;

  // ||scaled|| <= 1/4, so 18 terms put the truncation error well below
  // double precision.
  RealMatrix<N> result = RealMatrix<N>::identity();
  RealMatrix<N> term = RealMatrix<N>::identity();
  for (int k = 1; k <= 18; ++k) {
    term = (1.0 / k) * (term * scaled);
    result = result + term;
  }
  for (int s = 0; s < squarings; ++s) result = result * result;
  return result;
}

}  // namespace inlprobe
