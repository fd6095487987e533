#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "inlprobe/spin_state.hpp"

using namespace inlprobe;

namespace {

SpinState random_state(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  std::array<cplx, 4> c;
  double n = 0.0;
  for (auto& x : c) {
    x = {g(rng), g(rng)};
    n += std::norm(x);
  }
  for (auto& x : c) x /= std::sqrt(n);
  return SpinState::from_array(c);
}

ComplexMatrix<2> random_su2(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  cplx a(g(rng), g(rng)), b(g(rng), g(rng));
  const double n = std::sqrt(std::norm(a) + std::norm(b));
  a /= n;
  b /= n;
  ComplexMatrix<2> u;
  u(0, 0) = a;
  u(0, 1) = -std::conj(b);
  u(1, 0) = b;
  u(1, 1) = std::conj(a);
  return u;
}

// <S+> = conj(c11)(c12 + c21) + conj(c12 + c21) c22, written out from the
// raising operator acting on each spin.
double magnetization_closed_form(const SpinState& s) {
  const cplx x = s.c12 + s.c21;
  return std::abs(std::conj(s.c11) * x + std::conj(x) * s.c22);
}

SpinState product(cplx a1, cplx b1, cplx a2, cplx b2) {
  // (a1 up + b1 down) (x) (a2 up + b2 down)
  return {a1 * a2, b1 * b2, a1 * b2, b1 * a2};
}

}  // namespace

TEST(SpinState, NamedStates) {
  EXPECT_EQ(SpinState::down_down().c22, cplx(1.0));
  EXPECT_DOUBLE_EQ(SpinState::bell().norm(), 1.0);
  EXPECT_EQ(SpinState::from_array(SpinState::bell().to_array()), SpinState::bell());
}

TEST(Entanglement, ProductStatesAreZero) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  for (int i = 0; i < 20; ++i) {
    cplx a1(g(rng), g(rng)), b1(g(rng), g(rng)), a2(g(rng), g(rng)), b2(g(rng), g(rng));
    const double n1 = std::sqrt(std::norm(a1) + std::norm(b1)), n2 = std::sqrt(std::norm(a2) + std::norm(b2));
    EXPECT_NEAR(entanglement(product(a1 / n1, b1 / n1, a2 / n2, b2 / n2)), 0.0, 1e-15);
  }
  EXPECT_EQ(entanglement(SpinState::down_down()), 0.0);
}

TEST(Entanglement, BellStatesAreOne) {
  const double h = std::numbers::sqrt2 / 2.0;
  EXPECT_NEAR(entanglement(SpinState::bell()), 1.0, 1e-15);
  EXPECT_NEAR(entanglement({0.0, 0.0, h, -h}), 1.0, 1e-15);
  EXPECT_NEAR(entanglement({0.0, 0.0, h, cplx(0, h)}), 1.0, 1e-15);
}

TEST(Entanglement, BoundedByOne) {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 200; ++i) EXPECT_LE(entanglement(random_state(rng)), 1.0 + 1e-15);
}

TEST(Entanglement, LocalUnitaryInvariance) {
  std::mt19937_64 rng(20240611);
  for (int i = 0; i < 100; ++i) {
    const auto s = random_state(rng);
    const auto t = local_unitary(s, random_su2(rng), random_su2(rng));
    EXPECT_NEAR(entanglement(t), entanglement(s), 1e-12);
    EXPECT_NEAR(t.norm(), 1.0, 1e-12);
  }
}

TEST(LocalUnitary, RejectsNonUnitaryFactor) {
  ComplexMatrix<2> m = ComplexMatrix<2>::identity();
  m(0, 0) = 2.0;
  EXPECT_THROW(local_unitary(SpinState::bell(), m, ComplexMatrix<2>::identity()), InvalidArgument);
}

TEST(LocalUnitary, PauliXOnFirstSpinFlipsIt) {
  const auto s = local_unitary(SpinState::down_down(), pauli::x(), pauli::identity());
  EXPECT_EQ(s.c12, cplx(1.0));  // up,down
}

TEST(Magnetization, DownDownIsZero) { EXPECT_EQ(transverse_magnetization(SpinState::down_down()), 0.0); }

TEST(Magnetization, FullyPolarizedAlongX) {
  const double h = std::numbers::sqrt2 / 2.0;
  EXPECT_NEAR(transverse_magnetization(product(h, h, h, h)), 1.0, 1e-15);
  EXPECT_NEAR(transverse_magnetization(product(h, cplx(0, h), h, cplx(0, h))), 1.0, 1e-15);
  EXPECT_NEAR(transverse_magnetization(product(h, h, h, -h)), 0.0, 1e-15);
}

TEST(Magnetization, MatchesClosedForm) {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 200; ++i) {
    const auto s = random_state(rng);
    EXPECT_NEAR(transverse_magnetization(s), magnetization_closed_form(s), 1e-13);
  }
}

TEST(Magnetization, InvariantUnderCommonZRotation) {
  std::mt19937_64 rng(6);
  const double phi = 0.7;
  ComplexMatrix<2> rz;
  rz(0, 0) = std::polar(1.0, -phi / 2);
  rz(1, 1) = std::polar(1.0, phi / 2);
  for (int i = 0; i < 20; ++i) {
    const auto s = random_state(rng);
    EXPECT_NEAR(transverse_magnetization(local_unitary(s, rz, rz)), transverse_magnetization(s), 1e-13);
  }
}

TEST(Magnetization, RejectsUnnormalizedState) {
  EXPECT_THROW(transverse_magnetization({1.0, 1.0, 0.0, 0.0}), InvalidArgument);
  EXPECT_NO_THROW(transverse_magnetization({1.0 + 1e-8, 0.0, 0.0, 0.0}));
}

TEST(ArgDet, PrincipalValues) {
  const double h = std::numbers::sqrt2 / 2.0;
  const auto p = arg_det({cplx(0, h), h, 0.0, 0.0});
  EXPECT_TRUE(p.valid);
  EXPECT_NEAR(p.angle, std::numbers::pi / 2, 1e-15);
  const auto m = arg_det({0.0, 0.0, h, h});  // det = -1/2
  EXPECT_EQ(m.angle, std::numbers::pi);
}

TEST(ArgDet, InvalidBelowThreshold) {
  const auto p = arg_det(SpinState::down_down());
  EXPECT_FALSE(p.valid);
  EXPECT_EQ(p.angle, 0.0);
  EXPECT_THROW(arg_det(SpinState::bell(), 0.0), InvalidArgument);
  EXPECT_FALSE(arg_det({1e-7, 1e-7, 0.0, 1.0}, 1e-12).valid);
  EXPECT_TRUE(arg_det({1e-5, 1e-5, 0.0, 1.0}, 1e-12).valid);
}

TEST(Observe, BundlesObservables) {
  const auto o = observe(2.5, SpinState::bell());
  EXPECT_EQ(o.t, 2.5);
  EXPECT_NEAR(o.e, 1.0, 1e-15);
  EXPECT_NEAR(o.norm, 1.0, 1e-15);
  EXPECT_TRUE(o.arg_det.valid);
}
