#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "inlprobe/hamiltonian.hpp"

using namespace inlprobe;

namespace {

// Roots of x^4 - (nu^2 + lambda^2 + d^2) x^2 + nu^2 d^2 = 0.
std::pair<double, double> quartic_roots(double nu, double d, double lambda) {
  const double s = nu * nu + lambda * lambda + d * d;
  const double p = nu * nu * d * d;
  const double disc = std::sqrt(s * s - 4.0 * p);
  return {std::sqrt(2.0 * p / (s + disc)), std::sqrt(0.5 * (s + disc))};
}

double trace(const Matrix4& m) { return m(0, 0) + m(1, 1) + m(2, 2) + m(3, 3); }

}  // namespace

TEST(Hamiltonian, SymmetricAndTraceless) {
  const auto h = build_hamiltonian(canonical_params());
  EXPECT_EQ(hermiticity_residual(h), 0.0);
  EXPECT_NEAR(trace(h), 0.0, 1e-15);
}

TEST(Hamiltonian, ReferenceEntries) {
  const auto rp = canonical_params();
  const auto h = build_hamiltonian(rp);
  EXPECT_DOUBLE_EQ(h(0, 0), 0.0025 - 5.0);
  EXPECT_DOUBLE_EQ(h(1, 1), 0.0025 + 5.0);
  EXPECT_DOUBLE_EQ(h(2, 2), -0.0025 + 1.0);
  EXPECT_DOUBLE_EQ(h(3, 3), -0.0025 - 1.0);
  EXPECT_DOUBLE_EQ(h(2, 3), 0.005);
  EXPECT_DOUBLE_EQ(h(0, 2), 5.0);
  EXPECT_EQ(h(0, 1), 0.0);
}

TEST(Hamiltonian, CouplingOperatorIsDerivative) {
  auto a = canonical_params();
  auto b = a;
  b.j += 0.125;
  EXPECT_LT(max_abs(build_hamiltonian(b) - build_hamiltonian(a) - 0.125 * coupling_operator()), 1e-14);
}

TEST(Spectrum, ZeroCouplingMatchesQuartic) {
  const auto [k0, k1] = quartic_roots(5.0, 1.0, 10.0);
  EXPECT_NEAR(k0, 0.44578709, 1e-8);
  EXPECT_NEAR(k1, 11.2161167, 1e-7);
  auto rp = canonical_params();
  rp.j = 0.0;
  const auto es = eigensystem(build_hamiltonian(rp));
  EXPECT_NEAR(es.values[0], -k1, 1e-9);
  EXPECT_NEAR(es.values[1], -k0, 1e-9);
  EXPECT_NEAR(es.values[2], k0, 1e-9);
  EXPECT_NEAR(es.values[3], k1, 1e-9);
  EXPECT_LT(es.residual, 1e-12);
  const auto k = kappas(canonical_params());
  EXPECT_NEAR(k.kappa0, k0, 1e-9);
  EXPECT_NEAR(k.kappa1, k1, 1e-9);
}

TEST(Spectrum, QuarticHoldsForRandomParameters) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(0.1, 20.0);
  for (int i = 0; i < 100; ++i) {
    RotatingFrameParams rp{u(rng), u(rng), 0.0, u(rng)};
    const auto [k0, k1] = quartic_roots(rp.nu, rp.d, rp.lambda);
    const auto k = kappas(rp);
    EXPECT_NEAR(k.kappa0, k0, 1e-9 * k1);
    EXPECT_NEAR(k.kappa1, k1, 1e-9 * k1);
  }
}

TEST(Spectrum, TrivialCouplingGivesDiagonal) {
  RotatingFrameParams rp{3.0, 1.0, 0.0, 0.0};
  const auto es = eigensystem(build_hamiltonian(rp));
  EXPECT_EQ(es.values, (Vector4{-3.0, -1.0, 1.0, 3.0}));
}

TEST(Spectrum, RejectsNonSymmetric) {
  Matrix4 m;
  m(0, 1) = 1.0;
  EXPECT_THROW(eigensystem(m), InvalidArgument);
}

TEST(ShiftedEigenvalues, LiteralOrderAndValues) {
  const auto rp = canonical_params();
  const auto k = kappas(rp);
  const auto s = perturbed_eigenvalues(rp);
  EXPECT_DOUBLE_EQ(s[0], k.kappa0 + 0.0025);
  EXPECT_DOUBLE_EQ(s[1], -k.kappa0 + 0.0025);
  EXPECT_DOUBLE_EQ(s[2], k.kappa1 - 0.0025);
  EXPECT_DOUBLE_EQ(s[3], -k.kappa1 - 0.0025);
  // The two kappa0 levels stay 2 kappa0 apart, the beat being set by how
  // each pair moves relative to the other.
  EXPECT_NEAR(s[0] - s[1], 2.0 * k.kappa0, 1e-15);
}

TEST(ShiftedEigenvalues, ExactShiftsAtReferenceParameters) {
  // Measured first-order shift coefficients of the exact spectrum: the
  // kappa0 pair moves by about -0.987 j and the kappa1 pair by +0.987 j.
  auto rp = canonical_params();
  rp.j = 1e-6;
  const auto exact = eigensystem(build_hamiltonian(rp)).values;
  const auto k = kappas(rp);
  EXPECT_NEAR((exact[2] - k.kappa0) / rp.j, -0.987, 2e-3);
  EXPECT_NEAR((exact[1] + k.kappa0) / rp.j, -0.987, 2e-3);
  EXPECT_NEAR((exact[3] - k.kappa1) / rp.j, 0.987, 2e-3);
  EXPECT_NEAR((exact[0] + k.kappa1) / rp.j, 0.987, 2e-3);
}

TEST(ShiftedEigenvalues, FirstOrderPerturbationConvergesQuadratically) {
  std::vector<double> err;
  for (double j : {0.001, 0.002, 0.004}) {
    auto rp = canonical_params();
    rp.j = j;
    const auto exact = eigensystem(build_hamiltonian(rp)).values;
    const auto first = first_order_eigenvalues(rp);
    double e = 0.0;
    for (std::size_t i = 0; i < 4; ++i) e = std::max(e, std::abs(exact[i] - first[i]));
    err.push_back(e);
  }
  const double slope = std::log(err[2] / err[0]) / std::log(4.0);
  EXPECT_NEAR(slope, 2.0, 0.3);
}

TEST(EntanglementApprox, PeakAndPeriod) {
  const auto rp = canonical_params();
  EXPECT_NEAR(entanglement_approx(rp, std::numbers::pi / (4 * rp.j)), 0.8, 1e-12);
  EXPECT_NEAR(entanglement_approx(rp, entanglement_period(rp.j)), 0.0, 1e-12);
  RotatingFrameParams zero{0.0, 1.0, 0.0025, 0.0};
  EXPECT_EQ(entanglement_approx(zero, 100.0), 0.0);
}

TEST(EntanglementPeriod, Values) {
  EXPECT_NEAR(entanglement_period(0.0025), 628.3185307, 1e-6);
  EXPECT_NEAR(entanglement_period(1.0), 1.5707963, 1e-7);
  EXPECT_THROW(entanglement_period(0.0), InvalidArgument);
}

TEST(SternGerlach, ProtonMoment) {
  // mu = hbar gamma / 2 for a spin-1/2 with gamma = 2.675e8 rad/(s T)
  const double mu = 0.5 * kHbar * 2.6752218744e8;
  EXPECT_NEAR(mu, 1.41060679736e-26, 1e-34);
  const double t = stern_gerlach_time_from_moment(mu, 1e-9, 100.0);
  EXPECT_NEAR(t, 0.074759, 1e-5);
  EXPECT_GE(t, 0.01);
  EXPECT_LE(t, 10.0);
}

TEST(SternGerlach, HomogeneousFieldNeverSeparates) {
  EXPECT_TRUE(std::isinf(stern_gerlach_time_from_moment(1e-26, 1e-9, 0.0)));
  EXPECT_THROW(stern_gerlach_time_from_moment(0.0, 1e-9, 1.0), InvalidArgument);
  EXPECT_THROW(stern_gerlach_time_from_moment(1e-26, 1e-9, -1.0), InvalidArgument);
}

namespace {

PhysicalParams proton_pair(double D) {
  PhysicalParams p;
  p.gamma2 = 2.6752218744e8;
  p.gamma1 = p.gamma2 * (1.0 + 2e-5);
  p.B = 1.0;
  p.b = 1e-4;
  const double wbar = p.gamma_bar() * p.B;
  const double d = 0.5 * (p.gamma1 - p.gamma2) * p.B;
  p.omega_rf = wbar - 5.0 * d;
  p.D = D;
  p.grad = 100.0;
  return p;
}

}  // namespace

TEST(RotatingFrame, ReferenceLabParameters) {
  const auto rp = to_rotating_frame(proton_pair(1e-9));
  EXPECT_NEAR(rp.nu, 5.0, 1e-6);
  EXPECT_EQ(rp.d, 1.0);
  // lambda = (b/B) wbar / d = 1e-4 (1 + 1e-5) / 1e-5
  EXPECT_NEAR(rp.lambda, 1e-4 * (1.0 + 1e-5) / 1e-5, 1e-6);
  EXPECT_EQ(rp.j, 0.0);
}

TEST(RotatingFrame, RejectsDegenerateOrSwappedLabels) {
  auto p = proton_pair(1e-9);
  p.gamma1 = p.gamma2;
  EXPECT_THROW(to_rotating_frame(p), InvalidArgument);
  std::swap(p.gamma1, p.gamma2);
  p.gamma1 = p.gamma2 * 0.9;
  EXPECT_THROW(to_rotating_frame(p), InvalidArgument);
}

TEST(PhysicalParams, ValidationAndWarnings) {
  auto p = proton_pair(1e-9);
  EXPECT_TRUE(p.validate().empty());
  p.b = 0.1;
  EXPECT_EQ(p.validate().size(), 1u);
  p.D = 0.0;
  EXPECT_THROW(p.validate(), InvalidArgument);
}

TEST(TimingCondition, RatioFromIndependentFormula) {
  const auto p = proton_pair(3e-10);
  const auto rp = canonical_params();
  const double d_rate = 0.5 * (p.gamma1 - p.gamma2) * p.B;
  const double te = std::numbers::pi / (2.0 * rp.j * d_rate);
  const double tsg = 2.0 / (p.gamma_bar() * p.D * p.grad);
  EXPECT_NEAR(timing_condition(rp, p), te / tsg, 1e-9 * te / tsg);
  EXPECT_TRUE(timing_condition_satisfied(timing_condition(rp, p)));
  EXPECT_FALSE(timing_condition_satisfied(100.0));
}

TEST(RotatingFrameParams, Validation) {
  EXPECT_NO_THROW(canonical_params().validate());
  RotatingFrameParams bad = canonical_params();
  bad.d = 0.0;
  EXPECT_THROW(bad.validate(), InvalidArgument);
  bad = canonical_params();
  bad.eta = -1.0;
  EXPECT_THROW(bad.validate(), InvalidArgument);
  EXPECT_TRUE(canonical_params().regime_warnings().empty());
  RotatingFrameParams far = canonical_params();
  far.nu = 50.0;
  EXPECT_FALSE(far.regime_warnings().empty());
}
