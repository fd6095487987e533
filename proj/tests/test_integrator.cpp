#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "inlprobe/integrator.hpp"

using namespace inlprobe;

namespace {

using State2 = std::array<double, 2>;

void oscillator(double, const State2& y, State2& dy) {
  dy[0] = y[1];
  dy[1] = -y[0];
}

double final_error_fixed_step(double h, double t_end) {
  StepperOptions o;
  o.rel_tol = 1e6;  // every step accepted
  o.abs_tol = 1e6;
  o.max_step = h;
  o.initial_step = h;
  DormandPrince<2> dp(o);
  State2 last{};
  const std::vector<double> times = {0.0, t_end};
  dp.integrate(oscillator, State2{1.0, 0.0}, times, [&](std::size_t, double, const State2& y) { last = y; });
  return std::hypot(last[0] - std::cos(t_end), last[1] + std::sin(t_end));
}

}  // namespace

TEST(DormandPrince, ExponentialDecay) {
  DormandPrince<1> dp({1e-12, 1e-14});
  std::vector<double> times;
  for (int i = 0; i <= 10; ++i) times.push_back(0.5 * i);
  std::vector<double> got;
  const auto stats = dp.integrate([](double, const std::array<double, 1>& y, std::array<double, 1>& dy) { dy[0] = -y[0]; },
                                  std::array<double, 1>{1.0}, times,
                                  [&](std::size_t, double, const std::array<double, 1>& y) { got.push_back(y[0]); });
  ASSERT_EQ(got.size(), times.size());
  for (std::size_t i = 0; i < times.size(); ++i) EXPECT_NEAR(got[i], std::exp(-times[i]), 1e-11);
  EXPECT_GT(stats.accepted, 0);
  EXPECT_EQ(stats.rhs_evaluations, 6 * (stats.accepted + stats.rejected) + 2);
}

TEST(DormandPrince, FifthOrderConvergenceWithFixedSteps) {
  const double t_end = 4.0;
  const double e1 = final_error_fixed_step(0.2, t_end);
  const double e2 = final_error_fixed_step(0.1, t_end);
  const double e3 = final_error_fixed_step(0.05, t_end);
  const double s1 = std::log2(e1 / e2);
  const double s2 = std::log2(e2 / e3);
  EXPECT_NEAR(s1, 5.0, 1.0);
  EXPECT_NEAR(s2, 5.0, 1.0);
}

TEST(DormandPrince, DenseOutputDoesNotPerturbSteps) {
  DormandPrince<2> dp({1e-10, 1e-13});
  State2 a{}, b{};
  const std::vector<double> coarse = {0.0, 10.0};
  std::vector<double> fine;
  for (int i = 0; i <= 1000; ++i) fine.push_back(0.01 * i);
  fine.back() = 10.0;
  const auto sa = dp.integrate(oscillator, State2{1.0, 0.0}, coarse, [&](std::size_t, double, const State2& y) { a = y; });
  const auto sb = dp.integrate(oscillator, State2{1.0, 0.0}, fine, [&](std::size_t, double, const State2& y) { b = y; });
  EXPECT_EQ(a, b);
  EXPECT_EQ(sa.accepted, sb.accepted);
}

TEST(DormandPrince, DenseOutputAccuracy) {
  DormandPrince<2> dp({1e-11, 1e-14});
  std::vector<double> times;
  for (int i = 0; i <= 777; ++i) times.push_back(0.0123 * i);
  double worst = 0.0;
  dp.integrate(oscillator, State2{1.0, 0.0}, times,
               [&](std::size_t, double t, const State2& y) { worst = std::max(worst, std::abs(y[0] - std::cos(t))); });
  EXPECT_LT(worst, 1e-9);
}

TEST(DormandPrince, RejectsBadInput) {
  EXPECT_THROW(DormandPrince<1>({-1.0, 1e-12}), InvalidArgument);
  DormandPrince<1> dp({1e-9, 1e-12});
  const std::vector<double> times = {0.0, 1.0, 1.0};
  auto rhs = [](double, const std::array<double, 1>&, std::array<double, 1>& dy) { dy[0] = 0.0; };
  EXPECT_THROW(dp.integrate(rhs, std::array<double, 1>{0.0}, times, [](auto, auto, const auto&) {}), InvalidArgument);
}

TEST(DormandPrince, BlowUpIsNumericalError) {
  StepperOptions o;
  o.rel_tol = 1e-9;
  o.abs_tol = 1e-12;
  o.max_steps = 200000;
  DormandPrince<1> dp(o);
  const std::vector<double> times = {0.0, 2.0};
  auto rhs = [](double, const std::array<double, 1>& y, std::array<double, 1>& dy) { dy[0] = y[0] * y[0]; };
  EXPECT_THROW(dp.integrate(rhs, std::array<double, 1>{1.0}, times, [](auto, auto, const auto&) {}), NumericalError);
}

TEST(DormandPrince, StepUnderflowReportsTime) {
  StepperOptions o;
  o.min_step = 1.0;
  o.max_step = 0.5;
  DormandPrince<2> dp(o);
  const std::vector<double> times = {0.0, 5.0};
  try {
    dp.integrate(oscillator, State2{1.0, 0.0}, times, [](auto, auto, const auto&) {});
    FAIL() << "expected StepUnderflow";
  } catch (const StepUnderflow& e) {
    EXPECT_EQ(e.time(), 0.0);
  }
}

TEST(DormandPrince, StepBudget) {
  StepperOptions o;
  o.max_step = 1e-3;
  o.max_steps = 10;
  DormandPrince<2> dp(o);
  const std::vector<double> times = {0.0, 1.0};
  EXPECT_THROW(dp.integrate(oscillator, State2{1.0, 0.0}, times, [](auto, auto, const auto&) {}), NumericalError);
}

TEST(DormandPrince, HookSwitchesBranch) {
  // y' = -1 until the hook sees y <= 0.5, then y' = 0
  bool frozen = false;
  DormandPrince<1> dp({1e-10, 1e-13, 0.01});
  const std::vector<double> times = {0.0, 2.0};
  double last = 0.0;
  const auto stats = dp.integrate(
      [&](double, const std::array<double, 1>&, std::array<double, 1>& dy) { dy[0] = frozen ? 0.0 : -1.0; },
      std::array<double, 1>{1.0}, times, [&](std::size_t, double, const std::array<double, 1>& y) { last = y[0]; },
      [&](double, const std::array<double, 1>& y) {
        if (frozen || y[0] > 0.5) return false;
        frozen = true;
        return true;
      });
  EXPECT_EQ(stats.switches, 1);
  EXPECT_NEAR(last, 0.5, 0.011);
}
