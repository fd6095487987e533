// Minimal library usage: entanglement beat without and with the collapse term.

#include <cstdio>

#include "inlprobe/inlprobe.hpp"

int main() {
  using namespace inlprobe;
  const auto rp = canonical_params();
  const double te = entanglement_period(rp.j);
  const auto grid = uniform_grid(0.0, te, 9);

  const auto k = kappas(rp);
  std::printf("kappa0 = %.6f  kappa1 = %.6f  t_e = %.2f\n", k.kappa0, k.kappa1, te);

  const auto free = evolve_linear(rp, SpinState::down_down(), grid);
  const auto inl = evolve_inl(canonical_params(2.0 * rp.j), SpinState::down_down(), grid);
  std::printf("%10s %10s %10s %10s %10s\n", "t", "E", "M", "E(eta)", "M(eta)");
  for (std::size_t i = 0; i < grid.size(); ++i)
    std::printf("%10.2f %10.5f %10.5f %10.5f %10.5f\n", grid[i], free.samples[i].e, free.samples[i].m,
                inl.samples[i].e, inl.samples[i].m);

  const auto dep = envelope_depression(canonical_params(2.0 * rp.j), SpinState::down_down());
  std::printf("envelope depression ratio at mid-period: %.4f\n", dep.ratio);
}
