// Relaxation of a perturbed equilibrium under shear flow, printed as a table.

#include <cstdio>

#include "fene/fene.hpp"

int main() {
  using namespace fene;
  const ModelParams p(2, 4.0, KappaSchedule::shear(2, 1.0), 2.0);
  const FPFResult r = solve_fpf({p, initial::perturbed(p, 0.3), Resolution{8, 8, 48, 48, 100}}, {false, false, true});
  std::printf("basis %d, C1 %.4f, C2 %.4f\n", r.report.basis_size, r.report.garding.C1, r.report.garding.C2);
  std::printf("%6s %22s %12s\n", "t", "mass", "min f");
  for (std::size_t k = 0; k < r.report.times.size(); k += 20) {
    std::printf("%6.2f %22.17g %12.3e\n", r.report.times[k], r.report.mass[k], r.report.min_f[k]);
  }
  std::printf("mass drift %.3e\n", r.report.mass_drift);
}
