// Two solutions with zero initial data under the relaxed boundary condition.

#include <cstdio>

#include "fene/fene.hpp"

int main() {
  using namespace fene;
  const ModelParams p(2, 4.0, KappaSchedule::zero(2), 1.0);
  const SolveOptions opt{true, true, false};
  const auto a = solve_nonunique({p, Lift::named("t|m|^2", 1.0), 0.75, Resolution::relaxed()}, opt);
  const auto b = solve_nonunique({p, Lift::named("t|m|^2", 2.0), 0.75, Resolution::relaxed()}, opt);
  const std::size_t kT = a.trajectory.size() - 1;
  std::printf("initial norms %g %g\n", a.report.initial_norm, b.report.initial_norm);
  std::printf("weak residuals %.3e %.3e\n", a.report.weak_residual, b.report.weak_residual);
  std::printf("interior distance at T %.6f\n", interior_distance(a.trajectory, kT, b.trajectory, kT));
  std::printf("boundary trace limits %.4f %.4f\n", a.report.trace.limit.value, b.report.trace.limit.value);
}
