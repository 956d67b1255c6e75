// Capped call min((x-3)^+, 2): the threshold sits at the cap and fhat jumps there.
#include <cstdio>

#include "ostop/ostop.hpp"

int main() {
  using namespace ostop;
  const DiffusionSpec spec{[](double x) { return 1.5 * x; }, [](double x) { return x; }, 0.0, kInf,
                           Boundary::natural, Boundary::natural, 4.0};
  SolverOptions opt;
  opt.fundamental.anchor = 1.0;
  const auto g = Payoff::from_text("min(max(x-3,0),2)", opt.grid);
  const auto sol = solve(g, spec, opt);
  const auto& rf = sol.rf();

  std::printf("kinks:");
  for (double k : g.kinks()) std::printf(" %g", k);
  std::printf("\nthreshold y* = %g, fhat(y*-) = %g, fhat(y*+) = %g\n", sol.y_star(), rf.left(sol.y_star()),
              rf.right(sol.y_star()));
  std::printf("V(4) = %.10f\n", sol(4.0));
  std::printf("sufficiency: %s, x~ = %g\n", sol.sufficiency().satisfied ? "satisfied" : "violated",
              sol.sufficiency().sign_change_point.value_or(0.0));
  std::printf("monotone above y*: %s\n", sol.monotone().certified ? "certified" : "failed");
}
