// Stopping signal for the payoff g(x) = x and the transfer that moves the call threshold to 3.
#include <cstdio>

#include "ostop/ostop.hpp"

int main() {
  using namespace ostop;
  const DiffusionSpec spec{[](double x) { return 1.5 * x; }, [](double x) { return x; }, 0.0, kInf,
                           Boundary::natural, Boundary::natural, 4.0};
  FundamentalOptions fo;
  fo.anchor = 1.0;
  const auto pair = fundamental_pair(spec, fo);
  const Grid grid{0.01, 100.0, 2000, true};

  const RepresentingFunction index(Payoff::from_text("x", grid), pair, grid);
  for (double x : {1.0, 2.0, 4.0}) std::printf("gamma(%g) = %g\n", x, gittins_index(index, x));
  for (double k : {0.5, 1.0, 2.0}) std::printf("k = %g: stop on [%g, inf)\n", k, stopping_region(index, k).lo);

  SolverOptions opt;
  opt.fundamental = fo;
  const auto res = transfer_rule(Payoff::from_text("x - 1", grid), pair, 3.0, opt);
  std::printf("transfer %g moves the call threshold to %.10g\n", res.transfer, res.solution.y_star());
}
