#pragma once

#include "ostop/ostop.hpp"

namespace fixture {

inline ostop::DiffusionSpec gbm(double m = 1.5, double s = 1.0, double r = 4.0) {
  using namespace ostop;
  return DiffusionSpec{[m](double x) { return m * x; }, [s](double x) { return s * x; }, 0.0, kInf,
                       Boundary::natural, Boundary::natural, r};
}

inline ostop::FundamentalOptions anchored(double anchor = 1.0) {
  ostop::FundamentalOptions o;
  o.anchor = anchor;
  return o;
}

inline ostop::FundamentalPair baseline_pair() { return ostop::fundamental_pair(gbm(), anchored()); }

inline ostop::Grid baseline_grid(std::size_t n = 2000) { return ostop::Grid{0.01, 100.0, n, true}; }

inline ostop::SolverOptions baseline_options() {
  ostop::SolverOptions o;
  o.grid = baseline_grid();
  o.fundamental = anchored();
  return o;
}

inline ostop::Payoff call() { return ostop::Payoff::from_text("x - 1", baseline_grid()); }
inline ostop::Payoff capped_call() { return ostop::Payoff::from_text("min(max(x-3,0),2)", baseline_grid()); }
inline const char* entry_flow() { return "(x^5-2)*exp(-x)+1"; }

} // namespace fixture
