#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ostop/core.hpp"
#include "ostop/errors.hpp"
#include "ostop/fundamental.hpp"
#include "ostop/numerics.hpp"
#include "ostop/payoff.hpp"
#include "ostop/representation.hpp"

namespace ostop {

struct SolverOptions {
  Grid grid{0.01, 100.0, 2000, true};
  FundamentalOptions fundamental;
  std::size_t certify_points = 2000;
  QuadratureOptions quadrature;
};

struct SolutionFlags {
  bool sufficiency_ok = false;
  bool ratio_limit_zero = false;
  bool representation_as_expected_sup = false;
  bool smooth_fit = false;
};

/// Optimal single upper threshold and the value function it induces.
class StoppingSolution {
public:
  StoppingSolution(RepresentingFunction rf, SufficiencyCertificate sufficiency, MonotoneCertificate monotone,
                   SolutionFlags flags, std::vector<std::string> warnings)
      : rf_(std::move(rf)),
        sufficiency_(std::move(sufficiency)),
        monotone_(std::move(monotone)),
        flags_(flags),
        warnings_(std::move(warnings)) {
    y_star_ = rf_.threshold();
    g_at_threshold_ = rf_.payoff().value(y_star_);
    psi_at_threshold_ = rf_.pair().psi(y_star_);
  }

  double y_star() const { return y_star_; }
  /// g(x) above the threshold, psi(x) g(y*) / psi(y*) below it.
  double value(double x) const {
    if (x >= y_star_) return rf_.payoff().value(x);
    return rf_.pair().psi(x) * g_at_threshold_ / psi_at_threshold_;
  }
  double operator()(double x) const { return value(x); }

  const RepresentingFunction& rf() const { return rf_; }
  const SufficiencyCertificate& sufficiency() const { return sufficiency_; }
  const MonotoneCertificate& monotone() const { return monotone_; }
  const SolutionFlags& flags() const { return flags_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

private:
  RepresentingFunction rf_;
  SufficiencyCertificate sufficiency_;
  MonotoneCertificate monotone_;
  SolutionFlags flags_;
  std::vector<std::string> warnings_;
  double y_star_ = 0.0;
  double g_at_threshold_ = 0.0;
  double psi_at_threshold_ = 1.0;
};

/// Value of stopping at the first passage above y.
inline double value_for_threshold(const Payoff& g, const FundamentalPair& pair, double y, double x) {
  const double gy = g.value(y);
  if (!(gy > 0.0)) throw NonPositivePayoffAtThreshold("g(y) must be positive at the threshold y=" + std::to_string(y));
  if (x >= y) return g.value(x);
  return pair.psi(x) * gy / pair.psi(y);
}

/// int_x^b fhat psi' / psi^2, split at kinks.
inline double ratio_tail_integral(const RepresentingFunction& rf, double x, const QuadratureOptions& opt = {}) {
  const auto& pair = rf.pair();
  auto integrand = [&](double z) {
    const Jet psi = pair.psi_jet(z);
    return rf(z) * psi.derivative / (psi.value * psi.value);
  };
  return integrate_range(integrand, x, pair.upper(), rf.payoff().kinks(), opt);
}

/// psi(x) int_{max(x,y)}^b fhat psi' / psi^2.
inline double expected_sup_value(const RepresentingFunction& rf, double y, double x, const QuadratureOptions& opt = {}) {
  return rf.pair().psi(x) * ratio_tail_integral(rf, std::max(x, y), opt);
}

/// Sampled test of g/psi -> 0 toward the upper boundary.
inline bool ratio_limit_zero(const Payoff& g, const FundamentalPair& pair, const Grid& grid) {
  double peak = 0.0;
  for (double x : grid.with_points(std::min<std::size_t>(grid.n, 400)).points())
    peak = std::max(peak, std::abs(g.value(x) / pair.psi(x)));
  double prev = kInf;
  double last = 0.0;
  for (int k = 0; k <= 6; ++k) {
    const double x = std::isfinite(pair.upper()) ? pair.upper() - (pair.upper() - grid.hi) * std::pow(10.0, -k)
                                                 : grid.hi * std::pow(10.0, k);
    last = std::abs(g.value(x) / pair.psi(x));
    if (k >= 3 && last > prev * (1.0 + 1e-12)) return false;
    prev = last;
  }
  return last <= 1e-6 * std::max(peak, 1e-300);
}

inline StoppingSolution solve(const Payoff& g, const FundamentalPair& pair, const SolverOptions& opt = {}) {
  RepresentingFunction rf = representing_function(g, pair, opt.grid);
  const auto& info = *rf.threshold_info();
  std::vector<std::string> warnings;

  SolutionFlags flags;
  SufficiencyCertificate suff = check_sufficiency(g, pair, opt.grid.with_points(std::max<std::size_t>(opt.grid.n, 100)));
  flags.sufficiency_ok = suff.satisfied;
  if (!suff.satisfied) warnings.push_back("sufficiency conditions fail on the grid");

  try {
    flags.ratio_limit_zero = ratio_limit_zero(g, pair, opt.grid);
  } catch (const Error& e) {
    warnings.push_back(std::string("ratio limit check failed: ") + e.what());
  }
  if (!flags.ratio_limit_zero) warnings.push_back("g/psi does not vanish toward the upper boundary");

  MonotoneCertificate mono;
  if (info.y_star < opt.grid.hi) {
    Grid region{info.y_star, opt.grid.hi, std::max<std::size_t>(opt.certify_points, 1000), opt.grid.geometric};
    mono = certify_monotone(rf, region);
  } else {
    mono.note = "threshold at or above the grid end; nothing to certify";
    warnings.push_back(mono.note);
  }
  if (!mono.certified) warnings.push_back("fhat is not non-decreasing above the threshold");
  if (!info.sign_pattern_ok) warnings.push_back("fhat sign pattern around the threshold is broken");

  flags.smooth_fit = info.smooth_fit;
  flags.representation_as_expected_sup = mono.certified && info.sign_pattern_ok && mono.kink_jumps_ok;
  return StoppingSolution(std::move(rf), std::move(suff), std::move(mono), flags, std::move(warnings));
}

inline StoppingSolution solve(const Payoff& g, const DiffusionSpec& spec, const SolverOptions& opt = {}) {
  return solve(g, fundamental_pair(spec, opt.fundamental), opt);
}

/// Stopping signal gamma(x) = fhat_0(x) of the single-boundary index problem.
inline double gittins_index(const RepresentingFunction& rf, double x) { return rf(x); }

struct Region {
  double lo;
  double hi;
};

/// {x : fhat_0(x) >= k} = [z, b) for monotone fhat_0.
inline Region stopping_region(const RepresentingFunction& rf, double k) {
  const auto xs = rf.probes();
  double top = -kInf;
  std::optional<std::size_t> below;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double v = rf(xs[i]);
    top = std::max(top, v);
    if (v < k) below = i;
  }
  if (top < k) throw EmptyRegion("fhat stays below k=" + std::to_string(k) + " on the grid");
  const double b = rf.pair().upper();
  if (!below) return {rf.pair().lower(), b};
  const std::size_t j = *below;
  if (j + 1 == xs.size()) throw EmptyRegion("fhat is below k at the top of the grid");
  const double next = xs[j + 1];
  if (rf.payoff().is_kink(next) && rf.left(next) < k) return {next, b};
  auto [lo, hi] = bisect_predicate([&](double x) { return rf(x) >= k; }, xs[j], next, 0.0);
  (void)lo;
  return {hi, b};
}

struct TransferResult {
  double transfer;
  StoppingSolution solution;
};

/// Constant transfer fhat(k*) that makes k* the optimal threshold of g - transfer.
inline TransferResult transfer_rule(const Payoff& g, const FundamentalPair& pair, double k_star,
                                    const SolverOptions& opt = {}) {
  if (!(k_star > pair.lower() && k_star < pair.upper())) throw PreconditionError("k* must lie inside the state interval");
  const RepresentingFunction rf(g, pair, opt.grid);
  const double transfer = rf(k_star);
  return {transfer, solve(g.shifted(-transfer), pair, opt)};
}

} // namespace ostop
