#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ostop/core.hpp"
#include "ostop/errors.hpp"
#include "ostop/fundamental.hpp"
#include "ostop/numerics.hpp"
#include "ostop/payoff.hpp"

namespace ostop {

inline constexpr double kSmoothFitTol = 1e-8;

struct ThresholdInfo {
  double y_star = 0.0;
  bool at_kink = false;
  bool smooth_fit = false;
  /// Size of the jump of fhat * 1{x >= y*} at y*, i.e. fhat(y*+).
  double jump_at_threshold = 0.0;
  /// fhat <= 0 on sampled points below y* and fhat > 0 above it.
  bool sign_pattern_ok = false;
};

/// fhat = g - psi g' / psi', with one-sided values at kinks.
class RepresentingFunction {
public:
  RepresentingFunction(Payoff g, FundamentalPair pair, const Grid& grid)
      : g_(std::move(g)), pair_(std::move(pair)), grid_(grid) {
    grid_.validate();
    threshold_ = locate();
  }

  double value(double x, Side side) const {
    const auto j = g_.jet(x, side);
    const Jet psi = pair_.psi_jet(x);
    return j.value - psi.value * j.first / psi.derivative;
  }
  double left(double x) const { return value(x, Side::left); }
  double right(double x) const { return value(x, Side::right); }
  double operator()(double x) const { return right(x); }

  /// Same quantity as (L_psi g)/(L_psi 1).
  double via_ratio(double x, Side side = Side::right) const {
    return l_functional(pair_, Which::psi, g_, x, side) / (pair_.psi_prime(x) / pair_.scale_density(x));
  }

  bool has_threshold() const { return threshold_.has_value(); }
  const std::optional<ThresholdInfo>& threshold_info() const { return threshold_; }
  double threshold() const {
    if (!threshold_) throw NoThreshold("representing function has no sign change on the grid");
    return threshold_->y_star;
  }
  bool smooth_fit() const { return threshold_ && threshold_->smooth_fit; }
  double jump_at_threshold() const { return threshold_ ? threshold_->jump_at_threshold : 0.0; }

  const Payoff& payoff() const { return g_; }
  const FundamentalPair& pair() const { return pair_; }
  const Grid& grid() const { return grid_; }

  /// Grid points plus kinks within the grid range, sorted.
  std::vector<double> probes() const {
    auto xs = grid_.points();
    for (double k : g_.kinks())
      if (k >= grid_.lo && k <= grid_.hi) xs.push_back(k);
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    return xs;
  }

private:
  Payoff g_;
  FundamentalPair pair_;
  Grid grid_;
  std::optional<ThresholdInfo> threshold_;

  std::optional<ThresholdInfo> locate() const {
    const auto xs = probes();
    const std::size_t n = xs.size();
    std::vector<double> lv(n);
    std::vector<double> rv(n);
    for (std::size_t i = 0; i < n; ++i) {
      rv[i] = right(xs[i]);
      lv[i] = g_.is_kink(xs[i]) ? left(xs[i]) : rv[i];
    }
    // last probe where fhat is not strictly positive
    std::optional<std::size_t> j;
    for (std::size_t i = n; i-- > 0;) {
      if (!(rv[i] > 0.0)) {
        j = i;
        break;
      }
    }
    if (!j || *j + 1 == n) return std::nullopt;

    ThresholdInfo info;
    const std::size_t k = *j + 1;
    if (!(lv[k] > 0.0)) {
      info.y_star = xs[k];
      info.at_kink = true;
    } else {
      auto [lo, hi] = bisect_predicate([this](double x) { return right(x) > 0.0; }, xs[*j], xs[k], 0.0);
      (void)lo;
      info.y_star = hi;
    }
    const double above = right(info.y_star);
    info.at_kink = g_.is_kink(info.y_star);
    info.smooth_fit = !info.at_kink && std::abs(above) <= kSmoothFitTol;
    info.jump_at_threshold = info.at_kink ? above : std::max(above, 0.0);

    bool ok = true;
    for (std::size_t i = 0; i < n && ok; ++i) {
      if (xs[i] < info.y_star) ok = lv[i] <= 0.0 && rv[i] <= 0.0;
      else if (xs[i] > info.y_star) ok = rv[i] > 0.0;
    }
    info.sign_pattern_ok = ok;
    return info;
  }
};

/// Builds fhat and insists on a threshold.
inline RepresentingFunction representing_function(const Payoff& g, const FundamentalPair& pair, const Grid& grid) {
  RepresentingFunction rf(g, pair, grid);
  if (!rf.has_threshold()) throw NoThreshold("representing function keeps a constant sign on the grid");
  return rf;
}

/// fhat(x) from (L_psi g)(y*+) minus the canonical increment up to x, plus kink jumps of L_psi g.
inline double representing_via_increment(const RepresentingFunction& rf, double x, const QuadratureOptions& opt = {}) {
  const double y = rf.threshold();
  const auto& g = rf.payoff();
  const auto& pair = rf.pair();
  if (!(x > y)) throw PreconditionError("increment form needs x above the threshold");
  if (g.is_kink(x)) throw KinkError(x);
  double l = l_functional(pair, Which::psi, g, y, Side::right) - canonical_increment(pair, g, y, x, opt);
  for (const auto& k : g.kink_data()) {
    if (k.x > y && k.x < x) l -= (k.right - k.left) * pair.psi(k.x) / pair.scale_density(k.x);
  }
  return l / (pair.psi_prime(x) / pair.scale_density(x));
}

struct MonotoneCertificate {
  bool certified = false;
  std::vector<double> failed_at;
  /// g concave and psi convex on the region.
  bool lemma_a = false;
  /// G_r g non-increasing and non-positive on the region.
  bool lemma_b = false;
  /// g'(x-) >= g'(x+) at every kink in the region.
  bool kink_jumps_ok = true;
  std::string note;
};

/// Grid check that fhat is non-decreasing on `region`.
inline MonotoneCertificate certify_monotone(const RepresentingFunction& rf, const Grid& region) {
  if (region.n < 1000) throw PreconditionError("monotonicity check needs at least 1000 grid points");
  const auto& g = rf.payoff();
  const auto& pair = rf.pair();
  auto xs = region.points();
  for (double k : g.kinks())
    if (k >= region.lo && k <= region.hi) xs.push_back(k);
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());

  MonotoneCertificate cert;
  cert.note = "verified on " + std::to_string(region.n) + "-point grid";

  double prev = 0.0;
  bool first = true;
  auto push = [&](double x, double v) {
    if (!first && v < prev - 1e-8 * (1.0 + std::abs(prev))) cert.failed_at.push_back(x);
    prev = v;
    first = false;
  };
  for (double x : xs) {
    if (g.is_kink(x)) push(x, rf.left(x));
    push(x, rf.right(x));
  }
  for (const auto& k : g.kink_data()) {
    if (k.x >= region.lo && k.x <= region.hi && k.left - k.right < 0.0) cert.kink_jumps_ok = false;
  }

  bool concave = cert.kink_jumps_ok;
  bool convex_psi = true;
  bool gen_ok = true;
  double prev_gen = kInf;
  for (double x : xs) {
    if (g.is_kink(x)) continue;
    const double g2 = g.second_derivative(x);
    if (g2 > 1e-10 * (1.0 + std::abs(g2))) concave = false;
    if (pair.psi_second(x) < 0.0) convex_psi = false;
    const double gen = pair.apply_generator(g, x);
    if (gen > 1e-10 || gen > prev_gen + 1e-10 * (1.0 + std::abs(prev_gen))) gen_ok = false;
    prev_gen = gen;
  }
  cert.lemma_a = concave && convex_psi;
  cert.lemma_b = gen_ok && cert.kink_jumps_ok;
  cert.certified = cert.failed_at.empty() && cert.kink_jumps_ok;
  return cert;
}

/// E_x[h(X_T) | M_T <= y] for x < y.
template <class H>
double cond_exp_below(const FundamentalPair& pair, H&& h, double x, double y, std::span<const double> breaks = {},
                      const QuadratureOptions& opt = {}) {
  if (x == y) throw DegenerateConditioning("x equals y; use cond_exp_at_max");
  if (x > y) throw OrderError("cond_exp_below needs x < y");
  const double ratio = pair.psi(x) / pair.psi(y);
  const double rx = resolvent(pair, h, x, breaks, opt);
  const double ry = resolvent(pair, h, y, breaks, opt);
  return pair.r() * (rx - ry * ratio) / (1.0 - ratio);
}

/// E_y[h(X_T) | M_T = y].
template <class H>
double cond_exp_at_max(const FundamentalPair& pair, H&& h, double y, std::span<const double> breaks = {},
                       const QuadratureOptions& opt = {}) {
  auto integrand = [&](double v) { return h(v) * pair.psi(v) * pair.speed_density(v); };
  const double integral = integrate_range(integrand, pair.lower(), y, breaks, opt);
  return pair.r() * pair.scale_density(y) / pair.psi_prime(y) * integral;
}

/// -(L_psi g)(y) / (L_psi 1)(y), the conditional generator of g at the running maximum.
/// Needs (L_psi g)(a+) = 0, which is checked by sampling toward a.
inline double cond_generator_at_max(const FundamentalPair& pair, const Payoff& g, double y) {
  if (g.is_kink(y)) throw KinkError(y);
  const double at_y = l_functional(pair, Which::psi, g, y);
  double peak = std::abs(at_y);
  double last = at_y;
  for (int k = 1; k <= 8; ++k) {
    const double scale = std::pow(10.0, -k);
    const double x = std::isfinite(pair.lower()) ? pair.lower() + (y - pair.lower()) * scale
                                                 : y - std::max(1.0, std::abs(y)) / scale;
    last = l_functional(pair, Which::psi, g, x);
    peak = std::max(peak, std::abs(last));
  }
  if (!(std::abs(last) <= 1e-6 * (1.0 + peak)))
    throw BoundaryConditionError("(L_psi g)(x) does not vanish as x approaches the lower boundary");
  return -at_y / (pair.psi_prime(y) / pair.scale_density(y));
}

} // namespace ostop
