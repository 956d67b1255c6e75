#pragma once

// Kink-aware adaptive quadrature, improper-integral truncation and bracketed bisection.
//
// The Gauss-Kronrod (10, 21) nodes come from Boost.Math; the subdivision driver is
// global (largest error first) so that an absolute and a relative tolerance can be
// honoured at the same time, which the recursive Boost driver does not do.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <queue>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "ostop/core.hpp"
#include "ostop/errors.hpp"

namespace ostop {

struct QuadratureOptions {
  double abs_tol = 1e-10;
  double rel_tol = 1e-8;
  std::size_t max_segments = 4000;
  // A tail panel is negligible once it is below tail_ratio of the running total;
  // the tail is cut after tail_confirmations negligible panels in a row.
  double tail_ratio = 1e-14;
  int tail_confirmations = 3;
  std::size_t max_tail_panels = 600;
};

namespace detail {

struct Segment {
  double lo = 0.0;
  double hi = 0.0;
  double value = 0.0;
  double error = 0.0;
  bool operator<(const Segment& other) const { return error < other.error; }
};

template <class F>
Segment gauss_kronrod21(F& f, double lo, double hi) {
  using Kronrod = boost::math::quadrature::gauss_kronrod<double, 21>;
  using Gauss = boost::math::quadrature::gauss<double, 10>;
  const auto& nodes = Kronrod::abscissa();
  const auto& kw = Kronrod::weights();
  const auto& gw = Gauss::weights();
  const double mid = 0.5 * (lo + hi);
  const double half = 0.5 * (hi - lo);

  auto eval = [&](double t) {
    const double x = mid + half * t;
    const double y = f(x);
    if (!std::isfinite(y))
      throw QuadratureError("non-finite integrand at x=" + std::to_string(x));
    return y;
  };

  const double centre = eval(0.0);
  double kronrod = centre * kw[0];
  double gauss = 0.0;  // ten-point rule: centre is not a Gauss node
  for (std::size_t i = 1; i < nodes.size(); ++i) {
    const double s = eval(nodes[i]) + eval(-nodes[i]);
    kronrod += s * kw[i];
    if (i % 2 == 1) gauss += s * gw[i / 2];
  }
  const double value = half * kronrod;
  const double err = std::max(std::abs(half * (kronrod - gauss)),
                              50.0 * std::numeric_limits<double>::epsilon() * std::abs(value));
  return Segment{lo, hi, value, err};
}

inline std::vector<double> interior_breaks(double lo, double hi, std::span<const double> breaks) {
  std::vector<double> edges{lo};
  std::vector<double> inner;
  for (double b : breaks)
    if (b > lo && b < hi) inner.push_back(b);
  std::sort(inner.begin(), inner.end());
  inner.erase(std::unique(inner.begin(), inner.end()), inner.end());
  edges.insert(edges.end(), inner.begin(), inner.end());
  edges.push_back(hi);
  return edges;
}

} // namespace detail

/// Integral of f over the finite interval [lo, hi], with panel edges forced at `breaks`.
template <class F>
double integrate(F&& f, double lo, double hi, std::span<const double> breaks = {},
                 const QuadratureOptions& opt = {}) {
  if (!std::isfinite(lo) || !std::isfinite(hi))
    throw PreconditionError("integrate() needs finite limits; use integrate_range()");
  if (lo == hi) return 0.0;
  if (lo > hi) return -integrate(f, hi, lo, breaks, opt);

  const auto edges = detail::interior_breaks(lo, hi, breaks);
  std::priority_queue<detail::Segment> active;
  double total = 0.0;
  double total_err = 0.0;
  double frozen_err = 0.0;
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    auto seg = detail::gauss_kronrod21(f, edges[i], edges[i + 1]);
    total += seg.value;
    total_err += seg.error;
    active.push(seg);
  }
  std::size_t segments = active.size();
  auto target = [&] { return std::max(opt.abs_tol, opt.rel_tol * std::abs(total)); };

  while (total_err > target() && !active.empty()) {
    auto worst = active.top();
    active.pop();
    const double mid = 0.5 * (worst.lo + worst.hi);
    if (!(mid > worst.lo && mid < worst.hi)) {
      frozen_err += worst.error;  // cannot be split any further in double precision
      continue;
    }
    auto left = detail::gauss_kronrod21(f, worst.lo, mid);
    auto right = detail::gauss_kronrod21(f, mid, worst.hi);
    total += left.value + right.value - worst.value;
    total_err += left.error + right.error - worst.error;
    active.push(left);
    active.push(right);
    if (++segments > opt.max_segments)
      throw QuadratureError("quadrature tolerance not reached on [" + std::to_string(lo) + ", " +
                            std::to_string(hi) + "] within " + std::to_string(opt.max_segments) +
                            " segments");
  }
  if (total_err > target() && frozen_err > target())
    throw QuadratureError("quadrature error estimate stuck at " + std::to_string(total_err));
  return total;
}

namespace detail {

// Sum of panels [lo, lo + w], [lo + w, lo + 3w], ... walking in direction `dir`.
template <class F>
double doubling_tail(F& f, double start, int dir, std::span<const double> breaks,
                     const QuadratureOptions& opt) {
  const double width0 = std::max(std::abs(start), 1.0);
  double total = 0.0;
  double edge = start;
  double width = width0;
  int quiet = 0;
  for (std::size_t k = 0; k < opt.max_tail_panels; ++k) {
    const double next = edge + dir * width;
    if (!std::isfinite(next)) break;
    const double piece = dir > 0 ? integrate(f, edge, next, breaks, opt)
                                 : integrate(f, next, edge, breaks, opt);
    total += piece;
    if (std::abs(piece) <= opt.tail_ratio * std::abs(total)) {
      if (++quiet >= opt.tail_confirmations) return total;
    } else {
      quiet = 0;
    }
    edge = next;
    width *= 2.0;
  }
  throw IntegrabilityError("improper integral from " + std::to_string(start) +
                           " failed the tail convergence test");
}

} // namespace detail

/// Integral over [lo, hi] where either end may be infinite. Infinite tails are cut
/// where doubling panels stop contributing.
template <class F>
double integrate_range(F&& f, double lo, double hi, std::span<const double> breaks = {},
                       const QuadratureOptions& opt = {}) {
  if (lo == hi) return 0.0;
  if (lo > hi) return -integrate_range(f, hi, lo, breaks, opt);
  const bool lo_inf = std::isinf(lo);
  const bool hi_inf = std::isinf(hi);
  if (!lo_inf && !hi_inf) return integrate(f, lo, hi, breaks, opt);
  if (lo_inf && hi_inf) {
    return detail::doubling_tail(f, 0.0, -1, breaks, opt) + detail::doubling_tail(f, 0.0, +1, breaks, opt);
  }
  if (hi_inf) return detail::doubling_tail(f, lo, +1, breaks, opt);
  return detail::doubling_tail(f, hi, -1, breaks, opt);
}

/// Infimum of {x in [lo, hi] : positive(x)} given !positive(lo) and positive(hi).
/// Returns the upper end of the final bracket together with its lower end.
template <class Pred>
std::pair<double, double> bisect_predicate(Pred&& positive, double lo, double hi, double rel_tol,
                                           int max_iter = 400) {
  for (int it = 0; it < max_iter; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (!(mid > lo && mid < hi)) break;
    if (hi - lo <= rel_tol * (1.0 + std::abs(mid))) break;
    if (positive(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return {lo, hi};
}

/// Sign-change bisection for f on [lo, hi]; f(lo) and f(hi) must not share a strict sign.
template <class F>
double bisect_root(F&& f, double lo, double hi, double rel_tol = 0.0, int max_iter = 2000) {
  double flo = f(lo);
  const double fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo > 0.0) == (fhi > 0.0)) throw NoBracket("bisect_root: no sign change on bracket");
  for (int it = 0; it < max_iter; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (!(mid > lo && mid < hi)) break;
    if (rel_tol > 0.0 && hi - lo <= rel_tol * (1.0 + std::abs(mid))) break;
    const double fm = f(mid);
    if (fm == 0.0) return mid;
    if ((fm > 0.0) == (flo > 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return std::abs(flo) <= std::abs(f(hi)) ? lo : hi;
}

} // namespace ostop
