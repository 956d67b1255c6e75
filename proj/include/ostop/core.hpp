#pragma once

#include <cmath>
#include <concepts>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "ostop/errors.hpp"

namespace ostop {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Which one-sided limit to take at a point where a function is not differentiable.
enum class Side { left, right };

/// A function with continuous value, one-sided first derivatives everywhere and a
/// second derivative away from a finite kink set. Payoffs model this.
template <class P>
concept PiecewiseC2 = requires(const P& p, double x, Side s) {
  { p.value(x) } -> std::convertible_to<double>;
  { p.derivative(x, s) } -> std::convertible_to<double>;
  { p.second_derivative(x) } -> std::convertible_to<double>;
  { p.kinks() } -> std::convertible_to<std::span<const double>>;
};

/// Evaluation grid on [lo, hi]; geometric spacing needs lo > 0.
struct Grid {
  double lo = 0.0;
  double hi = 1.0;
  std::size_t n = 2;
  bool geometric = false;

  void validate() const {
    if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi))
      throw PreconditionError("grid requires finite lo < hi");
    if (n < 2) throw PreconditionError("grid requires at least two points");
    if (geometric && !(lo > 0.0)) throw PreconditionError("geometric grid requires lo > 0");
  }

  std::vector<double> points() const {
    validate();
    std::vector<double> xs(n);
    const double last = static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / last;
      xs[i] = geometric ? lo * std::pow(hi / lo, t) : lo + (hi - lo) * t;
    }
    xs.front() = lo;
    xs.back() = hi;
    return xs;
  }

  /// Same range and spacing with a different point count.
  Grid with_points(std::size_t count) const { return Grid{lo, hi, count, geometric}; }
  Grid over(double new_lo, double new_hi) const {
    return Grid{new_lo, new_hi, n, geometric && new_lo > 0.0};
  }
};

} // namespace ostop
