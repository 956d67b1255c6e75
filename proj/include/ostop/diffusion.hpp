#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "ostop/core.hpp"
#include "ostop/errors.hpp"
#include "ostop/expr.hpp"
#include "ostop/numerics.hpp"

namespace ostop {

enum class Boundary { natural, entrance, exit, regular_killing };

inline Boundary parse_boundary(std::string_view name) {
  if (name == "natural") return Boundary::natural;
  if (name == "entrance") return Boundary::entrance;
  if (name == "exit") return Boundary::exit;
  if (name == "regular-killing" || name == "regular_killing" || name == "killing") return Boundary::regular_killing;
  throw ConfigError("unknown boundary classification '" + std::string(name) + "'");
}

inline std::string_view to_string(Boundary b) {
  switch (b) {
    case Boundary::natural: return "natural";
    case Boundary::entrance: return "entrance";
    case Boundary::exit: return "exit";
    case Boundary::regular_killing: return "regular-killing";
  }
  return "?";
}

/// An end where the process can be absorbed: the increasing (or decreasing)
/// fundamental solution vanishes there.
inline bool is_killing(Boundary b) { return b == Boundary::exit || b == Boundary::regular_killing; }

using RealFn = std::function<double(double)>;

struct DiffusionSpec {
  RealFn mu;
  RealFn sigma;
  double a = 0.0;
  double b = kInf;
  Boundary boundary_a = Boundary::natural;
  Boundary boundary_b = Boundary::natural;
  double r = 1.0;

  void validate() const {
    if (!mu || !sigma) throw PreconditionError("diffusion needs both drift and volatility");
    if (!(a < b)) throw PreconditionError("diffusion interval needs a < b");
    if (!(r > 0.0) || !std::isfinite(r)) throw PreconditionError("discount rate must be positive");
  }

  bool contains(double x) const { return x > a && x < b; }

  static DiffusionSpec from_expressions(const Expression& mu, const Expression& sigma, double a, double b,
                                        Boundary ba, Boundary bb, double r) {
    DiffusionSpec s{[mu](double x) { return mu(x); }, [sigma](double x) { return sigma(x); }, a, b, ba, bb, r};
    s.validate();
    return s;
  }
};

/// Geometric Brownian motion mu(x) = m*x, sigma(x) = s*x on (0, inf).
struct GbmCoefficients {
  double m;
  double s;
};

/// Brownian motion with constant drift and volatility on the real line.
struct AbmCoefficients {
  double mu;
  double sigma;
};

namespace detail {

inline bool nearly(double u, double v) { return std::abs(u - v) <= 1e-12 * std::max(1.0, std::max(std::abs(u), std::abs(v))); }

inline constexpr double kProbe[] = {0.13, 0.5, 0.97, 1.0, 1.7, 3.1, 7.9, 23.0, 111.0};

} // namespace detail

inline std::optional<GbmCoefficients> detect_gbm(const DiffusionSpec& spec) {
  if (spec.a != 0.0 || spec.b != kInf) return std::nullopt;
  try {
    const double m = spec.mu(1.0);
    const double s = spec.sigma(1.0);
    if (!(s > 0.0)) return std::nullopt;
    for (double x : detail::kProbe) {
      if (!detail::nearly(spec.mu(x), m * x) || !detail::nearly(spec.sigma(x), s * x)) return std::nullopt;
    }
    return GbmCoefficients{m, s};
  } catch (const Error&) {
    return std::nullopt;
  }
}

inline std::optional<AbmCoefficients> detect_abm(const DiffusionSpec& spec) {
  if (spec.a != -kInf || spec.b != kInf) return std::nullopt;
  try {
    const double m = spec.mu(0.0);
    const double s = spec.sigma(0.0);
    if (!(s > 0.0)) return std::nullopt;
    for (double x : detail::kProbe) {
      for (double xs : {x, -x}) {
        if (!detail::nearly(spec.mu(xs), m) || !detail::nearly(spec.sigma(xs), s)) return std::nullopt;
      }
    }
    return AbmCoefficients{m, s};
  } catch (const Error&) {
    return std::nullopt;
  }
}

/// Midpoint of an evaluation range, geometric when the state space is (a, inf) with a >= 0.
inline double default_anchor(const DiffusionSpec& spec, const Grid& grid) {
  if (spec.a >= 0.0 && spec.b == kInf && grid.lo > 0.0) return std::sqrt(grid.lo * grid.hi);
  return 0.5 * (grid.lo + grid.hi);
}

/// Diffusion with a fixed reference point for the scale density.
class Diffusion {
public:
  Diffusion(DiffusionSpec spec, double anchor) : spec_(std::move(spec)), anchor_(anchor) {
    spec_.validate();
    if (!spec_.contains(anchor_)) throw PreconditionError("anchor must lie inside the state interval");
  }

  const DiffusionSpec& spec() const { return spec_; }
  double anchor() const { return anchor_; }
  double r() const { return spec_.r; }

  /// exp(-int_{anchor}^{x} 2 mu / sigma^2).
  double scale_density(double x) const {
    require_inside(x);
    auto integrand = [this](double t) {
      const double s = spec_.sigma(t);
      return 2.0 * spec_.mu(t) / (s * s);
    };
    return std::exp(-integrate(integrand, anchor_, x));
  }

  double speed_density(double x) const {
    const double s = spec_.sigma(x);
    return 2.0 / (s * s * scale_density(x));
  }

  /// Killed generator 0.5 sigma^2 g'' + mu g' - r g away from the kinks of g.
  template <PiecewiseC2 P>
  double apply_generator(const P& g, double x) const {
    require_inside(x);
    for (double k : std::span<const double>(g.kinks()))
      if (k == x) throw KinkError(x);
    const double s = spec_.sigma(x);
    return 0.5 * s * s * g.second_derivative(x) + spec_.mu(x) * g.derivative(x, Side::right) - spec_.r * g.value(x);
  }

private:
  DiffusionSpec spec_;
  double anchor_;

  void require_inside(double x) const {
    if (!spec_.contains(x)) throw DomainError("x=" + std::to_string(x) + " lies outside the state interval");
  }
};

} // namespace ostop
