#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <boost/numeric/odeint.hpp>

#include "ostop/core.hpp"
#include "ostop/diffusion.hpp"
#include "ostop/errors.hpp"
#include "ostop/numerics.hpp"

namespace ostop {

enum class SolutionSource { closed_form_gbm, closed_form_abm, numerical };

inline std::string_view to_string(SolutionSource s) {
  switch (s) {
    case SolutionSource::closed_form_gbm: return "closed-form-GBM";
    case SolutionSource::closed_form_abm: return "closed-form-ABM";
    case SolutionSource::numerical: return "numerical";
  }
  return "?";
}

/// Starting point for the log-derivative integration near a boundary:
/// u'(x)/u(x) = log_derivative at x.
struct BoundaryStart {
  double x;
  double log_derivative;
};

struct FundamentalOptions {
  std::optional<double> anchor;
  std::optional<BoundaryStart> psi_start;  // needed when a is natural, entrance or infinite
  std::optional<BoundaryStart> phi_start;  // needed when b is natural, entrance or infinite
  double epsilon_factor = 1e-6;
  double ode_abs_tol = 1e-13;
  double ode_rel_tol = 1e-11;
  bool force_numerical = false;
};

/// Value and first derivative of a fundamental solution.
struct Jet {
  double value;
  double derivative;
};

namespace detail {

class PairModel {
public:
  virtual ~PairModel() = default;
  virtual Jet psi(double x) const = 0;
  virtual Jet phi(double x) const = 0;
  virtual double scale_density(double x) const = 0;
  virtual double wronskian() const = 0;
};

inline std::pair<double, double> quadratic_roots(double half_s2, double lin, double c) {
  // half_s2 * b^2 + lin * b + c = 0 with half_s2 > 0 and c < 0: one root of each sign.
  const double disc = std::sqrt(lin * lin - 4.0 * half_s2 * c);
  const double q = -0.5 * (lin + std::copysign(disc, lin));
  double r1 = q / half_s2;
  double r2 = c / q;
  if (lin == 0.0) {
    r1 = disc / (2.0 * half_s2);
    r2 = -r1;
  }
  return {std::max(r1, r2), std::min(r1, r2)};
}

class GbmModel final : public PairModel {
public:
  GbmModel(GbmCoefficients c, double r, double anchor) : anchor_(anchor) {
    const double s2 = c.s * c.s;
    std::tie(beta_plus_, beta_minus_) = quadratic_roots(0.5 * s2, c.m - 0.5 * s2, -r);
    scale_power_ = -2.0 * c.m / s2;
  }
  Jet psi(double x) const override {
    const double v = std::pow(x / anchor_, beta_plus_);
    return {v, beta_plus_ * v / x};
  }
  Jet phi(double x) const override {
    const double v = std::pow(x / anchor_, beta_minus_);
    return {v, beta_minus_ * v / x};
  }
  double scale_density(double x) const override { return std::pow(x / anchor_, scale_power_); }
  double wronskian() const override { return (beta_plus_ - beta_minus_) / anchor_; }
  double beta_plus() const { return beta_plus_; }
  double beta_minus() const { return beta_minus_; }

private:
  double anchor_;
  double beta_plus_ = 0.0;
  double beta_minus_ = 0.0;
  double scale_power_ = 0.0;
};

class AbmModel final : public PairModel {
public:
  AbmModel(AbmCoefficients c, double r, double anchor) : anchor_(anchor) {
    const double s2 = c.sigma * c.sigma;
    std::tie(gamma_plus_, gamma_minus_) = quadratic_roots(0.5 * s2, c.mu, -r);
    scale_rate_ = -2.0 * c.mu / s2;
  }
  Jet psi(double x) const override {
    const double v = std::exp(gamma_plus_ * (x - anchor_));
    return {v, gamma_plus_ * v};
  }
  Jet phi(double x) const override {
    const double v = std::exp(gamma_minus_ * (x - anchor_));
    return {v, gamma_minus_ * v};
  }
  double scale_density(double x) const override { return std::exp(scale_rate_ * (x - anchor_)); }
  double wronskian() const override { return gamma_plus_ - gamma_minus_; }

private:
  double anchor_;
  double gamma_plus_ = 0.0;
  double gamma_minus_ = 0.0;
  double scale_rate_ = 0.0;
};

// One branch of the Riccati integration. State: (w = u'/u, log u, log S').
class RiccatiBranch {
public:
  using State = std::array<double, 3>;

  RiccatiBranch(const DiffusionSpec& spec, BoundaryStart start, int direction, double step_scale,
                const FundamentalOptions& opt)
      : spec_(spec), start_(start.x), direction_(direction), step_scale_(step_scale), opt_(opt) {
    checkpoints_.push_back({start.x, State{start.log_derivative, 0.0, 0.0}});
  }

  struct Rhs {
    const DiffusionSpec* spec;
    void operator()(const State& s, State& ds, double x) const {
      const double mu = spec->mu(x);
      const double sg = spec->sigma(x);
      const double inv = 2.0 / (sg * sg);
      ds[0] = inv * (spec->r - mu * s[0]) - s[0] * s[0];
      ds[1] = s[0];
      ds[2] = -inv * mu;
    }
  };

  // Raw state (unnormalised logs) at x.
  State state(double x) const {
    std::pair<double, State> from;
    {
      std::lock_guard lock(mutex_);
      if (ahead(x)) extend_to(x);
      from = nearest_behind(x);
    }
    if (from.first == x) return from.second;
    State s = from.second;
    namespace ode = boost::numeric::odeint;
    auto stepper = ode::make_controlled(opt_.ode_abs_tol, opt_.ode_rel_tol, ode::runge_kutta_dopri5<State>());
    const double h0 = std::copysign(std::min(std::abs(x - from.first), first_step(from.first)), x - from.first);
    ode::integrate_adaptive(stepper, system(), s, from.first, x, h0);
    return s;
  }

private:
  const DiffusionSpec& spec_;
  double start_;
  int direction_;
  double step_scale_;
  FundamentalOptions opt_;
  mutable std::mutex mutex_;
  mutable std::vector<std::pair<double, State>> checkpoints_;

  Rhs system() const { return Rhs{&spec_}; }

  double first_step(double from) const {
    return 1e-3 * std::max(std::abs(from - start_), step_scale_);
  }

  bool ahead(double x) const { return direction_ * (x - checkpoints_.back().first) > 0.0; }

  void extend_to(double x) const {
    namespace ode = boost::numeric::odeint;
    auto stepper = ode::make_controlled(opt_.ode_abs_tol, opt_.ode_rel_tol, ode::runge_kutta_dopri5<State>());
    auto [t, s] = checkpoints_.back();
    double h = direction_ * first_step(t);
    const auto sys = system();
    int failures = 0;
    while (direction_ * (x - t) > 0.0) {
      auto result = stepper.try_step(sys, s, t, h);
      if (result == ode::success) {
        failures = 0;
        if (!std::isfinite(s[0]) || !std::isfinite(s[1]))
          throw QuadratureError("fundamental solution integration diverged at x=" + std::to_string(t));
        checkpoints_.emplace_back(t, s);
      } else if (++failures > 200) {
        throw QuadratureError("fundamental solution step size underflow at x=" + std::to_string(t));
      }
    }
  }

  std::pair<double, State> nearest_behind(double x) const {
    if (direction_ * (x - start_) <= 0.0) return checkpoints_.front();
    // checkpoints are monotone in the integration direction
    auto it = std::upper_bound(checkpoints_.begin(), checkpoints_.end(), x, [this](double v, const auto& cp) {
      return direction_ * (v - cp.first) < 0.0;
    });
    return *(it - 1);
  }
};

class NumericalModel final : public PairModel {
public:
  NumericalModel(const DiffusionSpec& spec, double anchor, BoundaryStart psi_start, BoundaryStart phi_start,
                 double psi_scale, double phi_scale, const FundamentalOptions& opt)
      : spec_(spec),
        anchor_(anchor),
        psi_(spec_, psi_start, +1, psi_scale, opt),
        phi_(spec_, phi_start, -1, phi_scale, opt) {
    const auto ps = psi_.state(anchor_);
    const auto fs = phi_.state(anchor_);
    psi_log_offset_ = ps[1];
    psi_scale_offset_ = ps[2];
    phi_log_offset_ = fs[1];
    phi_scale_offset_ = fs[2];
    psi_split_ = psi_start.x;
    wronskian_ = ps[0] - fs[0];
  }

  Jet psi(double x) const override {
    const auto s = psi_.state(x);
    const double v = std::exp(s[1] - psi_log_offset_);
    return {v, s[0] * v};
  }
  Jet phi(double x) const override {
    const auto s = phi_.state(x);
    const double v = std::exp(s[1] - phi_log_offset_);
    return {v, s[0] * v};
  }
  double scale_density(double x) const override {
    if (x >= psi_split_) return std::exp(psi_.state(x)[2] - psi_scale_offset_);
    return std::exp(phi_.state(x)[2] - phi_scale_offset_);
  }
  double wronskian() const override { return wronskian_; }

private:
  DiffusionSpec spec_;
  double anchor_;
  RiccatiBranch psi_;
  RiccatiBranch phi_;
  double psi_log_offset_ = 0.0;
  double psi_scale_offset_ = 0.0;
  double phi_log_offset_ = 0.0;
  double phi_scale_offset_ = 0.0;
  double psi_split_ = 0.0;
  double wronskian_ = 0.0;
};

} // namespace detail

/// Increasing (psi) and decreasing (phi) solutions of (A - r)u = 0, normalised to 1 at the anchor.
class FundamentalPair {
public:
  FundamentalPair(DiffusionSpec spec, double anchor, std::shared_ptr<const detail::PairModel> model,
                  SolutionSource source)
      : spec_(std::move(spec)), anchor_(anchor), model_(std::move(model)), source_(source) {}

  const DiffusionSpec& spec() const { return spec_; }
  double anchor() const { return anchor_; }
  double r() const { return spec_.r; }
  double lower() const { return spec_.a; }
  double upper() const { return spec_.b; }
  SolutionSource source() const { return source_; }

  double mu(double x) const { return spec_.mu(x); }
  double sigma(double x) const { return spec_.sigma(x); }

  Jet psi_jet(double x) const { return model_->psi(x); }
  Jet phi_jet(double x) const { return model_->phi(x); }
  double psi(double x) const { return model_->psi(x).value; }
  double psi_prime(double x) const { return model_->psi(x).derivative; }
  double phi(double x) const { return model_->phi(x).value; }
  double phi_prime(double x) const { return model_->phi(x).derivative; }
  /// Second derivatives from the equation itself.
  double psi_second(double x) const { return second_from_ode(x, model_->psi(x)); }
  double phi_second(double x) const { return second_from_ode(x, model_->phi(x)); }

  double wronskian() const { return model_->wronskian(); }
  double scale_density(double x) const { return model_->scale_density(x); }
  double speed_density(double x) const {
    const double s = spec_.sigma(x);
    return 2.0 / (s * s * model_->scale_density(x));
  }

  template <PiecewiseC2 P>
  double apply_generator(const P& g, double x) const {
    for (double k : std::span<const double>(g.kinks()))
      if (k == x) throw KinkError(x);
    const double s = spec_.sigma(x);
    return 0.5 * s * s * g.second_derivative(x) + spec_.mu(x) * g.derivative(x, Side::right) - spec_.r * g.value(x);
  }

private:
  DiffusionSpec spec_;
  double anchor_;
  std::shared_ptr<const detail::PairModel> model_;
  SolutionSource source_;

  double second_from_ode(double x, Jet j) const {
    const double s = spec_.sigma(x);
    return 2.0 * (spec_.r * j.value - spec_.mu(x) * j.derivative) / (s * s);
  }
};

inline FundamentalPair fundamental_pair(const DiffusionSpec& spec, const FundamentalOptions& opt = {}) {
  spec.validate();
  double anchor = 0.0;
  if (opt.anchor) {
    anchor = *opt.anchor;
  } else if (std::isfinite(spec.a) && std::isfinite(spec.b)) {
    anchor = 0.5 * (spec.a + spec.b);
  } else if (std::isfinite(spec.a)) {
    anchor = spec.a + 1.0;
  } else if (std::isfinite(spec.b)) {
    anchor = spec.b - 1.0;
  }
  if (!spec.contains(anchor)) throw PreconditionError("anchor must lie inside the state interval");

  if (!opt.force_numerical) {
    if (auto c = detect_gbm(spec))
      return FundamentalPair(spec, anchor, std::make_shared<detail::GbmModel>(*c, spec.r, anchor),
                             SolutionSource::closed_form_gbm);
    if (auto c = detect_abm(spec))
      return FundamentalPair(spec, anchor, std::make_shared<detail::AbmModel>(*c, spec.r, anchor),
                             SolutionSource::closed_form_abm);
  }

  // Killing ends start just inside the boundary with the two-term expansion of u'/u.
  auto killing_start = [&](double end, int side) {
    const double eps = opt.epsilon_factor * std::abs(anchor - end);
    const double x = end + side * eps;
    const double s = spec.sigma(x);
    return BoundaryStart{x, side / eps - spec.mu(x) / (s * s)};
  };

  BoundaryStart psi_start{};
  if (opt.psi_start) {
    psi_start = *opt.psi_start;
  } else if (std::isfinite(spec.a) && is_killing(spec.boundary_a)) {
    psi_start = killing_start(spec.a, +1);
  } else {
    throw NoBoundaryCondition("lower boundary is " + std::string(to_string(spec.boundary_a)) +
                              ": supply a closed form or an asymptotic start for psi");
  }
  BoundaryStart phi_start{};
  if (opt.phi_start) {
    phi_start = *opt.phi_start;
  } else if (std::isfinite(spec.b) && is_killing(spec.boundary_b)) {
    phi_start = killing_start(spec.b, -1);
  } else {
    throw NoBoundaryCondition("upper boundary is " + std::string(to_string(spec.boundary_b)) +
                              ": supply a closed form or an asymptotic start for phi");
  }
  if (!(psi_start.x <= anchor && anchor <= phi_start.x))
    throw PreconditionError("boundary starts must bracket the anchor");

  auto scale_of = [&](double x, double end) {
    return std::isfinite(end) ? std::max(std::abs(x - end), 1e-300) : std::max(std::abs(x), 1.0);
  };
  auto model = std::make_shared<detail::NumericalModel>(spec, anchor, psi_start, phi_start,
                                                        scale_of(psi_start.x, spec.a),
                                                        scale_of(phi_start.x, spec.b), opt);
  return FundamentalPair(spec, anchor, std::move(model), SolutionSource::numerical);
}

/// E_x[exp(-r tau_y)] = psi(x)/psi(y) for x <= y.
inline double hitting_laplace(const FundamentalPair& pair, double x, double y) {
  if (x > y) throw OrderError("hitting_laplace needs x <= y");
  if (x == y) return 1.0;
  return pair.psi(x) / pair.psi(y);
}

/// Green kernel of the killed process.
inline double green(const FundamentalPair& pair, double x, double v) {
  const double lo = std::min(x, v);
  const double hi = std::max(x, v);
  return pair.psi(lo) * pair.phi(hi) / pair.wronskian();
}

/// The two one-sided integrals of the resolvent: int_a^x psi f m' and int_x^b phi f m'.
struct ResolventParts {
  double left;
  double right;
};

template <class F>
ResolventParts resolvent_parts(const FundamentalPair& pair, F&& f, double x, std::span<const double> breaks = {},
                               const QuadratureOptions& opt = {}) {
  auto left = [&](double v) { return pair.psi(v) * f(v) * pair.speed_density(v); };
  auto right = [&](double v) { return pair.phi(v) * f(v) * pair.speed_density(v); };
  return {integrate_range(left, pair.lower(), x, breaks, opt), integrate_range(right, x, pair.upper(), breaks, opt)};
}

/// Expected discounted integral of f along the path started at x.
template <class F>
double resolvent(const FundamentalPair& pair, F&& f, double x, std::span<const double> breaks = {},
                 const QuadratureOptions& opt = {}) {
  const auto parts = resolvent_parts(pair, f, x, breaks, opt);
  return (pair.phi(x) * parts.left + pair.psi(x) * parts.right) / pair.wronskian();
}

enum class Which { psi, phi };

/// (g u' - g'(x side) u) / S' for u = psi or phi.
template <PiecewiseC2 P>
double l_functional(const FundamentalPair& pair, Which which, const P& g, double x, Side side = Side::right) {
  const Jet u = which == Which::psi ? pair.psi_jet(x) : pair.phi_jet(x);
  return (g.value(x) * u.derivative - g.derivative(x, side) * u.value) / pair.scale_density(x);
}

/// int_y^z (G_r g)(v) psi(v) m'(v) dv, split at the kinks of g.
template <PiecewiseC2 P>
double canonical_increment(const FundamentalPair& pair, const P& g, double y, double z,
                           const QuadratureOptions& opt = {}) {
  if (y == z) return 0.0;
  auto integrand = [&](double v) { return pair.apply_generator(g, v) * pair.psi(v) * pair.speed_density(v); };
  return integrate(integrand, y, z, std::span<const double>(g.kinks()), opt);
}

} // namespace ostop
