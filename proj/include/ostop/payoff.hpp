#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ostop/core.hpp"
#include "ostop/errors.hpp"
#include "ostop/expr.hpp"
#include "ostop/fundamental.hpp"
#include "ostop/numerics.hpp"

namespace ostop {

/// Value and one-sided first and second derivatives at a point.
struct PayoffJet {
  double value;
  double first;
  double second;
};

namespace detail {

class PayoffModel {
public:
  virtual ~PayoffModel() = default;
  virtual double value(double x) const = 0;
  virtual double derivative(double x, Side side) const = 0;
  virtual double second_derivative(double x) const = 0;
  /// The second derivative is NaN where it does not exist.
  virtual PayoffJet jet(double x, Side side) const {
    double second = std::numeric_limits<double>::quiet_NaN();
    try {
      second = second_derivative(x);
    } catch (const KinkError&) {
    }
    return {value(x), derivative(x, side), second};
  }
};

class ExpressionPayoff final : public PayoffModel {
public:
  explicit ExpressionPayoff(Expression g) : g_(std::move(g)), d1_(differentiate(g_)), d2_(differentiate(d1_)) {}
  double value(double x) const override { return g_(x); }
  double derivative(double x, Side side) const override { return d1_.eval(x, side); }
  double second_derivative(double x) const override { return d2_(x); }

  const Expression& expression() const { return g_; }
  const Expression& first() const { return d1_; }

private:
  Expression g_;
  Expression d1_;
  Expression d2_;
};

class FunctionPayoff final : public PayoffModel {
public:
  FunctionPayoff(std::function<double(double)> g, std::function<double(double, Side)> d1,
                 std::function<double(double)> d2)
      : g_(std::move(g)), d1_(std::move(d1)), d2_(std::move(d2)) {}
  double value(double x) const override { return g_(x); }
  double derivative(double x, Side side) const override { return d1_(x, side); }
  double second_derivative(double x) const override { return d2_(x); }

private:
  std::function<double(double)> g_;
  std::function<double(double, Side)> d1_;
  std::function<double(double)> d2_;
};

// g = R_r pi; g' from the kernel derivative, g'' from G_r g = -pi.
class ResolventPayoff final : public PayoffModel {
public:
  ResolventPayoff(Expression pi, FundamentalPair pair, std::vector<double> breaks, QuadratureOptions opt)
      : pi_(std::move(pi)), pair_(std::move(pair)), breaks_(std::move(breaks)), opt_(opt) {}

  double value(double x) const override { return jet(x, Side::right).value; }
  double derivative(double x, Side side) const override { return jet(x, side).first; }
  double second_derivative(double x) const override { return jet(x, Side::right).second; }

  PayoffJet jet(double x, Side) const override {
    const auto parts = resolvent_parts(pair_, pi_, x, breaks_, opt_);
    const Jet psi = pair_.psi_jet(x);
    const Jet phi = pair_.phi_jet(x);
    const double b = pair_.wronskian();
    const double g = (phi.value * parts.left + psi.value * parts.right) / b;
    const double g1 = (phi.derivative * parts.left + psi.derivative * parts.right) / b;
    const double s = pair_.sigma(x);
    const double g2 = 2.0 * (pair_.r() * g - pair_.mu(x) * g1 - pi_(x)) / (s * s);
    return {g, g1, g2};
  }

  const Expression& rate() const { return pi_; }

private:
  Expression pi_;
  FundamentalPair pair_;
  std::vector<double> breaks_;
  QuadratureOptions opt_;
};

class ShiftedPayoff final : public PayoffModel {
public:
  ShiftedPayoff(std::shared_ptr<const PayoffModel> base, double shift) : base_(std::move(base)), shift_(shift) {}
  double value(double x) const override { return base_->value(x) + shift_; }
  double derivative(double x, Side side) const override { return base_->derivative(x, side); }
  double second_derivative(double x) const override { return base_->second_derivative(x); }
  PayoffJet jet(double x, Side side) const override {
    auto j = base_->jet(x, side);
    j.value += shift_;
    return j;
  }

private:
  std::shared_ptr<const PayoffModel> base_;
  double shift_;
};

// Zeros of a tie function located to adjacent doubles. Exact zeros are preferred.
inline std::vector<double> tie_points(const Expression& tie, const std::vector<double>& xs) {
  std::vector<double> out;
  auto safe = [&](double x) -> std::optional<double> {
    try {
      return tie(x);
    } catch (const DomainError&) {
      return std::nullopt;
    }
  };
  std::optional<double> prev;
  double prev_x = 0.0;
  for (double x : xs) {
    auto v = safe(x);
    if (v && *v == 0.0) {
      out.push_back(x);
    } else if (v && prev && *prev != 0.0 && ((*prev > 0.0) != (*v > 0.0))) {
      const double root = bisect_root([&](double t) { return tie(t); }, prev_x, x);
      out.push_back(root);
    }
    prev = v;
    prev_x = x;
  }
  return out;
}

} // namespace detail

/// Exercise reward with a finite kink set and cached one-sided derivatives there.
class Payoff {
public:
  struct Kink {
    double x;
    double left;
    double right;
  };

  Payoff(std::shared_ptr<const detail::PayoffModel> model, std::vector<double> kink_points) : model_(std::move(model)) {
    std::sort(kink_points.begin(), kink_points.end());
    kink_points.erase(std::unique(kink_points.begin(), kink_points.end()), kink_points.end());
    for (double k : kink_points) {
      kinks_.push_back(k);
      kink_data_.push_back(Kink{k, model_->derivative(k, Side::left), model_->derivative(k, Side::right)});
    }
  }

  /// Kinks are the user list plus every branch tie whose one-sided derivatives differ.
  static Payoff from_expression(const Expression& g, const Grid& scan, std::vector<double> kinks = {}) {
    auto model = std::make_shared<detail::ExpressionPayoff>(g);
    const auto xs = scan.points();
    for (const auto& tie : g.tie_functions()) {
      if (!tie.depends_on_x()) continue;
      for (double x : detail::tie_points(tie, xs)) {
        double left = 0.0;
        double right = 0.0;
        try {
          left = model->first().eval(std::nextafter(x, -kInf), Side::left);
          right = model->first().eval(std::nextafter(x, kInf), Side::right);
        } catch (const DomainError&) {
          continue;
        }
        const double l_at = model->first().eval(x, Side::left);
        const double r_at = model->first().eval(x, Side::right);
        if (l_at != r_at || std::abs(left - right) > 1e-9 * (1.0 + std::abs(left) + std::abs(right)))
          kinks.push_back(x);
      }
    }
    return Payoff(std::move(model), std::move(kinks));
  }

  static Payoff from_text(std::string_view text, const Grid& scan, std::vector<double> kinks = {}) {
    return from_expression(parse(text), scan, std::move(kinks));
  }

  /// Payoff given by value, one-sided derivative and second derivative callables.
  static Payoff from_functions(std::function<double(double)> g, std::function<double(double, Side)> d1,
                               std::function<double(double)> d2, std::vector<double> kinks = {}) {
    return Payoff(std::make_shared<detail::FunctionPayoff>(std::move(g), std::move(d1), std::move(d2)),
                  std::move(kinks));
  }

  /// g = R_r pi, the expected discounted flow of pi.
  static Payoff resolvent(const Expression& pi, const FundamentalPair& pair, const Grid& scan,
                          std::vector<double> pi_kinks = {}, const QuadratureOptions& opt = {}) {
    // Kinks of pi only break the integrands; g itself stays C^1.
    const auto xs = scan.points();
    for (const auto& tie : pi.tie_functions())
      if (tie.depends_on_x())
        for (double x : detail::tie_points(tie, xs)) pi_kinks.push_back(x);
    std::sort(pi_kinks.begin(), pi_kinks.end());
    return Payoff(std::make_shared<detail::ResolventPayoff>(pi, pair, std::move(pi_kinks), opt), {});
  }

  double value(double x) const { return model_->value(x); }
  double operator()(double x) const { return value(x); }

  double derivative(double x, Side side) const {
    if (const Kink* k = kink_at(x)) return side == Side::left ? k->left : k->right;
    return model_->derivative(x, side);
  }
  double one_sided_derivative(double x, Side side) const { return derivative(x, side); }

  double second_derivative(double x) const {
    if (kink_at(x)) throw KinkError(x);
    return model_->second_derivative(x);
  }

  PayoffJet jet(double x, Side side) const {
    auto j = model_->jet(x, side);
    if (const Kink* k = kink_at(x)) j.first = side == Side::left ? k->left : k->right;
    return j;
  }

  std::span<const double> kinks() const { return kinks_; }
  std::span<const Kink> kink_data() const { return kink_data_; }
  bool is_kink(double x) const { return kink_at(x) != nullptr; }

  /// g + c, same kinks.
  Payoff shifted(double c) const {
    Payoff out = *this;
    out.model_ = std::make_shared<detail::ShiftedPayoff>(model_, c);
    return out;
  }

  /// x_g with g > 0 on (x_g, hi] of the grid, refined by bisection; nullopt if g <= 0 at the top.
  std::optional<double> positivity_root(const Grid& grid) const {
    const auto xs = grid.points();
    if (!(value(xs.back()) > 0.0)) return std::nullopt;
    std::size_t i = xs.size() - 1;
    while (i > 0 && value(xs[i - 1]) > 0.0) --i;
    if (i == 0) return grid.lo;
    auto [lo, hi] = bisect_predicate([&](double x) { return value(x) > 0.0; }, xs[i - 1], xs[i], 1e-14);
    (void)lo;
    return hi;
  }

private:
  std::shared_ptr<const detail::PayoffModel> model_;
  std::vector<double> kinks_;
  std::vector<Kink> kink_data_;

  const Kink* kink_at(double x) const {
    auto it = std::lower_bound(kinks_.begin(), kinks_.end(), x);
    if (it == kinks_.end() || *it != x) return nullptr;
    return &kink_data_[static_cast<std::size_t>(it - kinks_.begin())];
  }
};

static_assert(PiecewiseC2<Payoff>);

struct Violation {
  std::string condition;  // "A", "B" or "C"
  double location;
  std::string message;
};

struct SufficiencyCertificate {
  bool satisfied = false;
  std::optional<double> sign_change_point;
  std::vector<Violation> violations;
  std::string note;
};

/// Grid check of the sufficient conditions for a single upper threshold:
/// (A) g <= 0 exactly on a lower interval, (B) G_r g changes sign once from >= 0 to < 0 at x~,
/// (C) convex kinks left of x~ and concave kinks right of it.
inline SufficiencyCertificate check_sufficiency(const Payoff& p, const FundamentalPair& pair, const Grid& grid) {
  if (grid.n < 100) throw PreconditionError("sufficiency check needs at least 100 grid points");
  const auto xs = grid.points();
  SufficiencyCertificate cert;
  cert.note = "verified on " + std::to_string(xs.size()) + "-point grid";

  // (A)
  std::vector<double> gv(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) gv[i] = p.value(xs[i]);
  std::size_t first_pos = xs.size();
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (gv[i] > 0.0) {
      first_pos = i;
      break;
    }
  }
  if (first_pos == 0) {
    cert.violations.push_back({"A", xs.front(), "g is positive on the whole grid, so g^{-1}(R-) is empty"});
  } else if (first_pos == xs.size()) {
    cert.violations.push_back({"A", xs.back(), "g is never positive on the grid"});
  } else {
    for (std::size_t i = first_pos; i < xs.size(); ++i) {
      if (!(gv[i] > 0.0)) {
        cert.violations.push_back({"A", xs[i], "g returns to non-positive values above its positivity root"});
        break;
      }
    }
  }

  // (B)
  auto generator = [&](double x) {
    if (p.is_kink(x)) x = std::nextafter(x, kInf);
    return pair.apply_generator(p, x);
  };
  std::optional<std::size_t> first_neg;
  std::size_t last_nonneg_before = 0;
  bool have_nonneg = false;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double v = generator(xs[i]);
    if (!first_neg) {
      if (v < 0.0) {
        first_neg = i;
      } else {
        last_nonneg_before = i;
        have_nonneg = true;
      }
    } else if (v >= 0.0) {
      cert.violations.push_back({"B", xs[i], "generator of g changes sign more than once"});
      break;
    }
  }
  if (!first_neg) {
    cert.violations.push_back({"B", xs.back(), "generator of g never becomes negative"});
  } else if (!have_nonneg) {
    cert.sign_change_point = pair.lower();
  } else {
    auto [lo, hi] = bisect_predicate([&](double x) { return generator(x) < 0.0; }, xs[last_nonneg_before],
                                     xs[*first_neg], 1e-14);
    (void)lo;
    double xt = hi;
    for (double k : p.kinks()) {
      // a jump of the generator at a kink puts the sign change exactly there
      if (k > xs[last_nonneg_before] && k <= xs[*first_neg] && std::abs(k - xt) <= 1e-12 * (1.0 + std::abs(k))) xt = k;
    }
    cert.sign_change_point = xt;
  }

  // (C)
  if (cert.sign_change_point) {
    const double xt = *cert.sign_change_point;
    for (const auto& k : p.kink_data()) {
      if (k.x < xt && k.right < k.left)
        cert.violations.push_back({"C", k.x, "concave kink below the sign change of the generator"});
      if (k.x > xt && k.right > k.left)
        cert.violations.push_back({"C", k.x, "convex kink above the sign change of the generator"});
    }
  }

  cert.satisfied = cert.violations.empty();
  return cert;
}

} // namespace ostop
