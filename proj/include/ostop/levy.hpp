#pragma once

#include <cmath>
#include <numeric>
#include <string>
#include <variant>
#include <vector>

#include "ostop/errors.hpp"
#include "ostop/numerics.hpp"

namespace ostop {

/// Jump sizes z with weights p; a jump multiplies the state by (1 - z).
struct DiscreteJumps {
  std::vector<double> z;
  std::vector<double> p;
};

/// Beta(alpha, beta) distributed relative jump sizes.
struct BetaJumps {
  double alpha;
  double beta;
};

struct LevySpec {
  double mu = 0.0;
  double sigma = 1.0;
  double lambda = 0.0;
  double r = 1.0;
  std::variant<DiscreteJumps, BetaJumps> jumps = DiscreteJumps{};

  void validate() const {
    if (!(sigma > 0.0)) throw PreconditionError("levy root needs sigma > 0");
    if (!(r > 0.0)) throw PreconditionError("levy root needs r > 0");
    if (!(lambda >= 0.0)) throw PreconditionError("jump intensity must be non-negative");
    if (const auto* d = std::get_if<DiscreteJumps>(&jumps)) {
      if (d->z.size() != d->p.size()) throw PreconditionError("jump sizes and weights differ in length");
      if (lambda > 0.0 && d->z.empty()) throw PreconditionError("positive intensity needs a jump distribution");
      for (std::size_t i = 0; i < d->z.size(); ++i) {
        if (!(d->z[i] >= 0.0 && d->z[i] < 1.0)) throw PreconditionError("jump sizes must lie in [0, 1)");
        if (!(d->p[i] >= 0.0)) throw PreconditionError("jump weights must be non-negative");
      }
      if (!d->p.empty() && std::abs(std::accumulate(d->p.begin(), d->p.end(), 0.0) - 1.0) > 1e-12)
        throw PreconditionError("jump weights must sum to one");
    } else {
      const auto& bj = std::get<BetaJumps>(jumps);
      if (!(bj.alpha > 0.0 && bj.beta > 0.0)) throw PreconditionError("beta jump parameters must be positive");
    }
  }

  double mean_jump() const {
    if (const auto* d = std::get_if<DiscreteJumps>(&jumps))
      return std::inner_product(d->z.begin(), d->z.end(), d->p.begin(), 0.0);
    const auto& bj = std::get<BetaJumps>(jumps);
    return bj.alpha / (bj.alpha + bj.beta);
  }

  /// int (1 - z)^rho m(dz).
  double jump_moment(double rho) const {
    if (const auto* d = std::get_if<DiscreteJumps>(&jumps)) {
      double s = 0.0;
      for (std::size_t i = 0; i < d->z.size(); ++i) s += d->p[i] * std::pow(1.0 - d->z[i], rho);
      return d->z.empty() ? 1.0 : s;
    }
    const auto& bj = std::get<BetaJumps>(jumps);
    return std::exp(std::lgamma(bj.beta + rho) + std::lgamma(bj.alpha + bj.beta) - std::lgamma(bj.beta) -
                    std::lgamma(bj.alpha + bj.beta + rho));
  }

  double characteristic(double rho) const {
    return 0.5 * sigma * sigma * rho * (rho - 1.0) + (mu + lambda * mean_jump()) * rho - (r + lambda) +
           lambda * jump_moment(rho);
  }
};

struct LevyRoot {
  double root;
  double residual;
};

/// Positive root of the characteristic equation, bracketed by doubling from 0 up to 200.
inline LevyRoot levy_root(const LevySpec& ls) {
  ls.validate();
  auto f = [&](double rho) { return ls.characteristic(rho); };
  double lo = 0.0;
  double hi = 1.0;
  for (;;) {
    if (f(hi) >= 0.0) break;
    lo = hi;
    if (hi >= 200.0) throw NoBracket("no sign change of the characteristic function on (0, 200]");
    hi = std::min(2.0 * hi, 200.0);
  }
  const double root = bisect_root(f, lo, hi);
  return {root, f(root)};
}

} // namespace ostop
