#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "ostop/core.hpp"
#include "ostop/diffusion.hpp"
#include "ostop/errors.hpp"
#include "ostop/philox.hpp"
#include "ostop/representation.hpp"

namespace ostop {

enum class Scheme { exact_gbm, euler_maruyama };

inline Scheme parse_scheme(std::string_view s) {
  if (s == "exact-gbm" || s == "exact_gbm") return Scheme::exact_gbm;
  if (s == "euler-maruyama" || s == "euler_maruyama" || s == "euler") return Scheme::euler_maruyama;
  throw ConfigError("unknown scheme '" + std::string(s) + "'");
}

inline std::string_view to_string(Scheme s) { return s == Scheme::exact_gbm ? "exact-gbm" : "euler-maruyama"; }

struct MCConfig {
  std::size_t n_paths = 10000;
  double dt = 1e-3;
  std::uint64_t seed = 42;
  double x0 = 1.0;
  Scheme scheme = Scheme::exact_gbm;
  /// 0 picks the hardware concurrency.
  unsigned workers = 0;
  /// Permits dt * r > 0.01, e.g. for bias ladders; the estimate notes it.
  bool allow_coarse_dt = false;
  /// Nodes of the interpolation table for fhat above the threshold.
  std::size_t table_points = 4096;

  void validate(const DiffusionSpec& spec) const {
    if (n_paths < 100) throw PreconditionError("Monte Carlo needs at least 100 paths");
    if (!(dt > 0.0)) throw PreconditionError("time step must be positive");
    if (dt * spec.r > 0.01 && !allow_coarse_dt)
      throw PreconditionError("dt * r exceeds 0.01; set allow_coarse_dt to run anyway");
    if (!spec.contains(x0)) throw PreconditionError("x0 lies outside the state interval");
  }
};

struct MCEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t n_effective = 0;
  std::string discretization_note;
};

/// Terminal state and discrete running maximum of one path stopped at an Exp(r) time.
struct PathSample {
  double x_T;
  double m_T;
  bool killed;
};

namespace detail {

class PathStepper {
public:
  PathStepper(const DiffusionSpec& spec, const MCConfig& cfg) : spec_(spec), cfg_(cfg) {
    if (cfg.scheme == Scheme::exact_gbm) {
      auto c = detect_gbm(spec);
      if (!c) throw SchemeMismatch("exact-gbm scheme requested for a diffusion that is not geometric Brownian motion");
      log_drift_ = c->m - 0.5 * c->s * c->s;
      log_vol_ = c->s;
    }
  }

  /// Simulates one path, calling visit(x) at every recorded point including x0.
  template <class Visit>
  PathSample run(std::uint64_t index, Visit&& visit) const {
    PhiloxStream rng(cfg_.seed, index);
    const double horizon = rng.exponential(spec_.r);
    double x = cfg_.x0;
    double m = x;
    visit(x);
    const auto full = static_cast<std::uint64_t>(std::floor(horizon / cfg_.dt));
    const double tail = horizon - static_cast<double>(full) * cfg_.dt;
    for (std::uint64_t k = 0; k <= full; ++k) {
      const double h = k < full ? cfg_.dt : tail;
      if (!(h > 0.0)) break;
      if (!step(x, h, rng.normal())) return {x, m, true};
      m = std::max(m, x);
      visit(x);
    }
    return {x, m, false};
  }

private:
  const DiffusionSpec& spec_;
  const MCConfig& cfg_;
  double log_drift_ = 0.0;
  double log_vol_ = 0.0;

  bool step(double& x, double h, double z) const {
    const double sq = std::sqrt(h);
    if (cfg_.scheme == Scheme::exact_gbm) {
      x *= std::exp(log_drift_ * h + log_vol_ * sq * z);
      return true;
    }
    const double next = x + spec_.mu(x) * h + spec_.sigma(x) * sq * z;
    if (!spec_.contains(next)) return false;
    x = next;
    return true;
  }
};

// Fixed-order parallel map over paths: out[i] depends on i alone.
template <class T, class Fn>
std::vector<T> map_paths(std::size_t n, unsigned workers, Fn&& fn) {
  std::vector<T> out(n);
  unsigned w = workers ? workers : std::max(1u, std::thread::hardware_concurrency());
  w = static_cast<unsigned>(std::min<std::size_t>(w, n));
  if (w <= 1) {
    for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
    return out;
  }
  std::vector<std::jthread> pool;
  pool.reserve(w);
  const std::size_t chunk = (n + w - 1) / w;
  std::vector<std::exception_ptr> errors(w);
  for (unsigned t = 0; t < w; ++t) {
    pool.emplace_back([&, t] {
      try {
        const std::size_t lo = t * chunk;
        const std::size_t hi = std::min(n, lo + chunk);
        for (std::size_t i = lo; i < hi; ++i) out[i] = fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  pool.clear();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

inline MCEstimate summarize(const std::vector<double>& v, std::string note) {
  MCEstimate est;
  est.n_effective = v.size();
  if (v.empty()) return est;
  double sum = 0.0;
  for (double x : v) sum += x;
  const double mean = sum / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const double n = static_cast<double>(v.size());
  est.mean = mean;
  est.std_error = v.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
  est.discretization_note = std::move(note);
  return est;
}

inline std::string monitoring_note(const DiffusionSpec& spec, const MCConfig& cfg, std::size_t killed) {
  std::string note = std::string(to_string(cfg.scheme)) + " with dt=" + std::to_string(cfg.dt) +
                     "; maximum monitored on the grid only, so it is biased low";
  if (cfg.dt * spec.r > 0.01) note += "; coarse step (dt*r > 0.01)";
  if (killed) note += "; " + std::to_string(killed) + " paths left the interval and were killed";
  return note;
}

} // namespace detail

/// Piecewise-linear table of fhat on [y*, hi] with cells split at kinks; exact evaluation above hi.
class FhatTable {
public:
  FhatTable(const RepresentingFunction& rf, double hi, std::size_t points) : rf_(rf) {
    lo_ = rf.threshold();
    hi_ = std::max(hi, lo_);
    std::vector<double> xs;
    if (hi_ > lo_) {
      xs = Grid{lo_, hi_, std::max<std::size_t>(points, 2), lo_ > 0.0}.points();
      for (double k : rf.payoff().kinks())
        if (k > lo_ && k < hi_) xs.push_back(k);
      std::sort(xs.begin(), xs.end());
      xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    } else {
      xs = {lo_};
    }
    xs_ = xs;
    right_.resize(xs.size());
    left_.resize(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
      right_[i] = rf.right(xs[i]);
      left_[i] = rf.payoff().is_kink(xs[i]) ? rf.left(xs[i]) : right_[i];
    }
  }

  double threshold() const { return lo_; }

  /// fhat(x) 1{x >= y*}.
  double operator()(double x) const {
    if (x < lo_) return 0.0;
    if (x > hi_) return rf_(x);
    auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
    const auto i = static_cast<std::size_t>(it - xs_.begin()) - 1;
    if (xs_[i] == x || i + 1 == xs_.size()) return right_[i];
    const double t = (x - xs_[i]) / (xs_[i + 1] - xs_[i]);
    return right_[i] + t * (left_[i + 1] - right_[i]);
  }

private:
  const RepresentingFunction& rf_;
  double lo_ = 0.0;
  double hi_ = 0.0;
  std::vector<double> xs_;
  std::vector<double> right_;
  std::vector<double> left_;
};

inline std::vector<PathSample> sample_running_max(const DiffusionSpec& spec, const MCConfig& cfg) {
  cfg.validate(spec);
  const detail::PathStepper stepper(spec, cfg);
  return detail::map_paths<PathSample>(cfg.n_paths, cfg.workers,
                                       [&](std::size_t i) { return stepper.run(i, [](double) {}); });
}

/// P_x0[M_T >= y] from the discrete maximum.
inline MCEstimate estimate_hitting_probability(const DiffusionSpec& spec, const MCConfig& cfg, double y) {
  const auto paths = sample_running_max(spec, cfg);
  std::vector<double> hits(paths.size());
  std::size_t killed = 0;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    hits[i] = paths[i].m_T >= y ? 1.0 : 0.0;
    killed += paths[i].killed;
  }
  return detail::summarize(hits, detail::monitoring_note(spec, cfg, killed));
}

struct ExpectedSupEstimate {
  /// Mean over paths of sup_t fhat(X_t) 1{X_t >= y*}.
  MCEstimate sup_form;
  /// Mean over paths of fhat(M_T) 1{M_T >= y*}.
  MCEstimate max_form;
  /// Paired per-path difference sup_form - max_form.
  MCEstimate difference;
};

inline ExpectedSupEstimate estimate_expected_sup(const RepresentingFunction& rf, const DiffusionSpec& spec,
                                                 const MCConfig& cfg) {
  cfg.validate(spec);
  const double y = rf.threshold();
  const FhatTable table(rf, std::max({200.0, 10.0 * y, 10.0 * cfg.x0}), cfg.table_points);
  const detail::PathStepper stepper(spec, cfg);

  struct Pair {
    double sup;
    double at_max;
    bool killed;
  };
  const auto res = detail::map_paths<Pair>(cfg.n_paths, cfg.workers, [&](std::size_t i) {
    double best = -kInf;
    const auto path = stepper.run(i, [&](double x) { best = std::max(best, table(x)); });
    return Pair{best, table(path.m_T), path.killed};
  });

  std::vector<double> s(res.size());
  std::vector<double> m(res.size());
  std::vector<double> d(res.size());
  std::size_t killed = 0;
  for (std::size_t i = 0; i < res.size(); ++i) {
    s[i] = res[i].sup;
    m[i] = res[i].at_max;
    d[i] = s[i] - m[i];
    killed += res[i].killed;
  }
  const std::string note = detail::monitoring_note(spec, cfg, killed);
  return {detail::summarize(s, note), detail::summarize(m, note), detail::summarize(d, note)};
}

/// E_x0[h(X_T) | M_T <= y]; killed paths count with h = 0 at the cemetery.
inline MCEstimate estimate_conditional(const DiffusionSpec& spec, const std::function<double(double)>& h,
                                       const MCConfig& cfg, double y) {
  if (!(cfg.x0 < y)) throw PreconditionError("conditioning level must exceed x0");
  const auto paths = sample_running_max(spec, cfg);
  std::vector<double> v;
  std::size_t killed = 0;
  for (const auto& p : paths) {
    if (p.m_T > y) continue;
    v.push_back(p.killed ? 0.0 : h(p.x_T));
    killed += p.killed;
  }
  if (v.size() < 100)
    throw TooFewConditioningSamples("only " + std::to_string(v.size()) + " paths stayed below y");
  return detail::summarize(v, detail::monitoring_note(spec, cfg, killed));
}

} // namespace ostop
