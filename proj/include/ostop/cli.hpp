#pragma once

// Configuration-driven front end. Config files are JSON with comments allowed:
//
//   {
//     "diffusion": { "mu": "1.5*x", "sigma": "x", "interval": [0, "inf"],
//                    "boundaries": ["natural", "natural"], "r": 4, "anchor": 1 },
//     "payoff":    { "kind": "expression", "expr": "x-1", "kinks": [] },
//     "solver":    { "grid": { "lo": 0.01, "hi": 100, "n": 2000, "geometric": true },
//                    "points": [1, 2, 4] },
//     "mc":        { "n_paths": 100000, "dt": 1e-4, "seed": 42, "x0": 1, "scheme": "exact-gbm" },
//     "index":     { "k": 1 }
//   }
//
// payoff.kind "resolvent" takes "pi" instead of "expr". diffusion.psi_start / phi_start
// ({"x": .., "log_derivative": ..}) feed the numerical fundamental solutions.

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ostop/ostop.hpp"

namespace ostop::cli {

using Json = nlohmann::ordered_json;

enum ExitCode : int { kOk = 0, kConfig = 1, kNoSolution = 2, kOutsideTolerance = 3 };

inline std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  std::array<char, 64> buf{};
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

struct ProblemConfig {
  DiffusionSpec spec;
  FundamentalOptions fundamental;
  std::string payoff_kind = "expression";
  std::string payoff_text;
  std::vector<double> kinks;
  SolverOptions solver;
  std::vector<double> points;
  MCConfig mc;
  std::optional<double> index_k;
};

namespace detail {

[[noreturn]] inline void fail(const std::string& where, const std::string& what) {
  throw ConfigError(where + ": " + what);
}

inline const Json& need(const Json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) fail(where, std::string("missing key '") + key + "'");
  return obj.at(key);
}

inline double number(const Json& v, const std::string& where) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf" || s == "+inf") return kInf;
    if (s == "-inf") return -kInf;
  }
  fail(where, "expected a number");
}

inline std::string text(const Json& v, const std::string& where) {
  if (!v.is_string()) fail(where, "expected a string");
  return v.get<std::string>();
}

inline Expression expression(const Json& v, const std::string& where) {
  try {
    return parse(text(v, where));
  } catch (const SyntaxError& e) {
    fail(where, e.what());
  }
}

inline std::vector<double> numbers(const Json& v, const std::string& where) {
  if (!v.is_array()) fail(where, "expected an array");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(number(v[i], where + "/" + std::to_string(i)));
  return out;
}

inline BoundaryStart start(const Json& v, const std::string& where) {
  return {number(need(v, "x", where), where + "/x"), number(need(v, "log_derivative", where), where + "/log_derivative")};
}

} // namespace detail

inline ProblemConfig parse_config(const std::string& content) {
  Json root;
  try {
    root = Json::parse(content, nullptr, true, true);
  } catch (const Json::parse_error& e) {
    throw ConfigError("config parse error at byte " + std::to_string(e.byte) + ": " + e.what());
  }
  using detail::need;
  using detail::number;
  ProblemConfig cfg;

  const Json& d = need(root, "diffusion", "");
  const auto mu = detail::expression(need(d, "mu", "/diffusion"), "/diffusion/mu");
  const auto sigma = detail::expression(need(d, "sigma", "/diffusion"), "/diffusion/sigma");
  const auto interval = detail::numbers(need(d, "interval", "/diffusion"), "/diffusion/interval");
  if (interval.size() != 2 || !(interval[0] < interval[1])) detail::fail("/diffusion/interval", "expected [a, b] with a < b");
  Boundary ba = Boundary::natural;
  Boundary bb = Boundary::natural;
  if (d.contains("boundaries")) {
    const auto& bs = d.at("boundaries");
    if (!bs.is_array() || bs.size() != 2) detail::fail("/diffusion/boundaries", "expected two classifications");
    ba = parse_boundary(detail::text(bs[0], "/diffusion/boundaries/0"));
    bb = parse_boundary(detail::text(bs[1], "/diffusion/boundaries/1"));
  }
  const double r = number(need(d, "r", "/diffusion"), "/diffusion/r");
  if (!(r > 0.0)) detail::fail("/diffusion/r", "discount rate must be positive");
  cfg.spec = DiffusionSpec{[mu](double x) { return mu(x); }, [sigma](double x) { return sigma(x); },
                           interval[0], interval[1], ba, bb, r};
  if (d.contains("anchor")) cfg.fundamental.anchor = number(d.at("anchor"), "/diffusion/anchor");
  if (d.contains("psi_start")) cfg.fundamental.psi_start = detail::start(d.at("psi_start"), "/diffusion/psi_start");
  if (d.contains("phi_start")) cfg.fundamental.phi_start = detail::start(d.at("phi_start"), "/diffusion/phi_start");
  if (d.contains("numerical")) cfg.fundamental.force_numerical = d.at("numerical").get<bool>();

  const Json& p = need(root, "payoff", "");
  cfg.payoff_kind = p.contains("kind") ? detail::text(p.at("kind"), "/payoff/kind") : "expression";
  if (cfg.payoff_kind == "expression") {
    cfg.payoff_text = detail::text(need(p, "expr", "/payoff"), "/payoff/expr");
    detail::expression(p.at("expr"), "/payoff/expr");
  } else if (cfg.payoff_kind == "resolvent") {
    cfg.payoff_text = detail::text(need(p, "pi", "/payoff"), "/payoff/pi");
    detail::expression(p.at("pi"), "/payoff/pi");
  } else {
    detail::fail("/payoff/kind", "expected 'expression' or 'resolvent'");
  }
  if (p.contains("kinks")) cfg.kinks = detail::numbers(p.at("kinks"), "/payoff/kinks");

  if (root.contains("solver")) {
    const Json& s = root.at("solver");
    if (s.contains("grid")) {
      const Json& g = s.at("grid");
      cfg.solver.grid.lo = number(need(g, "lo", "/solver/grid"), "/solver/grid/lo");
      cfg.solver.grid.hi = number(need(g, "hi", "/solver/grid"), "/solver/grid/hi");
      if (g.contains("n")) cfg.solver.grid.n = g.at("n").get<std::size_t>();
      cfg.solver.grid.geometric = g.contains("geometric") ? g.at("geometric").get<bool>() : cfg.solver.grid.lo > 0.0;
    }
    if (s.contains("certify_points")) cfg.solver.certify_points = s.at("certify_points").get<std::size_t>();
    if (s.contains("abs_tol")) cfg.solver.quadrature.abs_tol = number(s.at("abs_tol"), "/solver/abs_tol");
    if (s.contains("rel_tol")) cfg.solver.quadrature.rel_tol = number(s.at("rel_tol"), "/solver/rel_tol");
    if (s.contains("points")) cfg.points = detail::numbers(s.at("points"), "/solver/points");
  }
  try {
    cfg.solver.grid.validate();
  } catch (const PreconditionError& e) {
    detail::fail("/solver/grid", e.what());
  }
  if (cfg.solver.grid.lo <= cfg.spec.a || cfg.solver.grid.hi >= cfg.spec.b)
    detail::fail("/solver/grid", "grid must lie strictly inside the state interval");
  cfg.solver.fundamental = cfg.fundamental;

  if (root.contains("mc")) {
    const Json& m = root.at("mc");
    if (m.contains("n_paths")) cfg.mc.n_paths = m.at("n_paths").get<std::size_t>();
    if (m.contains("dt")) cfg.mc.dt = number(m.at("dt"), "/mc/dt");
    if (m.contains("seed")) cfg.mc.seed = m.at("seed").get<std::uint64_t>();
    if (m.contains("x0")) cfg.mc.x0 = number(m.at("x0"), "/mc/x0");
    if (m.contains("scheme")) cfg.mc.scheme = parse_scheme(detail::text(m.at("scheme"), "/mc/scheme"));
    if (m.contains("workers")) cfg.mc.workers = m.at("workers").get<unsigned>();
    if (m.contains("allow_coarse_dt")) cfg.mc.allow_coarse_dt = m.at("allow_coarse_dt").get<bool>();
  }
  if (root.contains("index") && root.at("index").contains("k"))
    cfg.index_k = number(root.at("index").at("k"), "/index/k");
  return cfg;
}

inline ProblemConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config type error: ") + e.what());
  }
}

/// Pair and payoff described by a config.
struct Problem {
  FundamentalPair pair;
  Payoff payoff;
};

inline Problem build_problem(const ProblemConfig& cfg) {
  auto pair = fundamental_pair(cfg.spec, cfg.fundamental);
  const Grid scan = cfg.solver.grid.with_points(std::max<std::size_t>(cfg.solver.grid.n, 2000));
  if (cfg.payoff_kind == "resolvent")
    return {pair, Payoff::resolvent(parse(cfg.payoff_text), pair, scan, cfg.kinks, cfg.solver.quadrature)};
  return {pair, Payoff::from_text(cfg.payoff_text, scan, cfg.kinks)};
}

namespace detail {

// Writes to the file at `path`, or to stdout when the path is empty.
class Output {
public:
  explicit Output(const std::string& path) {
    if (!path.empty()) {
      file_.open(path, std::ios::binary | std::ios::trunc);
      if (!file_) throw ConfigError("cannot write output file '" + path + "'");
    }
  }
  std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

private:
  std::ofstream file_;
};

template <class Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const NoThreshold& e) {
    err << "error: " << e.what() << '\n';
    return kNoSolution;
  } catch (const NoBracket& e) {
    err << "error: " << e.what() << '\n';
    return kNoSolution;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kConfig;
  } catch (const nlohmann::json::exception& e) {
    err << "error: config: " << e.what() << '\n';
    return kConfig;
  }
}

inline Json number_json(double v) {
  if (std::isfinite(v)) return v;
  return fmt(v);
}

} // namespace detail

inline int cmd_solve(const std::string& config_path, const std::string& output_path, std::ostream& err = std::cerr) {
  return detail::guarded(err, [&] {
    const auto cfg = load_config(config_path);
    const auto problem = build_problem(cfg);
    const auto sol = solve(problem.payoff, problem.pair, cfg.solver);
    const auto& info = *sol.rf().threshold_info();

    Json report;
    report["y_star"] = sol.y_star();
    report["smooth_fit"] = info.smooth_fit;
    report["at_kink"] = info.at_kink;
    report["jump_at_threshold"] = info.jump_at_threshold;
    report["representation_as_expected_sup"] = sol.flags().representation_as_expected_sup;
    report["fundamental_source"] = std::string(to_string(problem.pair.source()));

    Json suff;
    suff["satisfied"] = sol.sufficiency().satisfied;
    suff["sign_change_point"] = sol.sufficiency().sign_change_point
                                    ? detail::number_json(*sol.sufficiency().sign_change_point)
                                    : Json(nullptr);
    Json violations = Json::array();
    for (const auto& v : sol.sufficiency().violations)
      violations.push_back({{"condition", v.condition}, {"x", detail::number_json(v.location)}, {"message", v.message}});
    suff["violations"] = violations;
    suff["note"] = sol.sufficiency().note;
    report["sufficiency"] = suff;

    const auto& mono = sol.monotone();
    Json failed = Json::array();
    for (std::size_t i = 0; i < mono.failed_at.size() && i < 10; ++i) failed.push_back(mono.failed_at[i]);
    report["monotone"] = {{"certified", mono.certified},
                          {"failed_count", mono.failed_at.size()},
                          {"first_failures", failed},
                          {"lemma_a", mono.lemma_a},
                          {"lemma_b", mono.lemma_b},
                          {"kink_jumps_ok", mono.kink_jumps_ok},
                          {"note", mono.note}};
    report["flags"] = {{"sufficiency_ok", sol.flags().sufficiency_ok},
                       {"ratio_limit_zero", sol.flags().ratio_limit_zero},
                       {"representation_as_expected_sup", sol.flags().representation_as_expected_sup},
                       {"smooth_fit", sol.flags().smooth_fit}};
    Json values = Json::array();
    for (double x : cfg.points)
      values.push_back({{"x", x}, {"V", sol.value(x)}, {"g", problem.payoff.value(x)}});
    report["values"] = values;
    report["warnings"] = sol.warnings();

    detail::Output out(output_path);
    out.stream() << report.dump(2) << '\n';
    return int{kOk};
  });
}

inline int cmd_curve(const std::string& config_path, const std::string& quantity, double lo, double hi, std::size_t n,
                     const std::string& output_path, std::ostream& err = std::cerr) {
  return detail::guarded(err, [&] {
    if (quantity != "fhat" && quantity != "value" && quantity != "ratio" && quantity != "psi")
      throw ConfigError("quantity must be one of fhat, value, ratio, psi");
    const auto cfg = load_config(config_path);
    const auto problem = build_problem(cfg);
    const Grid grid{lo, hi, n, false};
    grid.validate();

    std::optional<StoppingSolution> sol;
    if (quantity == "value") sol.emplace(solve(problem.payoff, problem.pair, cfg.solver));
    const RepresentingFunction rf(problem.payoff, problem.pair, cfg.solver.grid);

    auto eval = [&](double x, Side side) {
      if (quantity == "fhat") return rf.value(x, side);
      if (quantity == "value") return sol->value(x);
      if (quantity == "ratio") return problem.payoff.value(x) / problem.pair.psi(x);
      return problem.pair.psi(x);
    };

    auto xs = grid.points();
    if (quantity == "fhat")
      for (double k : problem.payoff.kinks())
        if (k >= lo && k <= hi) xs.push_back(k);
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());

    std::string csv = "x," + quantity + "\n";
    for (double x : xs) {
      if (quantity == "fhat" && problem.payoff.is_kink(x)) {
        csv += fmt(x) + "," + fmt(eval(x, Side::left)) + "\n";
      }
      csv += fmt(x) + "," + fmt(eval(x, Side::right)) + "\n";
    }
    detail::Output out(output_path);
    out.stream() << csv;
    return int{kOk};
  });
}

inline int cmd_verify(const std::string& config_path, const std::string& output_path, std::optional<std::uint64_t> seed,
                      std::ostream& log = std::cout, std::ostream& err = std::cerr) {
  return detail::guarded(err, [&] {
    auto cfg = load_config(config_path);
    if (seed) cfg.mc.seed = *seed;
    const auto problem = build_problem(cfg);
    const auto sol = solve(problem.payoff, problem.pair, cfg.solver);
    const double analytic = sol.value(cfg.mc.x0);
    const auto est = estimate_expected_sup(sol.rf(), cfg.spec, cfg.mc);

    std::string csv = "estimator,mean,std_error,n,dt,seed\n";
    auto row = [&](const char* name, const MCEstimate& e) {
      csv += std::string(name) + "," + fmt(e.mean) + "," + fmt(e.std_error) + "," + std::to_string(e.n_effective) +
             "," + fmt(cfg.mc.dt) + "," + std::to_string(cfg.mc.seed) + "\n";
    };
    row("sup_form", est.sup_form);
    row("max_form", est.max_form);
    row("difference", est.difference);
    detail::Output out(output_path);
    out.stream() << csv;

    auto within = [&](const MCEstimate& e) {
      return std::abs(e.mean - analytic) <= std::max(3.0 * e.std_error, 0.01 * std::abs(analytic));
    };
    const bool sup_ok = within(est.sup_form);
    const bool max_ok = within(est.max_form);
    log << "analytic V(x0=" << fmt(cfg.mc.x0) << ") = " << fmt(analytic) << '\n'
        << "sup_form = " << fmt(est.sup_form.mean) << " +/- " << fmt(est.sup_form.std_error)
        << (sup_ok ? "  within tolerance" : "  OUTSIDE tolerance") << '\n'
        << "max_form = " << fmt(est.max_form.mean) << " +/- " << fmt(est.max_form.std_error)
        << (max_ok ? "  within tolerance" : "  OUTSIDE tolerance") << '\n'
        << "paired difference = " << fmt(est.difference.mean) << " +/- " << fmt(est.difference.std_error) << '\n'
        << "note: " << est.sup_form.discretization_note << '\n';
    if (!sol.flags().representation_as_expected_sup)
      log << "note: fhat is not non-decreasing above the threshold, so V is not an expected supremum of fhat;"
             " the sup form is expected to overshoot\n";
    return int{sup_ok && max_ok ? kOk : kOutsideTolerance};
  });
}

inline int cmd_index(const std::string& config_path, const std::vector<double>& points, std::optional<double> k,
                     const std::string& output_path, std::ostream& log = std::cout, std::ostream& err = std::cerr) {
  return detail::guarded(err, [&] {
    const auto cfg = load_config(config_path);
    const auto problem = build_problem(cfg);
    const RepresentingFunction rf(problem.payoff, problem.pair, cfg.solver.grid);
    std::string csv = "x,gamma\n";
    for (double x : points) csv += fmt(x) + "," + fmt(gittins_index(rf, x)) + "\n";
    detail::Output out(output_path);
    out.stream() << csv;
    const auto level = k ? k : cfg.index_k;
    if (level) {
      const auto region = stopping_region(rf, *level);
      log << "region k=" << fmt(*level) << ": [" << fmt(region.lo) << ", " << fmt(region.hi) << ")\n";
    }
    return int{kOk};
  });
}

inline int cmd_levy_root(const LevySpec& ls, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return detail::guarded(err, [&] {
    const auto root = levy_root(ls);
    out << "rho=" << fmt(root.root) << "\nresidual=" << fmt(root.residual) << '\n';
    return int{kOk};
  });
}

inline std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos < s.size()) {
    const std::size_t comma = s.find(',', pos);
    const std::string item = s.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    if (!item.empty()) {
      double v = 0.0;
      auto res = std::from_chars(item.data(), item.data() + item.size(), v);
      if (res.ec != std::errc() || res.ptr != item.data() + item.size())
        throw ConfigError("malformed number '" + item + "' in list");
      out.push_back(v);
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

inline int run(int argc, char** argv) {
  CLI::App app{"Optimal single-threshold stopping of one-dimensional diffusions"};
  app.require_subcommand(1);
  app.fallthrough();
  std::optional<std::uint64_t> seed;
  app.add_option("--seed", seed, "override the Monte Carlo seed of the config");

  std::string config;
  std::string output;

  auto* solve_cmd = app.add_subcommand("solve", "threshold, value and certificates as a JSON report");
  solve_cmd->add_option("config", config)->required();
  solve_cmd->add_option("-o,--output", output);

  auto* curve_cmd = app.add_subcommand("curve", "CSV of fhat, value, ratio or psi over a range");
  std::string quantity = "fhat";
  std::vector<double> range;
  std::size_t n = 101;
  curve_cmd->add_option("config", config)->required();
  curve_cmd->add_option("-q,--quantity", quantity)->check(CLI::IsMember({"fhat", "value", "ratio", "psi"}));
  curve_cmd->add_option("--range", range)->expected(2)->required();
  curve_cmd->add_option("-n", n);
  curve_cmd->add_option("-o,--output", output);

  auto* verify_cmd = app.add_subcommand("verify", "Monte Carlo check of the expected-supremum representation");
  verify_cmd->add_option("config", config)->required();
  verify_cmd->add_option("-o,--output", output);

  auto* index_cmd = app.add_subcommand("index", "stopping signal gamma(x) and the region for a level k");
  std::string points;
  std::optional<double> level;
  index_cmd->add_option("config", config)->required();
  index_cmd->add_option("--points", points, "comma separated evaluation points");
  index_cmd->add_option("--k", level);
  index_cmd->add_option("-o,--output", output);

  auto* levy_cmd = app.add_subcommand("levy-root", "positive root of the jump-diffusion characteristic equation");
  LevySpec ls;
  std::string z_list;
  std::string p_list;
  std::vector<double> beta;
  levy_cmd->add_option("--mu", ls.mu)->required();
  levy_cmd->add_option("--sigma", ls.sigma)->required();
  levy_cmd->add_option("--lambda", ls.lambda);
  levy_cmd->add_option("--r", ls.r)->required();
  levy_cmd->add_option("--z", z_list, "comma separated jump sizes");
  levy_cmd->add_option("--p", p_list, "comma separated jump weights");
  levy_cmd->add_option("--beta", beta, "Beta(alpha, beta) jump sizes")->expected(2);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  if (*solve_cmd) return cmd_solve(config, output);
  if (*curve_cmd) return cmd_curve(config, quantity, range[0], range[1], n, output);
  if (*verify_cmd) return cmd_verify(config, output, seed);
  if (*index_cmd) {
    std::vector<double> xs;
    const int rc = detail::guarded(std::cerr, [&] {
      xs = parse_list(points);
      return int{kOk};
    });
    if (rc != kOk) return rc;
    return cmd_index(config, xs, level, output);
  }
  const int rc = detail::guarded(std::cerr, [&] {
    if (!beta.empty()) {
      ls.jumps = BetaJumps{beta[0], beta[1]};
    } else {
      ls.jumps = DiscreteJumps{parse_list(z_list), parse_list(p_list)};
    }
    return int{kOk};
  });
  if (rc != kOk) return rc;
  return cmd_levy_root(ls);
}

} // namespace ostop::cli
