#pragma once

// Command-line front end. Lives in a header so tests can drive it in-process.
//
//   trisleo solve    --config <path|defaults> [--seed N] [--out DIR]
//   trisleo sweep    --config <path|defaults> [--sweep var:start:stop:steps] [--trials N] [--out DIR]
//   trisleo selftest
//
// Exit status: 0 success, 1 infeasible scenario, 2 invalid configuration or arguments.

#include <CLI11.hpp>

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "trisleo/alternating.hpp"
#include "trisleo/report.hpp"
#include "trisleo/scenario.hpp"
#include "trisleo/selftest.hpp"
#include "trisleo/sweep.hpp"

namespace trisleo {

enum ExitCode : int { kExitOk = 0, kExitInfeasible = 1, kExitInvalid = 2 };

struct SweepSpec {
  SweepVariable variable = SweepVariable::p_max;
  double start = 0, stop = 0;
  int steps = 0;
};

/// Parses `var:start:stop:steps`; throws ConfigError("--sweep", ...) on bad input.
inline SweepSpec parse_sweep_spec(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
  if (parts.size() != 4) throw ConfigError("--sweep", "expected var:start:stop:steps, got '" + text + "'");
  const auto var = parse_sweep_variable(parts[0]);
  if (!var) throw ConfigError("--sweep", "unknown sweep variable '" + parts[0] + "'");
  SweepSpec s;
  s.variable = *var;
  s.start = detail::parse_real("--sweep", parts[1]);
  s.stop = detail::parse_real("--sweep", parts[2]);
  const std::int64_t steps = detail::parse_integer("--sweep", parts[3]);
  if (steps < 1) throw ConfigError("--sweep", "steps must be >= 1");
  if (steps > 1 && !(s.stop > s.start)) throw ConfigError("--sweep", "stop must exceed start");
  s.steps = static_cast<int>(steps);
  return s;
}

namespace detail {

struct FigureRun {
  std::string suffix;
  Scenario scenario;
  SweepSpec spec;
};

/// The default figure set: P_max curves for three array sizes, the I_th curve,
/// and P_max curves for three rate floors.
inline std::vector<FigureRun> figure_runs(const Scenario& base) {
  std::vector<FigureRun> runs;
  const SweepSpec pmax{SweepVariable::p_max, 0.1, 10.0, 20};
  for (int m : {5, 10, 20}) {
    Scenario sc = base;
    sc.m_elements = m;
    runs.push_back({"_m" + std::to_string(m), sc, pmax});
  }
  runs.push_back({"", base, {SweepVariable::i_th, 0.1, 10.0, 20}});
  for (const char* r : {"0.1", "0.5", "1"}) {
    Scenario sc = base;
    sc.cons.r_min = std::stod(r);
    runs.push_back({std::string("_rmin") + r, sc, pmax});
  }
  return runs;
}

}  // namespace detail

inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sum-rate optimizer for a transmissive-surface LEO NOMA downlink", "trisleo"};
  app.require_subcommand(1);

  std::string config = "defaults";
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  std::optional<int> trials;
  std::string sweep_text;

  CLI::App* solve_cmd = app.add_subcommand("solve", "run the alternating optimization on one scenario");
  solve_cmd->add_option("--config", config, "config file, or 'defaults'");
  solve_cmd->add_option("--seed", seed, "overrides the config seed");
  solve_cmd->add_option("--out", out_dir, "output directory");

  CLI::App* sweep_cmd = app.add_subcommand("sweep", "parameter sweep over Monte-Carlo draws");
  sweep_cmd->add_option("--config", config, "config file, or 'defaults'");
  sweep_cmd->add_option("--seed", seed, "base seed; trial t uses seed + t");
  sweep_cmd->add_option("--out", out_dir, "output directory");
  sweep_cmd->add_option("--trials", trials, "channel draws per grid point")->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--sweep", sweep_text, "var:start:stop:steps; omit for the full figure set");

  CLI::App* selftest_cmd = app.add_subcommand("selftest", "compare the solvers against brute-force oracles");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInvalid;
  }

  try {
    if (selftest_cmd->parsed()) return run_selftest(out) ? kExitOk : kExitInfeasible;

    Scenario sc = load_config(config);
    if (seed) sc.seed = *seed;
    if (trials) sc.trials = *trials;

    if (solve_cmd->parsed()) {
      const AoResult r = alternating_optimize(sc);
      write_solve_outputs(out_dir, r);
      out << "sum_rate " << detail::fmt_real(r.final_point.sum_rate) << " after " << r.iterations
          << " iterations" << (r.converged ? "" : " (not converged)") << '\n';
      if (!r.feasible) {
        err << "infeasible: binding constraint " << r.binding_constraint << '\n';
        return kExitInfeasible;
      }
      return kExitOk;
    }

    std::vector<detail::FigureRun> runs;
    if (!sweep_text.empty()) {
      runs.push_back({"", sc, parse_sweep_spec(sweep_text)});
    } else {
      runs = detail::figure_runs(sc);
    }
    bool any_feasible = false;
    for (const detail::FigureRun& run : runs) {
      const SweepResult res = sweep(run.scenario, run.spec.variable,
                                    linear_grid(run.spec.start, run.spec.stop, run.spec.steps), sc.trials);
      for (const SweepPoint& p : res.points) any_feasible = any_feasible || p.feasible_fraction > 0;
      out << "wrote " << write_sweep_output(out_dir, res, run.suffix).string() << '\n';
    }
    if (!any_feasible) {
      err << "infeasible: no grid point had a feasible trial\n";
      return kExitInfeasible;
    }
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "invalid config: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const InvalidInput& e) {
    err << "invalid input: " << e.what() << '\n';
    return kExitInvalid;
  }
}

}  // namespace trisleo
