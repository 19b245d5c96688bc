#pragma once

// Parameter sweeps over Monte-Carlo channel draws.

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "trisleo/alternating.hpp"
#include "trisleo/errors.hpp"
#include "trisleo/scenario.hpp"

namespace trisleo {

enum class SweepVariable { p_max, i_th, r_min, m_elements };

inline std::string_view to_string(SweepVariable v) {
  switch (v) {
    case SweepVariable::p_max: return "p_max";
    case SweepVariable::i_th: return "i_th";
    case SweepVariable::r_min: return "r_min";
    case SweepVariable::m_elements: return "m_elements";
  }
  return "?";
}

inline std::optional<SweepVariable> parse_sweep_variable(std::string_view s) {
  for (SweepVariable v : {SweepVariable::p_max, SweepVariable::i_th, SweepVariable::r_min, SweepVariable::m_elements})
    if (to_string(v) == s) return v;
  return std::nullopt;
}

/// `steps` evenly spaced values from start to stop inclusive.
inline std::vector<double> linear_grid(double start, double stop, int steps) {
  detail::require(steps >= 1, "grid needs at least one step");
  if (steps == 1) return {start};
  std::vector<double> g(static_cast<std::size_t>(steps));
  for (int i = 0; i < steps; ++i) g[static_cast<std::size_t>(i)] = start + (stop - start) * i / (steps - 1);
  g.back() = stop;
  return g;
}

inline Scenario with_value(Scenario sc, SweepVariable v, double x) {
  switch (v) {
    case SweepVariable::p_max: sc.cons.p_max = x; break;
    case SweepVariable::i_th: sc.cons.i_th = x; break;
    case SweepVariable::r_min: sc.cons.r_min = x; break;
    case SweepVariable::m_elements: {
      const double r = std::round(x);
      detail::require(r >= 1 && std::abs(r - x) < 1e-9, "m_elements grid values must be positive integers");
      sc.m_elements = static_cast<Eigen::Index>(r);
      break;
    }
  }
  return sc;
}

struct TrialOutcome {
  std::uint64_t seed = 0;
  double sum_rate = 0;
  double p_t = 0;
  int iterations = 0;
  bool converged = false;
  bool feasible = false;
  bool at_p_max = false;  // final total power equals the budget
  std::string invariant_failure;  // empty when every accepted iterate was valid
  std::string error;              // exception text when the run threw
};

struct SweepPoint {
  double value = 0;
  double mean_sum_rate = 0;  // infeasible trials count as zero
  double mean_iterations = 0;
  double mean_p_t = 0;
  double feasible_fraction = 0;
  bool feasible = false;      // every trial feasible
  bool all_at_p_max = false;  // every trial ended with P_t = P_max
  std::vector<TrialOutcome> trials;
};

struct SweepResult {
  SweepVariable variable = SweepVariable::p_max;
  std::vector<double> grid;
  std::vector<SweepPoint> points;
  std::vector<double> mean_sum_rates() const {
    std::vector<double> out;
    for (const SweepPoint& p : points) out.push_back(p.mean_sum_rate);
    return out;
  }
};

/// Trial t uses seed base.seed + t at every grid point, so neighbouring points
/// see the same channel draws and starting beams.
inline SweepResult sweep(const Scenario& base, SweepVariable variable, const std::vector<double>& grid, int trials,
                         const AoOptions* options = nullptr) {
  detail::require(!grid.empty(), "sweep grid is empty");
  for (std::size_t i = 1; i < grid.size(); ++i)
    detail::require(grid[i] > grid[i - 1], "sweep grid must be strictly increasing");
  detail::require(trials >= 1, "trials must be >= 1");

  SweepResult res;
  res.variable = variable;
  res.grid = grid;
  res.points.resize(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    SweepPoint& pt = res.points[i];
    pt.value = grid[i];
    pt.trials.resize(static_cast<std::size_t>(trials));
    int n_feasible = 0, n_at_max = 0;
    double rate = 0, iters = 0, ptot = 0;
    for (int t = 0; t < trials; ++t) {
      TrialOutcome& out = pt.trials[static_cast<std::size_t>(t)];
      out.seed = base.seed + static_cast<std::uint64_t>(t);
      try {
        Scenario sc = with_value(base, variable, grid[i]);
        sc.seed = out.seed;
        std::mt19937_64 rng(sc.seed);
        const ChannelSet ch = draw_channels(sc, rng);
        const AoResult r = alternating_optimize(sc, ch, sc.seed, options ? *options : ao_options_for(sc));
        out.sum_rate = r.final_point.sum_rate;
        out.p_t = r.final_point.p_t;
        out.iterations = r.iterations;
        out.converged = r.converged;
        out.feasible = r.feasible;
        out.at_p_max = r.final_point.p_t >= sc.cons.p_max * (1.0 - 1e-9);
        out.invariant_failure = check_invariants(r, sc);
      } catch (const std::exception& e) {
        out.error = e.what();
      }
      if (out.feasible) {
        ++n_feasible;
        rate += out.sum_rate;
      }
      n_at_max += out.at_p_max;
      iters += out.iterations;
      ptot += out.p_t;
    }
    pt.mean_sum_rate = rate / trials;
    pt.mean_iterations = iters / trials;
    pt.mean_p_t = ptot / trials;
    pt.feasible_fraction = static_cast<double>(n_feasible) / trials;
    pt.feasible = n_feasible == trials;
    pt.all_at_p_max = n_at_max == trials;
  }
  return res;
}

}  // namespace trisleo
