#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "trisleo/channel.hpp"
#include "trisleo/errors.hpp"
#include "trisleo/rate.hpp"

namespace trisleo {

struct PowerConstraints {
  double p_max = 1.0;  // W
  double i_th = 2.0;   // W, interference cap at the primary receiver
  double r_min = 0.1;  // b/s/Hz per secondary user

  void validate() const {
    detail::require(std::isfinite(p_max) && p_max > 0, "p_max must be > 0");
    detail::require(std::isfinite(i_th) && i_th > 0, "i_th must be > 0");
    detail::require(std::isfinite(r_min) && r_min >= 0, "r_min must be >= 0");
  }
};

/// Multipliers of the two rate floors and the sub-gradient step.
struct DualState {
  double lambda_k = 0.5;
  double lambda_j = 0.5;
  double step_size = 0.05;
};

enum class SolverPath { closed_form, oracle_fallback };

struct PowerSolution {
  PowerSplit split;
  DualState duals;
  std::pair<double, double> surrogate_rates{0, 0};  // (strong, weak)
  bool feasible = false;
  SolverPath solver_path = SolverPath::oracle_fallback;
  int dual_iterations = 0;

  double objective() const { return surrogate_rates.first + surrogate_rates.second; }
};

/// Everything the power step needs once the surface configuration is frozen.
struct PowerProblem {
  double gain_k = 0;  // effective gain of the strong user
  double gain_j = 0;  // effective gain of the weak user
  double h_eff = 0;   // effective gain towards the primary receiver
  NoisePower noise;
  PowerConstraints cons;
  ScaCoefficients coeff_k;
  ScaCoefficients coeff_j;
};

struct PowerOptions {
  int max_dual_iters = 500;
  int oracle_grid = 10000;
  double pk_clamp = 1e-6;
  double violation_tol = 1e-4;
};

/// Largest total power allowed by both the interference cap and the power budget.
inline double optimal_total_power(double h_eff, const PowerConstraints& cons) {
  detail::require(h_eff >= 0, "h_eff must be >= 0");
  if (h_eff == 0) return cons.p_max;
  return std::min(cons.i_th / h_eff, cons.p_max);
}

/// Stationarity expression for the strong user's coefficient (unclamped).
inline double closed_form_pk(double gain_k, double gain_j, const DualState& duals, const NoisePower& noise,
                             double p_t) {
  detail::require(gain_k > 0 && gain_j > 0, "closed-form split needs positive gains");
  detail::require(p_t > 0, "closed-form split needs p_t > 0");
  const double dl = duals.lambda_k - duals.lambda_j;
  if (std::abs(dl) < 1e-12) throw DegenerateDuals("lambda_k == lambda_j: closed-form split undefined");
  const double num = (gain_j * gain_k - gain_k * duals.lambda_k + gain_j * duals.lambda_j) * noise.sigma_sq;
  return num / (gain_j * gain_k * dl * p_t);
}

struct SurrogatePair {
  double strong = 0;
  double weak = 0;
  double sum() const { return strong + weak; }
};

inline SurrogatePair surrogate_pair(const PowerProblem& pb, double p_k, double p_t) {
  const PowerSplit s{p_k, 1.0 - p_k, p_t};
  return {surrogate_rate_or_neg_inf(pb.coeff_k, sinr_strong_from_gain(pb.gain_k, s, pb.noise)),
          surrogate_rate_or_neg_inf(pb.coeff_j, sinr_weak_from_gain(pb.gain_j, s, pb.noise))};
}

struct OracleResult {
  bool feasible = false;
  PowerSplit split;          // argmax over feasible grid points (when feasible)
  double objective = -std::numeric_limits<double>::infinity();
  PowerSplit least_violating;  // argmin of the worst rate-floor shortfall
  double least_violation = std::numeric_limits<double>::infinity();
};

/// Exhaustive search of p_k on a uniform grid over [0,1] at fixed total power.
inline OracleResult oracle_power_split(const PowerProblem& pb, double p_t, int grid) {
  detail::require(grid >= 100, "oracle grid must have >= 100 points");
  OracleResult out;
  for (int i = 0; i < grid; ++i) {
    const double p_k = static_cast<double>(i) / (grid - 1);
    const SurrogatePair r = surrogate_pair(pb, p_k, p_t);
    const double shortfall = std::max(pb.cons.r_min - r.strong, pb.cons.r_min - r.weak);
    if (shortfall < out.least_violation) {
      out.least_violation = shortfall;
      out.least_violating = PowerSplit{p_k, 1.0 - p_k, p_t};
    }
    if (shortfall <= 0 && r.sum() > out.objective) {
      out.feasible = true;
      out.objective = r.sum();
      out.split = PowerSplit{p_k, 1.0 - p_k, p_t};
    }
  }
  return out;
}

/// Power step: projected sub-gradient dual loop around the closed-form split,
/// cross-checked against the grid oracle; the better feasible split is kept.
inline PowerSolution solve_power(const PowerProblem& pb, const DualState& duals_init,
                                 const PowerOptions& opt = {}) {
  pb.cons.validate();
  detail::require(opt.max_dual_iters >= 1, "max_dual_iters must be >= 1");
  const double p_t = optimal_total_power(pb.h_eff, pb.cons);
  const double r_min = pb.cons.r_min;

  DualState duals = duals_init;
  double p_k = 0.5;
  SurrogatePair rates = surrogate_pair(pb, p_k, p_t);
  int it = 0;
  for (; it < opt.max_dual_iters; ++it) {
    if (pb.gain_k > 0 && pb.gain_j > 0) {
      try {
        p_k = std::clamp(closed_form_pk(pb.gain_k, pb.gain_j, duals, pb.noise, p_t), opt.pk_clamp,
                         1.0 - opt.pk_clamp);
      } catch (const DegenerateDuals&) {
        // keep the previous split; the update below separates the multipliers
      }
    }
    rates = surrogate_pair(pb, p_k, p_t);
    const double gk = std::isfinite(rates.strong) ? rates.strong - r_min : -1e3;
    const double gj = std::isfinite(rates.weak) ? rates.weak - r_min : -1e3;
    duals.lambda_k = std::max(0.0, duals.lambda_k - duals.step_size * gk);
    duals.lambda_j = std::max(0.0, duals.lambda_j - duals.step_size * gj);
    const bool primal_ok = gk > -opt.violation_tol && gj > -opt.violation_tol;
    const bool slack_ok = duals.lambda_k * std::abs(gk) < opt.violation_tol &&
                          duals.lambda_j * std::abs(gj) < opt.violation_tol;
    if (primal_ok && slack_ok) {
      ++it;
      break;
    }
  }

  PowerSolution sol;
  sol.duals = duals;
  sol.dual_iterations = it;
  const bool cf_feasible = rates.strong >= r_min && rates.weak >= r_min;
  const OracleResult oracle = oracle_power_split(pb, p_t, opt.oracle_grid);

  if (cf_feasible && (!oracle.feasible || rates.sum() >= oracle.objective)) {
    sol.split = PowerSplit{p_k, 1.0 - p_k, p_t};
    sol.surrogate_rates = {rates.strong, rates.weak};
    sol.feasible = true;
    sol.solver_path = SolverPath::closed_form;
  } else if (oracle.feasible) {
    const SurrogatePair r = surrogate_pair(pb, oracle.split.p_k, p_t);
    sol.split = oracle.split;
    sol.surrogate_rates = {r.strong, r.weak};
    sol.feasible = true;
    sol.solver_path = SolverPath::oracle_fallback;
  } else {
    const SurrogatePair r = surrogate_pair(pb, oracle.least_violating.p_k, p_t);
    sol.split = oracle.least_violating;
    sol.surrogate_rates = {r.strong, r.weak};
    sol.feasible = false;
    sol.solver_path = SolverPath::oracle_fallback;
  }
  // The loop may stop at its cap or lose to the grid; either way a floor that is
  // slack at the returned split carries no multiplier.
  if (sol.feasible) {
    if (sol.surrogate_rates.first > r_min + opt.violation_tol) sol.duals.lambda_k = 0.0;
    if (sol.surrogate_rates.second > r_min + opt.violation_tol) sol.duals.lambda_j = 0.0;
  }
  return sol;
}

/// Power step with the SCA surrogate re-expanded at every new split until the
/// split settles. Each round maximizes a minorant that is tight at the previous
/// split, so the exact sum rate never decreases between rounds.
inline PowerSolution solve_power_sca(PowerProblem pb, const DualState& duals_init, const PowerOptions& opt = {},
                                     int max_rounds = 50, double split_tol = 1e-7) {
  detail::require(max_rounds >= 1, "max_rounds must be >= 1");
  PowerSolution sol = solve_power(pb, duals_init, opt);
  for (int round = 1; round < max_rounds && sol.feasible; ++round) {
    const double gk = sinr_strong_from_gain(pb.gain_k, sol.split, pb.noise);
    const double gj = sinr_weak_from_gain(pb.gain_j, sol.split, pb.noise);
    if (!(gk > 0) || !(gj > 0)) break;
    pb.coeff_k = sca_coefficients(gk);
    pb.coeff_j = sca_coefficients(gj);
    PowerSolution next = solve_power(pb, sol.duals, opt);
    if (!next.feasible) break;
    const double moved = std::abs(next.split.p_k - sol.split.p_k);
    sol = next;
    if (moved < split_tol) break;
  }
  return sol;
}

/// Convenience overload that evaluates the effective gains for a fixed beam.
inline PowerSolution solve_power(const ChannelVector& g_k, const ChannelVector& g_j, const ChannelVector& h_l,
                                 const BeamformingVector& phi, const NoisePower& noise,
                                 const PowerConstraints& cons, const ScaCoefficients& coeff_k,
                                 const ScaCoefficients& coeff_j, const DualState& duals_init,
                                 const PowerOptions& opt = {}) {
  PowerProblem pb{effective_gain(g_k, phi), effective_gain(g_j, phi), effective_gain(h_l, phi), noise, cons,
                  coeff_k, coeff_j};
  return solve_power(pb, duals_init, opt);
}

}  // namespace trisleo
