#pragma once

// Outer loop: SCA refresh, power step, phase step, each accepted only when the
// exact sum rate does not drop.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "trisleo/channel.hpp"
#include "trisleo/phase.hpp"
#include "trisleo/power.hpp"
#include "trisleo/rate.hpp"
#include "trisleo/scenario.hpp"

namespace trisleo {

/// Per-iteration record, written after both steps of the iteration.
struct IterationTrace {
  int iteration = 0;
  double sum_rate = 0;
  double surrogate_sum_rate = 0;
  double p_k = 0;
  double p_t = 0;
  double interference = 0;
  double phase_objective = 0;  // relaxed sum rate of the last phase solve (NaN if skipped)
  double delta = 0;
  double rate_k = 0;
  double rate_j = 0;
  bool feasible = false;
  bool power_accepted = false;
  bool phase_accepted = false;
  // diagnostics of the lifted solution behind the accepted beam
  double lifted_min_eig = 0;
  double lifted_max_diag = 0;
  double lifted_diag_cap = 1;
  double beam_max_amplitude = 0;
};

/// Exact performance of a (beam, split) pair with users ordered by gain.
struct OperatingPoint {
  BeamformingVector beam;
  double p_k = 0.5;  // fraction given to the stronger user
  double p_t = 1.0;
  bool swapped = false;  // true when user j currently has the stronger channel
  double gain_strong = 0, gain_weak = 0, h_eff = 0;
  double sinr_strong = 0, sinr_weak = 0;
  double rate_strong = 0, rate_weak = 0;
  double sum_rate = 0;
  double interference = 0;
  double violation = 0;  // worst normalized shortfall, 0 when feasible
  bool feasible = false;
};

inline constexpr double kFeasibilityTol = 1e-9;

inline OperatingPoint evaluate_point(const ChannelSet& ch, const BeamformingVector& beam, double p_k, double p_t,
                                     const NoisePower& noise, const PowerConstraints& cons) {
  OperatingPoint op;
  op.beam = beam;
  op.p_k = p_k;
  op.p_t = p_t;
  const double gk = effective_gain(ch.g_k, beam);
  const double gj = effective_gain(ch.g_j, beam);
  op.swapped = gj > gk;  // ties keep user k as the SIC user
  op.gain_strong = op.swapped ? gj : gk;
  op.gain_weak = op.swapped ? gk : gj;
  op.h_eff = effective_gain(ch.h_l, beam);
  const PowerSplit split{p_k, 1.0 - p_k, p_t};
  op.sinr_strong = sinr_strong_from_gain(op.gain_strong, split, noise);
  op.sinr_weak = sinr_weak_from_gain(op.gain_weak, split, noise);
  op.rate_strong = exact_rate(op.sinr_strong);
  op.rate_weak = exact_rate(op.sinr_weak);
  op.sum_rate = op.rate_strong + op.rate_weak;
  op.interference = op.h_eff * p_t;
  const double floor = std::max(cons.r_min, 1e-300);
  op.violation = std::max({0.0, (cons.r_min - op.rate_strong) / floor, (cons.r_min - op.rate_weak) / floor,
                           (op.interference - cons.i_th) / cons.i_th, (p_t - cons.p_max) / cons.p_max});
  op.feasible = op.violation <= kFeasibilityTol;
  return op;
}

/// Feasible beats infeasible; then higher sum rate, or smaller violation.
inline bool not_worse(const OperatingPoint& cand, const OperatingPoint& cur) {
  if (cand.feasible != cur.feasible) return cand.feasible;
  if (cand.feasible) return cand.sum_rate >= cur.sum_rate;
  return cand.violation <= cur.violation;
}

struct AoResult {
  OperatingPoint final_point;
  std::vector<IterationTrace> trace;
  int iterations = 0;
  bool converged = false;
  bool feasible = false;
  std::string binding_constraint;  // set when infeasible
};

inline std::string binding_constraint(const OperatingPoint& op, const PowerConstraints& cons) {
  const double floor = std::max(cons.r_min, 1e-300);
  const double vk = (cons.r_min - op.rate_strong) / floor;
  const double vj = (cons.r_min - op.rate_weak) / floor;
  const double vi = (op.interference - cons.i_th) / cons.i_th;
  if (vi >= vk && vi >= vj) return "interference_cap";
  return vk >= vj ? "rate_floor_strong" : "rate_floor_weak";
}

struct AoOptions {
  PowerOptions power;
  int sca_rounds = 50;      // surrogate re-expansions inside one power step
  bool joint_power = true;  // phase step also rescales the total power
  PhaseOptions phase;
};

inline AoOptions ao_options_for(const Scenario& sc) {
  AoOptions o;
  o.phase.rand_trials = sc.rand_trials;
  return o;
}

/// Alternating optimization on fixed channels, started from a seeded random beam.
inline AoResult alternating_optimize(const Scenario& sc, const ChannelSet& ch, std::uint64_t seed,
                                     const AoOptions& opt) {
  sc.validate();
  std::mt19937_64 rng(seed);
  const BeamformingVector beam0 = BeamformingVector::random_phases(sc.m_elements, rng);
  const double pt0 = optimal_total_power(effective_gain(ch.h_l, beam0), sc.cons);
  OperatingPoint cur = evaluate_point(ch, beam0, 0.5, pt0, sc.noise, sc.cons);

  AoResult res;
  DualState duals{0.5, 0.5, sc.delta_step};
  LiftedMatrix lifted = LiftedMatrix::from_beam(cur.beam);
  double lifted_cap = 1.0;
  for (int it = 1; it <= sc.sca_outer_cap; ++it) {
    const double before = cur.sum_rate;
    IterationTrace tr;
    tr.iteration = it;
    tr.phase_objective = std::numeric_limits<double>::quiet_NaN();

    // SCA expansion at the current SINRs, then the power step.
    const ScaCoefficients ck = sca_coefficients(std::max(cur.sinr_strong, 1e-12));
    const ScaCoefficients cj = sca_coefficients(std::max(cur.sinr_weak, 1e-12));
    PowerProblem pp{cur.gain_strong, cur.gain_weak, cur.h_eff, sc.noise, sc.cons, ck, cj};
    if (pp.gain_k > 0) {
      const PowerSolution ps = solve_power_sca(pp, duals, opt.power, opt.sca_rounds);
      duals = ps.duals;
      const OperatingPoint cand = evaluate_point(ch, cur.beam, ps.split.p_k, ps.split.p_total, sc.noise, sc.cons);
      if (not_worse(cand, cur)) {
        cur = cand;
        tr.power_accepted = true;
      }
      tr.surrogate_sum_rate = ps.objective();
    }

    // Phase step for the accepted powers.
    const ChannelVector& strong = cur.swapped ? ch.g_j : ch.g_k;
    const ChannelVector& weak = cur.swapped ? ch.g_k : ch.g_j;
    const PowerSplit split{cur.p_k, 1.0 - cur.p_k, cur.p_t};
    PhaseSubproblem sub = make_phase_subproblem(strong, weak, ch.h_l, split, sc.noise, sc.cons);
    sub.power_in_lift = opt.joint_power;
    PhaseOptions po = opt.phase;
    po.seed = seed * 0x9E3779B97F4A7C15ull + static_cast<std::uint64_t>(it);
    try {
      const PhaseSolution sol = design_phase(sub, cur.beam, po);
      tr.phase_objective = sol.relaxed_objective;
      const OperatingPoint cand = evaluate_point(ch, sol.beam, cur.p_k, sol.p_total, sc.noise, sc.cons);
      if (not_worse(cand, cur)) {
        cur = cand;
        lifted = sol.lifted;
        lifted_cap = sub.diag_cap();
        tr.phase_accepted = true;
      }
    } catch (const Infeasible&) {
      // relaxed problem empty at these powers; keep the beam
    } catch (const ExtractionFailure&) {
      // no feasible rank-one candidate; keep the beam
    }

    tr.sum_rate = cur.sum_rate;
    tr.p_k = cur.p_k;
    tr.p_t = cur.p_t;
    tr.interference = cur.interference;
    tr.rate_k = cur.rate_strong;
    tr.rate_j = cur.rate_weak;
    tr.feasible = cur.feasible;
    tr.delta = std::abs(cur.sum_rate - before);
    tr.lifted_min_eig = lifted.min_eigenvalue();
    tr.lifted_max_diag = lifted.max_diagonal();
    tr.lifted_diag_cap = lifted_cap;
    tr.beam_max_amplitude = cur.beam.max_amplitude();
    res.trace.push_back(tr);
    res.iterations = it;
    if (tr.delta < sc.convergence_tol) {
      res.converged = true;
      break;
    }
  }
  res.final_point = cur;
  res.feasible = cur.feasible;
  if (!cur.feasible) res.binding_constraint = binding_constraint(cur, sc.cons);
  return res;
}

/// First broken invariant of a run, or an empty string when every accepted
/// iterate respects the caps and the final point meets the rate floors.
inline std::string check_invariants(const AoResult& res, const Scenario& sc) {
  const PowerConstraints& c = sc.cons;
  double last = -std::numeric_limits<double>::infinity();
  for (const IterationTrace& t : res.trace) {
    const std::string at = " at iteration " + std::to_string(t.iteration);
    if (t.interference > c.i_th + 1e-6) return "interference above cap" + at;
    if (t.p_t > c.p_max * (1.0 + 1e-12)) return "total power above P_max" + at;
    if (t.beam_max_amplitude > 1.0 + BeamformingVector::kAmplitudeSlack) return "beam amplitude above 1" + at;
    if (t.lifted_min_eig < -1e-7 * std::max(1.0, t.lifted_diag_cap)) return "lifted matrix not PSD" + at;
    if (t.lifted_max_diag > t.lifted_diag_cap + 1e-7) return "lifted diagonal above cap" + at;
    if (t.feasible) {
      if (t.rate_k < c.r_min - 1e-4 || t.rate_j < c.r_min - 1e-4) return "rate floor violated" + at;
      if (t.sum_rate < last - 1e-12) return "sum rate decreased" + at;
      last = t.sum_rate;
    }
  }
  if (res.feasible) {
    const OperatingPoint& f = res.final_point;
    if (f.rate_strong < c.r_min - 1e-4 || f.rate_weak < c.r_min - 1e-4) return "final rate floor violated";
  }
  return "";
}

/// Draws the channels from the scenario seed and runs the outer loop.
inline AoResult alternating_optimize(const Scenario& sc) {
  std::mt19937_64 rng(sc.seed);
  const ChannelSet ch = draw_channels(sc, rng);
  return alternating_optimize(sc, ch, sc.seed, ao_options_for(sc));
}

}  // namespace trisleo
