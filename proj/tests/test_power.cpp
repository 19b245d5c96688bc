#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "trisleo/checks.hpp"
#include "trisleo/oracle.hpp"
#include "trisleo/power.hpp"
#include "trisleo/scenario.hpp"

using namespace trisleo;

namespace {

PowerProblem make_problem(double gk, double gj, double h, double s2, PowerConstraints c, double p0 = 0.5) {
  PowerProblem pb{gk, gj, h, NoisePower(s2), c, {}, {}};
  const PowerSplit s{p0, 1.0 - p0, optimal_total_power(h, c)};
  pb.coeff_k = sca_coefficients(sinr_strong_from_gain(gk, s, pb.noise));
  pb.coeff_j = sca_coefficients(sinr_weak_from_gain(gj, s, pb.noise));
  return pb;
}

// Closed form written out independently of the library.
double pk_formula(double gk, double gj, double lk, double lj, double s2, double pt) {
  return (gj * gk - gk * lk + gj * lj) * s2 / (gj * gk * (lk - lj) * pt);
}

}  // namespace

TEST(OptimalTotalPower, PowerLimited) { EXPECT_DOUBLE_EQ(optimal_total_power(1.0, {1.0, 2.0, 0.1}), 1.0); }

TEST(OptimalTotalPower, InterferenceLimited) { EXPECT_DOUBLE_EQ(optimal_total_power(4.0, {1.0, 2.0, 0.1}), 0.5); }

TEST(OptimalTotalPower, NoCouplingUsesBudget) { EXPECT_DOUBLE_EQ(optimal_total_power(0.0, {3.0, 2.0, 0.1}), 3.0); }

TEST(OptimalTotalPower, NondecreasingInCaps) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.01, 10.0);
  for (int i = 0; i < 500; ++i) {
    const double h = u(rng), pm = u(rng), it = u(rng), d = u(rng);
    EXPECT_LE(optimal_total_power(h, {pm, it, 0}), optimal_total_power(h, {pm + d, it, 0}));
    EXPECT_LE(optimal_total_power(h, {pm, it, 0}), optimal_total_power(h, {pm, it + d, 0}));
  }
}

TEST(ClosedFormPk, NegativeValueClampsToFloor) {
  const double raw = closed_form_pk(1.0, 1.0, {2.0, 0.0, 0.05}, NoisePower(1.0), 1.0);
  EXPECT_DOUBLE_EQ(raw, -0.5);
  EXPECT_DOUBLE_EQ(std::clamp(raw, 1e-6, 1.0 - 1e-6), 1e-6);
}

TEST(ClosedFormPk, EqualDualsAreDegenerate) {
  EXPECT_THROW(closed_form_pk(1.0, 0.5, {0.3, 0.3, 0.05}, NoisePower(1.0), 1.0), DegenerateDuals);
}

TEST(ClosedFormPk, MatchesFormulaOnRandomInputs) {
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 300; ++i) {
    const double gk = std::pow(10.0, -8 + 3 * u(rng)), gj = gk * u(rng) + 1e-12;
    const double lk = 2 * u(rng), lj = 2 * u(rng), s2 = 1e-7, pt = 0.1 + 5 * u(rng);
    if (std::abs(lk - lj) < 1e-6) continue;
    const double ref = pk_formula(gk, gj, lk, lj, s2, pt);
    EXPECT_NEAR(closed_form_pk(gk, gj, {lk, lj, 0.05}, NoisePower(s2), pt), ref, 1e-9 * std::max(1.0, std::abs(ref)));
  }
}

TEST(OraclePowerSplit, GridRefinementBarelyMoves) {
  const PowerProblem pb = make_problem(4e-7, 1e-7, 0.5, 1e-7, {1.0, 2.0, 0.0});
  const double p_t = optimal_total_power(pb.h_eff, pb.cons);
  const OracleResult coarse = oracle_power_split(pb, p_t, 10000);
  const OracleResult fine = oracle_power_split(pb, p_t, 100000);
  ASSERT_TRUE(coarse.feasible);
  EXPECT_LT(std::abs(fine.objective - coarse.objective), 1e-4);
}

TEST(OraclePowerSplit, UnreachableFloorIsInfeasible) {
  // even with all power the weak user cannot reach r_min
  const double gj = 1e-7, pt = 1.0;
  const double ceiling = std::log2(1.0 + gj * pt / 1e-7);
  const PowerProblem pb = make_problem(4e-7, gj, 0.1, 1e-7, {pt, 100.0, ceiling + 0.5});
  EXPECT_FALSE(oracle_power_split(pb, pt, 10000).feasible);
  const PowerSolution sol = solve_power(pb, DualState{});
  EXPECT_FALSE(sol.feasible);
  EXPECT_EQ(sol.solver_path, SolverPath::oracle_fallback);
}

TEST(OraclePowerSplit, SymmetricUsersMatchEnumeration) {
  const PowerProblem pb = make_problem(3e-7, 3e-7, 0.5, 1e-7, {1.0, 2.0, 0.1}, 0.4);
  const double p_t = optimal_total_power(pb.h_eff, pb.cons);
  const OracleResult lib = oracle_power_split(pb, p_t, 10000);
  const oracle::PowerGrid ref = oracle::power_grid(pb.gain_k, pb.gain_j, pb.h_eff, 1e-7, pb.cons,
                                                   pb.coeff_k.expansion_point, pb.coeff_j.expansion_point, 10000);
  ASSERT_TRUE(lib.feasible);
  ASSERT_TRUE(ref.feasible);
  EXPECT_NEAR(lib.objective, ref.objective, 1e-12);
  EXPECT_NEAR(lib.split.p_k, ref.p_k, 1e-12);
}

TEST(SolvePower, SlackFloorsDriveDualsToZero) {
  PowerProblem pb = make_problem(1e-5, 1e-7, 0.5, 1e-7, {1.0, 2.0, 0.0}, 0.9);
  const PowerSolution sol = solve_power(pb, DualState{});
  ASSERT_TRUE(sol.feasible);
  EXPECT_GT(sol.split.p_k, 0.5);
  EXPECT_LT(sol.duals.lambda_k, 1e-3);
  EXPECT_LT(sol.duals.lambda_j, 1e-3);
}

TEST(SolvePower, DefaultScenarioMeetsFloors) {
  const Scenario sc;
  std::mt19937_64 rng(sc.seed);
  const ChannelSet ch = draw_channels(sc, rng);
  const BeamformingVector beam = BeamformingVector::random_phases(sc.m_elements, rng);
  const PowerSplit half{0.5, 0.5, 1.0};
  double gk = effective_gain(ch.g_k, beam), gj = effective_gain(ch.g_j, beam);
  if (gj > gk) std::swap(gk, gj);
  const ScaCoefficients ck = sca_coefficients(sinr_strong_from_gain(gk, half, sc.noise));
  const ScaCoefficients cj = sca_coefficients(sinr_weak_from_gain(gj, half, sc.noise));
  const PowerProblem pb{gk, gj, effective_gain(ch.h_l, beam), sc.noise, sc.cons, ck, cj};
  const PowerSolution sol = solve_power(pb, DualState{});
  ASSERT_TRUE(sol.feasible);
  EXPECT_GE(sol.surrogate_rates.first, 0.1);
  EXPECT_GE(sol.surrogate_rates.second, 0.1);
}

TEST(SolvePower, InvariantsOnRandomInstances) {
  std::mt19937_64 rng(31);
  for (int i = 0; i < 100; ++i) {
    const check::PowerInstance in = check::random_power_instance(rng);
    const PowerSolution sol = solve_power(in.problem, in.duals);
    EXPECT_GE(sol.duals.lambda_k, 0.0);
    EXPECT_GE(sol.duals.lambda_j, 0.0);
    EXPECT_NEAR(sol.split.p_k + sol.split.p_j, 1.0, 1e-12);
    EXPECT_LE(sol.split.p_total, in.problem.cons.p_max);
    EXPECT_LE(in.problem.h_eff * sol.split.p_total, in.problem.cons.i_th + 1e-9);
    if (sol.feasible) {
      EXPECT_GE(sol.surrogate_rates.first, in.problem.cons.r_min - 1e-6);
      EXPECT_GE(sol.surrogate_rates.second, in.problem.cons.r_min - 1e-6);
    }
  }
}

TEST(SolvePower, MatchesGridOracle) {
  const check::Outcome o = check::power_vs_grid(100, 41);
  EXPECT_TRUE(o.pass) << o.detail;
}

TEST(SolvePower, ScaRoundsNeverLowerExactSumRate) {
  std::mt19937_64 rng(43);
  for (int i = 0; i < 50; ++i) {
    const check::PowerInstance in = check::random_power_instance(rng);
    const PowerProblem& pb = in.problem;
    const PowerSolution one = solve_power(pb, in.duals);
    const PowerSolution many = solve_power_sca(pb, in.duals);
    if (!one.feasible) continue;
    ASSERT_TRUE(many.feasible);
    auto exact = [&](const PowerSplit& s) {
      return exact_rate(sinr_strong_from_gain(pb.gain_k, s, pb.noise)) +
             exact_rate(sinr_weak_from_gain(pb.gain_j, s, pb.noise));
    };
    EXPECT_GE(exact(many.split), exact(one.split) - 1e-9);
  }
}

TEST(SolvePower, ChannelOverloadAgreesWithGains) {
  std::mt19937_64 rng(2);
  const ChannelVector gk{check::random_complex(4, 1e-3, rng), ReceiverId::user_k};
  const ChannelVector gj{check::random_complex(4, 5e-4, rng), ReceiverId::user_j};
  const ChannelVector hl{check::random_complex(4, 0.2, rng), ReceiverId::primary_l};
  const BeamformingVector b = BeamformingVector::random_phases(4, rng);
  const NoisePower n(1e-7);
  const PowerConstraints c{1.0, 2.0, 0.1};
  const ScaCoefficients ck = sca_coefficients(5.0), cj = sca_coefficients(1.5);
  const PowerSolution a = solve_power(gk, gj, hl, b, n, c, ck, cj, DualState{});
  const PowerSolution d =
      solve_power({effective_gain(gk, b), effective_gain(gj, b), effective_gain(hl, b), n, c, ck, cj}, DualState{});
  EXPECT_EQ(a.split.p_k, d.split.p_k);
  EXPECT_EQ(a.split.p_total, d.split.p_total);
}
