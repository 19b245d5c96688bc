#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "trisleo/checks.hpp"
#include "trisleo/conic.hpp"
#include "trisleo/oracle.hpp"
#include "trisleo/phase.hpp"
#include "trisleo/scenario.hpp"

using namespace trisleo;

namespace {

Eigen::MatrixXcd scalar(double v) { return Eigen::MatrixXcd::Constant(1, 1, v); }

}  // namespace

TEST(ConicSolve, ScalarReductionHitsCapOrConstraint) {
  // maximize log2(a phi + c) s.t. b phi <= d, 0 <= phi <= 1
  for (double d : {0.3, 0.8, 2.0}) {
    const double a = 3.0, c = 0.5, b = 1.0;
    ConicProblem pb;
    pb.dimension = 1;
    pb.log_terms.push_back({scalar(a), 1.0, c});
    pb.constraints.push_back({scalar(b), 0.0, Sense::less_equal, d});
    const SolveReport rep = solve(pb);
    ASSERT_EQ(rep.status, SolveStatus::optimal);
    const double phi = std::min(1.0, d / b);
    EXPECT_NEAR(rep.phi(0, 0).real(), phi, 1e-6);
    EXPECT_NEAR(rep.objective_value, std::log2(a * phi + c), 1e-6);
  }
}

TEST(ConicSolve, PureLinearCorner) {
  const double s2 = 1e-7;
  ConicProblem pb;
  pb.dimension = 2;
  pb.has_lambda = true;
  pb.lambda_linear = -1.0;
  pb.constraints.push_back({Eigen::MatrixXcd(), 1.0, Sense::greater_equal, s2});
  const SolveReport rep = solve(pb);
  ASSERT_EQ(rep.status, SolveStatus::optimal);
  EXPECT_NEAR(rep.lambda, s2, 1e-6);
}

TEST(ConicSolve, MatchesTwoByTwoGrid) {
  const check::Outcome o = check::conic_vs_grid(4, 101);
  EXPECT_TRUE(o.pass) << o.detail;
}

TEST(ConicSolve, StageObjectivesAscendAndOptimalIsFeasible) {
  std::mt19937_64 rng(55);
  for (int i = 0; i < 10; ++i) {
    const ConicProblem pb = check::random_conic2(rng);
    const SolveReport rep = solve(pb);
    ASSERT_EQ(rep.status, SolveStatus::optimal);
    EXPECT_LE(rep.kkt_residual, 1e-6);
    EXPECT_LE(rep.max_violation, 1e-7);
    for (std::size_t s = 1; s < rep.stage_objectives.size(); ++s)
      EXPECT_GE(rep.stage_objectives[s], rep.stage_objectives[s - 1] - 1e-9) << "stage " << s;
  }
}

TEST(ConicSolve, DualityGapBoundsComplementarySlackness) {
  // each barrier multiplier times its slack is 1/t = gap / nu
  std::mt19937_64 rng(57);
  const ConicProblem pb = check::random_conic2(rng);
  const SolveReport rep = solve(pb);
  ASSERT_EQ(rep.status, SolveStatus::optimal);
  const double nu = static_cast<double>(2 * pb.dimension + static_cast<Eigen::Index>(pb.constraints.size()));
  EXPECT_LE(rep.duality_gap_bound / nu, 10 * 1e-6);
}

TEST(ConicDerivatives, FiniteDifferences) {
  const check::Outcome o = check::barrier_derivatives(30, 61);
  EXPECT_TRUE(o.pass) << o.detail;
}

TEST(FindInterior, UnconstrainedUsesHalfCap) {
  ConicProblem pb;
  pb.dimension = 3;
  pb.diag_cap = 2.0;
  const InteriorPoint ip = find_interior(pb);
  ASSERT_TRUE(ip.found);
  EXPECT_LT((ip.phi - Eigen::MatrixXcd::Identity(3, 3)).norm(), 1e-15);
}

TEST(FindInterior, ContradictoryTraceBound) {
  ConicProblem pb;
  pb.dimension = 2;
  pb.constraints.push_back({Eigen::MatrixXcd::Identity(2, 2), 0.0, Sense::greater_equal, 10.0});
  const InteriorPoint ip = find_interior(pb);
  EXPECT_FALSE(ip.found);
  EXPECT_EQ(ip.violated_constraint, 0);
  EXPECT_GT(ip.violation, 0.0);
  EXPECT_EQ(solve(pb).status, SolveStatus::infeasible);
}

TEST(FindInterior, DefaultScenarioSubproblemIsStrictlyFeasible) {
  const Scenario sc;
  std::mt19937_64 rng(sc.seed);
  const ChannelSet ch = draw_channels(sc, rng);
  const PhaseSubproblem sub = make_phase_subproblem(ch.g_k, ch.g_j, ch.h_l, {0.3, 0.7, 1.0}, sc.noise, sc.cons);
  const InteriorPoint ip = find_interior(build_taylor_objective(sub).problem);
  EXPECT_TRUE(ip.found);
}

TEST(ConicProblem, ValidationRejectsBadInput) {
  ConicProblem pb;
  pb.dimension = 2;
  Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(2, 2);
  a(0, 1) = cplx(1.0, 0.0);  // not Hermitian
  pb.log_terms.push_back({a, 1.0, 1.0});
  EXPECT_THROW(pb.validate(), InvalidInput);
  pb.log_terms[0] = {Eigen::MatrixXcd::Identity(2, 2), -1.0, 1.0};
  EXPECT_THROW(pb.validate(), InvalidInput);
  pb.log_terms[0].weight = 1.0;
  pb.has_lambda = true;  // declared but unused
  EXPECT_THROW(pb.validate(), InvalidInput);
}

TEST(ConicDump, RoundTripPreservesObjective) {
  std::mt19937_64 rng(71);
  const ConicProblem pb = check::random_conic2(rng);
  std::stringstream ss;
  write_conic_dump(ss, pb);
  const ConicProblem back = read_conic_dump(ss);
  const Eigen::MatrixXcd phi = 0.5 * Eigen::MatrixXcd::Identity(2, 2);
  EXPECT_NEAR(back.objective(phi, 3.0), pb.objective(phi, 3.0), 1e-12);
  ASSERT_EQ(back.constraints.size(), pb.constraints.size());
  for (std::size_t r = 0; r < pb.constraints.size(); ++r)
    EXPECT_NEAR(back.slack(r, phi, 3.0), pb.slack(r, phi, 3.0), 1e-12);
}
