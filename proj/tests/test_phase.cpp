#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "trisleo/checks.hpp"
#include "trisleo/oracle.hpp"
#include "trisleo/phase.hpp"

using namespace trisleo;

namespace {

// Sum over i, j of A_ij * X_ji, looped by hand.
double trace_loop(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& x) {
  cplx acc = 0;
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) acc += a(i, j) * x(j, i);
  return acc.real();
}

Eigen::MatrixXcd random_psd(Eigen::Index m, std::mt19937_64& rng) {
  Eigen::MatrixXcd b(m, m);
  for (Eigen::Index c = 0; c < m; ++c) b.col(c) = check::random_complex(m, 1.0, rng);
  Eigen::MatrixXcd p = b * b.adjoint();
  return p / p.diagonal().real().maxCoeff();
}

Eigen::MatrixXcd random_hermitian(Eigen::Index m, std::mt19937_64& rng) {
  Eigen::MatrixXcd b(m, m);
  for (Eigen::Index c = 0; c < m; ++c) b.col(c) = check::random_complex(m, 1.0, rng);
  return 0.5 * (b + b.adjoint());
}

PhaseSubproblem slack_subproblem(Eigen::Index m, std::mt19937_64& rng) {
  const ChannelVector gk = check::as_channel(check::random_complex(m, 1e-3, rng), ReceiverId::user_k);
  const ChannelVector gj = check::as_channel(check::random_complex(m, 5e-4, rng), ReceiverId::user_j);
  const ChannelVector hl = check::as_channel(check::random_complex(m, 0.1, rng), ReceiverId::primary_l);
  return make_phase_subproblem(gk, gj, hl, {0.3, 0.7, 1.0}, NoisePower(1e-7), {1.0, 1e3, 0.0});
}

}  // namespace

TEST(LiftChannel, UnitBasis) {
  Eigen::VectorXcd g(2);
  g << 1.0, 0.0;
  Eigen::MatrixXcd expect = Eigen::MatrixXcd::Zero(2, 2);
  expect(0, 0) = 1.0;
  EXPECT_LT((lift_channel({g, ReceiverId::user_k}) - expect).norm(), 1e-15);
}

TEST(LiftChannel, TraceIsChannelEnergy) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 50; ++i) {
    const Eigen::VectorXcd g = check::random_complex(6, 1.0, rng);
    EXPECT_NEAR(lift_channel({g, ReceiverId::user_j}).trace().real(), g.squaredNorm(), 1e-12);
  }
}

TEST(LiftChannel, OnesHaveRankOne) {
  const Eigen::MatrixXcd l = lift_channel({Eigen::VectorXcd::Ones(3), ReceiverId::user_k});
  EXPECT_LT((l - Eigen::MatrixXcd::Ones(3, 3)).norm(), 1e-15);
  const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>(l).eigenvalues();
  EXPECT_NEAR(ev[0], 0.0, 1e-12);
  EXPECT_NEAR(ev[1], 0.0, 1e-12);
  EXPECT_NEAR(ev[2], 3.0, 1e-12);
}

TEST(LiftedSinrs, RankOneMatchesVectorForms) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 50; ++i) {
    const ChannelVector gk = check::as_channel(check::random_complex(5, 1e-3, rng), ReceiverId::user_k);
    const ChannelVector gj = check::as_channel(check::random_complex(5, 5e-4, rng), ReceiverId::user_j);
    const ChannelVector hl = check::as_channel(check::random_complex(5, 0.1, rng), ReceiverId::primary_l);
    const PowerSplit s{0.35, 0.65, 1.7};
    const NoisePower n(1e-7);
    const PhaseSubproblem sub = make_phase_subproblem(gk, gj, hl, s, n, {2.0, 2.0, 0.1});
    const BeamformingVector b = BeamformingVector::random_phases(5, rng);
    const auto [sk, sj] = lifted_sinrs(sub, LiftedMatrix::from_beam(b));
    const double vk = sinr_strong(gk, b, s, n), vj = sinr_weak(gj, b, s, n);
    EXPECT_NEAR(sk, vk, 1e-9 * vk);
    EXPECT_NEAR(sj, vj, 1e-9 * vj);
  }
}

TEST(LiftedSinrs, ZeroMatrixGivesZero) {
  std::mt19937_64 rng(6);
  const PhaseSubproblem sub = slack_subproblem(3, rng);
  const auto [sk, sj] = lifted_sinrs(sub, {Eigen::MatrixXcd::Zero(3, 3)});
  EXPECT_EQ(sk, 0.0);
  EXPECT_EQ(sj, 0.0);
}

TEST(LiftedSinrs, RandomPsdMatchesTraceLoop) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 30; ++i) {
    const PhaseSubproblem sub = slack_subproblem(4, rng);
    const Eigen::MatrixXcd phi = random_psd(4, rng);
    const double tk = trace_loop(sub.g_k, phi), tj = trace_loop(sub.g_j, phi);
    const double s2 = 1e-7, pk = sub.split.p_k, pj = sub.split.p_j, pt = sub.split.p_total;
    const auto [sk, sj] = lifted_sinrs(sub, {phi});
    EXPECT_NEAR(sk, tk * pk * pt / s2, 1e-9 * sk);
    EXPECT_NEAR(sj, tj * pj * pt / (tj * pk * pt + s2), 1e-9 * sj);
  }
}

TEST(TaylorObjective, ExactAtExpansionPoint) {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 20; ++i) {
    PhaseSubproblem sub = slack_subproblem(4, rng);
    const BeamformingVector b = BeamformingVector::random_phases(4, rng);
    const Eigen::MatrixXcd phi = LiftedMatrix::from_beam(b).matrix;
    const double pk = sub.split.p_k, pt = sub.split.p_total;
    sub.lambda_bar = 1e-7 + trace_loop(sub.g_j, phi) * pk * pt;
    const TaylorObjective obj = build_taylor_objective(sub);
    // rates from the beam directly, not from the lift
    const double ek = (b.elements().adjoint() * sub.g_k * b.elements()).value().real();
    const double ej = (b.elements().adjoint() * sub.g_j * b.elements()).value().real();
    const double exact = oracle::rate_strong(ek, pk, pt, 1e-7) + oracle::rate_weak(ej, pk, pt, 1e-7);
    EXPECT_NEAR(obj.value(phi, sub.lambda_bar), exact, 1e-9);
  }
}

TEST(TaylorObjective, LinearizationIsAMajorantOfLog) {
  std::mt19937_64 rng(10);
  PhaseSubproblem sub = slack_subproblem(3, rng);
  const Eigen::MatrixXcd phi = random_psd(3, rng);
  for (double lb : oracle::log_grid(1e-7, 1e-3, 21)) {
    sub.lambda_bar = lb;
    const TaylorObjective obj = build_taylor_objective(sub);
    const double tk = trace_loop(sub.g_k, phi), tj = trace_loop(sub.g_j, phi);
    const double pk = sub.split.p_k, pt = sub.split.p_total, s2 = 1e-7;
    for (double lam : oracle::log_grid(1e-7, 1e-2, 41)) {
      const double untangled = std::log2(1 + tk * pk * pt / s2) + std::log2(1 + tj * pt / s2) - std::log2(lam / s2);
      EXPECT_LE(obj.value(phi, lam), untangled + 1e-9);
    }
  }
}

TEST(TaylorObjective, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(12);
  for (int i = 0; i < 10; ++i) {
    PhaseSubproblem sub = slack_subproblem(3, rng);
    const Eigen::MatrixXcd phi = 0.5 * random_psd(3, rng) + 0.25 * Eigen::MatrixXcd::Identity(3, 3);
    const Eigen::MatrixXcd d = random_hermitian(3, rng);
    const TaylorObjective obj = build_taylor_objective(sub);
    const double s2 = 1e-7, pk = sub.split.p_k, pj = sub.split.p_j, pt = sub.split.p_total;
    const double ln2 = std::numbers::ln2;
    const double lam = 3e-7;
    const double analytic =
        trace_loop(sub.g_k, d) * pk * pt / ((trace_loop(sub.g_k, phi) * pk * pt + s2) * ln2) +
        trace_loop(sub.g_j, d) * (pk + pj) * pt / ((trace_loop(sub.g_j, phi) * (pk + pj) * pt + s2) * ln2);
    const double h = 1e-6;
    const double fd = (obj.value(phi + h * d, lam) - obj.value(phi - h * d, lam)) / (2 * h);
    EXPECT_NEAR(fd, analytic, 1e-5 * std::abs(analytic));
  }
}

TEST(SolvePhaseSubproblem, NoInterferenceTermPinsLambdaAtNoise) {
  std::mt19937_64 rng(13);
  PhaseSubproblem sub = slack_subproblem(2, rng);
  sub.split = {0.0, 1.0, 1.0};
  const RelaxedSolution rs = solve_phase_subproblem(sub);
  EXPECT_NEAR(rs.lambda, 1e-7, 1e-4 * 1e-7);
}

TEST(SolvePhaseSubproblem, SingleElementIsScalarOptimum) {
  for (double i_th : {0.3, 0.8, 5.0}) {
    Eigen::VectorXcd a(1), b(1), h(1);
    a << cplx(1e-3, 0);
    b << cplx(0, 6e-4);
    h << cplx(0.6, 0.8);  // |h|^2 = 1
    const PhaseSubproblem sub = make_phase_subproblem({a, ReceiverId::user_k}, {b, ReceiverId::user_j},
                                                      {h, ReceiverId::primary_l}, {0.3, 0.7, 1.0}, NoisePower(1e-7),
                                                      {1.0, i_th, 0.0});
    const MmResult mm = design_relaxed_phase(sub, {Eigen::MatrixXcd::Constant(1, 1, 0.5)});
    EXPECT_NEAR(mm.relaxed.lifted.matrix(0, 0).real(), std::min(1.0, i_th / 1.0), 1e-5);
  }
}

TEST(SolvePhaseSubproblem, OrthogonalChannelsFillTheDiagonal) {
  Eigen::VectorXcd a(2), b(2), h(2);
  a << 1e-3, 0;
  b << 0, 6e-4;
  h << 1e-3, 1e-3;
  const PhaseSubproblem sub = make_phase_subproblem({a, ReceiverId::user_k}, {b, ReceiverId::user_j},
                                                    {h, ReceiverId::primary_l}, {0.3, 0.7, 1.0}, NoisePower(1e-7),
                                                    {1.0, 2.0, 0.0});
  const MmResult mm = design_relaxed_phase(sub, {0.5 * Eigen::MatrixXcd::Identity(2, 2)});
  EXPECT_NEAR(mm.relaxed.lifted.matrix(0, 0).real(), 1.0, 1e-5);
  EXPECT_NEAR(mm.relaxed.lifted.matrix(1, 1).real(), 1.0, 1e-5);
}

TEST(DesignPhase, QuantizedEnumerationAndRelaxationBound) {
  const check::PhaseEnumerationStats st = check::phase_vs_enumeration(20, 77);
  ASSERT_EQ(st.instances, 20);
  EXPECT_EQ(st.bounded, st.instances) << "worst gap " << st.worst_bound_gap;
  EXPECT_GE(st.within_95 * 10, st.instances * 9) << "worst ratio " << st.worst_ratio;
}

TEST(DesignPhase, RelaxedObjectiveBoundsExtractedBeam) {
  std::mt19937_64 rng(79);
  int solved = 0;
  for (int i = 0; i < 15; ++i) {
    const check::PhaseInstance in = check::random_phase_instance(4, rng);
    try {
      const PhaseSolution sol = design_phase(in.subproblem(), BeamformingVector(Eigen::VectorXcd::Ones(4)));
      EXPECT_GE(sol.relaxed_objective, sol.objective_value - 1e-9);
      ++solved;
    } catch (const Infeasible&) {
    } catch (const ExtractionFailure&) {
    }
  }
  EXPECT_GT(solved, 0);
}

TEST(ExtractBeam, RankOneInputIsRecovered) {
  std::mt19937_64 rng(15);
  const PhaseSubproblem sub = slack_subproblem(5, rng);
  const BeamformingVector b = BeamformingVector::random_phases(5, rng);
  const PhaseSolution sol = extract_beam(LiftedMatrix::from_beam(b), sub, 10, 1);
  EXPECT_NEAR(std::abs(b.elements().dot(sol.beam.elements())), 5.0, 1e-9);
  EXPECT_NEAR(sol.objective_value, evaluate_beam(sub, b.elements()).sum_rate, 1e-9);
}

TEST(ExtractBeam, MaximallyMixedInputStaysInTheDisk) {
  std::mt19937_64 rng(16);
  const PhaseSubproblem sub = slack_subproblem(4, rng);
  const PhaseSolution sol = extract_beam({0.25 * Eigen::MatrixXcd::Identity(4, 4)}, sub, 200, 42);
  EXPECT_LE(sol.beam.elements().cwiseAbs().maxCoeff(), 1.0 + 1e-9);
  EXPECT_TRUE(evaluate_beam(sub, sol.beam.elements()).feasible);
}

TEST(ExtractBeam, MoreTrialsNeverHurt) {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 5; ++i) {
    const PhaseSubproblem sub = slack_subproblem(4, rng);
    const LiftedMatrix mixed{random_psd(4, rng)};
    const double one = extract_beam(mixed, sub, 1, 99).objective_value;
    const double many = extract_beam(mixed, sub, 1000, 99).objective_value;
    EXPECT_GE(many, one);
  }
}

TEST(ExtractBeam, DeterministicForSeed) {
  std::mt19937_64 rng(18);
  const PhaseSubproblem sub = slack_subproblem(4, rng);
  const LiftedMatrix mixed{random_psd(4, rng)};
  const PhaseSolution a = extract_beam(mixed, sub, 100, 5);
  const PhaseSolution b = extract_beam(mixed, sub, 100, 5);
  EXPECT_EQ(a.beam.elements(), b.beam.elements());
  EXPECT_EQ(a.objective_value, b.objective_value);
}
