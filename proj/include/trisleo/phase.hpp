#pragma once

// Surface phase design for a frozen power split: lift the beam to a PSD matrix,
// linearize the interference log around Lambda_bar, solve the relaxed problem,
// re-expand until the un-linearized objective stalls, then pull a beam back out.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <utility>

#include "trisleo/channel.hpp"
#include "trisleo/conic.hpp"
#include "trisleo/errors.hpp"
#include "trisleo/power.hpp"
#include "trisleo/rate.hpp"

namespace trisleo {

enum class LiftSource { solver, outer_product };

struct LiftedMatrix {
  Eigen::MatrixXcd matrix;
  LiftSource source = LiftSource::solver;

  static LiftedMatrix from_beam(const BeamformingVector& phi) {
    return {phi.elements() * phi.elements().adjoint(), LiftSource::outer_product};
  }

  Eigen::Index size() const { return matrix.rows(); }

  double min_eigenvalue() const {
    if (matrix.size() == 0) return 0.0;
    const Eigen::MatrixXcd h = 0.5 * (matrix + matrix.adjoint());
    return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>(h, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
  }

  double max_diagonal() const { return matrix.size() ? matrix.diagonal().real().maxCoeff() : 0.0; }

  void validate() const {
    detail::require(matrix.rows() == matrix.cols(), "lifted matrix must be square");
    const double scale = 1.0 + (matrix.size() ? matrix.cwiseAbs().maxCoeff() : 0.0);
    detail::require((matrix - matrix.adjoint()).cwiseAbs().maxCoeff() <= 1e-9 * scale, "lifted matrix is not Hermitian");
    detail::require(min_eigenvalue() >= -1e-7, "lifted matrix is not PSD");
    detail::require(max_diagonal() <= 1.0 + 1e-7, "lifted matrix diagonal exceeds 1");
  }
};

/// Lifted channel G with tr(G * phi phi^H) == effective_gain(g, phi).
///
/// effective_gain multiplies without conjugation, |g^T phi|^2, so the outer
/// product is taken of conj(g).
inline Eigen::MatrixXcd lift_channel(const ChannelVector& g) {
  const Eigen::VectorXcd c = g.gains.conjugate();
  return c * c.adjoint();
}

struct PhaseSubproblem {
  Eigen::MatrixXcd g_k;  // lifted strong-user channel
  Eigen::MatrixXcd g_j;  // lifted weak-user channel
  Eigen::MatrixXcd h_l;  // lifted primary-receiver channel
  PowerSplit split;
  NoisePower noise;
  PowerConstraints cons;
  double lambda_bar = 1.0;
  // When set, the lifted variable is P_t * phi phi^H: the total power is optimized
  // together with the beam and the diagonal cap becomes P_max.
  bool power_in_lift = false;

  Eigen::Index size() const { return g_k.rows(); }
  double lift_power() const { return power_in_lift ? 1.0 : split.p_total; }
  double diag_cap() const { return power_in_lift ? cons.p_max : 1.0; }

  void validate() const {
    const Eigen::Index m = size();
    detail::require(m >= 1, "phase subproblem needs M >= 1");
    for (const Eigen::MatrixXcd* a : {&g_k, &g_j, &h_l})
      detail::require(a->rows() == m && a->cols() == m, "lifted channels must all be M x M");
    split.validate();
    cons.validate();
    detail::require(std::isfinite(lambda_bar) && lambda_bar > 0, "lambda_bar must be > 0");
  }
};

inline PhaseSubproblem make_phase_subproblem(const ChannelVector& g_k, const ChannelVector& g_j,
                                             const ChannelVector& h_l, const PowerSplit& split,
                                             const NoisePower& noise, const PowerConstraints& cons) {
  PhaseSubproblem sub{lift_channel(g_k), lift_channel(g_j), lift_channel(h_l), split, noise, cons, noise.sigma_sq};
  return sub;
}

inline Eigen::MatrixXcd hermitian_project(const Eigen::MatrixXcd& a) { return 0.5 * (a + a.adjoint()); }

inline double trace_product(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& phi) {
  return (a.array() * phi.transpose().array()).sum().real();
}

/// (strong, weak) SINRs in trace form.
inline std::pair<double, double> lifted_sinrs(const PhaseSubproblem& sub, const LiftedMatrix& phi) {
  detail::require(phi.size() == sub.size(), "lifted matrix and channels differ in size");
  const double tk = trace_product(sub.g_k, phi.matrix);
  const double tj = trace_product(sub.g_j, phi.matrix);
  const double pt = sub.lift_power();
  const double s2 = sub.noise.sigma_sq;
  return {tk * sub.split.p_k * pt / s2, tj * sub.split.p_j * pt / (s2 + tj * sub.split.p_k * pt)};
}

/// Sum rate before the Lambda linearization; concave in Phi.
inline double lifted_sum_rate(const PhaseSubproblem& sub, const LiftedMatrix& phi) {
  const auto [gk, gj] = lifted_sinrs(sub, phi);
  return std::log2(1.0 + std::max(gk, 0.0)) + std::log2(1.0 + std::max(gj, 0.0));
}

inline double lifted_interference(const PhaseSubproblem& sub, const LiftedMatrix& phi) {
  return trace_product(sub.h_l, phi.matrix) * sub.lift_power();
}

/// Linearized subproblem in noise-normalized units: Lambda' = Lambda / sigma^2.
struct TaylorObjective {
  ConicProblem problem;
  double sigma_sq = 1.0;
  double lambda_bar = 1.0;

  /// Objective at (Phi, Lambda) with Lambda in watts.
  double value(const Eigen::MatrixXcd& phi, double lambda) const {
    return problem.objective(phi, lambda / sigma_sq);
  }
};

inline TaylorObjective build_taylor_objective(const PhaseSubproblem& sub) {
  sub.validate();
  const double s2 = sub.noise.sigma_sq;
  const double pt = sub.lift_power();
  const double pk = sub.split.p_k;
  const double pj = sub.split.p_j;
  const double lb = sub.lambda_bar / s2;
  const double ln2 = std::numbers::ln2;

  TaylorObjective out;
  out.sigma_sq = s2;
  out.lambda_bar = sub.lambda_bar;
  ConicProblem& pb = out.problem;
  pb.dimension = sub.size();
  pb.diag_cap = sub.diag_cap();
  pb.has_lambda = true;
  pb.log_terms.push_back({sub.g_k * (pk * pt / s2), 1.0, 1.0});
  pb.log_terms.push_back({sub.g_j * ((pj + pk) * pt / s2), 1.0, 1.0});
  pb.lambda_linear = -1.0 / (lb * ln2);
  pb.constant = -std::log2(lb) + 1.0 / ln2;

  // interference at the weak user stays below Lambda
  pb.constraints.push_back({sub.g_j * (pk * pt / s2), -1.0, Sense::less_equal, -1.0});
  const double floor = std::exp2(sub.cons.r_min) - 1.0;
  if (floor > 0) {
    pb.constraints.push_back({sub.g_k * (pk * pt / s2), 0.0, Sense::greater_equal, floor});
    pb.constraints.push_back({sub.g_j * ((pj - floor * pk) * pt / s2), 0.0, Sense::greater_equal, floor});
  }
  pb.constraints.push_back({sub.h_l * (pt / sub.cons.i_th), 0.0, Sense::less_equal, 1.0});
  return out;
}

struct PhaseOptions {
  ConicOptions conic;
  int max_mm_iters = 20;
  double mm_tol = 1e-4;
  int rand_trials = 200;
  double rank1_threshold = 1e-6;
  std::uint64_t seed = 1;
};

struct RelaxedSolution {
  LiftedMatrix lifted;
  double lambda = 0.0;          // watts
  double taylor_objective = 0;  // linearized objective at the optimum
  SolveReport report;
};

/// One linearized solve. Throws Infeasible when the relaxed constraints admit no interior.
inline RelaxedSolution solve_phase_subproblem(const PhaseSubproblem& sub, const ConicOptions& opt = {}) {
  const TaylorObjective obj = build_taylor_objective(sub);
  SolveReport rep = solve(obj.problem, opt);
  if (rep.status == SolveStatus::infeasible) {
    throw Infeasible("phase subproblem has no strictly feasible point", rep.infeasible_constraint,
                     rep.max_violation);
  }
  RelaxedSolution out;
  out.lifted = {hermitian_project(rep.phi), LiftSource::solver};
  out.lambda = rep.lambda * sub.noise.sigma_sq;
  out.taylor_objective = rep.objective_value;
  out.report = std::move(rep);
  return out;
}

struct MmResult {
  RelaxedSolution relaxed;
  double relaxed_sum_rate = -std::numeric_limits<double>::infinity();
  int mm_iterations = 0;
  int newton_steps = 0;
};

/// Re-expands the Lambda linearization at each optimum until the sum rate stalls.
inline MmResult design_relaxed_phase(PhaseSubproblem sub, const LiftedMatrix& start, const PhaseOptions& opt = {}) {
  detail::require(opt.max_mm_iters >= 1, "max_mm_iters must be >= 1");
  sub.lambda_bar = sub.noise.sigma_sq + trace_product(sub.g_j, start.matrix) * sub.split.p_k * sub.lift_power();
  MmResult out;
  for (int it = 0; it < opt.max_mm_iters; ++it) {
    RelaxedSolution rs = solve_phase_subproblem(sub, opt.conic);
    const double value = lifted_sum_rate(sub, rs.lifted);
    out.newton_steps += rs.report.newton_steps;
    out.mm_iterations = it + 1;
    const double gain = value - out.relaxed_sum_rate;
    if (value >= out.relaxed_sum_rate) {
      out.relaxed_sum_rate = value;
      out.relaxed = std::move(rs);
    }
    if (gain < opt.mm_tol) break;
    sub.lambda_bar =
        sub.noise.sigma_sq + trace_product(sub.g_j, out.relaxed.lifted.matrix) * sub.split.p_k * sub.lift_power();
  }
  return out;
}

/// Shortfalls of one candidate beam; all zero when it is feasible.
struct BeamViolation {
  double rate_k = 0;        // b/s/Hz below the floor
  double rate_j = 0;        // b/s/Hz below the floor
  double interference = 0;  // watts above the cap

  double worst() const { return std::max({rate_k, rate_j, interference}); }
};

struct BeamEvaluation {
  double sum_rate = 0;
  BeamViolation violation;
  bool feasible = false;
};

inline BeamEvaluation evaluate_beam(const PhaseSubproblem& sub, const Eigen::VectorXcd& beam) {
  const double tk = (beam.adjoint() * sub.g_k * beam).value().real();
  const double tj = (beam.adjoint() * sub.g_j * beam).value().real();
  const double th = (beam.adjoint() * sub.h_l * beam).value().real();
  const PowerSplit s{sub.split.p_k, sub.split.p_j, sub.lift_power()};
  const double rk = std::log2(1.0 + std::max(0.0, sinr_strong_from_gain(tk, s, sub.noise)));
  const double rj = std::log2(1.0 + std::max(0.0, sinr_weak_from_gain(tj, s, sub.noise)));
  BeamEvaluation ev;
  ev.sum_rate = rk + rj;
  ev.violation.rate_k = std::max(0.0, sub.cons.r_min - rk);
  ev.violation.rate_j = std::max(0.0, sub.cons.r_min - rj);
  ev.violation.interference = std::max(0.0, th * s.p_total - sub.cons.i_th);
  ev.feasible = ev.violation.rate_k <= 1e-9 && ev.violation.rate_j <= 1e-9 &&
                ev.violation.interference <= 1e-9 * sub.cons.i_th;
  return ev;
}

struct PhaseSolution {
  LiftedMatrix lifted;
  BeamformingVector beam;
  double p_total = 0;  // total power that goes with the beam
  double rank1_gap = 0;
  int randomization_trials_used = 0;
  double objective_value = 0;  // exact sum rate of the returned beam
  double relaxed_objective = std::numeric_limits<double>::quiet_NaN();
};

/// Thrown when no randomized candidate meets the rate floors and the interference cap.
class ExtractionFailure : public std::runtime_error {
 public:
  ExtractionFailure(BeamformingVector best, BeamViolation violation)
      : std::runtime_error("no feasible beam among randomization candidates"),
        best_(std::move(best)),
        violation_(violation) {}

  const BeamformingVector& best_candidate() const { return best_; }
  const BeamViolation& violation() const { return violation_; }

 private:
  BeamformingVector best_;
  BeamViolation violation_;
};

namespace detail {

inline Eigen::VectorXcd clip_to_disk(Eigen::VectorXcd v, double radius) {
  for (Eigen::Index m = 0; m < v.size(); ++m) v[m] /= std::max(1.0, std::abs(v[m]) / radius);
  return v;
}

/// Rotates the vector so the first nonzero entry is real and positive.
inline Eigen::VectorXcd fix_global_phase(Eigen::VectorXcd v) {
  for (Eigen::Index m = 0; m < v.size(); ++m) {
    if (std::abs(v[m]) > 1e-12) {
      v *= std::polar(1.0, -std::arg(v[m]));
      break;
    }
  }
  return v;
}

}  // namespace detail

/// One extraction candidate: a beam, the total power that goes with it, and its exact evaluation.
struct BeamCandidate {
  Eigen::VectorXcd beam;
  double p_total = 0;
  BeamEvaluation eval;
};

namespace detail {

/// Fixed-power mode: the candidate is used as is.
/// Joint mode: the direction is normalized to a peak amplitude of 1 and given
/// the largest total power the interference cap and P_max allow.
inline BeamCandidate make_candidate(const PhaseSubproblem& sub, const Eigen::VectorXcd& v) {
  BeamCandidate c;
  if (!sub.power_in_lift) {
    c.beam = v;
    c.p_total = sub.split.p_total;
    c.eval = evaluate_beam(sub, v);
    return c;
  }
  const double peak = v.cwiseAbs().maxCoeff();
  c.beam = peak > 0 ? Eigen::VectorXcd(v / peak) : v;
  const double h = (c.beam.adjoint() * sub.h_l * c.beam).value().real();
  c.p_total = h > 0 ? std::min(sub.cons.p_max, sub.cons.i_th / h) : sub.cons.p_max;
  c.eval = evaluate_beam(sub, c.beam * std::sqrt(c.p_total));
  return c;
}

inline Eigen::VectorXcd unit_modulus(const Eigen::VectorXcd& v) {
  Eigen::VectorXcd u(v.size());
  for (Eigen::Index m = 0; m < v.size(); ++m) u[m] = std::abs(v[m]) > 0 ? v[m] / std::abs(v[m]) : cplx(1.0, 0.0);
  return u;
}

}  // namespace detail

/// Rank-one beam from a lifted solution, with Gaussian randomization when the
/// relaxation is not tight. Deterministic for a given seed.
inline PhaseSolution extract_beam(const LiftedMatrix& lifted, const PhaseSubproblem& sub, int trials,
                                  std::uint64_t seed, double rank1_threshold = 1e-6) {
  detail::require(trials >= 1, "randomization trials must be >= 1");
  detail::require(lifted.size() == sub.size(), "lifted matrix and channels differ in size");
  const Eigen::Index m = lifted.size();
  const double radius = std::sqrt(sub.diag_cap());
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(hermitian_project(lifted.matrix));
  Eigen::VectorXd vals = eig.eigenvalues().cwiseMax(0.0);
  const double top = vals[m - 1];
  detail::require(top > 0, "lifted matrix is zero; no beam to extract");

  PhaseSolution out;
  out.lifted = lifted;
  out.rank1_gap = m > 1 ? vals[m - 2] / top : 0.0;

  Eigen::VectorXcd principal = std::sqrt(top) * eig.eigenvectors().col(m - 1);
  const double peak = principal.cwiseAbs().maxCoeff();
  if (peak > radius) principal *= radius / peak;
  principal = detail::fix_global_phase(principal);

  auto finish = [&](const BeamCandidate& c) {
    out.beam = BeamformingVector(detail::clip_to_disk(detail::fix_global_phase(c.beam), 1.0));
    out.p_total = c.p_total;
    out.objective_value = c.eval.sum_rate;
    return out;
  };

  const BeamCandidate pc = detail::make_candidate(sub, principal);
  if (out.rank1_gap < rank1_threshold && pc.eval.feasible) return finish(pc);

  // colour = U * sqrt(Lambda), so colour * z has covariance Phi for z ~ CN(0, I)
  const Eigen::MatrixXcd colour = eig.eigenvectors() * vals.cwiseSqrt().asDiagonal();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, std::sqrt(0.5));

  BeamCandidate best = pc;
  BeamCandidate least_bad = pc;
  auto consider = [&](const BeamCandidate& c) {
    if (c.eval.feasible && (!best.eval.feasible || c.eval.sum_rate > best.eval.sum_rate)) best = c;
    if (!c.eval.feasible && c.eval.violation.worst() < least_bad.eval.violation.worst()) least_bad = c;
  };
  if (sub.power_in_lift) consider(detail::make_candidate(sub, detail::unit_modulus(principal)));

  Eigen::VectorXcd z(m);
  for (int t = 0; t < trials; ++t) {
    for (Eigen::Index i = 0; i < m; ++i) {
      const double re = n(rng);
      const double im = n(rng);
      z[i] = cplx(re, im);
    }
    const Eigen::VectorXcd sample = colour * z;
    consider(detail::make_candidate(sub, detail::clip_to_disk(sample, radius)));
    if (sub.power_in_lift) consider(detail::make_candidate(sub, detail::unit_modulus(sample)));
  }
  out.randomization_trials_used = trials;
  if (!best.eval.feasible) {
    const Eigen::VectorXcd v = least_bad.beam / std::max(1.0, least_bad.beam.cwiseAbs().maxCoeff());
    throw ExtractionFailure(BeamformingVector(v), least_bad.eval.violation);
  }
  return finish(best);
}

/// Full phase step: MM over the relaxed problem, then beam extraction.
inline PhaseSolution design_phase(const PhaseSubproblem& sub, const BeamformingVector& current,
                                  const PhaseOptions& opt = {}) {
  LiftedMatrix start = LiftedMatrix::from_beam(current);
  if (sub.power_in_lift) start.matrix *= sub.split.p_total;
  const MmResult mm = design_relaxed_phase(sub, start, opt);
  PhaseSolution sol = extract_beam(mm.relaxed.lifted, sub, opt.rand_trials, opt.seed, opt.rank1_threshold);
  sol.relaxed_objective = mm.relaxed_sum_rate;
  return sol;
}

}  // namespace trisleo
