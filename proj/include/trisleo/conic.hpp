#pragma once

// Log-barrier interior-point solver for
//
//   maximize   sum_i w_i log2(tr(A_i Phi) + c_i) + tr(L Phi) + l * Lambda + const
//   subject to tr(B_r Phi) + b_r * Lambda  (<= | >=)  d_r
//              Phi Hermitian PSD, diag(Phi) <= cap
//
// with w_i >= 0. Newton systems are solved in matrix form: the log-det Hessian
// Phi^-1 (.) Phi^-1 has the explicit inverse Phi (.) Phi, every other term is
// rank one, so each step is a Woodbury update plus a Schur complement on the
// scalar variables. The dense real-coordinate Hessian is kept for verification.

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "trisleo/errors.hpp"

namespace trisleo {

enum class Sense { less_equal, greater_equal };

/// Contributes weight * log2(tr(coeff * Phi) + offset) to the objective.
struct LogTerm {
  Eigen::MatrixXcd coeff;
  double weight = 1.0;
  double offset = 0.0;
};

/// tr(coeff * Phi) + lambda_coeff * Lambda  (<= | >=)  bound.
struct TraceConstraint {
  Eigen::MatrixXcd coeff;
  double lambda_coeff = 0.0;
  Sense sense = Sense::less_equal;
  double bound = 0.0;
};

struct ConicProblem {
  Eigen::Index dimension = 0;
  std::vector<LogTerm> log_terms;
  Eigen::MatrixXcd linear;  // empty means zero
  double lambda_linear = 0.0;
  double constant = 0.0;
  bool has_lambda = false;
  std::vector<TraceConstraint> constraints;
  double diag_cap = 1.0;

  void validate() const;
  double objective(const Eigen::MatrixXcd& phi, double lambda = 0.0) const;
  /// Signed slack of constraint r (>= 0 when satisfied).
  double slack(std::size_t r, const Eigen::MatrixXcd& phi, double lambda = 0.0) const;
};

enum class SolveStatus { optimal, infeasible, max_iters };

inline std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::max_iters: return "max_iters";
  }
  return "unknown";
}

struct SolveReport {
  Eigen::MatrixXcd phi;
  double lambda = 0.0;
  double objective_value = -std::numeric_limits<double>::infinity();
  int barrier_iterations = 0;
  int newton_steps = 0;
  double kkt_residual = std::numeric_limits<double>::infinity();
  double duality_gap_bound = std::numeric_limits<double>::infinity();
  double max_violation = 0.0;
  SolveStatus status = SolveStatus::max_iters;
  std::vector<double> stage_objectives;
  int infeasible_constraint = -1;
};

struct ConicOptions {
  double tol = 1e-6;
  int max_barrier_iters = 40;
  double t0 = 1.0;
  double growth = 10.0;
  double newton_tol = 1e-9;
  int max_newton_steps = 50;
};

struct InteriorPoint {
  bool found = false;
  Eigen::MatrixXcd phi;
  double lambda = 0.0;
  int violated_constraint = -1;  // evidence when !found (-2: diagonal/PSD block)
  double violation = 0.0;
};

namespace detail {

inline double inner(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  return (a.array() * b.conjugate().array()).real().sum();
}

inline bool is_zero(const Eigen::MatrixXcd& a) { return a.size() == 0 || a.cwiseAbs().maxCoeff() == 0.0; }

inline Eigen::MatrixXcd hermitian_part(const Eigen::MatrixXcd& a) { return 0.5 * (a + a.adjoint()); }

/// Writes a = sign * v v^H when a is Hermitian rank one; returns false otherwise.
inline bool rank_one_factor(const Eigen::MatrixXcd& a, Eigen::VectorXcd& v, double& sign) {
  if (a.size() == 0) return false;
  Eigen::Index j = 0;
  const double peak = a.diagonal().real().cwiseAbs().maxCoeff(&j);
  if (!(peak > 0)) return false;
  sign = a(j, j).real() > 0 ? 1.0 : -1.0;
  v = a.col(j) / std::sqrt(peak);
  return (a - sign * v * v.adjoint()).cwiseAbs().maxCoeff() <= 1e-12 * a.cwiseAbs().maxCoeff();
}

/// value = <mat, Phi> + zc . z + c
struct Affine {
  Eigen::MatrixXcd mat;  // empty = zero
  Eigen::VectorXd zc;
  double c = 0.0;
  Eigen::VectorXcd factor;   // mat == factor_sign * factor factor^H when nonempty
  double factor_sign = 1.0;

  double eval(const Eigen::MatrixXcd& phi, const Eigen::VectorXd& z) const {
    double v = c;
    if (mat.size() != 0) v += inner(mat, phi);
    if (zc.size() != 0) v += zc.dot(z);
    return v;
  }
};

struct Point {
  Eigen::MatrixXcd phi;
  Eigen::VectorXd z;
};

struct Direction {
  Eigen::MatrixXcd dphi;
  Eigen::VectorXd dz;
};

inline double dot(const Direction& a, const Direction& b) { return inner(a.dphi, b.dphi) + a.dz.dot(b.dz); }

/// Barrier-method model in natural-log units.
struct BarrierModel {
  Eigen::Index m = 0;
  Eigen::Index k = 0;  // number of scalar variables
  struct Log {
    Affine arg;
    double w = 0.0;  // natural-log weight
  };
  std::vector<Log> logs;
  Eigen::MatrixXcd lin;  // empty = zero
  Eigen::VectorXd lin_z;
  double constant = 0.0;
  std::vector<Affine> slacks;
  double cap = 1.0;

  double barrier_parameter() const { return static_cast<double>(2 * m + slacks.size()); }

  double objective(const Point& x) const {
    double f = constant;
    for (const auto& l : logs) f += l.w * std::log(l.arg.eval(x.phi, x.z));
    if (lin.size() != 0) f += inner(lin, x.phi);
    if (lin_z.size() != 0) f += lin_z.dot(x.z);
    return f;
  }
};

/// Per-point factorization data shared by value, gradient, and Newton routines.
struct PointData {
  bool feasible = false;
  Eigen::LLT<Eigen::MatrixXcd> llt;
  double logdet = 0.0;
  std::vector<double> log_args;
  std::vector<double> slack_vals;
  Eigen::VectorXd cap_slack;
};

inline PointData analyze(const BarrierModel& md, const Point& x) {
  PointData d;
  d.llt.compute(x.phi);
  if (d.llt.info() != Eigen::Success) return d;
  const Eigen::MatrixXcd& lm = d.llt.matrixLLT();
  double ld = 0.0;
  for (Eigen::Index i = 0; i < md.m; ++i) {
    const double li = lm(i, i).real();
    if (!(li > 0) || !std::isfinite(li)) return d;
    ld += 2.0 * std::log(li);
  }
  d.logdet = ld;
  d.cap_slack.resize(md.m);
  for (Eigen::Index i = 0; i < md.m; ++i) {
    d.cap_slack[i] = md.cap - x.phi(i, i).real();
    if (!(d.cap_slack[i] > 0)) return d;
  }
  d.log_args.reserve(md.logs.size());
  for (const auto& l : md.logs) {
    const double a = l.arg.eval(x.phi, x.z);
    if (!(a > 0)) return d;
    d.log_args.push_back(a);
  }
  d.slack_vals.reserve(md.slacks.size());
  for (const auto& s : md.slacks) {
    const double v = s.eval(x.phi, x.z);
    if (!(v > 0)) return d;
    d.slack_vals.push_back(v);
  }
  d.feasible = true;
  return d;
}

/// F_t(x) = -t f(x) - log det Phi - sum log slack - sum log(cap - Phi_mm).
inline double barrier_value(const BarrierModel& md, const Point& x, double t, const PointData& d) {
  if (!d.feasible) return std::numeric_limits<double>::infinity();
  double f = md.constant;
  for (std::size_t i = 0; i < md.logs.size(); ++i) f += md.logs[i].w * std::log(d.log_args[i]);
  if (md.lin.size() != 0) f += inner(md.lin, x.phi);
  if (md.lin_z.size() != 0) f += md.lin_z.dot(x.z);
  double v = -t * f - d.logdet;
  for (double s : d.slack_vals) v -= std::log(s);
  for (Eigen::Index i = 0; i < md.m; ++i) v -= std::log(d.cap_slack[i]);
  return v;
}

inline double barrier_value(const BarrierModel& md, const Point& x, double t) {
  return barrier_value(md, x, t, analyze(md, x));
}

inline Direction barrier_gradient(const BarrierModel& md, const Point& x, double t, const PointData& d) {
  Direction g;
  const Eigen::Index m = md.m;
  g.dphi = -d.llt.solve(Eigen::MatrixXcd::Identity(m, m));
  g.dz = Eigen::VectorXd::Zero(md.k);
  for (std::size_t i = 0; i < md.logs.size(); ++i) {
    const double coef = -t * md.logs[i].w / d.log_args[i];
    const Affine& a = md.logs[i].arg;
    if (a.mat.size() != 0) g.dphi += coef * a.mat;
    if (a.zc.size() != 0) g.dz += coef * a.zc;
  }
  if (md.lin.size() != 0) g.dphi -= t * md.lin;
  if (md.lin_z.size() != 0) g.dz -= t * md.lin_z;
  for (std::size_t r = 0; r < md.slacks.size(); ++r) {
    const double coef = -1.0 / d.slack_vals[r];
    const Affine& a = md.slacks[r];
    if (a.mat.size() != 0) g.dphi += coef * a.mat;
    if (a.zc.size() != 0) g.dz += coef * a.zc;
  }
  for (Eigen::Index i = 0; i < m; ++i) g.dphi(i, i) += 1.0 / d.cap_slack[i];
  g.dphi = hermitian_part(g.dphi);
  return g;
}

/// Rank-one Hessian terms rho * u u^T of the barrier function.
struct RankOne {
  const Affine* u;
  double rho;
};

inline std::vector<RankOne> rank_one_terms(const BarrierModel& md, double t, const PointData& d) {
  std::vector<RankOne> out;
  for (std::size_t i = 0; i < md.logs.size(); ++i) {
    const double rho = t * md.logs[i].w / (d.log_args[i] * d.log_args[i]);
    if (rho > 0) out.push_back({&md.logs[i].arg, rho});
  }
  for (std::size_t r = 0; r < md.slacks.size(); ++r) {
    out.push_back({&md.slacks[r], 1.0 / (d.slack_vals[r] * d.slack_vals[r])});
  }
  return out;
}

/// Hessian-vector product of F_t (reference implementation, uses Phi^-1).
inline Direction hessian_apply(const BarrierModel& md, const Point& x, double t, const PointData& d,
                               const Direction& v) {
  const Eigen::Index m = md.m;
  const Eigen::MatrixXcd inv = d.llt.solve(Eigen::MatrixXcd::Identity(m, m));
  Direction out;
  out.dphi = inv * v.dphi * inv;
  out.dz = Eigen::VectorXd::Zero(md.k);
  for (const RankOne& term : rank_one_terms(md, t, d)) {
    double s = 0.0;
    if (term.u->mat.size() != 0) s += inner(term.u->mat, v.dphi);
    if (term.u->zc.size() != 0) s += term.u->zc.dot(v.dz);
    if (term.u->mat.size() != 0) out.dphi += term.rho * s * term.u->mat;
    if (term.u->zc.size() != 0) out.dz += term.rho * s * term.u->zc;
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    out.dphi(i, i) += v.dphi(i, i).real() / (d.cap_slack[i] * d.cap_slack[i]);
  }
  out.dphi = hermitian_part(out.dphi);
  (void)x;
  return out;
}

template <class T>
using CMat = Eigen::Matrix<std::complex<T>, Eigen::Dynamic, Eigen::Dynamic>;
template <class T>
using RMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <class T>
using RVec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

template <class T>
T inner_t(const CMat<T>& a, const CMat<T>& b) {
  return (a.array() * b.conjugate().array()).real().sum();
}

// Above this barrier weight the Woodbury correction cancels most of Phi r Phi
// and double precision loses the step; the solve switches to long double.
inline constexpr double kExtendedPrecisionT = 1e7;

/// Solves H_t * step = rhs using the structured inverse.
template <class T>
Direction newton_solve_in(const BarrierModel& md, const Point& x, double t, const PointData& d,
                          const Direction& rhs) {
  using real_t = T;
  using MatL = CMat<T>;
  using RealMatL = RMat<T>;
  using RealVecL = RVec<T>;
  auto inner_l = [](const MatL& a, const MatL& b) { return inner_t<T>(a, b); };
  const Eigen::Index m = md.m;
  const MatL phi = x.phi.cast<std::complex<real_t>>();
  const std::vector<RankOne> terms = rank_one_terms(md, t, d);

  std::vector<const RankOne*> gen;
  for (const RankOne& term : terms)
    if (term.u->mat.size() != 0) gen.push_back(&term);  // make_model drops zero matrices
  const Eigen::Index g = static_cast<Eigen::Index>(gen.size());
  const Eigen::Index q = g + m;

  // Rank-one coefficients s v v^H turn every product with them into matrix-vector work.
  using VecL = Eigen::Matrix<std::complex<real_t>, Eigen::Dynamic, 1>;
  std::vector<MatL> u(g), p(g);
  std::vector<VecL> v(g), pv(g);
  std::vector<real_t> sg(g, real_t(1));
  for (Eigen::Index i = 0; i < g; ++i) {
    const Affine& a = *gen[i]->u;
    if (a.factor.size() != 0) {
      v[i] = a.factor.cast<std::complex<real_t>>();
      sg[i] = static_cast<real_t>(a.factor_sign);
      pv[i] = phi * v[i];
      p[i] = sg[i] * pv[i] * pv[i].adjoint();
    } else {
      u[i] = a.mat.cast<std::complex<real_t>>();
      p[i] = phi * u[i] * phi;
    }
  }
  // <u_i, y> for Hermitian y
  auto pair_inner = [&](Eigen::Index i, const MatL& y) -> real_t {
    if (v[i].size() != 0) return sg[i] * (v[i].adjoint() * y * v[i]).value().real();
    return inner_l(u[i], y);
  };

  RealMatL s(q, q);
  for (Eigen::Index i = 0; i < g; ++i) {
    for (Eigen::Index j = i; j < g; ++j) {
      if (v[i].size() != 0 && v[j].size() != 0) {
        s(i, j) = s(j, i) = sg[i] * sg[j] * std::norm(v[i].dot(pv[j]));
      } else {
        s(i, j) = s(j, i) = v[i].size() != 0 ? pair_inner(i, p[j]) : inner_l(u[i], p[j]);
      }
    }
    for (Eigen::Index mm = 0; mm < m; ++mm) s(i, g + mm) = s(g + mm, i) = p[i](mm, mm).real();
    s(i, i) += real_t(1) / static_cast<real_t>(gen[i]->rho);
  }
  for (Eigen::Index a = 0; a < m; ++a) {
    for (Eigen::Index b = a; b < m; ++b) s(g + a, g + b) = s(g + b, g + a) = std::norm(phi(a, b));
    const real_t cs = static_cast<real_t>(d.cap_slack[a]);
    s(g + a, g + a) += cs * cs;
  }
  const Eigen::LDLT<RealMatL> sfac(s);

  auto apply_inverse = [&](const MatL& r) {
    MatL y0 = phi * r * phi;
    RealVecL b(q);
    for (Eigen::Index i = 0; i < g; ++i) b[i] = pair_inner(i, y0);
    for (Eigen::Index a = 0; a < m; ++a) b[g + a] = y0(a, a).real();
    const RealVecL c = sfac.solve(b);
    for (Eigen::Index i = 0; i < g; ++i) y0 -= c[i] * p[i];
    y0.noalias() -= (phi * c.tail(m).asDiagonal()) * phi;
    return MatL(real_t(0.5) * (y0 + y0.adjoint()));
  };

  Direction out;
  if (md.k == 0) {
    out.dphi = apply_inverse(rhs.dphi.cast<std::complex<real_t>>()).template cast<std::complex<double>>();
    out.dz.resize(0);
    return out;
  }

  // Coupling between Phi and the scalar variables, eliminated by a Schur complement.
  const Eigen::Index k = md.k;
  std::vector<MatL> w(k, MatL::Zero(m, m));
  RealMatL c = RealMatL::Zero(k, k);
  for (const RankOne& term : terms) {
    if (term.u->zc.size() == 0) continue;
    const RealVecL zc = term.u->zc.cast<real_t>();
    const real_t rho = static_cast<real_t>(term.rho);
    c += rho * zc * zc.transpose();
    if (term.u->mat.size() != 0) {
      const MatL um = term.u->mat.cast<std::complex<real_t>>();
      for (Eigen::Index i = 0; i < k; ++i) w[i] += (rho * zc[i]) * um;
    }
  }
  const MatL xr = apply_inverse(rhs.dphi.cast<std::complex<real_t>>());
  std::vector<MatL> xw(k);
  for (Eigen::Index i = 0; i < k; ++i) xw[i] = apply_inverse(w[i]);
  RealMatL schur = c;
  RealVecL rz = rhs.dz.cast<real_t>();
  for (Eigen::Index i = 0; i < k; ++i) {
    rz[i] -= inner_l(w[i], xr);
    for (Eigen::Index j = 0; j < k; ++j) schur(i, j) -= inner_l(w[i], xw[j]);
  }
  const RealVecL dz = schur.ldlt().solve(rz);
  MatL dphi = xr;
  for (Eigen::Index i = 0; i < k; ++i) dphi -= dz[i] * xw[i];
  out.dz = dz.template cast<double>();
  out.dphi = hermitian_part(dphi.template cast<std::complex<double>>());
  return out;
}

inline Direction newton_solve(const BarrierModel& md, const Point& x, double t, const PointData& d,
                              const Direction& rhs) {
  if (t >= kExtendedPrecisionT) return newton_solve_in<long double>(md, x, t, d, rhs);
  return newton_solve_in<double>(md, x, t, d, rhs);
}

inline std::complex<double> cplx_i() { return {0.0, 1.0}; }

// Real coordinates of a Hermitian matrix: diagonal, then (Re, Im) of each p<q entry.
inline Eigen::Index real_dim(Eigen::Index m) { return m * m; }

inline Eigen::MatrixXcd real_basis(Eigen::Index m, Eigen::Index a) {
  Eigen::MatrixXcd e = Eigen::MatrixXcd::Zero(m, m);
  if (a < m) {
    e(a, a) = 1.0;
    return e;
  }
  Eigen::Index idx = m;
  for (Eigen::Index p = 0; p < m; ++p)
    for (Eigen::Index q = p + 1; q < m; ++q) {
      if (idx == a) {
        e(p, q) = e(q, p) = 1.0;
        return e;
      }
      if (idx + 1 == a) {
        e(p, q) = cplx_i();
        e(q, p) = -cplx_i();
        return e;
      }
      idx += 2;
    }
  throw InvalidInput("real_basis index out of range");
}

inline Eigen::VectorXd to_real(const Eigen::MatrixXcd& h) {
  const Eigen::Index m = h.rows();
  Eigen::VectorXd v(real_dim(m));
  for (Eigen::Index i = 0; i < m; ++i) v[i] = h(i, i).real();
  Eigen::Index idx = m;
  for (Eigen::Index p = 0; p < m; ++p)
    for (Eigen::Index q = p + 1; q < m; ++q) {
      v[idx++] = h(p, q).real();
      v[idx++] = h(p, q).imag();
    }
  return v;
}

inline Eigen::MatrixXcd from_real(const Eigen::VectorXd& v, Eigen::Index m) {
  Eigen::MatrixXcd h(m, m);
  for (Eigen::Index i = 0; i < m; ++i) h(i, i) = v[i];
  Eigen::Index idx = m;
  for (Eigen::Index p = 0; p < m; ++p)
    for (Eigen::Index q = p + 1; q < m; ++q) {
      h(p, q) = {v[idx], v[idx + 1]};
      h(q, p) = std::conj(h(p, q));
      idx += 2;
    }
  return h;
}

/// Gradient expressed in real coordinates: <G, E_a> for each basis element.
inline Eigen::VectorXd gradient_to_real(const Direction& g, Eigen::Index m) {
  Eigen::VectorXd v(real_dim(m) + g.dz.size());
  for (Eigen::Index a = 0; a < real_dim(m); ++a) v[a] = inner(g.dphi, real_basis(m, a));
  for (Eigen::Index i = 0; i < g.dz.size(); ++i) v[real_dim(m) + i] = g.dz[i];
  return v;
}

inline Point point_from_real(const Eigen::VectorXd& v, Eigen::Index m, Eigen::Index k) {
  return {from_real(v.head(real_dim(m)), m), v.tail(k)};
}

inline Eigen::VectorXd point_to_real(const Point& x) {
  Eigen::VectorXd v(real_dim(x.phi.rows()) + x.z.size());
  v << to_real(x.phi), x.z;
  return v;
}

/// Dense Hessian of F_t in real coordinates, assembled column by column.
inline Eigen::MatrixXd dense_hessian(const BarrierModel& md, const Point& x, double t) {
  const PointData d = analyze(md, x);
  detail::require(d.feasible, "dense_hessian needs a strictly feasible point");
  const Eigen::Index n = real_dim(md.m) + md.k;
  Eigen::MatrixXd h(n, n);
  for (Eigen::Index b = 0; b < n; ++b) {
    Direction e;
    e.dz = Eigen::VectorXd::Zero(md.k);
    if (b < real_dim(md.m)) {
      e.dphi = real_basis(md.m, b);
    } else {
      e.dphi = Eigen::MatrixXcd::Zero(md.m, md.m);
      e.dz[b - real_dim(md.m)] = 1.0;
    }
    h.col(b) = gradient_to_real(hessian_apply(md, x, t, d, e), md.m);
  }
  return h;
}

struct CenterResult {
  int steps = 0;
  bool converged = false;
};

inline Point step(const Point& x, const Direction& d, double a) {
  Point y{x.phi + a * d.dphi, x.z + a * d.dz};
  y.phi = hermitian_part(y.phi);
  return y;
}

/// Damped Newton minimization of F_t from a strictly feasible start.
inline CenterResult center(const BarrierModel& md, Point& x, double t, const ConicOptions& opt,
                           const std::function<bool(const Point&)>& early_stop = {}) {
  CenterResult res;
  PointData d = analyze(md, x);
  double fx = barrier_value(md, x, t, d);
  for (int it = 0; it < opt.max_newton_steps; ++it) {
    const Direction g = barrier_gradient(md, x, t, d);
    Direction rhs{-g.dphi, -g.dz};
    const Direction dx = newton_solve(md, x, t, d, rhs);
    const double dec2 = -dot(g, dx);
    if (!(dec2 >= 0) || dec2 / 2.0 <= opt.newton_tol) {
      res.converged = dec2 / 2.0 <= opt.newton_tol || !(dec2 >= 0);
      break;
    }
    double a = 1.0;
    Point y;
    PointData dy;
    double fy = std::numeric_limits<double>::infinity();
    bool moved = false;
    for (int ls = 0; ls < 60; ++ls) {
      y = step(x, dx, a);
      dy = analyze(md, y);
      fy = barrier_value(md, y, t, dy);
      if (fy <= fx - 0.25 * a * dec2) {
        moved = true;
        break;
      }
      a *= 0.5;
    }
    ++res.steps;
    if (!moved) {
      // round-off floor: accept a strict-feasible non-increasing step or stop
      if (dy.feasible && fy <= fx) {
        x = y;
        d = std::move(dy);
        fx = fy;
      }
      res.converged = true;
      break;
    }
    x = y;
    d = std::move(dy);
    fx = fy;
    if (early_stop && early_stop(x)) break;
  }
  return res;
}

inline BarrierModel make_model(const ConicProblem& pb) {
  BarrierModel md;
  md.m = pb.dimension;
  md.k = pb.has_lambda ? 1 : 0;
  md.cap = pb.diag_cap;
  const double inv_ln2 = 1.0 / std::numbers::ln2;
  for (const LogTerm& lt : pb.log_terms) {
    if (lt.weight == 0.0) continue;
    BarrierModel::Log l;
    l.arg.mat = is_zero(lt.coeff) ? Eigen::MatrixXcd() : hermitian_part(lt.coeff);
    l.arg.zc = Eigen::VectorXd::Zero(md.k);
    l.arg.c = lt.offset;
    if (!rank_one_factor(l.arg.mat, l.arg.factor, l.arg.factor_sign)) l.arg.factor.resize(0);
    l.w = lt.weight * inv_ln2;
    md.logs.push_back(std::move(l));
  }
  if (pb.linear.size() != 0 && !is_zero(pb.linear)) md.lin = hermitian_part(pb.linear);
  md.lin_z = Eigen::VectorXd::Zero(md.k);
  if (md.k == 1) md.lin_z[0] = pb.lambda_linear;
  md.constant = pb.constant;
  for (const TraceConstraint& tc : pb.constraints) {
    Affine a;
    const double sgn = tc.sense == Sense::less_equal ? -1.0 : 1.0;
    a.mat = is_zero(tc.coeff) ? Eigen::MatrixXcd() : Eigen::MatrixXcd(sgn * hermitian_part(tc.coeff));
    a.zc = Eigen::VectorXd::Zero(md.k);
    if (md.k == 1) a.zc[0] = sgn * tc.lambda_coeff;
    a.c = -sgn * tc.bound;
    if (!rank_one_factor(a.mat, a.factor, a.factor_sign)) a.factor.resize(0);
    md.slacks.push_back(std::move(a));
  }
  return md;
}

struct BarrierRun {
  Point x;
  int stages = 0;
  int newton_steps = 0;
  double t = 1.0;
  bool gap_closed = false;
  bool stopped_early = false;
  std::vector<double> stage_objectives;
};

inline BarrierRun run_barrier(const BarrierModel& md, Point x0, const ConicOptions& opt,
                              const std::function<bool(const Point&)>& stop = {}) {
  BarrierRun run;
  run.x = std::move(x0);
  double t = opt.t0;
  const double theta = md.barrier_parameter();
  for (int stage = 0; stage < opt.max_barrier_iters; ++stage) {
    const CenterResult c = center(md, run.x, t, opt);
    run.newton_steps += c.steps;
    run.stages = stage + 1;
    run.t = t;
    run.stage_objectives.push_back(md.objective(run.x));
    if (stop && stop(run.x)) {
      run.stopped_early = true;
      break;
    }
    if (theta / t < opt.tol) {
      run.gap_closed = true;
      break;
    }
    t *= opt.growth;
  }
  return run;
}

inline int most_violated(const BarrierModel& md, const Point& x, double& amount) {
  int idx = -1;
  amount = 0.0;
  for (std::size_t r = 0; r < md.slacks.size(); ++r) {
    const double v = -md.slacks[r].eval(x.phi, x.z);
    if (v > amount || idx < 0) {
      amount = v;
      idx = static_cast<int>(r);
    }
  }
  return idx;
}

}  // namespace detail

inline void ConicProblem::validate() const {
  detail::require(dimension >= 1, "conic problem dimension must be >= 1");
  detail::require(std::isfinite(diag_cap) && diag_cap > 0, "diag_cap must be > 0");
  auto check = [&](const Eigen::MatrixXcd& a, const char* what) {
    if (a.size() == 0) return;
    detail::require(a.rows() == dimension && a.cols() == dimension, std::string(what) + " has wrong shape");
    detail::require((a - a.adjoint()).cwiseAbs().maxCoeff() <= 1e-9 * (1.0 + a.cwiseAbs().maxCoeff()),
                    std::string(what) + " is not Hermitian");
  };
  for (const auto& l : log_terms) {
    check(l.coeff, "log-term coefficient");
    detail::require(l.weight >= 0 && std::isfinite(l.weight), "log-term weights must be >= 0");
  }
  check(linear, "linear coefficient");
  for (const auto& c : constraints) {
    check(c.coeff, "constraint coefficient");
    detail::require(has_lambda || c.lambda_coeff == 0.0, "constraint uses Lambda but has_lambda is false");
  }
  if (has_lambda) {
    bool used = false;
    for (const auto& c : constraints) used = used || c.lambda_coeff != 0.0;
    detail::require(used, "Lambda must appear in at least one constraint");
  }
}

inline double ConicProblem::objective(const Eigen::MatrixXcd& phi, double lambda) const {
  double f = constant;
  for (const auto& l : log_terms) {
    if (l.weight == 0.0) continue;
    const double arg = (l.coeff.size() ? detail::inner(l.coeff, phi) : 0.0) + l.offset;
    f += l.weight * std::log2(arg);
  }
  if (linear.size() != 0) f += detail::inner(linear, phi);
  if (has_lambda) f += lambda_linear * lambda;
  return f;
}

inline double ConicProblem::slack(std::size_t r, const Eigen::MatrixXcd& phi, double lambda) const {
  const TraceConstraint& c = constraints.at(r);
  const double lhs = (c.coeff.size() ? detail::inner(c.coeff, phi) : 0.0) + c.lambda_coeff * lambda;
  return c.sense == Sense::less_equal ? c.bound - lhs : lhs - c.bound;
}

/// Strictly feasible start: eps*I (shrunk if needed) with Lambda from its interval,
/// otherwise a phase-I barrier minimization of the largest normalized violation.
inline InteriorPoint find_interior(const ConicProblem& pb, const ConicOptions& opt = {}) {
  pb.validate();
  const detail::BarrierModel md = detail::make_model(pb);
  const Eigen::Index m = md.m;

  auto choose_z = [&](const Eigen::MatrixXcd& phi, bool& ok) {
    Eigen::VectorXd z = Eigen::VectorXd::Zero(md.k);
    ok = true;
    if (md.k == 0) return z;
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    for (const auto& s : md.slacks) {
      const double a = (s.mat.size() ? detail::inner(s.mat, phi) : 0.0) + s.c;
      const double b = s.zc[0];
      if (b > 0) lo = std::max(lo, -a / b);
      if (b < 0) hi = std::min(hi, a / -b);
    }
    if (std::isfinite(lo) && std::isfinite(hi)) {
      z[0] = 0.5 * (lo + hi);
      ok = lo < hi;
    } else if (std::isfinite(lo)) {
      z[0] = lo + 0.5 * std::max(1.0, std::abs(lo));
    } else if (std::isfinite(hi)) {
      z[0] = hi - 0.5 * std::max(1.0, std::abs(hi));
    }
    return z;
  };

  InteriorPoint out;
  double eps = md.cap / 2.0;
  for (int shrink = 0; shrink < 30; ++shrink, eps *= 0.5) {
    detail::Point x{eps * Eigen::MatrixXcd::Identity(m, m), Eigen::VectorXd()};
    bool ok = false;
    x.z = choose_z(x.phi, ok);
    if (ok && detail::analyze(md, x).feasible) {
      out.found = true;
      out.phi = x.phi;
      out.lambda = md.k ? x.z[0] : 0.0;
      return out;
    }
  }

  // Phase I: minimize s subject to slack_r / scale_r + s > 0.
  detail::Point x0{(md.cap / 2.0) * Eigen::MatrixXcd::Identity(m, m), Eigen::VectorXd()};
  bool ok_z = false;
  x0.z = choose_z(x0.phi, ok_z);
  detail::BarrierModel p1;
  p1.m = m;
  p1.k = md.k + 1;
  p1.cap = md.cap;
  p1.lin_z = Eigen::VectorXd::Zero(p1.k);
  p1.lin_z[md.k] = -1.0;
  double s0 = 0.0;
  for (const auto& s : md.slacks) {
    const double val = s.eval(x0.phi, x0.z);
    const double scale = std::max({std::abs(s.c), std::abs(val - s.c), 1e-300});
    detail::Affine a;
    a.mat = s.mat.size() ? Eigen::MatrixXcd(s.mat / scale) : Eigen::MatrixXcd();
    a.zc = Eigen::VectorXd::Zero(p1.k);
    if (md.k) a.zc.head(md.k) = s.zc / scale;
    a.zc[md.k] = 1.0;
    a.c = s.c / scale;
    s0 = std::max(s0, -val / scale);
    p1.slacks.push_back(std::move(a));
  }
  {
    detail::Affine lower;  // s >= -1
    lower.zc = Eigen::VectorXd::Zero(p1.k);
    lower.zc[md.k] = 1.0;
    lower.c = 1.0;
    p1.slacks.push_back(lower);
  }
  for (Eigen::Index i = 0; i < md.k; ++i) {
    const double r = 1e3 * std::max(1.0, std::abs(x0.z[i]));
    detail::Affine up, dn;
    up.zc = Eigen::VectorXd::Zero(p1.k);
    dn.zc = Eigen::VectorXd::Zero(p1.k);
    up.zc[i] = -1.0;
    up.c = x0.z[i] + r;
    dn.zc[i] = 1.0;
    dn.c = -(x0.z[i] - r);
    p1.slacks.push_back(up);
    p1.slacks.push_back(dn);
  }
  detail::Point start{x0.phi, Eigen::VectorXd::Zero(p1.k)};
  if (md.k) start.z.head(md.k) = x0.z;
  start.z[md.k] = s0 + 1.0;

  auto feasible_now = [&](const detail::Point& x) { return x.z[md.k] < 0.0; };
  ConicOptions o1 = opt;
  const detail::BarrierRun run = detail::run_barrier(p1, start, o1, feasible_now);
  const detail::Point& xf = run.x;
  detail::Point orig{xf.phi, xf.z.head(md.k)};
  if (xf.z[md.k] < 0.0 && detail::analyze(md, orig).feasible) {
    out.found = true;
    out.phi = orig.phi;
    out.lambda = md.k ? orig.z[0] : 0.0;
    return out;
  }
  double amount = 0.0;
  out.violated_constraint = detail::most_violated(md, orig, amount);
  out.violation = amount;
  out.phi = orig.phi;
  out.lambda = md.k ? orig.z[0] : 0.0;
  return out;
}

inline SolveReport solve(const ConicProblem& pb, const ConicOptions& opt = {}) {
  detail::require(opt.tol > 0, "tol must be > 0");
  detail::require(opt.max_barrier_iters >= 1, "max_barrier_iters must be >= 1");
  SolveReport rep;
  const InteriorPoint ip = find_interior(pb, opt);
  if (!ip.found) {
    rep.status = SolveStatus::infeasible;
    rep.infeasible_constraint = ip.violated_constraint;
    rep.max_violation = ip.violation;
    rep.phi = ip.phi;
    rep.lambda = ip.lambda;
    return rep;
  }
  const detail::BarrierModel md = detail::make_model(pb);
  detail::Point x0{ip.phi, Eigen::VectorXd::Zero(md.k)};
  if (md.k) x0.z[0] = ip.lambda;
  const detail::BarrierRun run = detail::run_barrier(md, x0, opt);

  rep.phi = run.x.phi;
  rep.lambda = md.k ? run.x.z[0] : 0.0;
  rep.barrier_iterations = run.stages;
  rep.newton_steps = run.newton_steps;
  rep.stage_objectives = run.stage_objectives;
  rep.objective_value = pb.objective(rep.phi, rep.lambda);
  rep.duality_gap_bound = md.barrier_parameter() / run.t;

  const detail::PointData d = detail::analyze(md, run.x);
  if (d.feasible) {
    const detail::Direction g = detail::barrier_gradient(md, run.x, run.t, d);
    const detail::Direction dx = detail::newton_solve(md, run.x, run.t, d, {-g.dphi, -g.dz});
    const double stationarity = std::sqrt(std::max(0.0, -detail::dot(g, dx))) / run.t;
    rep.kkt_residual = std::max(stationarity, rep.duality_gap_bound);
  }
  double viol = 0.0;
  for (std::size_t r = 0; r < pb.constraints.size(); ++r) viol = std::max(viol, -pb.slack(r, rep.phi, rep.lambda));
  for (Eigen::Index i = 0; i < md.m; ++i) viol = std::max(viol, rep.phi(i, i).real() - pb.diag_cap);
  const double min_eig = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>(rep.phi, Eigen::EigenvaluesOnly)
                             .eigenvalues()
                             .minCoeff();
  viol = std::max(viol, -min_eig);
  rep.max_violation = viol;
  rep.status = (run.gap_closed && rep.kkt_residual <= opt.tol) ? SolveStatus::optimal : SolveStatus::max_iters;
  return rep;
}

/// Plain-text dump for cross-checking against external solvers.
inline void write_conic_dump(std::ostream& os, const ConicProblem& pb) {
  const Eigen::Index m = pb.dimension;
  auto mat = [&](const Eigen::MatrixXcd& a) {
    for (Eigen::Index r = 0; r < m; ++r) {
      for (Eigen::Index c = 0; c < m; ++c) {
        const std::complex<double> v = a.size() ? a(r, c) : std::complex<double>(0.0, 0.0);
        os << (c ? " " : "") << v.real() << ' ' << v.imag();
      }
      os << '\n';
    }
  };
  os << std::setprecision(17);
  os << "CONIC v1 M=" << m << '\n';
  os << "LAMBDA " << (pb.has_lambda ? 1 : 0) << '\n';
  os << "DIAG_CAP " << pb.diag_cap << '\n';
  os << "CONSTANT " << pb.constant << '\n';
  os << "LAMBDA_LINEAR " << pb.lambda_linear << '\n';
  os << "LINEAR\n";
  mat(pb.linear);
  for (const auto& l : pb.log_terms) {
    os << "LOG " << l.weight << ' ' << l.offset << '\n';
    mat(l.coeff);
  }
  for (const auto& c : pb.constraints) {
    os << "CONSTRAINT " << (c.sense == Sense::less_equal ? "le" : "ge") << ' ' << c.lambda_coeff << ' ' << c.bound
       << '\n';
    mat(c.coeff);
  }
  os << "END\n";
}

inline ConicProblem read_conic_dump(std::istream& is) {
  ConicProblem pb;
  std::string line;
  auto fail = [](const std::string& why) { throw InvalidInput("bad conic dump: " + why); };
  if (!std::getline(is, line) || line.rfind("CONIC v1 M=", 0) != 0) fail("missing header");
  pb.dimension = std::stol(line.substr(11));
  const Eigen::Index m = pb.dimension;
  auto read_mat = [&]() {
    Eigen::MatrixXcd a(m, m);
    for (Eigen::Index r = 0; r < m; ++r)
      for (Eigen::Index c = 0; c < m; ++c) {
        double re = 0, im = 0;
        if (!(is >> re >> im)) fail("truncated matrix");
        a(r, c) = {re, im};
      }
    std::getline(is, line);
    return a;
  };
  std::string key;
  while (is >> key) {
    if (key == "LAMBDA") {
      int v = 0;
      is >> v;
      pb.has_lambda = v != 0;
    } else if (key == "DIAG_CAP") {
      is >> pb.diag_cap;
    } else if (key == "CONSTANT") {
      is >> pb.constant;
    } else if (key == "LAMBDA_LINEAR") {
      is >> pb.lambda_linear;
    } else if (key == "LINEAR") {
      std::getline(is, line);
      pb.linear = read_mat();
    } else if (key == "LOG") {
      LogTerm l;
      is >> l.weight >> l.offset;
      std::getline(is, line);
      l.coeff = read_mat();
      pb.log_terms.push_back(std::move(l));
    } else if (key == "CONSTRAINT") {
      TraceConstraint c;
      std::string sense;
      is >> sense >> c.lambda_coeff >> c.bound;
      if (sense != "le" && sense != "ge") fail("unknown sense " + sense);
      c.sense = sense == "le" ? Sense::less_equal : Sense::greater_equal;
      std::getline(is, line);
      c.coeff = read_mat();
      pb.constraints.push_back(std::move(c));
    } else if (key == "END") {
      return pb;
    } else {
      fail("unknown block " + key);
    }
  }
  fail("missing END");
  return pb;
}

}  // namespace trisleo
