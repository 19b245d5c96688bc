#pragma once

// Brute-force references. Each one recomputes its quantity straight from the
// model formulas with loops and grids, sharing no code path with the solvers,
// so agreement between the two is evidence rather than tautology.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <numbers>
#include <vector>

#include "trisleo/channel.hpp"
#include "trisleo/conic.hpp"
#include "trisleo/power.hpp"

namespace trisleo::oracle {

using cplx = std::complex<double>;
inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// ---- channel ----------------------------------------------------------------

/// Element m (zero based) of the line-of-sight response, written out longhand.
inline cplx steering_entry(const GeometryParams& g, int m) {
  const double rho = 2.0 * std::numbers::pi * g.carrier_frequency_hz * g.element_spacing_m / 299792458.0;
  const double arg = std::numbers::pi * g.doppler_shift -
                     rho * std::sin(g.vertical_aod_rad) * std::cos(g.horizontal_aod_rad) * m;
  return g.path_gain * cplx(std::cos(arg), std::sin(arg));
}

inline double gain_by_loop(const Eigen::VectorXcd& g, const Eigen::VectorXcd& beam) {
  cplx s = 0;
  for (Eigen::Index m = 0; m < g.size(); ++m) s += g[m] * beam[m];
  return s.real() * s.real() + s.imag() * s.imag();
}

// ---- rates ------------------------------------------------------------------

inline double rate_strong(double gain, double p_k, double p_t, double s2) {
  return std::log2(1.0 + gain * p_k * p_t / s2);
}

inline double rate_weak(double gain, double p_k, double p_t, double s2) {
  return std::log2(1.0 + gain * (1.0 - p_k) * p_t / (s2 + gain * p_k * p_t));
}

/// Tangent of log2(1+gamma) in log(gamma), taken at gamma_hat.
inline double log_tangent(double gamma_hat, double gamma) {
  return std::log2(1.0 + gamma_hat) + gamma_hat / (1.0 + gamma_hat) * std::log2(gamma / gamma_hat);
}

inline std::vector<double> log_grid(double lo, double hi, int n) {
  std::vector<double> g(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) g[static_cast<std::size_t>(i)] = lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1));
  return g;
}

// ---- power step ---------------------------------------------------------------

struct PowerGrid {
  bool feasible = false;
  double objective = kNegInf;
  double p_k = 0;
  double p_t = 0;
};

/// Maximizes the surrogate sum over an n-point grid of p_k in [0,1] at the
/// largest total power both caps allow; surrogate rates must meet r_min.
inline PowerGrid power_grid(double gain_k, double gain_j, double h_eff, double s2, const PowerConstraints& c,
                            double gamma_hat_k, double gamma_hat_j, int n = 10000) {
  PowerGrid out;
  out.p_t = h_eff > 0 ? std::min(c.p_max, c.i_th / h_eff) : c.p_max;
  for (int i = 0; i < n; ++i) {
    const double p = static_cast<double>(i) / (n - 1);
    const double gk = gain_k * p * out.p_t / s2;
    const double gj = gain_j * (1.0 - p) * out.p_t / (s2 + gain_j * p * out.p_t);
    if (!(gk > 0) || !(gj > 0)) continue;
    const double rk = log_tangent(gamma_hat_k, gk);
    const double rj = log_tangent(gamma_hat_j, gj);
    if (rk < c.r_min || rj < c.r_min) continue;
    if (rk + rj > out.objective) {
      out.feasible = true;
      out.objective = rk + rj;
      out.p_k = p;
    }
  }
  return out;
}

// ---- conic solver, M = 2 -----------------------------------------------------

inline double trace_of_product(const Eigen::MatrixXcd& a, const Eigen::Matrix2cd& x) {
  if (a.size() == 0) return 0.0;
  cplx s = 0;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) s += a(i, j) * x(j, i);
  return s.real();
}

/// Objective at phi with the scalar variable set to its best feasible value;
/// -inf when phi admits no feasible scalar or a log argument is not positive.
inline double best_over_lambda(const ConicProblem& pb, const Eigen::Matrix2cd& x, double* lambda_out = nullptr) {
  double lo = kNegInf, hi = std::numeric_limits<double>::infinity();
  for (const TraceConstraint& c : pb.constraints) {
    const double t = trace_of_product(c.coeff, x);
    // rewrite as lambda_coeff * L (<=|>=) bound - t
    const double rhs = c.bound - t;
    const double b = c.sense == Sense::less_equal ? c.lambda_coeff : -c.lambda_coeff;
    const double r = c.sense == Sense::less_equal ? rhs : -rhs;  // b * L <= r
    if (b == 0) {
      if (r < 0) return kNegInf;
    } else if (b > 0) {
      hi = std::min(hi, r / b);
    } else {
      lo = std::max(lo, r / b);
    }
  }
  if (lo > hi) return kNegInf;
  double lambda = 0;
  if (pb.has_lambda) {
    if (pb.lambda_linear < 0) lambda = lo;
    else if (pb.lambda_linear > 0) lambda = hi;
    else lambda = std::isfinite(lo) ? lo : (std::isfinite(hi) ? hi : 0.0);
    if (!std::isfinite(lambda)) return kNegInf;
  }
  double f = pb.constant + pb.lambda_linear * lambda + trace_of_product(pb.linear, x);
  for (const LogTerm& l : pb.log_terms) {
    if (l.weight == 0) continue;
    const double arg = trace_of_product(l.coeff, x) + l.offset;
    if (!(arg > 0)) return kNegInf;
    f += l.weight * std::log2(arg);
  }
  if (lambda_out) *lambda_out = lambda;
  return f;
}

struct ConicGrid {
  double value = kNegInf;
  Eigen::Matrix2cd phi = Eigen::Matrix2cd::Zero();
  double lambda = 0;
};

/// Dense search over the four real parameters of a 2x2 PSD matrix with capped
/// diagonal, written as phi = L L^H with L = sqrt(cap) [s, 0; u e^{i theta}, v].
/// Rank one is the face v = 0, so boundary optima stay reachable. A coarse
/// grid seeds pattern searches from its best points.
inline ConicGrid conic_grid_2x2(const ConicProblem& pb) {
  detail::require(pb.dimension == 2, "grid oracle is for 2x2 problems");
  const double cap = pb.diag_cap;
  using P4 = std::array<double, 4>;  // s, u, v, theta
  auto eval = [&](P4& p, Eigen::Matrix2cd& x, double& lam) {
    for (int i = 0; i < 3; ++i) p[static_cast<std::size_t>(i)] = std::clamp(p[static_cast<std::size_t>(i)], 0.0, 1.0);
    if (p[1] * p[1] + p[2] * p[2] > 1.0) return kNegInf;
    Eigen::Matrix2cd l;
    l << p[0], 0.0, p[1] * std::polar(1.0, p[3]), p[2];
    x = cap * (l * l.adjoint());
    // Pull phi back onto any violated scalar-free upper bound by shrinking it.
    // Shrinking keeps phi PSD and within the caps, and feasible points are
    // left alone, so the search can slide along curved constraint surfaces.
    for (const TraceConstraint& c : pb.constraints) {
      if (c.sense != Sense::less_equal || c.lambda_coeff != 0 || !(c.bound > 0)) continue;
      const double t = trace_of_product(c.coeff, x);
      if (t > c.bound) x *= c.bound / t;
    }
    return best_over_lambda(pb, x, &lam);
  };

  const int ns = 33, nr = 33, nt = 48;
  std::vector<std::pair<double, P4>> coarse;
  Eigen::Matrix2cd x;
  double lam = 0;
  for (int i = 0; i < ns; ++i)
    for (int j = 0; j < ns; ++j)
      for (int k = 0; k < nr; ++k)
        for (int l = 0; l < nt; ++l) {
          P4 p{static_cast<double>(i) / (ns - 1), static_cast<double>(j) / (ns - 1),
               static_cast<double>(k) / (nr - 1), 2.0 * std::numbers::pi * l / nt};
          const double f = eval(p, x, lam);
          if (std::isfinite(f)) coarse.push_back({f, p});
        }
  ConicGrid best;
  if (coarse.empty()) return best;
  const std::size_t starts = std::min<std::size_t>(16, coarse.size());
  std::partial_sort(coarse.begin(), coarse.begin() + static_cast<std::ptrdiff_t>(starts), coarse.end(),
                    [](const auto& u, const auto& v) { return u.first > v.first; });

  for (std::size_t s = 0; s < starts; ++s) {
    P4 cur = coarse[s].second;
    double fcur = coarse[s].first;
    P4 step{1.0 / (ns - 1), 1.0 / (ns - 1), 1.0 / (nr - 1), 2.0 * std::numbers::pi / nt};
    for (int round = 0; round < 400 && step[0] > 1e-12; ++round) {
      P4 arg = cur;
      double farg = fcur;
      for (int i = -2; i <= 2; ++i)
        for (int j = -2; j <= 2; ++j)
          for (int k = -2; k <= 2; ++k)
            for (int l = -2; l <= 2; ++l) {
              P4 p{cur[0] + i * step[0] / 2, cur[1] + j * step[1] / 2, cur[2] + k * step[2] / 2,
                   cur[3] + l * step[3] / 2};
              const double f = eval(p, x, lam);
              if (f > farg) farg = f, arg = p;
            }
      if (farg > fcur) {
        cur = arg, fcur = farg;
      } else {
        for (double& d : step) d *= 0.5;
      }
    }
    if (fcur > best.value) {
      best.value = eval(cur, x, lam);
      best.phi = x;
      best.lambda = lam;
    }
  }

  // Pattern search can stall where several boundaries meet (diagonal cap, rank
  // one, a linear cap). Finish with random sampling in a shrinking ball of the
  // raw entries (phi11, phi22, Re phi12, Im phi12), snapping samples onto the
  // nearest of those faces.
  auto snap = [&](Eigen::Matrix2cd& y) {
    for (int i = 0; i < 2; ++i) y(i, i) = std::clamp(y(i, i).real(), 0.0, cap);
    const double room = std::sqrt(y(0, 0).real() * y(1, 1).real());
    if (std::abs(y(0, 1)) > room) {
      y(0, 1) *= room / std::abs(y(0, 1));
      y(1, 0) = std::conj(y(0, 1));
    }
    for (const TraceConstraint& c : pb.constraints) {
      if (c.sense != Sense::less_equal || c.lambda_coeff != 0 || !(c.bound > 0)) continue;
      const double t = trace_of_product(c.coeff, y);
      if (t > c.bound) y *= c.bound / t;
    }
  };
  std::mt19937_64 rng(0x5eed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double radius = 0.05 * cap;
  for (int level = 0; level < 400 && radius > 1e-10 * cap; ++level) {
    bool moved = false;
    for (int k = 0; k < 3000; ++k) {
      double d[4], norm = 0;
      for (double& e : d) e = gauss(rng), norm += e * e;
      const double scale = radius * std::pow(unit(rng), 0.25) / std::sqrt(norm);
      Eigen::Matrix2cd y = best.phi;
      y(0, 0) += scale * d[0];
      y(1, 1) += scale * d[1];
      y(0, 1) += cplx(scale * d[2], scale * d[3]);
      y(1, 0) = std::conj(y(0, 1));
      snap(y);
      double l2 = 0;
      const double f = best_over_lambda(pb, y, &l2);
      if (f > best.value) best.value = f, best.phi = y, best.lambda = l2, moved = true;
    }
    radius *= moved ? 1.5 : 0.5;
  }
  return best;
}

// ---- phase step, small M ----------------------------------------------------

struct Enumeration {
  bool feasible = false;
  double best = kNegInf;
  Eigen::VectorXcd beam;
  int feasible_count = 0;
};

/// Every unit-amplitude beam with phases 2 pi q / levels; the strong user is
/// the first channel. Returns the best exact sum rate among beams that meet
/// both rate floors and the interference cap.
inline Enumeration enumerate_phases(const Eigen::VectorXcd& g_strong, const Eigen::VectorXcd& g_weak,
                                    const Eigen::VectorXcd& h, double p_k, double p_t, double s2,
                                    const PowerConstraints& c, int levels = 16) {
  const Eigen::Index m = g_strong.size();
  Enumeration out;
  std::vector<int> q(static_cast<std::size_t>(m), 0);
  Eigen::VectorXcd beam(m);
  while (true) {
    for (Eigen::Index i = 0; i < m; ++i)
      beam[i] = std::polar(1.0, 2.0 * std::numbers::pi * q[static_cast<std::size_t>(i)] / levels);
    const double rk = rate_strong(gain_by_loop(g_strong, beam), p_k, p_t, s2);
    const double rj = rate_weak(gain_by_loop(g_weak, beam), p_k, p_t, s2);
    const double itf = gain_by_loop(h, beam) * p_t;
    if (rk >= c.r_min && rj >= c.r_min && itf <= c.i_th) {
      ++out.feasible_count;
      if (rk + rj > out.best) {
        out.feasible = true;
        out.best = rk + rj;
        out.beam = beam;
      }
    }
    std::size_t i = 0;
    while (i < q.size() && ++q[i] == levels) q[i++] = 0;
    if (i == q.size()) break;
  }
  return out;
}

// ---- finite differences -------------------------------------------------------

inline Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
                                   double h) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Eigen::VectorXd xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    g[i] = (f(xp) - f(xm)) / (2.0 * h);
  }
  return g;
}

inline Eigen::MatrixXd fd_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x, double h) {
  Eigen::MatrixXd j(x.size(), x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Eigen::VectorXd xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    j.col(i) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return j;
}

/// max |a - b| / max(|b|_inf, floor).
inline double relative_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double floor = 1e-8) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(b.cwiseAbs().maxCoeff(), floor);
}

}  // namespace trisleo::oracle
