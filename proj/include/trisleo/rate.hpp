#pragma once

#include <cmath>
#include <limits>

#include "trisleo/channel.hpp"
#include "trisleo/errors.hpp"

namespace trisleo {

struct NoisePower {
  double sigma_sq = 1e-7;

  explicit NoisePower(double s = 1e-7) : sigma_sq(s) {
    detail::require(std::isfinite(s) && s > 0, "noise power sigma_sq must be > 0");
  }
};

/// NOMA split of the total power: p_k to the strong (SIC) user, p_j = 1 - p_k to the weak one.
struct PowerSplit {
  static constexpr double kSumTol = 1e-9;

  double p_k = 0.5;
  double p_j = 0.5;
  double p_total = 1.0;

  static PowerSplit from_strong(double p_k, double p_total) {
    PowerSplit s{p_k, 1.0 - p_k, p_total};
    s.validate();
    return s;
  }

  void validate() const {
    detail::require(p_k >= 0 && p_k <= 1 && p_j >= 0 && p_j <= 1, "power coefficients must lie in [0,1]");
    detail::require(std::abs(p_k + p_j - 1.0) <= kSumTol, "power coefficients must sum to 1");
    detail::require(std::isfinite(p_total) && p_total > 0, "total power must be > 0");
  }
};

/// First-order log-domain minorant of log2(1+gamma), tight at expansion_point.
struct ScaCoefficients {
  double alpha = 0;
  double beta = 0;
  double expansion_point = 1;
};

inline double sinr_strong_from_gain(double gain_k, const PowerSplit& split, const NoisePower& noise) {
  return gain_k * split.p_k * split.p_total / noise.sigma_sq;
}

inline double sinr_weak_from_gain(double gain_j, const PowerSplit& split, const NoisePower& noise) {
  return gain_j * split.p_j * split.p_total / (noise.sigma_sq + gain_j * split.p_k * split.p_total);
}

/// SINR of the strong user after SIC removes the weak user's signal.
inline double sinr_strong(const ChannelVector& g_k, const BeamformingVector& phi, const PowerSplit& split,
                          const NoisePower& noise) {
  split.validate();
  return sinr_strong_from_gain(effective_gain(g_k, phi), split, noise);
}

/// SINR of the weak user, which treats the strong user's signal as noise.
inline double sinr_weak(const ChannelVector& g_j, const BeamformingVector& phi, const PowerSplit& split,
                        const NoisePower& noise) {
  split.validate();
  return sinr_weak_from_gain(effective_gain(g_j, phi), split, noise);
}

inline double exact_rate(double gamma) {
  detail::require(gamma >= 0, "SINR must be >= 0");
  return std::log2(1.0 + gamma);
}

inline ScaCoefficients sca_coefficients(double gamma_hat) {
  detail::require(std::isfinite(gamma_hat) && gamma_hat > 0, "SCA expansion point must be > 0");
  ScaCoefficients c;
  c.expansion_point = gamma_hat;
  c.alpha = gamma_hat / (1.0 + gamma_hat);
  c.beta = std::log2(1.0 + gamma_hat) - c.alpha * std::log2(gamma_hat);
  return c;
}

inline double surrogate_rate(const ScaCoefficients& c, double gamma) {
  detail::require(gamma > 0, "surrogate rate needs gamma > 0");
  return c.alpha * std::log2(gamma) + c.beta;
}

/// Surrogate that maps gamma <= 0 to -inf instead of throwing (used by grid searches).
inline double surrogate_rate_or_neg_inf(const ScaCoefficients& c, double gamma) {
  if (!(gamma > 0)) return -std::numeric_limits<double>::infinity();
  return c.alpha * std::log2(gamma) + c.beta;
}

}  // namespace trisleo
