#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <string>

#include "trisleo/errors.hpp"

namespace trisleo {

using cplx = std::complex<double>;

inline constexpr double kSpeedOfLight = 299792458.0;

/// Far-field departure geometry of one receiver as seen from the T-RIS.
struct GeometryParams {
  double carrier_frequency_hz = 2.0e9;
  double element_spacing_m = kSpeedOfLight / (2.0 * 2.0e9);
  double vertical_aod_rad = 0.0;
  double horizontal_aod_rad = 0.0;
  double doppler_shift = 0.0;  // static phase parameter, enters as exp(i*pi*psi)
  double path_gain = 1.0;      // linear amplitude

  /// Inter-element phase constant 2*pi*f_c*d_0/c.
  double rho() const {
    return 2.0 * std::numbers::pi * carrier_frequency_hz * element_spacing_m / kSpeedOfLight;
  }

  void validate() const {
    using std::isfinite;
    detail::require(isfinite(carrier_frequency_hz) && carrier_frequency_hz > 0,
                    "carrier_frequency_hz must be finite and positive");
    detail::require(isfinite(element_spacing_m) && element_spacing_m > 0,
                    "element_spacing_m must be finite and positive");
    detail::require(isfinite(vertical_aod_rad) && isfinite(horizontal_aod_rad),
                    "departure angles must be finite");
    detail::require(isfinite(doppler_shift), "doppler_shift must be finite");
    detail::require(isfinite(path_gain) && path_gain >= 0, "path_gain must be finite and >= 0");
    detail::require(isfinite(rho()) && rho() > 0, "rho must be finite and positive");
  }
};

enum class ReceiverId { user_k, user_j, primary_l };

inline std::string to_string(ReceiverId id) {
  switch (id) {
    case ReceiverId::user_k: return "user_k";
    case ReceiverId::user_j: return "user_j";
    case ReceiverId::primary_l: return "primary_l";
  }
  return "unknown";
}

/// Complex gains from the M surface elements to one receiver.
struct ChannelVector {
  Eigen::VectorXcd gains;
  ReceiverId receiver_id = ReceiverId::user_k;

  Eigen::Index size() const { return gains.size(); }
};

/// Per-element transmission coefficients eta_m * exp(i*phi_m), |eta_m| <= 1.
class BeamformingVector {
 public:
  static constexpr double kAmplitudeSlack = 1e-9;

  BeamformingVector() = default;
  explicit BeamformingVector(Eigen::VectorXcd elements) : elements_(std::move(elements)) {
    for (Eigen::Index m = 0; m < elements_.size(); ++m) {
      detail::require(std::isfinite(elements_[m].real()) && std::isfinite(elements_[m].imag()),
                      "beam element is not finite");
      detail::require(std::abs(elements_[m]) <= 1.0 + kAmplitudeSlack,
                      "beam element amplitude exceeds 1 (surface cannot amplify)");
    }
  }

  /// Unit-amplitude beam from element phases.
  static BeamformingVector from_phases(const Eigen::VectorXd& phases) {
    Eigen::VectorXcd e(phases.size());
    for (Eigen::Index m = 0; m < phases.size(); ++m) e[m] = std::polar(1.0, phases[m]);
    return BeamformingVector(std::move(e));
  }

  /// Seeded uniform phases in [0, 2pi), unit amplitudes.
  template <class Rng>
  static BeamformingVector random_phases(Eigen::Index m, Rng& rng) {
    std::uniform_real_distribution<double> u(0.0, 2.0 * std::numbers::pi);
    Eigen::VectorXd ph(m);
    for (Eigen::Index i = 0; i < m; ++i) ph[i] = u(rng);
    return from_phases(ph);
  }

  const Eigen::VectorXcd& elements() const { return elements_; }
  Eigen::Index size() const { return elements_.size(); }

  double max_amplitude() const {
    return elements_.size() == 0 ? 0.0 : elements_.cwiseAbs().maxCoeff();
  }

  /// Element phases mapped into [0, 2pi).
  Eigen::VectorXd phases() const {
    Eigen::VectorXd ph(elements_.size());
    for (Eigen::Index m = 0; m < elements_.size(); ++m) {
      double a = std::arg(elements_[m]);
      if (a < 0) a += 2.0 * std::numbers::pi;
      ph[m] = a;
    }
    return ph;
  }

 private:
  Eigen::VectorXcd elements_;
};

/// Line-of-sight array response of an M-element surface towards one receiver,
/// scaled by the path gain and rotated by the static Doppler phase.
inline ChannelVector steering_vector(const GeometryParams& geom, Eigen::Index m_elements,
                                     ReceiverId id = ReceiverId::user_k) {
  geom.validate();
  detail::require(m_elements >= 1, "m_elements must be >= 1");
  const double progression =
      geom.rho() * std::sin(geom.vertical_aod_rad) * std::cos(geom.horizontal_aod_rad);
  const cplx doppler = std::polar(1.0, std::numbers::pi * geom.doppler_shift);
  ChannelVector out;
  out.receiver_id = id;
  out.gains.resize(m_elements);
  for (Eigen::Index m = 0; m < m_elements; ++m) {
    out.gains[m] = geom.path_gain * doppler * std::polar(1.0, -progression * static_cast<double>(m));
  }
  return out;
}

/// Rician variant: sqrt(K/(K+1)) * LoS + sqrt(1/(K+1)) * CN(0, I) scatter, times path gain.
template <class Rng>
ChannelVector rician_channel(const GeometryParams& geom, Eigen::Index m_elements, double k_factor,
                             Rng& rng, ReceiverId id = ReceiverId::user_k) {
  detail::require(k_factor >= 0 && !std::isnan(k_factor), "Rician K-factor must be >= 0");
  ChannelVector los = steering_vector(geom, m_elements, id);
  if (std::isinf(k_factor)) return los;
  std::normal_distribution<double> n(0.0, std::sqrt(0.5));
  const double w_los = std::sqrt(k_factor / (k_factor + 1.0));
  const double w_nlos = std::sqrt(1.0 / (k_factor + 1.0));
  for (Eigen::Index m = 0; m < m_elements; ++m) {
    const cplx scatter(n(rng), n(rng));
    los.gains[m] = w_los * los.gains[m] + w_nlos * geom.path_gain * scatter;
  }
  return los;
}

/// |sum_m g_m * phi_m|^2.
inline double effective_gain(const ChannelVector& g, const BeamformingVector& phi) {
  detail::require(g.size() == phi.size(), "channel and beam lengths differ");
  const cplx s = (g.gains.array() * phi.elements().array()).sum();
  return std::norm(s);
}

}  // namespace trisleo
