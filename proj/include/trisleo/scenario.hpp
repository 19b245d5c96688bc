#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "trisleo/channel.hpp"
#include "trisleo/errors.hpp"
#include "trisleo/power.hpp"
#include "trisleo/rate.hpp"

namespace trisleo {

/// One full problem instance plus the knobs of the outer loop.
struct Scenario {
  Eigen::Index m_elements = 10;
  GeometryParams geom_k{2.0e9, kSpeedOfLight / 4.0e9, 0.5, 0.3, 0.1, 1.0e-4};
  GeometryParams geom_j{2.0e9, kSpeedOfLight / 4.0e9, 0.5, 0.3, 0.1, 0.6e-4};
  GeometryParams geom_l{2.0e9, kSpeedOfLight / 4.0e9, 0.5, 0.3, 0.1, 0.126};
  NoisePower noise{1e-7};
  PowerConstraints cons{1.0, 2.0, 0.1};
  double delta_step = 0.05;
  int rand_trials = 200;
  std::uint64_t seed = 1;
  int sca_outer_cap = 30;
  double convergence_tol = 1e-3;
  double aod_spread_rad = 0.003;  // per-draw jitter of every departure angle
  double rician_k_factor = std::numeric_limits<double>::infinity();  // inf = pure line of sight
  int trials = 20;

  void validate() const {
    detail::require(m_elements >= 1, "m_elements must be >= 1");
    geom_k.validate();
    geom_j.validate();
    geom_l.validate();
    cons.validate();
    detail::require(std::isfinite(delta_step) && delta_step > 0, "delta_step must be > 0");
    detail::require(rand_trials >= 1, "rand_trials must be >= 1");
    detail::require(sca_outer_cap >= 1, "sca_outer_cap must be >= 1");
    detail::require(std::isfinite(convergence_tol) && convergence_tol > 0, "convergence_tol must be > 0");
    detail::require(std::isfinite(aod_spread_rad) && aod_spread_rad >= 0, "aod_spread_rad must be >= 0");
    detail::require(rician_k_factor >= 0, "rician_k_factor must be >= 0");
    detail::require(trials >= 1, "trials must be >= 1");
  }
};

struct ChannelSet {
  ChannelVector g_k;
  ChannelVector g_j;
  ChannelVector h_l;
};

/// Channels for one Monte-Carlo draw. Angles are drawn before anything that
/// depends on M, so every array size sees the same geometry for a given seed.
template <class Rng>
ChannelSet draw_channels(const Scenario& sc, Rng& rng) {
  std::uniform_real_distribution<double> jitter(-sc.aod_spread_rad, sc.aod_spread_rad);
  GeometryParams gk = sc.geom_k, gj = sc.geom_j, gl = sc.geom_l;
  for (GeometryParams* g : {&gk, &gj, &gl}) {
    if (sc.aod_spread_rad > 0) {
      g->vertical_aod_rad += jitter(rng);
      g->horizontal_aod_rad += jitter(rng);
    }
  }
  ChannelSet out;
  if (std::isinf(sc.rician_k_factor)) {
    out.g_k = steering_vector(gk, sc.m_elements, ReceiverId::user_k);
    out.g_j = steering_vector(gj, sc.m_elements, ReceiverId::user_j);
    out.h_l = steering_vector(gl, sc.m_elements, ReceiverId::primary_l);
  } else {
    out.g_k = rician_channel(gk, sc.m_elements, sc.rician_k_factor, rng, ReceiverId::user_k);
    out.g_j = rician_channel(gj, sc.m_elements, sc.rician_k_factor, rng, ReceiverId::user_j);
    out.h_l = rician_channel(gl, sc.m_elements, sc.rician_k_factor, rng, ReceiverId::primary_l);
  }
  return out;
}

/// Bad or missing configuration entry; key() names it.
class ConfigError : public InvalidInput {
 public:
  ConfigError(const std::string& key, const std::string& what) : InvalidInput(key + ": " + what), key_(key) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double parse_real(const std::string& key, const std::string& text) {
  double v = 0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) throw ConfigError(key, "not a number: '" + text + "'");
  return v;
}

inline std::int64_t parse_integer(const std::string& key, const std::string& text) {
  std::int64_t v = 0;
  const char* last = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), last, v);
  if (ec != std::errc() || ptr != last) throw ConfigError(key, "not an integer: '" + text + "'");
  return v;
}

inline const std::set<std::string>& required_keys() {
  static const std::set<std::string> keys = {
      "m_elements",   "sigma_sq",     "p_max",        "i_th",        "r_min",       "f_c_hz",
      "d0_m",         "path_gain_k",  "path_gain_j",  "path_gain_l", "aod_theta_k", "aod_theta_j",
      "aod_theta_l",  "aod_phi_k",    "aod_phi_j",    "aod_phi_l",   "doppler_psi", "delta_step",
      "rand_trials",  "seed"};
  return keys;
}

inline const std::set<std::string>& optional_keys() {
  static const std::set<std::string> keys = {"aod_spread_rad", "rician_k_factor", "sca_outer_cap",
                                             "convergence_tol", "trials"};
  return keys;
}

}  // namespace detail

/// Reads `key = value` lines; `#` starts a comment. Every required key must be
/// present exactly once and unknown keys are rejected.
inline Scenario parse_config(std::istream& in) {
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno), "expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (!detail::required_keys().count(key) && !detail::optional_keys().count(key))
      throw ConfigError(key, "unknown key");
    if (kv.count(key)) throw ConfigError(key, "duplicate key");
    if (value.empty()) throw ConfigError(key, "missing value");
    kv[key] = value;
  }
  for (const std::string& k : detail::required_keys())
    if (!kv.count(k)) throw ConfigError(k, "missing required key");

  auto real = [&](const std::string& k) { return detail::parse_real(k, kv.at(k)); };
  auto integer = [&](const std::string& k) { return detail::parse_integer(k, kv.at(k)); };

  Scenario sc;
  sc.m_elements = integer("m_elements");
  const double sigma = real("sigma_sq");
  if (!(sigma > 0) || !std::isfinite(sigma)) throw ConfigError("sigma_sq", "must be > 0");
  sc.noise = NoisePower(sigma);
  sc.cons = {real("p_max"), real("i_th"), real("r_min")};
  const double fc = real("f_c_hz");
  const double d0 = real("d0_m");
  const double psi = real("doppler_psi");
  const std::pair<GeometryParams*, char> geoms[] = {{&sc.geom_k, 'k'}, {&sc.geom_j, 'j'}, {&sc.geom_l, 'l'}};
  for (auto [g, id] : geoms) {
    const std::string s(1, id);
    *g = GeometryParams{fc, d0, real("aod_theta_" + s), real("aod_phi_" + s), psi, real("path_gain_" + s)};
  }
  sc.delta_step = real("delta_step");
  sc.rand_trials = static_cast<int>(integer("rand_trials"));
  const std::int64_t seed = integer("seed");
  if (seed < 0) throw ConfigError("seed", "must be >= 0");
  sc.seed = static_cast<std::uint64_t>(seed);
  if (kv.count("aod_spread_rad")) sc.aod_spread_rad = real("aod_spread_rad");
  if (kv.count("rician_k_factor")) sc.rician_k_factor = real("rician_k_factor");
  if (kv.count("sca_outer_cap")) sc.sca_outer_cap = static_cast<int>(integer("sca_outer_cap"));
  if (kv.count("convergence_tol")) sc.convergence_tol = real("convergence_tol");
  if (kv.count("trials")) sc.trials = static_cast<int>(integer("trials"));

  // Map each range failure back to the key that caused it.
  auto check = [](bool ok, const char* key, const char* what) {
    if (!ok) throw ConfigError(key, what);
  };
  check(sc.m_elements >= 1, "m_elements", "must be >= 1");
  check(std::isfinite(sc.cons.p_max) && sc.cons.p_max > 0, "p_max", "must be > 0");
  check(std::isfinite(sc.cons.i_th) && sc.cons.i_th > 0, "i_th", "must be > 0");
  check(std::isfinite(sc.cons.r_min) && sc.cons.r_min >= 0, "r_min", "must be >= 0");
  check(std::isfinite(fc) && fc > 0, "f_c_hz", "must be > 0");
  check(std::isfinite(d0) && d0 > 0, "d0_m", "must be > 0");
  for (auto [g, id] : geoms) {
    const std::string s(1, id);
    if (!(std::isfinite(g->path_gain) && g->path_gain >= 0)) throw ConfigError("path_gain_" + s, "must be >= 0");
    if (!std::isfinite(g->vertical_aod_rad)) throw ConfigError("aod_theta_" + s, "must be finite");
    if (!std::isfinite(g->horizontal_aod_rad)) throw ConfigError("aod_phi_" + s, "must be finite");
  }
  check(std::isfinite(psi), "doppler_psi", "must be finite");
  check(std::isfinite(sc.delta_step) && sc.delta_step > 0, "delta_step", "must be > 0");
  check(sc.rand_trials >= 1, "rand_trials", "must be >= 1");
  check(std::isfinite(sc.aod_spread_rad) && sc.aod_spread_rad >= 0, "aod_spread_rad", "must be >= 0");
  check(sc.rician_k_factor >= 0, "rician_k_factor", "must be >= 0");
  check(sc.sca_outer_cap >= 1, "sca_outer_cap", "must be >= 1");
  check(std::isfinite(sc.convergence_tol) && sc.convergence_tol > 0, "convergence_tol", "must be > 0");
  check(sc.trials >= 1, "trials", "must be >= 1");
  sc.validate();
  return sc;
}

inline Scenario load_config(const std::string& path) {
  if (path == "defaults") return Scenario{};
  std::ifstream in(path);
  if (!in) throw ConfigError("--config", "cannot open '" + path + "'");
  return parse_config(in);
}

/// Renders a scenario back into config text that parse_config accepts.
inline std::string to_config_text(const Scenario& sc) {
  std::ostringstream os;
  os.precision(17);
  os << "m_elements = " << sc.m_elements << '\n'
     << "sigma_sq = " << sc.noise.sigma_sq << '\n'
     << "p_max = " << sc.cons.p_max << '\n'
     << "i_th = " << sc.cons.i_th << '\n'
     << "r_min = " << sc.cons.r_min << '\n'
     << "f_c_hz = " << sc.geom_k.carrier_frequency_hz << '\n'
     << "d0_m = " << sc.geom_k.element_spacing_m << '\n';
  const std::pair<const GeometryParams*, char> geoms[] = {{&sc.geom_k, 'k'}, {&sc.geom_j, 'j'}, {&sc.geom_l, 'l'}};
  for (auto [g, id] : geoms) os << "path_gain_" << id << " = " << g->path_gain << '\n';
  for (auto [g, id] : geoms) os << "aod_theta_" << id << " = " << g->vertical_aod_rad << '\n';
  for (auto [g, id] : geoms) os << "aod_phi_" << id << " = " << g->horizontal_aod_rad << '\n';
  os << "doppler_psi = " << sc.geom_k.doppler_shift << '\n'
     << "delta_step = " << sc.delta_step << '\n'
     << "rand_trials = " << sc.rand_trials << '\n'
     << "seed = " << sc.seed << '\n'
     << "aod_spread_rad = " << sc.aod_spread_rad << '\n'
     << "rician_k_factor = " << sc.rician_k_factor << '\n'
     << "sca_outer_cap = " << sc.sca_outer_cap << '\n'
     << "convergence_tol = " << sc.convergence_tol << '\n'
     << "trials = " << sc.trials << '\n';
  return os.str();
}

}  // namespace trisleo
