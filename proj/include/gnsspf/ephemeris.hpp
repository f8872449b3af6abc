#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

#include "gnsspf/geodesy.hpp"
#include "gnsspf/observation.hpp"
#include "gnsspf/time.hpp"

namespace gnsspf {

// Satellite position/velocity/clock at signal emission time.
struct SatelliteState {
  SatelliteId sat;
  EcefPosition position;
  Vec3 velocity{0.0, 0.0, 0.0};  // m/s, ECEF
  double clock_bias{0.0};        // s, includes relativistic term
  double clock_drift{0.0};       // s/s
};

namespace detail {

// Solves M = E - e*sin(E) by Newton iteration.
inline double kepler_eccentric_anomaly(double mean_anomaly, double e) {
  double big_e = mean_anomaly;
  for (int i = 0; i < 30; ++i) {
    const double f = big_e - e * std::sin(big_e) - mean_anomaly;
    const double delta = f / (1.0 - e * std::cos(big_e));
    big_e -= delta;
    if (std::abs(delta) < 1e-14) return big_e;
  }
  if (std::abs(big_e - e * std::sin(big_e) - mean_anomaly) > 1e-9) {
    throw std::runtime_error("kepler_eccentric_anomaly: no convergence");
  }
  return big_e;
}

}  // namespace detail

inline SatelliteState satellite_state(const BroadcastEphemeris& eph,
                                      const GnssTime& emission_time) {
  using namespace constants;

  const double tk = emission_time - eph.toe;
  if (std::abs(tk) > eph.validity_window) {
    throw std::runtime_error("satellite_state: stale ephemeris for " +
                             eph.sat.to_string());
  }

  const double a = eph.sqrt_a * eph.sqrt_a;
  const double n0 = std::sqrt(eph.mu() / (a * a * a));
  const double n = n0 + eph.delta_n;
  const double mk = eph.m0 + n * tk;
  const double ek = detail::kepler_eccentric_anomaly(mk, eph.e);

  const double sin_ek = std::sin(ek);
  const double cos_ek = std::cos(ek);
  const double one_m_ecos = 1.0 - eph.e * cos_ek;

  const double nu =
      std::atan2(std::sqrt(1.0 - eph.e * eph.e) * sin_ek, cos_ek - eph.e);
  const double phi = nu + eph.omega;

  const double sin_2phi = std::sin(2.0 * phi);
  const double cos_2phi = std::cos(2.0 * phi);
  const double du = eph.cus * sin_2phi + eph.cuc * cos_2phi;
  const double dr = eph.crs * sin_2phi + eph.crc * cos_2phi;
  const double di = eph.cis * sin_2phi + eph.cic * cos_2phi;

  const double u = phi + du;
  const double r = a * one_m_ecos + dr;
  const double i = eph.i0 + eph.idot * tk + di;

  const double xp = r * std::cos(u);
  const double yp = r * std::sin(u);

  const double omega_k = eph.omega0 + (eph.omega_dot - kEarthRotationRate) * tk -
                         kEarthRotationRate * eph.toe.seconds_of_week;
  const double sin_om = std::sin(omega_k);
  const double cos_om = std::cos(omega_k);
  const double sin_i = std::sin(i);
  const double cos_i = std::cos(i);

  SatelliteState st;
  st.sat = eph.sat;
  st.position = EcefPosition(xp * cos_om - yp * cos_i * sin_om,
                             xp * sin_om + yp * cos_i * cos_om,
                             yp * sin_i);

  // Analytic time derivatives of the broadcast model
  const double ek_dot = n / one_m_ecos;
  const double nu_dot = ek_dot * std::sqrt(1.0 - eph.e * eph.e) / one_m_ecos;
  const double du_dot = 2.0 * nu_dot * (eph.cus * cos_2phi - eph.cuc * sin_2phi);
  const double dr_dot = 2.0 * nu_dot * (eph.crs * cos_2phi - eph.crc * sin_2phi);
  const double di_dot = 2.0 * nu_dot * (eph.cis * cos_2phi - eph.cic * sin_2phi);

  const double u_dot = nu_dot + du_dot;
  const double r_dot = a * eph.e * sin_ek * ek_dot + dr_dot;
  const double i_dot = eph.idot + di_dot;
  const double omega_k_dot = eph.omega_dot - kEarthRotationRate;

  const double xp_dot = r_dot * std::cos(u) - yp * u_dot;
  const double yp_dot = r_dot * std::sin(u) + xp * u_dot;

  st.velocity = Vec3(
      xp_dot * cos_om - yp_dot * cos_i * sin_om + yp * sin_i * sin_om * i_dot -
          st.position.y * omega_k_dot,
      xp_dot * sin_om + yp_dot * cos_i * cos_om - yp * sin_i * cos_om * i_dot +
          st.position.x * omega_k_dot,
      yp_dot * sin_i + yp * cos_i * i_dot);

  const double dtc = emission_time - eph.toc;
  const double rel_f = -2.0 * std::sqrt(eph.mu()) / (kSpeedOfLight * kSpeedOfLight);
  st.clock_bias = eph.af0 + eph.af1 * dtc + eph.af2 * dtc * dtc +
                  rel_f * eph.e * eph.sqrt_a * sin_ek;
  st.clock_drift = eph.af1 + 2.0 * eph.af2 * dtc +
                   rel_f * eph.e * eph.sqrt_a * cos_ek * ek_dot;
  return st;
}

// Flight-time correction only: receive_time - pseudorange / c.
inline GnssTime emission_time(const GnssTime& receive_time, double pseudorange) {
  return receive_time - pseudorange / constants::kSpeedOfLight;
}

// Refined once with the satellite clock bias. Because the pseudorange is
// measured against the satellite clock, receive - rho/c is the emission
// instant in satellite clock time; subtracting dT moves it to system time.
inline GnssTime emission_time(const BroadcastEphemeris& eph,
                              const GnssTime& receive_time, double pseudorange) {
  const GnssTime coarse = emission_time(receive_time, pseudorange);
  const SatelliteState st = satellite_state(eph, coarse);
  return coarse - st.clock_bias;
}

// Per-satellite ephemeris lookup, nearest toe within the validity window.
class EphemerisStore {
 public:
  EphemerisStore() = default;
  explicit EphemerisStore(const std::vector<BroadcastEphemeris>& ephs) {
    for (const auto& e : ephs) add(e);
  }

  void add(const BroadcastEphemeris& eph) { store_[eph.sat].push_back(eph); }

  std::optional<BroadcastEphemeris> find(const SatelliteId& sat,
                                         const GnssTime& t) const {
    const auto it = store_.find(sat);
    if (it == store_.end()) return std::nullopt;
    const BroadcastEphemeris* best = nullptr;
    double best_dt = 0.0;
    for (const auto& e : it->second) {
      const double dt = std::abs(t - e.toe);
      if (dt <= e.validity_window && (!best || dt < best_dt)) {
        best = &e;
        best_dt = dt;
      }
    }
    if (!best) return std::nullopt;
    return *best;
  }

  std::size_t size() const {
    std::size_t n = 0;
    for (const auto& [sat, v] : store_) n += v.size();
    return n;
  }

 private:
  std::map<SatelliteId, std::vector<BroadcastEphemeris>> store_;
};

}  // namespace gnsspf
