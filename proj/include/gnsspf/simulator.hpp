#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "gnsspf/atmosphere.hpp"
#include "gnsspf/ephemeris.hpp"
#include "gnsspf/geodesy.hpp"
#include "gnsspf/observation.hpp"
#include "gnsspf/random.hpp"

namespace gnsspf {

struct NlosEvent {
  SatelliteId sat;
  double start_s{0.0};  // relative to scenario start, [start, end)
  double end_s{0.0};
  double delay_m{0.0};  // strictly positive
};

struct TrajectoryPoint {
  GnssTime time;
  EcefPosition position;
  Vec3 velocity{0.0, 0.0, 0.0};
};

// Satellite placement recipe: where the satellite appears in the local sky
// at scenario start.
struct SkySlot {
  SatelliteId sat;
  double elevation_deg{45.0};
  double azimuth_deg{0.0};
  double orbit_radius_km{26560.0};
};

// Synthetic world description. The recipe fields (site, heading, sky slots)
// are kept so scenarios can be serialized back to text.
struct Scenario {
  std::string name{"unnamed"};
  GnssTime start{2260, 356400.0};
  double rate_hz{10.0};
  double duration_s{50.0};
  GeodeticPosition site;  // trajectory start
  double heading_deg{90.0};
  double speed_mps{10.0};
  std::vector<SkySlot> sky;
  std::vector<NlosEvent> nlos_schedule;
  double pseudorange_noise_m{2.0};
  double doppler_noise_hz{0.5};
  double snr_noise_db{1.0};
  double clock_bias_s{1e-4};
  double clock_drift_sps{2e-9};
  bool iono_enabled{true};
  bool tropo_enabled{true};
  IonoParameters iono{{1.118e-8, 2.235e-8, -1.192e-7, -1.192e-7},
                      {1.167e5, 1.802e5, -1.311e5, -4.588e5}};
  double elevation_mask_deg{5.0};

  // Resolved by finalize()
  std::vector<TrajectoryPoint> truth_trajectory;
  std::vector<BroadcastEphemeris> constellation;

  int epoch_count() const {
    return static_cast<int>(std::lround(duration_s * rate_hz));
  }

  void validate() const {
    for (const auto& ev : nlos_schedule) {
      if (!(ev.delay_m > 0.0)) {
        throw std::invalid_argument("scenario: NLOS delay must be positive");
      }
      if (!(ev.end_s > ev.start_s)) {
        throw std::invalid_argument("scenario: NLOS interval is empty");
      }
    }
    for (std::size_t i = 1; i < truth_trajectory.size(); ++i) {
      if (!(truth_trajectory[i].time > truth_trajectory[i - 1].time)) {
        throw std::invalid_argument("scenario: trajectory times not increasing");
      }
    }
  }

  void finalize();

  EcefPosition position_at(const GnssTime& t) const {
    const TrajectoryPoint& p = segment_for(t);
    return p.position + p.velocity * (t - p.time);
  }
  Vec3 velocity_at(const GnssTime& t) const { return segment_for(t).velocity; }

  double receiver_clock_bias(const GnssTime& t_obs) const {
    return clock_bias_s + clock_drift_sps * (t_obs - start);
  }

 private:
  const TrajectoryPoint& segment_for(const GnssTime& t) const {
    if (truth_trajectory.empty()) {
      throw std::logic_error("scenario not finalized");
    }
    std::size_t lo = 0;
    for (std::size_t i = 0; i < truth_trajectory.size(); ++i) {
      if (truth_trajectory[i].time <= t) lo = i;
      else break;
    }
    return truth_trajectory[lo];
  }
};

// Circular broadcast orbit passing through the requested local-sky position
// at time toe.
inline BroadcastEphemeris ephemeris_from_sky_slot(const SkySlot& slot,
                                                  const EcefPosition& site,
                                                  const GnssTime& toe) {
  using namespace constants;
  const double el = slot.elevation_deg * kDeg2Rad;
  const double az = slot.azimuth_deg * kDeg2Rad;
  const double radius = slot.orbit_radius_km * 1e3;

  const Mat3 r_enu = ecef_to_enu_rotation(ecef_to_geodetic(site));
  const Vec3 dir_ecef =
      r_enu.transpose() *
      Vec3(std::sin(az) * std::cos(el), std::cos(az) * std::cos(el), std::sin(el));
  const Vec3 s = site.vec();
  const double sd = s.dot(dir_ecef);
  const double dist = -sd + std::sqrt(sd * sd + radius * radius - s.squaredNorm());
  const Vec3 sat_pos = s + dist * dir_ecef;
  const Vec3 u = sat_pos / sat_pos.norm();

  const double lat_gc = std::asin(std::clamp(u.z(), -1.0, 1.0));
  const double incl = std::max(55.0 * kDeg2Rad, std::abs(lat_gc) + 10.0 * kDeg2Rad);
  const double sin_i = std::sin(incl);

  // Solve A sin(W) + B cos(W) = C for the node angle W in the ECEF-at-toe frame
  const double a = u.x() * sin_i;
  const double b = -u.y() * sin_i;
  const double c = -u.z() * std::cos(incl);
  const double amp = std::hypot(a, b);
  const double phase = std::atan2(b, a);
  double node = std::asin(std::clamp(c / amp, -1.0, 1.0)) - phase;
  const auto plane_error = [&](double w) {
    return std::abs(a * std::sin(w) + b * std::cos(w) - c);
  };
  if (plane_error(node) > 1e-9) {
    node = kPi - std::asin(std::clamp(c / amp, -1.0, 1.0)) - phase;
  }

  const double cos_u = u.dot(Vec3(std::cos(node), std::sin(node), 0.0));
  const double sin_u = u.z() / sin_i;
  const double arg_lat = std::atan2(sin_u, cos_u);

  BroadcastEphemeris eph;
  eph.sat = slot.sat;
  eph.toe = toe;
  eph.toc = toe;
  eph.sqrt_a = std::sqrt(radius);
  eph.e = 0.0;
  eph.i0 = incl;
  eph.omega0 = node + kEarthRotationRate * toe.seconds_of_week;
  eph.omega = 0.0;
  eph.m0 = arg_lat;
  eph.omega_dot = -2.6e-9;
  eph.af0 = ((slot.sat.prn * 7 % 13) - 6) * 2e-5;
  eph.af1 = (slot.sat.prn % 5) * 1e-12;
  eph.validity_window = 7200.0;
  return eph;
}

inline void Scenario::finalize() {
  truth_trajectory.clear();
  constellation.clear();

  const EcefPosition start_pos = geodetic_to_ecef(site);
  const Mat3 r_enu = ecef_to_enu_rotation(site);
  const double heading = heading_deg * constants::kDeg2Rad;
  const Vec3 vel_ecef = r_enu.transpose() *
                        Vec3(speed_mps * std::sin(heading),
                             speed_mps * std::cos(heading), 0.0);
  const int n = epoch_count();
  truth_trajectory.reserve(n);
  for (int k = 0; k < n; ++k) {
    const double t = k / rate_hz;
    TrajectoryPoint p;
    p.time = start + t;
    p.position = start_pos + vel_ecef * t;
    p.velocity = vel_ecef;
    truth_trajectory.push_back(p);
  }

  for (const auto& slot : sky) {
    constellation.push_back(ephemeris_from_sky_slot(slot, start_pos, start));
  }
  std::sort(constellation.begin(), constellation.end(),
            [](const BroadcastEphemeris& a, const BroadcastEphemeris& b) {
              return a.sat < b.sat;
            });
  validate();
}

// Per-satellite truth at one epoch.
struct SatelliteTruth {
  SatelliteId sat;
  bool is_nlos{false};
  double nlos_delay{0.0};   // m
  double iono_delay{0.0};   // m
  double tropo_delay{0.0};  // m
  double noise{0.0};        // m, pseudorange noise draw
  double geometric_range{0.0};
  double elevation{0.0};
  SatelliteState state;  // at emission time
};

struct SimulatedEpoch {
  EpochObservations observations;
  EcefPosition truth_position;  // receiver at the true receive instant
  Vec3 truth_velocity{0.0, 0.0, 0.0};
  double clock_bias_m{0.0};  // c * dt
  std::vector<SatelliteTruth> satellites;

  std::vector<SatelliteId> nlos_satellites() const {
    std::vector<SatelliteId> out;
    for (const auto& s : satellites) {
      if (s.is_nlos) out.push_back(s.sat);
    }
    return out;
  }
};

namespace detail {

// Light-time solution: emission-frame satellite state plus the range
// expressed in the receive-time frame. Kept local to the simulator so the
// forward model stays an independent route from the estimator's range code.
struct LightTime {
  double range{0.0};
  double tau{0.0};
  SatelliteState state;
};

inline LightTime solve_light_time(const BroadcastEphemeris& eph,
                                  const GnssTime& t_rx, const Vec3& receiver) {
  using namespace constants;
  LightTime lt;
  lt.tau = 0.07;
  for (int i = 0; i < 5; ++i) {
    lt.state = satellite_state(eph, t_rx - lt.tau);
    const double theta = kEarthRotationRate * lt.tau;
    const Vec3 p = lt.state.position.vec();
    const Vec3 rotated(std::cos(theta) * p.x() + std::sin(theta) * p.y(),
                       -std::sin(theta) * p.x() + std::cos(theta) * p.y(),
                       p.z());
    lt.range = (rotated - receiver).norm();
    lt.tau = lt.range / kSpeedOfLight;
  }
  return lt;
}

}  // namespace detail

inline double nlos_delay_at(const Scenario& sc, const SatelliteId& sat,
                            double elapsed_s) {
  double delay = 0.0;
  for (const auto& ev : sc.nlos_schedule) {
    if (ev.sat == sat && elapsed_s >= ev.start_s && elapsed_s < ev.end_s) {
      delay += ev.delay_m;
    }
  }
  return delay;
}

// Forward measurement model. Epoch timestamps are receiver-clock times; the
// receiver clock bias shifts both the sampling instant and the pseudorange,
// which is what makes measured-pseudorange emission times exact downstream.
inline std::vector<SimulatedEpoch> generate(const Scenario& sc,
                                            std::uint64_t seed) {
  using namespace constants;
  if (sc.truth_trajectory.empty()) {
    throw std::logic_error("generate: scenario not finalized");
  }
  sc.validate();

  std::vector<SimulatedEpoch> out;
  out.reserve(sc.truth_trajectory.size());
  const double mask = sc.elevation_mask_deg * kDeg2Rad;
  std::normal_distribution<double> gauss(0.0, 1.0);

  for (std::size_t k = 0; k < sc.truth_trajectory.size(); ++k) {
    const GnssTime t_obs = sc.truth_trajectory[k].time;
    const double elapsed = t_obs - sc.start;
    const double dt_clock = sc.receiver_clock_bias(t_obs);

    // Noiseless receiver-clock pseudorange at an arbitrary nearby tag time;
    // differenced for the Doppler observable.
    const auto core_pseudorange = [&](const BroadcastEphemeris& eph,
                                      double tag_offset) {
      const GnssTime tag = t_obs + tag_offset;
      const double dt = sc.receiver_clock_bias(tag);
      const GnssTime t_rx = tag - dt;
      const Vec3 x_r = sc.position_at(t_rx).vec();
      const auto lt = detail::solve_light_time(eph, t_rx, x_r);
      return lt.range + kSpeedOfLight * (dt - lt.state.clock_bias);
    };

    SimulatedEpoch epoch;
    epoch.observations.time = t_obs;
    const GnssTime t_rx = t_obs - dt_clock;
    epoch.truth_position = sc.position_at(t_rx);
    epoch.truth_velocity = sc.velocity_at(t_rx);
    epoch.clock_bias_m = kSpeedOfLight * dt_clock;

    auto engine = rng::stream(seed, 0x67656e65u, k);
    const GeodeticPosition site_geo = ecef_to_geodetic(epoch.truth_position);

    for (const auto& eph : sc.constellation) {
      const double noise_pr = sc.pseudorange_noise_m * gauss(engine);
      const double noise_dop = sc.doppler_noise_hz * gauss(engine);
      const double noise_snr = sc.snr_noise_db * gauss(engine);

      const auto lt =
          detail::solve_light_time(eph, t_rx, epoch.truth_position.vec());
      const auto ea = elevation_azimuth(epoch.truth_position, lt.state.position);
      if (ea.elevation < mask) continue;

      SatelliteTruth truth;
      truth.sat = eph.sat;
      truth.state = lt.state;
      truth.geometric_range = lt.range;
      truth.elevation = ea.elevation;
      if (sc.iono_enabled) {
        truth.iono_delay =
            klobuchar_delay(sc.iono, site_geo, ea.elevation, ea.azimuth, t_obs);
      }
      if (sc.tropo_enabled) {
        truth.tropo_delay =
            saastamoinen_delay(site_geo, std::max(ea.elevation, 0.0501));
      }
      truth.nlos_delay = nlos_delay_at(sc, eph.sat, elapsed);
      truth.is_nlos = truth.nlos_delay > 0.0;
      truth.noise = noise_pr;

      RawMeasurement m;
      m.sat = eph.sat;
      m.pseudorange = lt.range +
                      kSpeedOfLight * (dt_clock - lt.state.clock_bias) +
                      truth.iono_delay + truth.tropo_delay + truth.nlos_delay +
                      noise_pr;

      const double h = 0.05;
      const double range_rate =
          (core_pseudorange(eph, h) - core_pseudorange(eph, -h)) / (2.0 * h);
      const double lambda = kSpeedOfLight / l1_frequency(eph.sat.constellation);
      m.doppler = -range_rate / lambda + noise_dop;

      m.snr = std::clamp(35.0 + 15.0 * std::sin(ea.elevation) + noise_snr, 20.0, 55.0);
      epoch.observations.measurements.push_back(m);
      epoch.satellites.push_back(truth);
    }
    out.push_back(std::move(epoch));
  }
  return out;
}

// Canonical desk-scale urban scene: a straight 500 m drive with a ten
// satellite sky and 2-3 concurrently blocked satellites switching every 5 s.
inline Scenario standard_urban_scenario() {
  Scenario sc;
  sc.name = "standard_urban";
  sc.start = GnssTime{2260, 356400.0};
  sc.rate_hz = 10.0;
  sc.duration_s = 50.0;
  sc.site = GeodeticPosition{35.69 * constants::kDeg2Rad,
                             139.70 * constants::kDeg2Rad, 40.0};
  sc.heading_deg = 90.0;
  sc.speed_mps = 10.0;
  sc.pseudorange_noise_m = 2.0;
  sc.doppler_noise_hz = 0.5;
  sc.clock_bias_s = 1e-4;
  sc.clock_drift_sps = 2e-9;
  sc.elevation_mask_deg = 5.0;

  using C = Constellation;
  sc.sky = {
      {{C::Gps, 1}, 75.0, 30.0, 26560.0},   // reference-grade, never blocked
      {{C::Gps, 2}, 55.0, 120.0, 26560.0},
      {{C::Gps, 3}, 45.0, 210.0, 26560.0},
      {{C::Gps, 4}, 40.0, 300.0, 26560.0},
      {{C::Gps, 5}, 30.0, 90.0, 26560.0},
      {{C::Gps, 6}, 25.0, 180.0, 26560.0},
      {{C::BeiDou, 1}, 50.0, 255.0, 27900.0},
      {{C::BeiDou, 2}, 35.0, 15.0, 27900.0},
      {{C::BeiDou, 3}, 20.0, 60.0, 27900.0},
      {{C::Qzss, 1}, 65.0, 330.0, 42164.0},
  };

  // 2-3 blocked satellites per 5 s window, delays in [20, 50] m. The
  // highest-elevation satellite stays clean, mirroring the assumption that
  // the zenith-most signal is received directly.
  const std::uint64_t schedule_seed = 12345;
  std::vector<SatelliteId> candidates;
  for (std::size_t i = 1; i < sc.sky.size(); ++i) {
    candidates.push_back(sc.sky[i].sat);
  }
  const int n_windows = static_cast<int>(sc.duration_s / 5.0);
  for (int w = 0; w < n_windows; ++w) {
    auto engine = rng::stream(schedule_seed, 0x6e6c6f73u, w);
    std::uniform_real_distribution<double> delay_dist(20.0, 50.0);
    const int n_blocked = 2 + static_cast<int>(engine() % 2);
    std::vector<SatelliteId> pool = candidates;
    for (int b = 0; b < n_blocked; ++b) {
      const std::size_t pick = engine() % pool.size();
      NlosEvent ev;
      ev.sat = pool[pick];
      ev.start_s = w * 5.0;
      ev.end_s = (w + 1) * 5.0;
      ev.delay_m = delay_dist(engine);
      sc.nlos_schedule.push_back(ev);
      pool.erase(pool.begin() + pick);
    }
  }

  sc.finalize();
  return sc;
}

}  // namespace gnsspf
