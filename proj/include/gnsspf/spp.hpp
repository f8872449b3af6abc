#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <stdexcept>
#include <vector>

#include "gnsspf/atmosphere.hpp"
#include "gnsspf/ephemeris.hpp"
#include "gnsspf/geodesy.hpp"
#include "gnsspf/observation.hpp"

namespace gnsspf {

// Pseudorange with satellite clock, ionosphere and troposphere removed:
// value = rho + c*dT - I - T, so that value = r + c*dt + eps.
struct CompensatedPseudorange {
  SatelliteId sat;
  double value{0.0};      // m
  double snr{0.0};        // dB-Hz
  double elevation{0.0};  // rad, w.r.t. the context's evaluation point
};

enum class DropReason {
  kNone,
  kBelowHorizon,
  kBelowMask,
  kNoEphemeris,
  kStaleEphemeris,
  kLossOfLock,
};

struct Dop {
  double gdop{0.0};
  double pdop{0.0};
  double hdop{0.0};
  double vdop{0.0};
};

struct PositionSolution {
  EcefPosition position;
  // One clock state per constellation present, meters (c*dt).
  std::vector<std::pair<Constellation, double>> clock_bias;
  Mat3 covariance{Mat3::Zero()};  // ECEF position block, m^2
  Dop dop;
  std::vector<SatelliteId> used_satellites;
  bool converged{false};
  bool degenerate{false};
  double sigma0_sq{0.0};
  int iterations{0};

  double clock_bias_for(Constellation c) const {
    for (const auto& [k, v] : clock_bias) {
      if (k == c) return v;
    }
    return 0.0;
  }
};

struct VelocitySolution {
  Vec3 velocity{0.0, 0.0, 0.0};  // m/s ECEF
  double clock_drift{0.0};       // m/s
  std::vector<SatelliteId> used_satellites;
};

// Geometric range with Earth-rotation (Sagnac) compensation: the satellite
// position, given in the emission-time frame, is rotated about z by
// omega*(range/c) into the receive-time frame. Two fixed-point passes change
// the result by far less than a millimeter.
inline Vec3 sagnac_rotate(const Vec3& sat_pos, double range,
                          double earth_rate = constants::kEarthRotationRate) {
  const double theta = earth_rate * range / constants::kSpeedOfLight;
  const double c = std::cos(theta), s = std::sin(theta);
  return Vec3(c * sat_pos.x() + s * sat_pos.y(),
              -s * sat_pos.x() + c * sat_pos.y(), sat_pos.z());
}

inline double geometric_range(const EcefPosition& sat_pos,
                              const EcefPosition& receiver,
                              double earth_rate = constants::kEarthRotationRate) {
  const Vec3 sat = sat_pos.vec();
  const Vec3 rcv = receiver.vec();
  double range = (sat - rcv).norm();
  for (int i = 0; i < 2; ++i) {
    range = (sagnac_rotate(sat, range, earth_rate) - rcv).norm();
  }
  return range;
}

// Range plus unit line-of-sight vector (receiver toward rotated satellite).
struct RangeLos {
  double range{0.0};
  Vec3 unit{0.0, 0.0, 0.0};
};

inline RangeLos range_and_los(const EcefPosition& sat_pos,
                              const EcefPosition& receiver,
                              double earth_rate = constants::kEarthRotationRate) {
  const Vec3 rcv = receiver.vec();
  const double range = geometric_range(sat_pos, receiver, earth_rate);
  const Vec3 rotated = sagnac_rotate(sat_pos.vec(), range, earth_rate);
  RangeLos out;
  out.range = (rotated - rcv).norm();
  out.unit = (rotated - rcv) / out.range;
  return out;
}

struct CompensationOptions {
  bool apply_iono{true};
  bool apply_tropo{true};
};

inline std::optional<CompensatedPseudorange> compensate(
    const RawMeasurement& raw, const SatelliteState& sat_state,
    const EcefPosition& approx_receiver, const IonoParameters& iono,
    const GnssTime& time, const CompensationOptions& opts = {},
    DropReason* reason = nullptr) {
  const auto ea = elevation_azimuth(approx_receiver, sat_state.position);
  if (ea.elevation <= 0.0) {
    if (reason) *reason = DropReason::kBelowHorizon;
    return std::nullopt;
  }
  const GeodeticPosition geo = ecef_to_geodetic(approx_receiver);
  double iono_delay = 0.0, tropo_delay = 0.0;
  if (opts.apply_iono) {
    iono_delay = klobuchar_delay(iono, geo, ea.elevation, ea.azimuth, time);
  }
  if (opts.apply_tropo) {
    tropo_delay = saastamoinen_delay(geo, std::max(ea.elevation, 0.0501));
  }
  CompensatedPseudorange out;
  out.sat = raw.sat;
  out.value = raw.pseudorange + constants::kSpeedOfLight * sat_state.clock_bias -
              iono_delay - tropo_delay;
  out.snr = raw.snr;
  out.elevation = ea.elevation;
  if (reason) *reason = DropReason::kNone;
  return out;
}

// Elevation/SNR measurement weight; the SNR factor is normalized to 45 dB-Hz.
inline double measurement_weight(double elevation, double snr) {
  const double el = std::max(elevation, 0.05);
  const double s = std::sin(el);
  const double snr_factor =
      std::pow(10.0, (std::clamp(snr, 25.0, 55.0) - 45.0) / 10.0);
  return s * s * snr_factor;
}

// One usable satellite at an epoch: raw measurement, satellite state at
// emission, and the compensated pseudorange.
struct EpochEntry {
  RawMeasurement raw;
  SatelliteState state;
  CompensatedPseudorange pr;
};

struct DroppedMeasurement {
  SatelliteId sat;
  DropReason reason{DropReason::kNone};
};

struct EpochContext {
  GnssTime time;
  std::vector<EpochEntry> entries;  // sorted by satellite id
  EcefPosition evaluation_point;    // where compensation/elevations were taken
  std::vector<DroppedMeasurement> dropped;

  const EpochEntry* find(const SatelliteId& sat) const {
    for (const auto& e : entries) {
      if (e.raw.sat == sat) return &e;
    }
    return nullptr;
  }
};

struct ContextOptions {
  double elevation_mask{10.0 * constants::kDeg2Rad};
  CompensationOptions compensation;
};

inline EpochContext build_epoch_context(const EpochObservations& obs,
                                        const EphemerisStore& ephemerides,
                                        const IonoParameters& iono,
                                        const EcefPosition& approx_receiver,
                                        const ContextOptions& opts = {}) {
  EpochContext ctx;
  ctx.time = obs.time;
  ctx.evaluation_point = approx_receiver;
  for (const auto& raw : obs.measurements) {
    if (raw.loss_of_lock) {
      ctx.dropped.push_back({raw.sat, DropReason::kLossOfLock});
      continue;
    }
    const auto eph = ephemerides.find(raw.sat, emission_time(obs.time, raw.pseudorange));
    if (!eph) {
      ctx.dropped.push_back({raw.sat, DropReason::kNoEphemeris});
      continue;
    }
    const GnssTime t_tx = emission_time(*eph, obs.time, raw.pseudorange);
    const SatelliteState state = satellite_state(*eph, t_tx);
    const auto ea = elevation_azimuth(approx_receiver, state.position);
    if (ea.elevation <= 0.0) {
      ctx.dropped.push_back({raw.sat, DropReason::kBelowHorizon});
      continue;
    }
    if (ea.elevation < opts.elevation_mask) {
      ctx.dropped.push_back({raw.sat, DropReason::kBelowMask});
      continue;
    }
    DropReason reason = DropReason::kNone;
    const auto pr = compensate(raw, state, approx_receiver, iono, obs.time,
                               opts.compensation, &reason);
    if (!pr) {
      ctx.dropped.push_back({raw.sat, reason});
      continue;
    }
    ctx.entries.push_back({raw, state, *pr});
  }
  std::sort(ctx.entries.begin(), ctx.entries.end(),
            [](const EpochEntry& a, const EpochEntry& b) {
              return a.raw.sat < b.raw.sat;
            });
  return ctx;
}

namespace detail {

constexpr int kMaxMeasurements = 40;
constexpr int kMaxUnknowns = 7;  // 3 position + up to 4 constellation clocks

using DesignMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxMeasurements,
                  kMaxUnknowns>;
using ResidualVector =
    Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxMeasurements, 1>;

inline std::vector<Constellation> constellations_of(
    const std::vector<const EpochEntry*>& entries) {
  std::vector<Constellation> cs;
  for (const auto* e : entries) {
    if (std::find(cs.begin(), cs.end(), e->raw.sat.constellation) == cs.end()) {
      cs.push_back(e->raw.sat.constellation);
    }
  }
  std::sort(cs.begin(), cs.end());
  return cs;
}

}  // namespace detail

// Iterative weighted least squares over a chosen entry subset. Unknowns are
// the ECEF position plus one clock state per constellation present.
inline PositionSolution solve_entries(
    const std::vector<const EpochEntry*>& entries, const EcefPosition& initial,
    double earth_rate = constants::kEarthRotationRate) {
  PositionSolution sol;
  const int m = static_cast<int>(entries.size());
  const auto constellations = detail::constellations_of(entries);
  const int nc = static_cast<int>(constellations.size());
  const int n = 3 + nc;
  for (const auto* e : entries) sol.used_satellites.push_back(e->raw.sat);
  if (m < n || m > detail::kMaxMeasurements) {
    sol.degenerate = true;
    return sol;
  }
  const auto clock_index = [&](Constellation c) {
    return 3 + static_cast<int>(std::find(constellations.begin(),
                                          constellations.end(), c) -
                                constellations.begin());
  };

  Vec3 pos = initial.vec();
  Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 4, 1> clocks(nc);
  clocks.setZero();

  detail::DesignMatrix h(m, n);
  detail::ResidualVector dz(m), w(m);
  for (int j = 0; j < m; ++j) {
    w(j) = measurement_weight(entries[j]->pr.elevation, entries[j]->pr.snr);
  }

  const auto fill_system = [&]() {
    const EcefPosition at(pos);
    for (int j = 0; j < m; ++j) {
      const EpochEntry& e = *entries[j];
      const RangeLos rl = range_and_los(e.state.position, at, earth_rate);
      const int ci = clock_index(e.raw.sat.constellation);
      h.row(j).setZero();
      h(j, 0) = -rl.unit.x();
      h(j, 1) = -rl.unit.y();
      h(j, 2) = -rl.unit.z();
      h(j, ci) = 1.0;
      dz(j) = e.pr.value - rl.range - clocks(ci - 3);
    }
  };

  bool converged = false;
  int iter = 0;
  for (; iter < 20; ++iter) {
    fill_system();
    const Eigen::MatrixXd hw = h.transpose() * w.asDiagonal();
    const Eigen::MatrixXd normal = hw * h;
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(normal);
    if (!lu.isInvertible()) {
      sol.degenerate = true;
      return sol;
    }
    const Eigen::VectorXd delta = lu.solve(hw * dz);
    pos += delta.head<3>();
    clocks += delta.tail(nc);
    const double step = delta.head<3>().norm();
    if (!std::isfinite(step) || step > 1e7) {
      sol.iterations = iter + 1;
      return sol;  // diverged, converged stays false
    }
    if (step < 1e-4) {
      converged = true;
      ++iter;
      break;
    }
  }
  sol.iterations = iter;
  sol.position = EcefPosition(pos);
  for (int k = 0; k < nc; ++k) {
    sol.clock_bias.emplace_back(constellations[k], clocks(k));
  }
  if (!converged) return sol;
  sol.converged = true;

  // Post-fit residual variance and covariance of the weighted solution
  fill_system();
  const Eigen::MatrixXd hw = h.transpose() * w.asDiagonal();
  const Eigen::MatrixXd normal_inv =
      Eigen::FullPivLU<Eigen::MatrixXd>(hw * h).inverse();
  sol.sigma0_sq =
      (m > n) ? (dz.transpose() * w.asDiagonal() * dz).value() / (m - n) : 1.0;
  sol.covariance = sol.sigma0_sq * normal_inv.topLeftCorner<3, 3>();

  // DOP from the unweighted geometry
  const Eigen::MatrixXd q = (h.transpose() * h).inverse();
  sol.dop.gdop = std::sqrt(q.trace());
  sol.dop.pdop = std::sqrt(q.topLeftCorner<3, 3>().trace());
  const Mat3 r_enu = ecef_to_enu_rotation(ecef_to_geodetic(sol.position));
  const Mat3 q_enu = r_enu * q.topLeftCorner<3, 3>() * r_enu.transpose();
  sol.dop.hdop = std::sqrt(q_enu(0, 0) + q_enu(1, 1));
  sol.dop.vdop = std::sqrt(q_enu(2, 2));
  return sol;
}

inline PositionSolution solve(const EpochContext& ctx,
                              std::optional<EcefPosition> initial = std::nullopt) {
  std::vector<const EpochEntry*> entries;
  entries.reserve(ctx.entries.size());
  for (const auto& e : ctx.entries) entries.push_back(&e);
  const auto constellations = detail::constellations_of(entries);
  if (static_cast<int>(entries.size()) <
      3 + static_cast<int>(constellations.size())) {
    throw std::runtime_error("solve: insufficient satellites");
  }
  return solve_entries(entries, initial.value_or(EcefPosition()));
}

// Same algorithm restricted to a subset; degenerate subsets are flagged, not
// thrown, so per-particle callers can map them to a floor likelihood.
inline PositionSolution solve_subset(const EpochContext& ctx,
                                     const std::vector<SatelliteId>& subset,
                                     const EcefPosition& initial) {
  std::vector<const EpochEntry*> entries;
  entries.reserve(subset.size());
  for (const auto& e : ctx.entries) {
    if (std::find(subset.begin(), subset.end(), e.raw.sat) != subset.end()) {
      entries.push_back(&e);
    }
  }
  return solve_entries(entries, initial);
}

// Doppler velocity: linear least squares on range-rate residuals with one
// receiver clock-drift unknown. Returns nullopt when underdetermined.
inline std::optional<VelocitySolution> solve_velocity(
    const EpochContext& ctx, const std::vector<SatelliteId>& subset,
    const EcefPosition& receiver) {
  using namespace constants;
  std::vector<const EpochEntry*> entries;
  for (const auto& e : ctx.entries) {
    if (!subset.empty() &&
        std::find(subset.begin(), subset.end(), e.raw.sat) == subset.end()) {
      continue;
    }
    if (!std::isfinite(e.raw.doppler)) continue;
    entries.push_back(&e);
  }
  const int m = static_cast<int>(entries.size());
  if (m < 4 || m > detail::kMaxMeasurements) return std::nullopt;

  detail::DesignMatrix h(m, 4);
  detail::ResidualVector dz(m);
  for (int j = 0; j < m; ++j) {
    const EpochEntry& e = *entries[j];
    const RangeLos rl = range_and_los(e.state.position, receiver);
    const double lambda = kSpeedOfLight / l1_frequency(e.raw.sat.constellation);
    const double rr_obs = -lambda * e.raw.doppler;
    const Vec3 vs = e.state.velocity;
    const Vec3 rs = e.state.position.vec();
    // Earth-rotation rate coupling, linear in both satellite and receiver
    // velocity (same form as the range-domain Sagnac term).
    const double sagnac_const =
        kEarthRotationRate / kSpeedOfLight * (vs.y() * receiver.x - vs.x() * receiver.y);
    dz(j) = rr_obs - (rl.unit.dot(vs) + sagnac_const -
                      kSpeedOfLight * e.state.clock_drift);
    h(j, 0) = -rl.unit.x() + kEarthRotationRate / kSpeedOfLight * rs.y();
    h(j, 1) = -rl.unit.y() - kEarthRotationRate / kSpeedOfLight * rs.x();
    h(j, 2) = -rl.unit.z();
    h(j, 3) = 1.0;
  }
  const Eigen::Matrix4d normal = h.transpose() * h;
  const Eigen::FullPivLU<Eigen::Matrix4d> lu(normal);
  if (!lu.isInvertible()) return std::nullopt;
  const Eigen::Vector4d x = lu.solve(h.transpose() * dz);
  VelocitySolution vs;
  vs.velocity = x.head<3>();
  vs.clock_drift = x(3);
  for (const auto* e : entries) vs.used_satellites.push_back(e->raw.sat);
  return vs;
}

// Rough position from pseudoranges alone (no atmosphere, uniform weights),
// used to seed context building when no prior fix exists.
inline PositionSolution bootstrap_position(const EpochObservations& obs,
                                           const EphemerisStore& ephemerides) {
  EpochContext ctx;
  ctx.time = obs.time;
  for (const auto& raw : obs.measurements) {
    if (raw.loss_of_lock) continue;
    const auto eph =
        ephemerides.find(raw.sat, emission_time(obs.time, raw.pseudorange));
    if (!eph) continue;
    const GnssTime t_tx = emission_time(*eph, obs.time, raw.pseudorange);
    EpochEntry entry;
    entry.raw = raw;
    entry.state = satellite_state(*eph, t_tx);
    entry.pr.sat = raw.sat;
    entry.pr.value = raw.pseudorange +
                     constants::kSpeedOfLight * entry.state.clock_bias;
    entry.pr.snr = 45.0;
    entry.pr.elevation = constants::kPi / 2.0;
    ctx.entries.push_back(entry);
  }
  std::sort(ctx.entries.begin(), ctx.entries.end(),
            [](const EpochEntry& a, const EpochEntry& b) {
              return a.raw.sat < b.raw.sat;
            });
  return solve(ctx);
}

}  // namespace gnsspf
