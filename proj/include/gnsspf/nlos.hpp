#pragma once

#include <map>
#include <stdexcept>
#include <vector>

#include "gnsspf/spp.hpp"

namespace gnsspf {

// Across-satellite pseudorange residuals at one evaluation point. The common
// receiver clock term cancels in the difference against the reference.
struct ResidualSet {
  SatelliteId reference;
  std::map<SatelliteId, double> residuals;  // m, reference excluded
  EcefPosition evaluation_point;
};

struct LosSubset {
  std::vector<SatelliteId> included;            // reference always a member
  std::map<SatelliteId, double> excluded;       // residual per excluded sat

  bool contains(const SatelliteId& sat) const {
    return std::find(included.begin(), included.end(), sat) != included.end();
  }
};

// Asymmetric residual acceptance window. NLOS delays are strictly positive,
// so the upper bound is the tighter one.
struct Thresholds {
  double t_lower{-15.0};  // m, < 0
  double t_upper{10.0};   // m, > 0

  bool valid() const {
    return t_lower < 0.0 && t_upper > 0.0 && std::abs(t_lower) > std::abs(t_upper);
  }
};

// Highest score = elevation_deg + snr_weight * snr picks the reference
// satellite; ties break toward the lowest (constellation, prn).
inline SatelliteId select_reference(const EpochContext& ctx,
                                    const EcefPosition& evaluation_point,
                                    double min_elevation = 10.0 * constants::kDeg2Rad,
                                    double snr_weight = 0.5) {
  if (ctx.entries.size() < 2) {
    throw std::runtime_error("select_reference: need at least 2 measurements");
  }
  const EpochEntry* best = nullptr;
  double best_score = 0.0;
  for (const auto& e : ctx.entries) {
    const double elevation =
        elevation_azimuth(evaluation_point, e.state.position).elevation;
    if (elevation < min_elevation) continue;
    const double score =
        elevation * constants::kRad2Deg + snr_weight * e.raw.snr;
    if (!best || score > best_score ||
        (score == best_score && e.raw.sat < best->raw.sat)) {
      best = &e;
      best_score = score;
    }
  }
  if (!best) {
    throw std::runtime_error("select_reference: no satellite above the elevation mask");
  }
  return best->raw.sat;
}

inline ResidualSet residuals(const EpochContext& ctx,
                             const EcefPosition& evaluation_point,
                             const SatelliteId& reference) {
  const EpochEntry* ref = ctx.find(reference);
  if (!ref) {
    throw std::runtime_error("residuals: reference not measured in epoch");
  }
  ResidualSet out;
  out.reference = reference;
  out.evaluation_point = evaluation_point;
  const double ref_term =
      ref->pr.value - geometric_range(ref->state.position, evaluation_point);
  for (const auto& e : ctx.entries) {
    if (e.raw.sat == reference) continue;
    const double term =
        e.pr.value - geometric_range(e.state.position, evaluation_point);
    out.residuals[e.raw.sat] = term - ref_term;
  }
  return out;
}

// Threshold test over the residual set; interval bounds are inclusive.
inline LosSubset los_subset(const ResidualSet& res, const Thresholds& th) {
  if (!th.valid()) {
    throw std::invalid_argument("los_subset: thresholds violate |T_L|>|T_U|, T_L<0<T_U");
  }
  LosSubset out;
  out.included.push_back(res.reference);
  for (const auto& [sat, dz] : res.residuals) {
    if (th.t_lower <= dz && dz <= th.t_upper) {
      out.included.push_back(sat);
    } else {
      out.excluded[sat] = dz;
    }
  }
  std::sort(out.included.begin(), out.included.end());
  return out;
}

}  // namespace gnsspf
