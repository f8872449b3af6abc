#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "gnsspf/constants.hpp"

namespace gnsspf {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Earth-centered Earth-fixed position, meters.
struct EcefPosition {
  double x{0.0};
  double y{0.0};
  double z{0.0};

  EcefPosition() = default;
  EcefPosition(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}
  explicit EcefPosition(const Vec3& v) : x(v.x()), y(v.y()), z(v.z()) {}

  Vec3 vec() const { return Vec3(x, y, z); }
  double norm() const { return std::sqrt(x * x + y * y + z * z); }

  EcefPosition operator+(const Vec3& d) const {
    return EcefPosition(x + d.x(), y + d.y(), z + d.z());
  }
  Vec3 operator-(const EcefPosition& o) const {
    return Vec3(x - o.x, y - o.y, z - o.z);
  }
};

// Geodetic position on the WGS-84 ellipsoid.
struct GeodeticPosition {
  double latitude{0.0};   // rad, [-pi/2, pi/2]
  double longitude{0.0};  // rad, (-pi, pi]
  double height{0.0};     // m above ellipsoid
};

inline EcefPosition geodetic_to_ecef(const GeodeticPosition& g) {
  using namespace constants;
  const double sin_lat = std::sin(g.latitude);
  const double cos_lat = std::cos(g.latitude);
  const double n = kWgs84SemiMajor / std::sqrt(1.0 - kWgs84Ecc2 * sin_lat * sin_lat);
  return EcefPosition((n + g.height) * cos_lat * std::cos(g.longitude),
                      (n + g.height) * cos_lat * std::sin(g.longitude),
                      (n * (1.0 - kWgs84Ecc2) + g.height) * sin_lat);
}

// Iterative (Bowring-style) conversion, 1e-12 rad convergence.
inline GeodeticPosition ecef_to_geodetic(const EcefPosition& p) {
  using namespace constants;
  if (p.norm() <= 0.0) {
    throw std::invalid_argument("ecef_to_geodetic: zero-length position");
  }
  const double rho = std::hypot(p.x, p.y);
  GeodeticPosition g;
  g.longitude = (rho > 0.0) ? std::atan2(p.y, p.x) : 0.0;

  double lat = std::atan2(p.z, rho * (1.0 - kWgs84Ecc2));
  double n = kWgs84SemiMajor;
  for (int i = 0; i < 50; ++i) {
    const double sin_lat = std::sin(lat);
    n = kWgs84SemiMajor / std::sqrt(1.0 - kWgs84Ecc2 * sin_lat * sin_lat);
    const double next = std::atan2(p.z + kWgs84Ecc2 * n * sin_lat, rho);
    const double delta = std::abs(next - lat);
    lat = next;
    if (delta < 1e-12) break;
  }
  g.latitude = lat;
  const double sin_lat = std::sin(lat);
  const double cos_lat = std::cos(lat);
  n = kWgs84SemiMajor / std::sqrt(1.0 - kWgs84Ecc2 * sin_lat * sin_lat);
  if (std::abs(cos_lat) > 1e-9) {
    g.height = rho / cos_lat - n;
  } else {
    g.height = std::abs(p.z) / std::abs(sin_lat) - n * (1.0 - kWgs84Ecc2);
  }
  return g;
}

// Rows are the east, north and up unit vectors expressed in ECEF.
inline Mat3 ecef_to_enu_rotation(const GeodeticPosition& g) {
  const double sl = std::sin(g.latitude), cl = std::cos(g.latitude);
  const double so = std::sin(g.longitude), co = std::cos(g.longitude);
  Mat3 r;
  r << -so, co, 0.0,
       -sl * co, -sl * so, cl,
       cl * co, cl * so, sl;
  return r;
}

struct ElevationAzimuth {
  double elevation{0.0};  // rad, [-pi/2, pi/2]
  double azimuth{0.0};    // rad, [0, 2*pi), clockwise from north
};

inline ElevationAzimuth elevation_azimuth(const EcefPosition& receiver,
                                          const EcefPosition& satellite) {
  if (receiver.norm() < 1.0) {
    throw std::invalid_argument("elevation_azimuth: receiver at geocenter");
  }
  const Vec3 los = satellite - receiver;
  const double range = los.norm();
  if (range <= 0.0) {
    throw std::invalid_argument("elevation_azimuth: coincident points");
  }
  const Mat3 r = ecef_to_enu_rotation(ecef_to_geodetic(receiver));
  const Vec3 enu = r * (los / range);
  ElevationAzimuth ea;
  ea.elevation = std::asin(std::clamp(enu.z(), -1.0, 1.0));
  ea.azimuth = std::atan2(enu.x(), enu.y());
  if (ea.azimuth < 0.0) ea.azimuth += 2.0 * constants::kPi;
  return ea;
}

}  // namespace gnsspf
