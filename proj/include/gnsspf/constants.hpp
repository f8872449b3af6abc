#pragma once

namespace gnsspf {
namespace constants {

constexpr double kSpeedOfLight = 299792458.0;  // m/s

// WGS-84 ellipsoid
constexpr double kWgs84SemiMajor = 6378137.0;          // m
constexpr double kWgs84Flattening = 1.0 / 298.257223563;
constexpr double kWgs84SemiMinor = kWgs84SemiMajor * (1.0 - kWgs84Flattening);
constexpr double kWgs84Ecc2 =
    2.0 * kWgs84Flattening - kWgs84Flattening * kWgs84Flattening;

// Earth rotation rate, shared by Sagnac correction and ephemeris propagation
constexpr double kEarthRotationRate = 7.2921151467e-5;  // rad/s

// Gravitational parameters per constellation ICD
constexpr double kMuGps = 3.986005e14;      // m^3/s^2, also QZSS
constexpr double kMuBeiDou = 3.986004418e14;

// L1-band carrier frequencies
constexpr double kFreqGpsL1 = 1575.42e6;    // Hz, also QZSS L1
constexpr double kFreqBeiDouB1 = 1561.098e6;

constexpr double kPi = 3.14159265358979323846;
constexpr double kDeg2Rad = kPi / 180.0;
constexpr double kRad2Deg = 180.0 / kPi;

constexpr double kSecondsPerWeek = 604800.0;

}  // namespace constants
}  // namespace gnsspf
