#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "gnsspf/geodesy.hpp"
#include "gnsspf/observation.hpp"
#include "gnsspf/time.hpp"

namespace gnsspf {

// Klobuchar broadcast model, L1 delay in meters. Follows the 8-coefficient
// algorithm with angles in semicircles and a 5 ns nighttime floor.
inline double klobuchar_delay(const IonoParameters& iono,
                              const GeodeticPosition& receiver,
                              double elevation, double azimuth,
                              const GnssTime& time) {
  using namespace constants;
  if (!(elevation > 0.0 && elevation <= kPi / 2.0 + 1e-9)) {
    throw std::invalid_argument("klobuchar_delay: elevation out of (0, pi/2]");
  }

  const double el_sc = elevation / kPi;  // semicircles
  const double lat_sc = receiver.latitude / kPi;
  const double lon_sc = receiver.longitude / kPi;

  const double psi = 0.0137 / (el_sc + 0.11) - 0.022;
  double phi_i = lat_sc + psi * std::cos(azimuth);
  phi_i = std::clamp(phi_i, -0.416, 0.416);
  const double lambda_i = lon_sc + psi * std::sin(azimuth) / std::cos(phi_i * kPi);
  const double phi_m = phi_i + 0.064 * std::cos((lambda_i - 1.617) * kPi);

  double t = 4.32e4 * lambda_i + std::fmod(time.seconds_of_week, 86400.0);
  t = std::fmod(t, 86400.0);
  if (t < 0.0) t += 86400.0;

  const double f = 1.0 + 16.0 * std::pow(0.53 - el_sc, 3.0);

  double amp = 0.0, per = 0.0;
  double phi_pow = 1.0;
  for (int i = 0; i < 4; ++i) {
    amp += iono.alpha[i] * phi_pow;
    per += iono.beta[i] * phi_pow;
    phi_pow *= phi_m;
  }
  amp = std::max(amp, 0.0);
  per = std::max(per, 72000.0);

  const double x = 2.0 * kPi * (t - 50400.0) / per;
  double t_iono = 5e-9;
  if (std::abs(x) < 1.57) {
    const double x2 = x * x;
    t_iono += amp * (1.0 - x2 / 2.0 + x2 * x2 / 24.0);
  }
  return f * t_iono * kSpeedOfLight;
}

// Saastamoinen model with a standard-atmosphere profile
// (1013.25 hPa, 15 degC, 70% relative humidity at h = 0).
inline double saastamoinen_delay(const GeodeticPosition& receiver,
                                 double elevation) {
  using namespace constants;
  if (!(elevation > 0.05 && elevation <= kPi / 2.0 + 1e-9)) {
    throw std::invalid_argument("saastamoinen_delay: elevation out of (0.05, pi/2]");
  }
  const double h = std::clamp(receiver.height, -100.0, 10000.0);
  const double hgt = std::max(h, 0.0);

  const double pres = 1013.25 * std::pow(1.0 - 2.2557e-5 * hgt, 5.2568);
  const double temp = 15.0 - 6.5e-3 * hgt + 273.16;
  const double rel_humidity = 0.7 * std::exp(-hgt / 8000.0);
  const double e_vapor =
      6.108 * rel_humidity * std::exp((17.15 * temp - 4684.0) / (temp - 38.45));

  const double zenith = kPi / 2.0 - elevation;
  const double map = 1.0 / std::cos(zenith);
  const double dry = 0.0022768 * pres /
                     (1.0 - 0.00266 * std::cos(2.0 * receiver.latitude) -
                      0.00028 * hgt / 1e3);
  const double wet = 0.002277 * (1255.0 / temp + 0.05) * e_vapor;
  return (dry + wet) * map;
}

}  // namespace gnsspf
