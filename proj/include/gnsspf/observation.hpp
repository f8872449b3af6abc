#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <tuple>
#include <vector>

#include "gnsspf/constants.hpp"
#include "gnsspf/time.hpp"

namespace gnsspf {

enum class Constellation : std::uint8_t { Gps = 0, Glonass = 1, BeiDou = 2, Qzss = 3 };

inline char constellation_letter(Constellation c) {
  switch (c) {
    case Constellation::Gps: return 'G';
    case Constellation::Glonass: return 'R';
    case Constellation::BeiDou: return 'C';
    case Constellation::Qzss: return 'J';
  }
  return '?';
}

inline bool constellation_from_letter(char ch, Constellation& out) {
  switch (ch) {
    case 'G': out = Constellation::Gps; return true;
    case 'R': out = Constellation::Glonass; return true;
    case 'C': out = Constellation::BeiDou; return true;
    case 'J': out = Constellation::Qzss; return true;
    default: return false;
  }
}

// L1-band carrier frequency used to scale Doppler to range rate.
inline double l1_frequency(Constellation c) {
  switch (c) {
    case Constellation::BeiDou: return constants::kFreqBeiDouB1;
    default: return constants::kFreqGpsL1;  // GPS, QZSS; GLONASS not processed
  }
}

struct SatelliteId {
  Constellation constellation{Constellation::Gps};
  int prn{1};

  friend bool operator==(const SatelliteId& a, const SatelliteId& b) {
    return a.constellation == b.constellation && a.prn == b.prn;
  }
  friend bool operator!=(const SatelliteId& a, const SatelliteId& b) {
    return !(a == b);
  }
  friend bool operator<(const SatelliteId& a, const SatelliteId& b) {
    return std::tie(a.constellation, a.prn) < std::tie(b.constellation, b.prn);
  }

  std::string to_string() const {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "%c%02d", constellation_letter(constellation), prn);
    return buf;
  }
};

// One L1 code/Doppler/SNR measurement to one satellite.
struct RawMeasurement {
  SatelliteId sat;
  double pseudorange{0.0};  // m
  double doppler{0.0};      // Hz, positive = approaching
  double snr{0.0};          // dB-Hz
  bool loss_of_lock{false};
};

// All measurements decoded at one receive epoch (receiver clock time).
struct EpochObservations {
  GnssTime time;
  std::vector<RawMeasurement> measurements;
};

// Keplerian broadcast ephemeris (GPS/BeiDou/QZSS layout).
struct BroadcastEphemeris {
  SatelliteId sat;
  GnssTime toe;       // ephemeris reference time
  GnssTime toc;       // clock reference time
  double sqrt_a{0.0};  // sqrt(semi-major axis), sqrt(m)
  double e{0.0};
  double i0{0.0};      // rad
  double omega0{0.0};  // RAAN at weekly epoch, rad
  double omega{0.0};   // argument of perigee, rad
  double m0{0.0};      // mean anomaly at toe, rad
  double delta_n{0.0};  // rad/s
  double idot{0.0};     // rad/s
  double omega_dot{0.0};  // rad/s
  double cuc{0.0}, cus{0.0};  // rad
  double crc{0.0}, crs{0.0};  // m
  double cic{0.0}, cis{0.0};  // rad
  double af0{0.0};  // s
  double af1{0.0};  // s/s
  double af2{0.0};  // s/s^2
  double validity_window{7200.0};  // s

  double mu() const {
    return sat.constellation == Constellation::BeiDou ? constants::kMuBeiDou
                                                      : constants::kMuGps;
  }
};

// Klobuchar broadcast coefficients.
struct IonoParameters {
  double alpha[4]{0.0, 0.0, 0.0, 0.0};
  double beta[4]{0.0, 0.0, 0.0, 0.0};
};

}  // namespace gnsspf
