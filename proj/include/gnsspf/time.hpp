#pragma once

#include <cmath>
#include <compare>
#include <cstdint>

#include "gnsspf/constants.hpp"

namespace gnsspf {

// GNSS time as (week, seconds-of-week). All constellations handled by this
// library are kept on the GPS time scale.
struct GnssTime {
  int week{0};
  double seconds_of_week{0.0};

  // Normalizes seconds_of_week into [0, 604800).
  static GnssTime make(int week, double sow) {
    while (sow < 0.0) {
      sow += constants::kSecondsPerWeek;
      --week;
    }
    while (sow >= constants::kSecondsPerWeek) {
      sow -= constants::kSecondsPerWeek;
      ++week;
    }
    return GnssTime{week, sow};
  }

  GnssTime operator+(double seconds) const {
    return make(week, seconds_of_week + seconds);
  }
  GnssTime operator-(double seconds) const { return *this + (-seconds); }

  // Difference in seconds (lhs - rhs).
  double operator-(const GnssTime& rhs) const {
    return (week - rhs.week) * constants::kSecondsPerWeek +
           (seconds_of_week - rhs.seconds_of_week);
  }

  friend bool operator==(const GnssTime& a, const GnssTime& b) {
    return a.week == b.week && a.seconds_of_week == b.seconds_of_week;
  }
  friend bool operator<(const GnssTime& a, const GnssTime& b) {
    return a.week != b.week ? a.week < b.week
                            : a.seconds_of_week < b.seconds_of_week;
  }
  friend bool operator>(const GnssTime& a, const GnssTime& b) { return b < a; }
  friend bool operator<=(const GnssTime& a, const GnssTime& b) {
    return !(b < a);
  }
  friend bool operator>=(const GnssTime& a, const GnssTime& b) {
    return !(a < b);
  }
};

struct CivilDate {
  int year{1980};
  int month{1};
  int day{6};
  int hour{0};
  int minute{0};
  double second{0.0};
};

namespace detail {

// Days from civil date to 1970-01-01 (Howard Hinnant's algorithm).
inline std::int64_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2u) / 5u + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

inline void civil_from_days(std::int64_t z, int& y, int& m, int& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  y = static_cast<int>(yoe) + static_cast<int>(era) * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
  m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
  y += m <= 2;
}

// GPS epoch 1980-01-06 as days since 1970-01-01.
constexpr std::int64_t kGpsEpochDays = 3657;

}  // namespace detail

inline GnssTime gnss_time_from_civil(const CivilDate& c) {
  const std::int64_t days =
      detail::days_from_civil(c.year, c.month, c.day) - detail::kGpsEpochDays;
  const int week = static_cast<int>(days / 7 - (days % 7 < 0 ? 1 : 0));
  const std::int64_t dow = days - static_cast<std::int64_t>(week) * 7;
  return GnssTime::make(
      week, dow * 86400.0 + c.hour * 3600.0 + c.minute * 60.0 + c.second);
}

inline CivilDate civil_from_gnss_time(const GnssTime& t) {
  const std::int64_t total_days =
      detail::kGpsEpochDays + static_cast<std::int64_t>(t.week) * 7 +
      static_cast<std::int64_t>(std::floor(t.seconds_of_week / 86400.0));
  double sod = std::fmod(t.seconds_of_week, 86400.0);
  CivilDate c;
  detail::civil_from_days(total_days, c.year, c.month, c.day);
  c.hour = static_cast<int>(sod / 3600.0);
  sod -= c.hour * 3600.0;
  c.minute = static_cast<int>(sod / 60.0);
  c.second = sod - c.minute * 60.0;
  return c;
}

}  // namespace gnsspf
