#pragma once

#include <chrono>
#include <memory>
#include <string>
#include <string_view>

namespace ema {

using Millis = std::chrono::milliseconds;
// UTC instant at millisecond precision.
using Timestamp = std::chrono::sys_time<Millis>;
// Wall-clock time in some zone, without an offset attached.
using LocalTime = std::chrono::local_time<Millis>;

// RFC 3339. Output is always `YYYY-MM-DDTHH:MM:SS.mmmZ`; input accepts an
// optional fraction (truncated to ms) and `Z` or a `+HH:MM` offset.
std::string format_timestamp(Timestamp t);
Timestamp parse_timestamp(std::string_view text);

// Milliseconds as fractional seconds.
double to_seconds(Millis d);

class TimeOfDay {
 public:
  constexpr TimeOfDay() = default;
  constexpr TimeOfDay(int hour, int minute) : minutes_(hour * 60 + minute) {}

  static TimeOfDay parse(std::string_view hh_mm);

  constexpr int minutes() const { return minutes_; }
  constexpr Millis since_midnight() const { return std::chrono::minutes(minutes_); }
  std::string to_string() const;

  friend constexpr auto operator<=>(TimeOfDay, TimeOfDay) = default;

 private:
  int minutes_ = 0;
};

// IANA time zone backed by ICU. Copies share one immutable zone object, so a
// TimeZone is safe to use from several threads at once.
class TimeZone {
 public:
  // Throws std::invalid_argument for ids the zone database does not know.
  static TimeZone locate(const std::string& id);
  static TimeZone utc();

  const std::string& id() const { return id_; }

  LocalTime to_local(Timestamp t) const;
  // Wall time to instant. Ambiguous times take the earlier instant; times
  // inside a DST gap clip forward to the first valid instant after the gap.
  Timestamp to_utc(LocalTime local) const;

 private:
  struct Impl;
  TimeZone(std::string id, std::shared_ptr<const Impl> impl);

  std::string id_;
  std::shared_ptr<const Impl> impl_;
};

// Local midnight of the day containing `local`.
LocalTime local_midnight(LocalTime local);
// Time elapsed since local midnight.
Millis time_of_day(LocalTime local);

}  // namespace ema
