#include "ema/time.hpp"

#include <unicode/timezone.h>
#include <unicode/unistr.h>

#include <charconv>
#include <cstdio>
#include <stdexcept>

#include "ema/error.hpp"

namespace ema {

ParseError::ParseError(const std::string& message, std::string field, std::size_t line)
    : std::runtime_error(message), field_(std::move(field)), line_(line) {}

namespace {

using namespace std::chrono;

bool read_int(std::string_view text, std::size_t pos, std::size_t width, int& out) {
  if (pos + width > text.size()) return false;
  for (std::size_t i = pos; i < pos + width; ++i) {
    if (text[i] < '0' || text[i] > '9') return false;
  }
  auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + pos + width, out);
  return ec == std::errc{} && ptr == text.data() + pos + width;
}

[[noreturn]] void bad_timestamp(std::string_view text) {
  throw ParseError("invalid RFC 3339 timestamp '" + std::string(text) + "'");
}

}  // namespace

std::string format_timestamp(Timestamp t) {
  const auto day = floor<days>(t);
  const year_month_day ymd{day};
  const hh_mm_ss<Millis> hms{t - day};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d.%03dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                static_cast<int>(hms.seconds().count()), static_cast<int>(hms.subseconds().count()));
  return buf;
}

Timestamp parse_timestamp(std::string_view text) {
  // YYYY-MM-DDTHH:MM:SS[.fff...](Z|+HH:MM|-HH:MM)
  int y, mo, d, h, mi, s;
  if (text.size() < 20 || !read_int(text, 0, 4, y) || text[4] != '-' || !read_int(text, 5, 2, mo) ||
      text[7] != '-' || !read_int(text, 8, 2, d) || (text[10] != 'T' && text[10] != 't') ||
      !read_int(text, 11, 2, h) || text[13] != ':' || !read_int(text, 14, 2, mi) || text[16] != ':' ||
      !read_int(text, 17, 2, s)) {
    bad_timestamp(text);
  }
  std::size_t pos = 19;
  int millis = 0;
  if (pos < text.size() && text[pos] == '.') {
    ++pos;
    int digits = 0;
    while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') {
      if (digits < 3) millis = millis * 10 + (text[pos] - '0');
      ++digits;
      ++pos;
    }
    if (digits == 0) bad_timestamp(text);
    for (int i = digits; i < 3; ++i) millis *= 10;
  }
  minutes offset{0};
  if (pos < text.size() && (text[pos] == 'Z' || text[pos] == 'z')) {
    ++pos;
  } else if (pos < text.size() && (text[pos] == '+' || text[pos] == '-')) {
    int oh, om;
    if (!read_int(text, pos + 1, 2, oh) || pos + 3 >= text.size() || text[pos + 3] != ':' ||
        !read_int(text, pos + 4, 2, om) || oh > 23 || om > 59) {
      bad_timestamp(text);
    }
    offset = hours(oh) + minutes(om);
    if (text[pos] == '-') offset = -offset;
    pos += 6;
  } else {
    bad_timestamp(text);
  }
  if (pos != text.size()) bad_timestamp(text);

  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || s > 59) bad_timestamp(text);
  const Timestamp local_as_utc =
      sys_days{ymd} + hours(h) + minutes(mi) + seconds(s) + Millis(millis);
  return local_as_utc - offset;
}

double to_seconds(Millis d) { return static_cast<double>(d.count()) / 1000.0; }

TimeOfDay TimeOfDay::parse(std::string_view hh_mm) {
  int h, m;
  if (hh_mm.size() != 5 || !read_int(hh_mm, 0, 2, h) || hh_mm[2] != ':' || !read_int(hh_mm, 3, 2, m) ||
      h > 24 || m > 59 || (h == 24 && m != 0)) {
    throw ParseError("invalid time of day '" + std::string(hh_mm) + "', expected HH:MM");
  }
  return TimeOfDay(h, m);
}

std::string TimeOfDay::to_string() const {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%02d:%02d", minutes_ / 60, minutes_ % 60);
  return buf;
}

struct TimeZone::Impl {
  std::unique_ptr<icu::TimeZone> zone;

  Millis offset_at(Timestamp t) const {
    int32_t raw = 0;
    int32_t dst = 0;
    UErrorCode status = U_ZERO_ERROR;
    zone->getOffset(static_cast<UDate>(t.time_since_epoch().count()), false, raw, dst, status);
    if (U_FAILURE(status)) throw std::runtime_error("time zone offset lookup failed");
    return Millis(static_cast<int64_t>(raw) + dst);
  }
};

TimeZone::TimeZone(std::string id, std::shared_ptr<const Impl> impl)
    : id_(std::move(id)), impl_(std::move(impl)) {}

TimeZone TimeZone::locate(const std::string& id) {
  std::unique_ptr<icu::TimeZone> zone(icu::TimeZone::createTimeZone(icu::UnicodeString::fromUTF8(id)));
  icu::UnicodeString resolved;
  if (zone) zone->getID(resolved);
  if (!zone || resolved == icu::UnicodeString(UCAL_UNKNOWN_ZONE_ID)) {
    throw std::invalid_argument("unknown time zone '" + id + "'");
  }
  auto impl = std::make_shared<Impl>();
  impl->zone = std::move(zone);
  return TimeZone(id, std::move(impl));
}

TimeZone TimeZone::utc() {
  static const TimeZone zone = locate("UTC");
  return zone;
}

LocalTime TimeZone::to_local(Timestamp t) const {
  return LocalTime{(t + impl_->offset_at(t)).time_since_epoch()};
}

Timestamp TimeZone::to_utc(LocalTime local) const {
  const Timestamp as_utc{local.time_since_epoch()};
  const Millis before = impl_->offset_at(as_utc - days(1));
  const Millis after = impl_->offset_at(as_utc + days(1));
  Timestamp lo = as_utc - std::max(before, after);
  Timestamp hi = as_utc - std::min(before, after);
  if (to_local(lo) == local) return lo;
  if (to_local(hi) == local) return hi;
  // Inside a gap: find the first instant whose wall time is at or past `local`.
  if (lo > hi) std::swap(lo, hi);
  while (hi - lo > Millis(1)) {
    const Timestamp mid = lo + (hi - lo) / 2;
    if (to_local(mid) >= local) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return to_local(lo) >= local ? lo : hi;
}

LocalTime local_midnight(LocalTime local) { return std::chrono::floor<std::chrono::days>(local); }

Millis time_of_day(LocalTime local) { return local - local_midnight(local); }

}  // namespace ema
