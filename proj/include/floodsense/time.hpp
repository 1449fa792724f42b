#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>

#include "floodsense/error.hpp"

namespace floodsense {

/// Seconds since the Unix epoch, always UTC.
struct UtcSeconds {
  std::int64_t value = 0;

  friend constexpr auto operator<=>(UtcSeconds, UtcSeconds) = default;
};

inline constexpr std::int64_t kSecondsPerHour = 3600;
inline constexpr std::int64_t kSecondsPerDay = 86400;

namespace detail {

inline bool parse_digits(std::string_view s, std::size_t pos, std::size_t n, int& out) {
  if (pos + n > s.size()) return false;
  int v = 0;
  for (std::size_t i = pos; i < pos + n; ++i) {
    if (s[i] < '0' || s[i] > '9') return false;
    v = v * 10 + (s[i] - '0');
  }
  out = v;
  return true;
}

inline std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

}  // namespace detail

/// Parses an RFC 3339 timestamp ("2021-09-26T00:00:00Z", "...+07:00",
/// fractional seconds truncated) into UTC seconds. Returns nullopt on any
/// syntactic or calendar error.
inline std::optional<UtcSeconds> parse_rfc3339(std::string_view s) {
  using namespace std::chrono;
  int y, mo, d, h, mi, se;
  if (!detail::parse_digits(s, 0, 4, y) || s.size() < 19 || s[4] != '-' ||
      !detail::parse_digits(s, 5, 2, mo) || s[7] != '-' || !detail::parse_digits(s, 8, 2, d) ||
      (s[10] != 'T' && s[10] != 't' && s[10] != ' ') || !detail::parse_digits(s, 11, 2, h) ||
      s[13] != ':' || !detail::parse_digits(s, 14, 2, mi) || s[16] != ':' ||
      !detail::parse_digits(s, 17, 2, se))
    return std::nullopt;
  year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || se > 60) return std::nullopt;

  std::size_t pos = 19;
  if (pos < s.size() && s[pos] == '.') {
    ++pos;
    std::size_t digits = 0;
    while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos, ++digits;
    if (digits == 0) return std::nullopt;
  }
  if (pos >= s.size()) return std::nullopt;
  std::int64_t offset = 0;
  if (s[pos] == 'Z' || s[pos] == 'z') {
    ++pos;
  } else if (s[pos] == '+' || s[pos] == '-') {
    int oh, om;
    if (!detail::parse_digits(s, pos + 1, 2, oh) || pos + 3 >= s.size() || s[pos + 3] != ':' ||
        !detail::parse_digits(s, pos + 4, 2, om) || oh > 23 || om > 59)
      return std::nullopt;
    offset = (oh * 60 + om) * 60;
    if (s[pos] == '-') offset = -offset;
    pos += 6;
  } else {
    return std::nullopt;
  }
  if (pos != s.size()) return std::nullopt;

  const std::int64_t days = sys_days{ymd}.time_since_epoch().count();
  return UtcSeconds{days * kSecondsPerDay + h * 3600 + mi * 60 + std::min(se, 59) - offset};
}

inline std::chrono::year_month_day civil_date(UtcSeconds t) {
  using namespace std::chrono;
  return year_month_day{sys_days{days{detail::floor_div(t.value, kSecondsPerDay)}}};
}

/// "YYYY-MM-DDTHH:MM:SSZ"
inline std::string format_rfc3339(UtcSeconds t) {
  const auto ymd = civil_date(t);
  const std::int64_t sod = t.value - detail::floor_div(t.value, kSecondsPerDay) * kSecondsPerDay;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(sod / 3600), static_cast<int>(sod / 60 % 60),
                static_cast<int>(sod % 60));
  return buf;
}

/// Half-open interval [start, end).
class TimeWindow {
 public:
  TimeWindow(UtcSeconds start, UtcSeconds end) : start_(start), end_(end) {
    if (!(start < end)) throw Error("corpus", "time window must satisfy start < end");
  }

  UtcSeconds start() const noexcept { return start_; }
  UtcSeconds end() const noexcept { return end_; }
  bool contains(UtcSeconds t) const noexcept { return start_ <= t && t < end_; }

  /// Empty intersections are reported as nullopt since a window cannot be empty.
  std::optional<TimeWindow> intersect(const TimeWindow& other) const {
    const UtcSeconds s = std::max(start_, other.start_);
    const UtcSeconds e = std::min(end_, other.end_);
    if (!(s < e)) return std::nullopt;
    return TimeWindow(s, e);
  }

  friend bool operator==(const TimeWindow&, const TimeWindow&) = default;

 private:
  UtcSeconds start_;
  UtcSeconds end_;
};

inline TimeWindow parse_window(std::string_view start, std::string_view end) {
  const auto s = parse_rfc3339(start);
  const auto e = parse_rfc3339(end);
  if (!s) throw Error("corpus", "invalid window start '" + std::string(start) + "'");
  if (!e) throw Error("corpus", "invalid window end '" + std::string(end) + "'");
  return TimeWindow(*s, *e);
}

}  // namespace floodsense
