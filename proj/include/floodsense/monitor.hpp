#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include <json.hpp>

#include "floodsense/corpus.hpp"
#include "floodsense/csv.hpp"
#include "floodsense/error.hpp"
#include "floodsense/lexicon.hpp"
#include "floodsense/time.hpp"

namespace floodsense {

/// Bucket i covers [origin + i*width, origin + (i+1)*width).
struct CountSeries {
  std::int64_t bucket_width = kSecondsPerDay;
  UtcSeconds origin;
  std::vector<std::uint64_t> counts;
  /// Set when the window edges do not fall on bucket boundaries, so the
  /// first and/or last bucket only partially overlap the window.
  bool partial_edges = false;

  UtcSeconds bucket_start(std::size_t i) const {
    return UtcSeconds{origin.value + static_cast<std::int64_t>(i) * bucket_width};
  }
};

/// Counts matching posts (retweets included) per bucket. Buckets are aligned
/// to multiples of `width` since the epoch, so daily buckets start at UTC
/// midnight.
inline CountSeries count_series(std::span<const Post> posts, const Query& query, std::int64_t width,
                                const TimeWindow& window) {
  if (width <= 0) throw Error("monitor", "bucket width must be positive");
  CountSeries s;
  s.bucket_width = width;
  s.origin = UtcSeconds{detail::floor_div(window.start().value, width) * width};
  const std::int64_t span = window.end().value - s.origin.value;
  const std::int64_t n = (span + width - 1) / width;
  s.counts.assign(static_cast<std::size_t>(n), 0);
  s.partial_edges = s.origin != window.start() || span % width != 0;
  for (const auto& p : posts) {
    if (!window.contains(p.created_at) || !match_post(query, p)) continue;
    ++s.counts[static_cast<std::size_t>((p.created_at.value - s.origin.value) / width)];
  }
  return s;
}

/// Window for the monitoring series: `window` extended backwards by
/// `baseline_buckets` whole buckets so every bucket inside `window` has a
/// full baseline.
inline TimeWindow monitor_window(const TimeWindow& window, std::int64_t width, int baseline_buckets) {
  if (width <= 0) throw Error("monitor", "bucket width must be positive");
  const std::int64_t origin = detail::floor_div(window.start().value, width) * width;
  return TimeWindow(UtcSeconds{origin - width * std::max(baseline_buckets, 0)}, window.end());
}

struct TriggerConfig {
  int baseline_buckets = 7;     // B
  double ratio_threshold = 3.0; // k
  std::uint64_t min_count = 100; // m
};

struct TriggerDecision {
  bool fired = false;
  /// Bucket that fired, or the bucket with the highest ratio when not fired.
  std::optional<std::size_t> bucket_index;
  std::uint64_t observed = 0;
  double baseline_mean = 0;
  double ratio = 0;
  TriggerConfig config;
};

/// First bucket i >= B whose count reaches min_count and whose ratio to the
/// mean of the preceding B buckets reaches ratio_threshold. The divisor is
/// max(mean, 1) so an all-zero baseline cannot divide by zero.
inline TriggerDecision detect_trigger(const CountSeries& series, const TriggerConfig& cfg = {}) {
  if (cfg.baseline_buckets < 1) throw Error("monitor", "baseline window must be >= 1 bucket");
  if (!(cfg.ratio_threshold > 1.0)) throw Error("monitor", "ratio threshold must exceed 1");
  const auto B = static_cast<std::size_t>(cfg.baseline_buckets);
  if (series.counts.size() < B + 1)
    throw Error("monitor", "series has " + std::to_string(series.counts.size()) + " buckets, need at least " +
                               std::to_string(B + 1));

  TriggerDecision d;
  d.config = cfg;
  d.ratio = -1;
  std::uint64_t window_sum = std::accumulate(series.counts.begin(), series.counts.begin() + B, std::uint64_t{0});
  for (std::size_t i = B; i < series.counts.size(); ++i) {
    const double mean = static_cast<double>(window_sum) / static_cast<double>(B);
    const std::uint64_t obs = series.counts[i];
    const double ratio = static_cast<double>(obs) / std::max(mean, 1.0);
    if (obs >= cfg.min_count && ratio >= cfg.ratio_threshold) {
      d.fired = true;
      d.bucket_index = i;
      d.observed = obs;
      d.baseline_mean = mean;
      d.ratio = ratio;
      return d;
    }
    if (ratio > d.ratio) {
      d.bucket_index = i;
      d.observed = obs;
      d.baseline_mean = mean;
      d.ratio = ratio;
    }
    window_sum += obs;
    window_sum -= series.counts[i - B];
  }
  return d;
}

inline TriggerDecision detect_trigger(const CountSeries& series, int B, double k, std::uint64_t m) {
  return detect_trigger(series, TriggerConfig{B, k, m});
}

/// CSV with header bucket_start_iso,count.
inline void write_series_csv(std::ostream& os, const CountSeries& s) {
  os << "bucket_start_iso,count\n";
  for (std::size_t i = 0; i < s.counts.size(); ++i)
    os << format_rfc3339(s.bucket_start(i)) << ',' << s.counts[i] << '\n';
}

inline nlohmann::json to_json(const TriggerDecision& d, const CountSeries& s) {
  nlohmann::json j;
  j["fired"] = d.fired;
  j["bucket_index"] = d.bucket_index ? nlohmann::json(*d.bucket_index) : nlohmann::json(nullptr);
  j["bucket_start"] = d.bucket_index ? nlohmann::json(format_rfc3339(s.bucket_start(*d.bucket_index)))
                                     : nlohmann::json(nullptr);
  j["observed"] = d.observed;
  j["baseline_mean"] = d.baseline_mean;
  j["ratio"] = d.ratio;
  j["config"] = {{"baseline_buckets", d.config.baseline_buckets},
                 {"ratio_threshold", d.config.ratio_threshold},
                 {"min_count", d.config.min_count}};
  return j;
}

}  // namespace floodsense
