#pragma once

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "floodsense/corpus.hpp"
#include "floodsense/csv.hpp"
#include "floodsense/error.hpp"
#include "floodsense/parallel.hpp"
#include "floodsense/raster.hpp"

namespace floodsense {

// ---------------------------------------------------------------------------
// Perceptual hashing

struct PerceptualHash {
  static constexpr std::string_view algorithm = "dhash-9x8";
  std::uint64_t bits = 0;

  friend bool operator==(PerceptualHash, PerceptualHash) = default;
};

inline int hamming(PerceptualHash a, PerceptualHash b) { return std::popcount(a.bits ^ b.bits); }

/// Difference hash: luma, area-averaged to 9 columns x 8 rows, then bit
/// (r, c) is set iff cell (r, c) is brighter than cell (r, c+1). Bits are
/// packed row-major starting from the most significant bit.
inline PerceptualHash dhash(const Image& img) {
  if (img.empty()) throw Error("mediafilter", "cannot hash an empty image");
  const Grid g = resample_luma(img, 9, 8);
  std::uint64_t bits = 0;
  for (int r = 0; r < 8; ++r)
    for (int c = 0; c < 8; ++c) {
      bits <<= 1;
      if (g(c, r) > g(c + 1, r)) bits |= 1;
    }
  return PerceptualHash{bits};
}

// ---------------------------------------------------------------------------
// Verdicts

enum class FilterStage { unreadable, duplicate, non_photo, nsfw, passed };

inline std::string_view to_string(FilterStage s) {
  switch (s) {
    case FilterStage::unreadable: return "unreadable";
    case FilterStage::duplicate: return "duplicate";
    case FilterStage::non_photo: return "non_photo";
    case FilterStage::nsfw: return "nsfw";
    case FilterStage::passed: return "passed";
  }
  return "?";
}

inline std::optional<FilterStage> parse_filter_stage(std::string_view s) {
  for (auto st : {FilterStage::unreadable, FilterStage::duplicate, FilterStage::non_photo, FilterStage::nsfw,
                  FilterStage::passed})
    if (to_string(st) == s) return st;
  return std::nullopt;
}

struct StageLatency {
  std::string stage;
  std::int64_t micros = 0;
};

struct FilterVerdict {
  std::string media_id;
  std::string post_id;
  FilterStage stage = FilterStage::passed;
  std::string detail;  // canonical media id for duplicates, plugin name for removals
  std::vector<StageLatency> latency;
};

// ---------------------------------------------------------------------------
// Near-duplicate removal

struct DedupItem {
  std::string media_id;
  std::string post_id;
  UtcSeconds created_at;
  PerceptualHash hash;
};

struct DedupResult {
  std::vector<std::size_t> kept;        // indices into the input, canonical order
  std::vector<FilterVerdict> verdicts;  // aligned with the input
};

namespace detail {

/// Metric tree over kept hashes; answers "all kept hashes within d".
class BkTree {
 public:
  void insert(PerceptualHash h, std::size_t payload) {
    if (nodes_.empty()) {
      nodes_.push_back({h, payload, {}});
      return;
    }
    std::size_t cur = 0;
    for (;;) {
      const int d = hamming(h, nodes_[cur].hash);
      auto it = nodes_[cur].children.find(d);
      if (it == nodes_[cur].children.end()) {
        nodes_[cur].children.emplace(d, nodes_.size());
        nodes_.push_back({h, payload, {}});
        return;
      }
      cur = it->second;
    }
  }

  template <typename Visit>
  void within(PerceptualHash h, int radius, Visit&& visit) const {
    if (nodes_.empty()) return;
    std::vector<std::size_t> stack{0};
    while (!stack.empty()) {
      const auto& n = nodes_[stack.back()];
      stack.pop_back();
      const int d = hamming(h, n.hash);
      if (d <= radius) visit(n.payload);
      for (auto it = n.children.lower_bound(d - radius); it != n.children.end() && it->first <= d + radius; ++it)
        stack.push_back(it->second);
    }
  }

 private:
  struct Node {
    PerceptualHash hash;
    std::size_t payload;
    std::map<int, std::size_t> children;
  };
  std::vector<Node> nodes_;
};

}  // namespace detail

/// Canonical processing order: earliest post, then post id, then media id.
inline std::vector<std::size_t> canonical_order(std::span<const DedupItem> items) {
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& x = items[a];
    const auto& y = items[b];
    if (x.created_at != y.created_at) return x.created_at < y.created_at;
    if (x.post_id != y.post_id) return x.post_id < y.post_id;
    return x.media_id < y.media_id;
  });
  return order;
}

/// Greedy in canonical order: an item within `threshold` bits of an already
/// kept item becomes a duplicate of the earliest such item; otherwise it is
/// kept. The result does not depend on input order.
inline DedupResult dedup(std::span<const DedupItem> items, int threshold) {
  if (threshold < 0 || threshold > 64) throw Error("mediafilter", "dedup threshold must be in [0, 64]");
  DedupResult out;
  out.verdicts.resize(items.size());
  detail::BkTree tree;
  std::vector<std::size_t> rank_of(items.size());
  std::size_t rank = 0;
  for (std::size_t idx : canonical_order(items)) {
    rank_of[idx] = rank++;
    const auto& it = items[idx];
    auto& v = out.verdicts[idx];
    v.media_id = it.media_id;
    v.post_id = it.post_id;
    std::optional<std::size_t> canonical;
    tree.within(it.hash, threshold, [&](std::size_t kept_idx) {
      if (!canonical || rank_of[kept_idx] < rank_of[*canonical]) canonical = kept_idx;
    });
    if (canonical) {
      v.stage = FilterStage::duplicate;
      v.detail = items[*canonical].media_id;
    } else {
      v.stage = FilterStage::passed;
      tree.insert(it.hash, idx);
      out.kept.push_back(idx);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Per-item predicates

struct PluginResult {
  bool keep = true;
  double confidence = 0.5;  // in [0, 1]
};

enum class PluginKind { photo_check, nsfw_check };

inline FilterStage stage_for(PluginKind k) {
  return k == PluginKind::photo_check ? FilterStage::non_photo : FilterStage::nsfw;
}

/// A pure per-image filter. An item is removed when the predicate says
/// !keep with confidence >= min_confidence.
struct FilterPlugin {
  std::string name;
  PluginKind kind = PluginKind::photo_check;
  std::function<PluginResult(const Image&)> predicate;
  double cost_hint = 1.0;
  double min_confidence = 0.5;
};

struct PhotoFeatures {
  double unique_color_ratio = 0;  // distinct RGB values / pixels, 64x64 sample
  double flat_fraction = 0;       // share of near-zero luma gradients
  double mean_gradient = 0;
};

inline constexpr int kPhotoSampleSize = 64;
inline constexpr double kMinUniqueColorRatio = 0.05;
inline constexpr double kMaxFlatFraction = 0.6;
inline constexpr double kFlatGradient = 1.0;  // luma levels

inline PhotoFeatures photo_features(const Image& img) {
  const Image s = resample_rgb(img, kPhotoSampleSize, kPhotoSampleSize);
  std::unordered_set<std::uint32_t> colors;
  std::vector<int> y(static_cast<std::size_t>(kPhotoSampleSize) * kPhotoSampleSize);
  for (int r = 0; r < kPhotoSampleSize; ++r)
    for (int c = 0; c < kPhotoSampleSize; ++c) {
      const auto* p = s.at(c, r);
      colors.insert((std::uint32_t{p[0]} << 16) | (std::uint32_t{p[1]} << 8) | p[2]);
      y[static_cast<std::size_t>(r) * kPhotoSampleSize + c] = luma(p);
    }
  PhotoFeatures f;
  f.unique_color_ratio = static_cast<double>(colors.size()) / (kPhotoSampleSize * kPhotoSampleSize);
  std::size_t flat = 0, total = 0;
  double sum = 0;
  for (int r = 0; r + 1 < kPhotoSampleSize; ++r)
    for (int c = 0; c + 1 < kPhotoSampleSize; ++c) {
      const int v = y[static_cast<std::size_t>(r) * kPhotoSampleSize + c];
      const int gx = y[static_cast<std::size_t>(r) * kPhotoSampleSize + c + 1] - v;
      const int gy = y[static_cast<std::size_t>(r + 1) * kPhotoSampleSize + c] - v;
      const double mag = std::sqrt(static_cast<double>(gx * gx + gy * gy));
      sum += mag;
      if (mag <= kFlatGradient) ++flat;
      ++total;
    }
  f.flat_fraction = static_cast<double>(flat) / static_cast<double>(total);
  f.mean_gradient = sum / static_cast<double>(total);
  return f;
}

/// Model-free photo check. Flags drawings and screenshots: too few distinct
/// colors, or mostly flat regions. Confidence is 0.5 at the threshold and
/// grows with the margin.
inline PluginResult is_photo_default(const Image& img) {
  const PhotoFeatures f = photo_features(img);
  const double color_margin = (f.unique_color_ratio - kMinUniqueColorRatio) / kMinUniqueColorRatio;
  const double flat_margin = (kMaxFlatFraction - f.flat_fraction) / kMaxFlatFraction;
  const bool keep = f.unique_color_ratio >= kMinUniqueColorRatio && f.flat_fraction <= kMaxFlatFraction;
  double margin;
  if (keep) {
    margin = std::min(color_margin, flat_margin);
  } else {
    margin = std::max(-color_margin, (f.flat_fraction - kMaxFlatFraction) / (1.0 - kMaxFlatFraction));
  }
  return {keep, std::clamp(0.5 + 0.5 * std::clamp(margin, 0.0, 1.0), 0.0, 1.0)};
}

/// No model ships with the library, so the default keeps everything.
inline PluginResult nsfw_passthrough(const Image&) { return {true, 0.5}; }

inline FilterPlugin photo_heuristic_plugin() {
  return {"photo-heuristic", PluginKind::photo_check, is_photo_default, 1.0, 0.5};
}

inline FilterPlugin nsfw_passthrough_plugin() {
  return {"nsfw-passthrough", PluginKind::nsfw_check, nsfw_passthrough, 0.1, 0.5};
}

/// Name -> factory lookup used by configuration files.
class PluginRegistry {
 public:
  using Factory = std::function<FilterPlugin()>;

  static PluginRegistry with_builtins() {
    PluginRegistry r;
    r.add("photo-heuristic", photo_heuristic_plugin);
    r.add("nsfw-passthrough", nsfw_passthrough_plugin);
    return r;
  }

  void add(std::string name, Factory f) { factories_[std::move(name)] = std::move(f); }

  FilterPlugin make(const std::string& name) const {
    auto it = factories_.find(name);
    if (it == factories_.end()) throw Error("mediafilter", "unknown filter plugin '" + name + "'");
    return it->second();
  }

  bool contains(const std::string& name) const { return factories_.count(name) != 0; }

 private:
  std::map<std::string, Factory> factories_;
};

// ---------------------------------------------------------------------------
// Pipeline

struct StageCount {
  std::string name;  // "dedup" or plugin name
  FilterStage stage = FilterStage::duplicate;
  std::size_t input = 0;
  std::size_t removed = 0;
  std::size_t failures = 0;  // plugin errors; such items are kept
};

struct MediaFunnel {
  std::size_t input = 0;
  std::size_t unreadable = 0;
  std::vector<StageCount> stages;  // execution order
  std::size_t passed = 0;

  std::size_t removed_total() const {
    std::size_t n = 0;
    for (const auto& s : stages) n += s.removed;
    return n;
  }
};

struct FilterConfig {
  int dedup_threshold = 10;
  unsigned threads = 1;
};

struct FilterOutcome {
  std::vector<std::size_t> kept;        // indices into the input records, canonical order
  std::vector<FilterVerdict> verdicts;  // aligned with the input records
  MediaFunnel funnel;
};

/// Dedup first, then plugins in ascending cost_hint (ties keep registration
/// order). Unreadable records skip every stage. A plugin that throws keeps
/// the item and is counted as a failure.
inline FilterOutcome run_filter_pipeline(std::span<const MediaRecord> records, std::span<const FilterPlugin> plugins,
                                         const FilterConfig& config = {}) {
  using Clock = std::chrono::steady_clock;
  auto micros_since = [](Clock::time_point t0) {
    return std::chrono::duration_cast<std::chrono::microseconds>(Clock::now() - t0).count();
  };

  FilterOutcome out;
  out.verdicts.resize(records.size());
  out.funnel.input = records.size();

  std::vector<std::size_t> readable;
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto& v = out.verdicts[i];
    v.media_id = records[i].media_id;
    v.post_id = records[i].post_id;
    if (records[i].readable()) {
      readable.push_back(i);
    } else {
      v.stage = FilterStage::unreadable;
      ++out.funnel.unreadable;
    }
  }

  std::vector<DedupItem> items(readable.size());
  parallel_for(readable.size(), config.threads, [&](std::size_t j) {
    const auto& r = records[readable[j]];
    const auto t0 = Clock::now();
    items[j] = {r.media_id, r.post_id, r.post_created_at, dhash(*r.image)};
    out.verdicts[readable[j]].latency.push_back({"dedup", micros_since(t0)});
  });
  const auto deduped = dedup(items, config.dedup_threshold);
  StageCount dedup_count{"dedup", FilterStage::duplicate, readable.size(), 0, 0};
  for (std::size_t j = 0; j < items.size(); ++j) {
    const auto& dv = deduped.verdicts[j];
    if (dv.stage == FilterStage::duplicate) {
      auto& v = out.verdicts[readable[j]];
      v.stage = FilterStage::duplicate;
      v.detail = dv.detail;
      ++dedup_count.removed;
    }
  }
  out.funnel.stages.push_back(dedup_count);

  std::vector<const FilterPlugin*> ordered;
  for (const auto& p : plugins) ordered.push_back(&p);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const FilterPlugin* a, const FilterPlugin* b) { return a->cost_hint < b->cost_hint; });

  std::vector<std::size_t> survivors;
  for (std::size_t k : deduped.kept) survivors.push_back(readable[k]);

  for (const FilterPlugin* plugin : ordered) {
    StageCount sc{plugin->name, stage_for(plugin->kind), survivors.size(), 0, 0};
    std::vector<char> removed(survivors.size(), 0);
    std::vector<char> failed(survivors.size(), 0);
    parallel_for(survivors.size(), config.threads, [&](std::size_t j) {
      const auto& rec = records[survivors[j]];
      const auto t0 = Clock::now();
      try {
        const PluginResult res = plugin->predicate(*rec.image);
        removed[j] = !res.keep && res.confidence >= plugin->min_confidence;
      } catch (...) {
        failed[j] = 1;
      }
      out.verdicts[survivors[j]].latency.push_back({plugin->name, micros_since(t0)});
    });
    std::vector<std::size_t> next;
    for (std::size_t j = 0; j < survivors.size(); ++j) {
      sc.failures += failed[j];
      if (removed[j]) {
        auto& v = out.verdicts[survivors[j]];
        v.stage = sc.stage;
        v.detail = plugin->name;
        ++sc.removed;
      } else {
        next.push_back(survivors[j]);
      }
    }
    if (sc.failures) warn("mediafilter", plugin->name + ": " + std::to_string(sc.failures) + " item(s) failed, kept");
    survivors = std::move(next);
    out.funnel.stages.push_back(sc);
  }
  out.kept = std::move(survivors);
  out.funnel.passed = out.kept.size();
  return out;
}

/// CSV: media_id,post_id,stage,detail,latency_us. Latency is written as
/// "stage=micros;..." only when requested, since it varies between runs.
inline void write_verdicts_csv(std::ostream& os, std::span<const FilterVerdict> verdicts, bool include_latency) {
  os << "media_id,post_id,stage,detail,latency_us\n";
  for (const auto& v : verdicts) {
    std::string lat;
    if (include_latency)
      for (const auto& l : v.latency) {
        if (!lat.empty()) lat += ';';
        lat += l.stage + "=" + std::to_string(l.micros);
      }
    csv::write_row(os, {v.media_id, v.post_id, std::string(to_string(v.stage)), v.detail, lat});
  }
}

}  // namespace floodsense
