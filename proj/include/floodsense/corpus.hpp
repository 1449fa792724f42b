#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "floodsense/error.hpp"
#include "floodsense/geo.hpp"
#include "floodsense/parallel.hpp"
#include "floodsense/raster.hpp"
#include "floodsense/time.hpp"

namespace floodsense {

struct MediaRef {
  std::string media_id;
  std::string path;  // relative to the corpus file's directory
  friend bool operator==(const MediaRef&, const MediaRef&) = default;
};

struct Post {
  std::string id;
  UtcSeconds created_at;
  std::string text;
  std::string lang = "und";
  bool is_retweet = false;
  std::optional<geo::LatLon> native_geo;
  std::vector<MediaRef> media;
  std::string author_id;

  bool has_media() const noexcept { return !media.empty(); }
  friend bool operator==(const Post&, const Post&) = default;
};

/// One attached image. `image` is empty when the payload could not be decoded;
/// such records are kept so the funnel can count them.
struct MediaRecord {
  std::string media_id;
  std::string post_id;
  UtcSeconds post_created_at;
  std::string path;
  std::optional<Image> image;

  bool readable() const noexcept { return image.has_value(); }
  int width() const noexcept { return image ? image->width : 0; }
  int height() const noexcept { return image ? image->height : 0; }
};

namespace detail {

inline std::optional<Post> post_from_json(const nlohmann::json& j, std::string& why) {
  if (!j.is_object()) return why = "record is not an object", std::nullopt;
  Post p;
  auto id = j.find("id");
  if (id == j.end() || !id->is_string() || id->get_ref<const std::string&>().empty())
    return why = "missing or empty id", std::nullopt;
  p.id = id->get<std::string>();

  auto ts = j.find("created_at");
  if (ts == j.end() || !ts->is_string()) return why = "missing created_at", std::nullopt;
  auto parsed = parse_rfc3339(ts->get_ref<const std::string&>());
  if (!parsed) return why = "unparseable created_at", std::nullopt;
  p.created_at = *parsed;

  auto text = j.find("text");
  if (text == j.end() || !text->is_string()) return why = "missing text", std::nullopt;
  p.text = text->get<std::string>();

  if (auto it = j.find("lang"); it != j.end()) {
    if (!it->is_string()) return why = "lang is not a string", std::nullopt;
    p.lang = it->get<std::string>();
    if (p.lang.empty()) p.lang = "und";
  }
  if (auto it = j.find("is_retweet"); it != j.end()) {
    if (!it->is_boolean()) return why = "is_retweet is not a bool", std::nullopt;
    p.is_retweet = it->get<bool>();
  }
  if (auto it = j.find("author_id"); it != j.end() && it->is_string()) p.author_id = it->get<std::string>();

  auto lat = j.find("lat");
  auto lon = j.find("lon");
  const bool has_lat = lat != j.end() && !lat->is_null();
  const bool has_lon = lon != j.end() && !lon->is_null();
  if (has_lat != has_lon) return why = "lat and lon must appear together", std::nullopt;
  if (has_lat) {
    if (!lat->is_number() || !lon->is_number()) return why = "lat/lon not numeric", std::nullopt;
    geo::LatLon g{lat->get<double>(), lon->get<double>()};
    if (!g.valid()) return why = "lat/lon out of range", std::nullopt;
    p.native_geo = g;
  }

  if (auto it = j.find("media"); it != j.end() && !it->is_null()) {
    if (!it->is_array()) return why = "media is not a list", std::nullopt;
    for (const auto& m : *it) {
      auto mid = m.find("media_id");
      auto path = m.find("path");
      if (!m.is_object() || mid == m.end() || path == m.end() || !mid->is_string() || !path->is_string() ||
          mid->get_ref<const std::string&>().empty())
        return why = "malformed media entry", std::nullopt;
      p.media.push_back({mid->get<std::string>(), path->get<std::string>()});
    }
  }
  return p;
}

}  // namespace detail

inline nlohmann::json to_json(const Post& p) {
  nlohmann::json j;
  j["id"] = p.id;
  j["created_at"] = format_rfc3339(p.created_at);
  j["text"] = p.text;
  j["lang"] = p.lang;
  j["is_retweet"] = p.is_retweet;
  if (!p.author_id.empty()) j["author_id"] = p.author_id;
  if (p.native_geo) {
    j["lat"] = p.native_geo->lat;
    j["lon"] = p.native_geo->lon;
  }
  if (!p.media.empty()) {
    auto& arr = j["media"] = nlohmann::json::array();
    for (const auto& m : p.media) arr.push_back({{"media_id", m.media_id}, {"path", m.path}});
  }
  return j;
}

/// One line of the replay format.
inline std::string serialize_post(const Post& p) { return to_json(p).dump(); }

struct CorpusReadResult {
  std::vector<Post> posts;
  std::size_t skipped = 0;
  std::filesystem::path base_dir;  // media paths resolve against this
};

/// Parses newline-delimited post records. Malformed lines and duplicate ids
/// are skipped with a warning; an unreadable file is fatal.
inline CorpusReadResult read_corpus_stream(std::istream& in) {
  CorpusReadResult out;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    std::string why = "invalid JSON";
    std::optional<Post> post;
    if (!j.is_discarded()) post = detail::post_from_json(j, why);
    if (post && !seen.insert(post->id).second) {
      why = "duplicate id '" + post->id + "'";
      post.reset();
    }
    if (!post) {
      ++out.skipped;
      warn("corpus", "line " + std::to_string(lineno) + ": " + why);
      continue;
    }
    out.posts.push_back(std::move(*post));
  }
  return out;
}

inline CorpusReadResult read_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("corpus", "cannot read corpus file '" + path.string() + "'");
  auto out = read_corpus_stream(in);
  out.base_dir = path.parent_path();
  return out;
}

inline void write_corpus(std::ostream& os, std::span<const Post> posts) {
  for (const auto& p : posts) os << serialize_post(p) << '\n';
}

/// Posts with window.start <= created_at < window.end, order preserved.
inline std::vector<Post> filter_window(std::span<const Post> posts, const TimeWindow& window) {
  std::vector<Post> out;
  std::copy_if(posts.begin(), posts.end(), std::back_inserter(out),
               [&](const Post& p) { return window.contains(p.created_at); });
  return out;
}

inline std::vector<Post> drop_retweets(std::span<const Post> posts) {
  std::vector<Post> out;
  std::copy_if(posts.begin(), posts.end(), std::back_inserter(out), [](const Post& p) { return !p.is_retweet; });
  return out;
}

/// Builds one MediaRecord per media reference, decoding images in parallel.
/// Order follows posts, then media within a post.
inline std::vector<MediaRecord> load_media(std::span<const Post> posts, const std::filesystem::path& base_dir,
                                           unsigned threads = 1) {
  std::vector<MediaRecord> records;
  for (const auto& p : posts)
    for (const auto& m : p.media) records.push_back({m.media_id, p.id, p.created_at, m.path, std::nullopt});
  parallel_for(records.size(), threads, [&](std::size_t i) {
    const std::filesystem::path rel(records[i].path);
    records[i].image = load_image((rel.is_absolute() ? rel : base_dir / rel).string());
  });
  return records;
}

/// Source of posts. The production client would wrap a social-media search
/// API; the replay client serves a recorded corpus.
class FeedClient {
 public:
  using Matcher = std::function<bool(const Post&)>;

  virtual ~FeedClient() = default;

  /// Matching posts per window, retweets included. Never returns content.
  virtual std::size_t count(const Matcher& match, const TimeWindow& window) const = 0;

  virtual std::vector<Post> search(const Matcher& match, const TimeWindow& window,
                                   bool exclude_retweets) const = 0;
};

class ReplayFeedClient final : public FeedClient {
 public:
  explicit ReplayFeedClient(std::vector<Post> posts) : posts_(std::move(posts)) {}

  std::size_t count(const Matcher& match, const TimeWindow& window) const override {
    return static_cast<std::size_t>(std::count_if(posts_.begin(), posts_.end(), [&](const Post& p) {
      return window.contains(p.created_at) && match(p);
    }));
  }

  std::vector<Post> search(const Matcher& match, const TimeWindow& window,
                           bool exclude_retweets) const override {
    std::vector<Post> out;
    for (const auto& p : posts_)
      if (window.contains(p.created_at) && (!exclude_retweets || !p.is_retweet) && match(p)) out.push_back(p);
    return out;
  }

  const std::vector<Post>& posts() const noexcept { return posts_; }

 private:
  std::vector<Post> posts_;
};

}  // namespace floodsense
