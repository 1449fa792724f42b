#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "floodsense/corpus.hpp"
#include "floodsense/csv.hpp"
#include "floodsense/error.hpp"
#include "floodsense/geo.hpp"
#include "floodsense/parallel.hpp"
#include "floodsense/phrase_trie.hpp"
#include "floodsense/text.hpp"

namespace floodsense {

/// OpenStreetMap admin levels accepted by the gazetteer (lower = coarser).
/// Level 15 holds points of interest without an administrative rank.
inline constexpr int kAdminLevels[] = {2, 4, 6, 8, 10, 15};
inline constexpr int kCountryLevel = 2;

inline bool valid_admin_level(int level) {
  return std::find(std::begin(kAdminLevels), std::end(kAdminLevels), level) != std::end(kAdminLevels);
}

struct GazetteerEntry {
  std::string entry_id;
  std::string name;
  std::vector<std::string> aliases;
  geo::LatLon centroid;
  geo::BBox bbox;
  int admin_level = 15;
  std::string country;
  double importance = 0;
};

/// Returns an empty string when the entry is acceptable, else the reason.
inline std::string validate_entry(const GazetteerEntry& e) {
  if (e.entry_id.empty()) return "empty entry_id";
  if (e.name.empty()) return "empty name";
  if (!e.centroid.valid()) return "centroid out of range";
  if (!e.bbox.valid()) return "invalid bbox";
  if (!e.bbox.contains(e.centroid)) return "centroid outside bbox";
  if (!valid_admin_level(e.admin_level)) return "admin_level " + std::to_string(e.admin_level) + " not allowed";
  if (!(e.importance >= 0 && e.importance <= 1)) return "importance outside [0, 1]";
  return {};
}

/// Immutable, indexed collection of gazetteer entries.
class Gazetteer {
 public:
  using Index = std::uint32_t;

  Gazetteer() = default;

  /// Invalid entries are skipped with a warning; duplicate ids are fatal.
  static Gazetteer from_entries(std::vector<GazetteerEntry> entries) {
    Gazetteer g;
    for (auto& e : entries) {
      if (auto why = validate_entry(e); !why.empty()) {
        warn("geoloc", "skipping gazetteer entry '" + e.entry_id + "': " + why);
        continue;
      }
      if (g.by_id_.count(e.entry_id)) throw Error("geoloc", "duplicate gazetteer entry_id '" + e.entry_id + "'");
      const auto idx = static_cast<Index>(g.entries_.size());
      g.by_id_.emplace(e.entry_id, idx);
      g.entries_.push_back(std::move(e));
      g.index_names(idx);
    }
    return g;
  }

  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  const std::vector<GazetteerEntry>& entries() const noexcept { return entries_; }
  const GazetteerEntry& operator[](Index i) const { return entries_[i]; }

  const GazetteerEntry* find(const std::string& entry_id) const {
    auto it = by_id_.find(entry_id);
    return it == by_id_.end() ? nullptr : &entries_[it->second];
  }
  std::optional<Index> index_of(const std::string& entry_id) const {
    auto it = by_id_.find(entry_id);
    if (it == by_id_.end()) return std::nullopt;
    return it->second;
  }

  /// Exact lookup of a name or alias after normalization.
  std::vector<Index> lookup(std::string_view name_utf8) const { return lookup_normalized(text::normalize(name_utf8)); }

  std::vector<Index> lookup_normalized(std::u32string_view normalized) const {
    auto it = names_.find(name_key(normalized));
    return it == names_.end() ? std::vector<Index>{} : it->second;
  }

  const PhraseTrie<std::u32string>& token_trie() const noexcept { return token_trie_; }
  const PhraseTrie<char32_t>& char_trie() const noexcept { return char_trie_; }

 private:
  static std::u32string name_key(std::u32string_view normalized) {
    std::u32string key;
    for (const auto& t : text::token_texts(normalized)) {
      if (!key.empty()) key += U' ';
      key += t;
    }
    return key;
  }

  void index_names(Index idx) {
    const auto& e = entries_[idx];
    std::vector<std::string> names{e.name};
    names.insert(names.end(), e.aliases.begin(), e.aliases.end());
    for (const auto& n : names) {
      const auto norm = text::normalize(n);
      const auto key = name_key(norm);
      if (key.empty()) continue;
      auto& slot = names_[key];
      if (std::find(slot.begin(), slot.end(), idx) != slot.end()) continue;
      slot.push_back(idx);
      token_trie_.insert(text::token_texts(norm), idx);
      char_trie_.insert(norm, idx);
    }
  }

  std::vector<GazetteerEntry> entries_;
  std::unordered_map<std::string, Index> by_id_;
  std::unordered_map<std::u32string, std::vector<Index>> names_;
  PhraseTrie<std::u32string> token_trie_;
  PhraseTrie<char32_t> char_trie_;
};

inline nlohmann::json to_json(const GazetteerEntry& e) {
  return {{"entry_id", e.entry_id},
          {"name", e.name},
          {"aliases", e.aliases},
          {"lat", e.centroid.lat},
          {"lon", e.centroid.lon},
          {"bbox", {e.bbox.min_lat, e.bbox.min_lon, e.bbox.max_lat, e.bbox.max_lon}},
          {"admin_level", e.admin_level},
          {"country", e.country},
          {"importance", e.importance}};
}

/// One JSON object per line with the GazetteerEntry fields; bbox is
/// [min_lat, min_lon, max_lat, max_lon].
inline Gazetteer load_gazetteer(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("geoloc", "cannot read gazetteer '" + path.string() + "'");
  std::vector<GazetteerEntry> entries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    try {
      if (j.is_discarded() || !j.is_object()) throw std::invalid_argument("invalid JSON");
      GazetteerEntry e;
      e.entry_id = j.at("entry_id").get<std::string>();
      e.name = j.at("name").get<std::string>();
      if (j.contains("aliases")) e.aliases = j.at("aliases").get<std::vector<std::string>>();
      e.centroid = {j.at("lat").get<double>(), j.at("lon").get<double>()};
      const auto bb = j.at("bbox").get<std::vector<double>>();
      if (bb.size() != 4) throw std::invalid_argument("bbox needs 4 numbers");
      e.bbox = {bb[0], bb[1], bb[2], bb[3]};
      e.admin_level = j.at("admin_level").get<int>();
      e.country = j.value("country", std::string{});
      e.importance = j.value("importance", 0.0);
      entries.push_back(std::move(e));
    } catch (const std::exception& ex) {
      warn("geoloc", path.string() + ":" + std::to_string(lineno) + ": " + ex.what());
    }
  }
  return Gazetteer::from_entries(std::move(entries));
}

// ---------------------------------------------------------------------------
// Mentions

struct Mention {
  std::string post_id;
  std::string surface;  // normalized text of the span
  std::size_t begin = 0; // codepoint offsets into the normalized post text
  std::size_t end = 0;
  std::vector<Gazetteer::Index> candidates;
};

struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;
};

/// External location recognizer: normalized text -> candidate spans.
using NerPlugin = std::function<std::vector<Span>(std::u32string_view normalized_text)>;

namespace detail {

inline bool spaced_word_char(char32_t c) { return text::is_word_char(c) && !text::lacks_word_spaces(c); }

inline std::vector<Gazetteer::Index> sorted_unique(std::vector<Gazetteer::Index> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

}  // namespace detail

/// Longest non-overlapping gazetteer names in the post text, scanned left to
/// right. Text containing an unspaced script is scanned per codepoint (with
/// word-boundary checks for spaced-script letters); otherwise per token.
/// With an NER plugin, its spans are used instead and looked up exactly.
inline std::vector<Mention> extract_mentions(const Post& post, const Gazetteer& gaz, const NerPlugin& ner = {}) {
  const std::u32string norm = text::normalize(post.text);
  std::vector<Mention> out;
  auto emit = [&](std::size_t b, std::size_t e, std::vector<Gazetteer::Index> cands) {
    if (cands.empty()) return;
    out.push_back({post.id, text::to_utf8(std::u32string_view(norm).substr(b, e - b)), b, e,
                   detail::sorted_unique(std::move(cands))});
  };

  if (ner) {
    auto spans = ner(norm);
    std::sort(spans.begin(), spans.end(), [](const Span& a, const Span& b) {
      return a.begin != b.begin ? a.begin < b.begin : a.end > b.end;
    });
    std::size_t covered = 0;
    for (const auto& s : spans) {
      if (s.begin < covered || s.end > norm.size() || s.begin >= s.end) continue;
      auto cands = gaz.lookup_normalized(std::u32string_view(norm).substr(s.begin, s.end - s.begin));
      if (cands.empty()) continue;
      emit(s.begin, s.end, std::move(cands));
      covered = s.end;
    }
    return out;
  }

  if (text::has_unspaced_script(norm)) {
    const auto& trie = gaz.char_trie();
    for (std::size_t i = 0; i < norm.size();) {
      if (i > 0 && detail::spaced_word_char(norm[i - 1]) && detail::spaced_word_char(norm[i])) {
        ++i;
        continue;
      }
      auto m = trie.longest_at(norm, i, [&](std::size_t len) {
        const std::size_t e = i + len;
        return !(e < norm.size() && detail::spaced_word_char(norm[e - 1]) && detail::spaced_word_char(norm[e]));
      });
      if (m) {
        emit(i, i + m->length, *m->payloads);
        i += m->length;
      } else {
        ++i;
      }
    }
    return out;
  }

  const auto tokens = text::tokenize(norm);
  std::vector<std::u32string> symbols;
  symbols.reserve(tokens.size());
  for (const auto& t : tokens) symbols.push_back(t.text);
  for (std::size_t i = 0; i < symbols.size();) {
    if (auto m = gaz.token_trie().longest_at(symbols, i)) {
      emit(tokens[i].begin, tokens[i + m->length - 1].end, *m->payloads);
      i += m->length;
    } else {
      ++i;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Disambiguation

enum class GeoMethod { native_geotag, text_disambiguation };

inline std::string_view to_string(GeoMethod m) {
  return m == GeoMethod::native_geotag ? "native_geotag" : "text_disambiguation";
}

inline std::optional<GeoMethod> parse_geo_method(std::string_view s) {
  if (s == "native_geotag") return GeoMethod::native_geotag;
  if (s == "text_disambiguation") return GeoMethod::text_disambiguation;
  return std::nullopt;
}

struct GeoResolution {
  std::string post_id;
  std::string entry_id;
  std::string name;
  int admin_level = 15;
  double score = 0;
  GeoMethod method = GeoMethod::text_disambiguation;
  geo::LatLon point;     // entry centroid, or the post's own coordinates for geotags
  bool generic = false;  // country-level mention, excluded from region rollups

  friend bool operator==(const GeoResolution&, const GeoResolution&) = default;
};

struct DisambiguationConfig {
  double coherence_weight = 0.6;
  double rank_weight = 0.4;
  int rounds = 2;
};

namespace detail {

/// Ordering used to break score ties: finer admin level, then higher
/// importance, then smaller entry id.
inline bool tie_precedes(const GazetteerEntry& a, const GazetteerEntry& b) {
  if (a.admin_level != b.admin_level) return a.admin_level > b.admin_level;
  if (a.importance != b.importance) return a.importance > b.importance;
  return a.entry_id < b.entry_id;
}

inline constexpr double kScoreEpsilon = 1e-12;

}  // namespace detail

/// Coherence of placing a mention at `c` given where the other mentions sit:
/// 1 / (1 + mean distance in km). Zero when there are no other mentions.
inline double coherence(const GazetteerEntry& c, std::span<const geo::LatLon> others) {
  if (others.empty()) return 0.0;
  double sum = 0;
  for (const auto& o : others) sum += geo::haversine_km(c.centroid, o);
  return 1.0 / (1.0 + sum / static_cast<double>(others.size()));
}

/// Picks one candidate per mention by iterated best response. Every mention
/// starts at its most important candidate; each round re-scores all
/// candidates against the other mentions' previous choices:
///   score = coherence_weight * coherence + rank_weight * importance.
inline std::vector<GeoResolution> disambiguate(std::span<const Mention> mentions, const Gazetteer& gaz,
                                               const DisambiguationConfig& cfg = {}) {
  const std::size_t n = mentions.size();
  std::vector<Gazetteer::Index> chosen(n);
  for (std::size_t m = 0; m < n; ++m) {
    if (mentions[m].candidates.empty()) throw Error("geoloc", "mention without candidates");
    chosen[m] = *std::min_element(mentions[m].candidates.begin(), mentions[m].candidates.end(),
                                  [&](auto a, auto b) {
                                    const auto& x = gaz[a];
                                    const auto& y = gaz[b];
                                    if (x.importance != y.importance) return x.importance > y.importance;
                                    return detail::tie_precedes(x, y);
                                  });
  }

  auto score_of = [&](std::size_t m, Gazetteer::Index cand, const std::vector<Gazetteer::Index>& state) {
    std::vector<geo::LatLon> others;
    others.reserve(n);
    for (std::size_t o = 0; o < n; ++o)
      if (o != m) others.push_back(gaz[state[o]].centroid);
    const auto& e = gaz[cand];
    return cfg.coherence_weight * coherence(e, others) + cfg.rank_weight * e.importance;
  };

  for (int round = 0; round < cfg.rounds; ++round) {
    std::vector<Gazetteer::Index> next(n);
    for (std::size_t m = 0; m < n; ++m) {
      std::optional<Gazetteer::Index> best;
      double best_score = 0;
      for (auto cand : mentions[m].candidates) {
        const double s = score_of(m, cand, chosen);
        if (!best || s > best_score + detail::kScoreEpsilon ||
            (std::abs(s - best_score) <= detail::kScoreEpsilon && detail::tie_precedes(gaz[cand], gaz[*best]))) {
          best = cand;
          best_score = s;
        }
      }
      next[m] = *best;
    }
    chosen = std::move(next);
  }

  std::vector<GeoResolution> out;
  out.reserve(n);
  for (std::size_t m = 0; m < n; ++m) {
    const auto& e = gaz[chosen[m]];
    out.push_back({mentions[m].post_id, e.entry_id, e.name, e.admin_level, score_of(m, chosen[m], chosen),
                   GeoMethod::text_disambiguation, e.centroid, false});
  }
  return out;
}

/// Mention extraction plus disambiguation for many posts; per-post work runs
/// in parallel and results are concatenated in post order.
inline std::vector<GeoResolution> resolve_posts(std::span<const Post> posts, const Gazetteer& gaz,
                                                const DisambiguationConfig& cfg = {}, const NerPlugin& ner = {},
                                                unsigned threads = 1) {
  auto per_post = parallel_map<std::vector<GeoResolution>>(posts.size(), threads, [&](std::size_t i) {
    const auto mentions = extract_mentions(posts[i], gaz, ner);
    return disambiguate(mentions, gaz, cfg);
  });
  std::vector<GeoResolution> out;
  for (auto& v : per_post) out.insert(out.end(), std::make_move_iterator(v.begin()), std::make_move_iterator(v.end()));
  return out;
}

// ---------------------------------------------------------------------------
// National boundary

struct Boundary {
  std::string country;
  std::optional<geo::BBox> bbox;
  std::vector<geo::Ring> rings;

  bool contains(geo::LatLon p) const {
    if (!rings.empty()) return geo::rings_contain(rings, p);
    return bbox && bbox->contains(p);
  }
};

/// {"country": "TH", "bbox": [min_lat, min_lon, max_lat, max_lon]} or
/// {"country": "TH", "rings": [[[lat, lon], ...], ...]}.
inline Boundary load_boundary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("geoloc", "cannot read boundary '" + path.string() + "'");
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error("geoloc", path.string() + " is not a JSON object");
  Boundary b;
  try {
    b.country = j.at("country").get<std::string>();
    if (j.contains("bbox")) {
      const auto bb = j.at("bbox").get<std::vector<double>>();
      if (bb.size() != 4) throw std::invalid_argument("bbox needs 4 numbers");
      b.bbox = geo::BBox{bb[0], bb[1], bb[2], bb[3]};
      if (!b.bbox->valid()) throw std::invalid_argument("invalid bbox");
    }
    if (j.contains("rings"))
      for (const auto& ring : j.at("rings")) {
        geo::Ring r;
        for (const auto& pt : ring) r.push_back({pt.at(0).get<double>(), pt.at(1).get<double>()});
        if (r.size() < 3) throw std::invalid_argument("ring needs at least 3 points");
        b.rings.push_back(std::move(r));
      }
  } catch (const std::exception& ex) {
    throw Error("geoloc", path.string() + ": " + ex.what());
  }
  if (!b.bbox && b.rings.empty()) throw Error("geoloc", path.string() + ": boundary has neither bbox nor rings");
  return b;
}

/// Keeps resolutions whose gazetteer centroid lies inside the boundary.
/// Country-level resolutions are kept but flagged generic.
inline std::vector<GeoResolution> country_filter(std::span<const GeoResolution> resolutions, const Gazetteer& gaz,
                                                 std::string_view country, const Boundary* boundary) {
  if (!boundary || boundary->country != country)
    throw Error("geoloc", "no boundary available for country '" + std::string(country) + "'");
  std::vector<GeoResolution> out;
  for (const auto& r : resolutions) {
    const auto* e = gaz.find(r.entry_id);
    if (!e || !boundary->contains(e->centroid)) continue;
    auto kept = r;
    kept.generic = r.method == GeoMethod::text_disambiguation && r.admin_level == kCountryLevel;
    out.push_back(std::move(kept));
  }
  return out;
}

/// Gazetteer entry with the smallest bbox containing p (ties: finer level,
/// then entry id).
inline const GazetteerEntry* smallest_enclosing(const Gazetteer& gaz, geo::LatLon p) {
  const GazetteerEntry* best = nullptr;
  for (const auto& e : gaz.entries()) {
    if (!e.bbox.contains(p)) continue;
    if (!best || e.bbox.area() < best->bbox.area() ||
        (e.bbox.area() == best->bbox.area() && detail::tie_precedes(e, *best)))
      best = &e;
  }
  return best;
}

/// Native geotags inside the boundary become resolutions bound to the
/// smallest enclosing gazetteer entry; they are listed first, followed by
/// the text resolutions. Nothing is deduplicated across methods.
inline std::vector<GeoResolution> merge_native(std::span<const Post> posts, std::span<const GeoResolution> text_res,
                                               const Gazetteer& gaz, const Boundary& boundary) {
  std::vector<GeoResolution> out;
  for (const auto& p : posts) {
    if (!p.native_geo || !boundary.contains(*p.native_geo)) continue;
    const auto* e = smallest_enclosing(gaz, *p.native_geo);
    if (!e) continue;
    out.push_back({p.id, e->entry_id, e->name, e->admin_level, 1.0, GeoMethod::native_geotag, *p.native_geo, false});
  }
  out.insert(out.end(), text_res.begin(), text_res.end());
  return out;
}

// ---------------------------------------------------------------------------
// Export

/// CSV: post_id,entry_id,name,admin_level,lat,lon,method,score
inline void write_resolutions_csv(std::ostream& os, std::span<const GeoResolution> res) {
  os << "post_id,entry_id,name,admin_level,lat,lon,method,score\n";
  for (const auto& r : res)
    csv::write_row(os, {r.post_id, r.entry_id, r.name, std::to_string(r.admin_level), format_number(r.point.lat),
                        format_number(r.point.lon), std::string(to_string(r.method)), format_number(r.score)});
}

inline std::vector<GeoResolution> read_resolutions_csv(const std::string& path) {
  const auto t = csv::read_file(path, "geoloc");
  const char* cols[] = {"post_id", "entry_id", "name", "admin_level", "lat", "lon", "method", "score"};
  std::size_t idx[8];
  for (int i = 0; i < 8; ++i) {
    auto c = t.column(cols[i]);
    if (!c) throw Error("geoloc", path + ": missing column '" + cols[i] + "'");
    idx[i] = *c;
  }
  std::vector<GeoResolution> out;
  for (const auto& row : t.rows) {
    if (row.size() < t.header.size()) throw Error("geoloc", path + ": short row");
    GeoResolution r;
    r.post_id = row[idx[0]];
    r.entry_id = row[idx[1]];
    r.name = row[idx[2]];
    auto level = parse_integer(row[idx[3]]);
    auto lat = parse_number(row[idx[4]]);
    auto lon = parse_number(row[idx[5]]);
    auto method = parse_geo_method(row[idx[6]]);
    auto score = parse_number(row[idx[7]]);
    if (!level || !lat || !lon || !method || !score) throw Error("geoloc", path + ": malformed row");
    r.admin_level = static_cast<int>(*level);
    r.point = {*lat, *lon};
    r.method = *method;
    r.score = *score;
    r.generic = r.method == GeoMethod::text_disambiguation && r.admin_level == kCountryLevel;
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace floodsense
