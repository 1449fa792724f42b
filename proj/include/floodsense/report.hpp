#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "floodsense/csv.hpp"
#include "floodsense/error.hpp"
#include "floodsense/geoloc.hpp"
#include "floodsense/mediafilter.hpp"
#include "floodsense/monitor.hpp"

namespace floodsense {

// ---------------------------------------------------------------------------
// Region aggregation

struct RegionAggregate {
  std::string entry_id;
  std::string region_name;
  int admin_level = 4;
  std::size_t count = 0;
  std::optional<long long> population;
  std::optional<double> per_capita;
};

struct RollupResult {
  std::vector<RegionAggregate> regions;  // sorted by entry_id
  std::size_t unassigned = 0;
  std::size_t generic_excluded = 0;
};

/// Assigns every non-generic resolution to the region at `target_level`
/// whose bbox contains its point (smallest bbox wins). Resolutions already
/// at the target level map to their own entry.
inline RollupResult rollup(std::span<const GeoResolution> resolutions, const Gazetteer& gaz, int target_level) {
  std::vector<const GazetteerEntry*> regions;
  for (const auto& e : gaz.entries())
    if (e.admin_level == target_level) regions.push_back(&e);

  RollupResult out;
  std::map<std::string, RegionAggregate> acc;
  for (const auto& r : resolutions) {
    if (r.generic) {
      ++out.generic_excluded;
      continue;
    }
    const GazetteerEntry* region = nullptr;
    if (r.admin_level == target_level) region = gaz.find(r.entry_id);
    if (!region && r.admin_level > target_level) {
      for (const auto* cand : regions) {
        if (!cand->bbox.contains(r.point)) continue;
        if (!region || cand->bbox.area() < region->bbox.area() ||
            (cand->bbox.area() == region->bbox.area() && cand->entry_id < region->entry_id))
          region = cand;
      }
    }
    if (!region) {
      ++out.unassigned;
      continue;
    }
    auto& a = acc[region->entry_id];
    a.entry_id = region->entry_id;
    a.region_name = region->name;
    a.admin_level = region->admin_level;
    ++a.count;
  }
  for (auto& [_, a] : acc) out.regions.push_back(std::move(a));
  return out;
}

/// Keys are entry ids or region names.
using PopulationTable = std::map<std::string, long long>;

/// CSV with a header; first column is the key, second the population.
/// Rows with a non-positive population are skipped with a warning.
inline PopulationTable load_population_csv(const std::filesystem::path& path) {
  const auto t = csv::read_file(path.string(), "report");
  PopulationTable out;
  for (const auto& row : t.rows) {
    if (row.size() < 2) continue;
    auto v = parse_integer(row[1]);
    if (!v || *v <= 0) {
      warn("report", "population for '" + row[0] + "' is not a positive integer, skipped");
      continue;
    }
    out[row[0]] = *v;
  }
  return out;
}

/// Fills population and per_capita where the table knows the region;
/// unknown regions keep both absent.
inline std::vector<RegionAggregate> normalize(std::span<const RegionAggregate> aggregates,
                                              const PopulationTable& population) {
  std::vector<RegionAggregate> out(aggregates.begin(), aggregates.end());
  for (auto& a : out) {
    a.population.reset();
    a.per_capita.reset();
    auto it = population.find(a.entry_id);
    if (it == population.end()) it = population.find(a.region_name);
    if (it == population.end()) continue;
    if (it->second <= 0) {
      warn("report", "non-positive population for '" + a.region_name + "'");
      continue;
    }
    a.population = it->second;
    a.per_capita = static_cast<double>(a.count) / static_cast<double>(it->second);
  }
  return out;
}

/// CSV: entry_id,name,admin_level,count,population,per_capita. The
/// unassigned bucket is written as a final row with entry_id "unassigned".
inline void write_aggregates_csv(std::ostream& os, const RollupResult& r, std::span<const RegionAggregate> regions) {
  os << "entry_id,name,admin_level,count,population,per_capita\n";
  for (const auto& a : regions)
    csv::write_row(os, {a.entry_id, a.region_name, std::to_string(a.admin_level), std::to_string(a.count),
                        a.population ? std::to_string(*a.population) : "",
                        a.per_capita ? format_number(*a.per_capita) : ""});
  csv::write_row(os, {"unassigned", "", "", std::to_string(r.unassigned), "", ""});
}

// ---------------------------------------------------------------------------
// GeoJSON

inline nlohmann::ordered_json geojson_points(std::span<const GeoResolution> res) {
  nlohmann::ordered_json fc;
  fc["type"] = "FeatureCollection";
  fc["features"] = nlohmann::ordered_json::array();
  for (const auto& r : res) {
    nlohmann::ordered_json f;
    f["type"] = "Feature";
    f["geometry"] = {{"type", "Point"}, {"coordinates", {r.point.lon, r.point.lat}}};
    f["properties"] = {{"post_id", r.post_id},   {"entry_id", r.entry_id},
                       {"name", r.name},         {"admin_level", r.admin_level},
                       {"method", to_string(r.method)}, {"score", r.score}};
    fc["features"].push_back(std::move(f));
  }
  return fc;
}

/// Region features use the gazetteer bbox as a closed polygon ring.
inline nlohmann::ordered_json geojson_regions(std::span<const RegionAggregate> regions, const Gazetteer& gaz) {
  nlohmann::ordered_json fc;
  fc["type"] = "FeatureCollection";
  fc["features"] = nlohmann::ordered_json::array();
  for (const auto& a : regions) {
    const auto* e = gaz.find(a.entry_id);
    nlohmann::ordered_json f;
    f["type"] = "Feature";
    if (e) {
      const auto& b = e->bbox;
      f["geometry"] = {{"type", "Polygon"},
                       {"coordinates",
                        {{{b.min_lon, b.min_lat},
                          {b.max_lon, b.min_lat},
                          {b.max_lon, b.max_lat},
                          {b.min_lon, b.max_lat},
                          {b.min_lon, b.min_lat}}}}};
    } else {
      f["geometry"] = nullptr;
    }
    f["properties"] = {{"entry_id", a.entry_id},
                       {"name", a.region_name},
                       {"admin_level", a.admin_level},
                       {"count", a.count},
                       {"population", a.population ? nlohmann::ordered_json(*a.population) : nullptr},
                       {"per_capita", a.per_capita ? nlohmann::ordered_json(*a.per_capita) : nullptr}};
    fc["features"].push_back(std::move(f));
  }
  return fc;
}

inline void write_json_file(const std::filesystem::path& path, const nlohmann::ordered_json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("report", "cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
  if (!out) throw Error("report", "write failed for '" + path.string() + "'");
}

inline void emit_geojson(std::span<const GeoResolution> res, const std::filesystem::path& path) {
  write_json_file(path, geojson_points(res));
}

inline void emit_geojson(std::span<const RegionAggregate> regions, const Gazetteer& gaz,
                         const std::filesystem::path& path) {
  write_json_file(path, geojson_regions(regions, gaz));
}

// ---------------------------------------------------------------------------
// Funnel

/// Stage cardinalities of one run plus the breakdown needed to check that
/// every stage accounts for its input.
struct FunnelCounts {
  std::uint64_t all_posts = 0;        // in window, matching the query, retweets included
  std::uint64_t no_retweets = 0;
  std::uint64_t with_images = 0;
  std::uint64_t native_locations = 0; // non-retweets carrying coordinates
  std::uint64_t overall_images = 0;
  std::uint64_t passed_filters = 0;
  std::uint64_t places_geolocated = 0;

  std::uint64_t retweets = 0;
  std::uint64_t text_only = 0;
  std::uint64_t unreadable_images = 0;
  std::vector<StageCount> media_stages;
  std::uint64_t native_in_country = 0;
  std::uint64_t native_outside = 0;    // outside the boundary or no enclosing entry
  std::uint64_t text_candidates = 0;   // text resolutions before the country filter
  std::uint64_t text_outside = 0;
  std::uint64_t text_in_country = 0;
  std::uint64_t text_generic = 0;
};

inline const char* const kFunnelLabels[] = {
    "All tweets",        "No retweets",          "Containing images", "Native Twitter locations",
    "Overall images",    "Passed image filters", "Places geolocated"};

inline std::vector<std::pair<std::string, std::uint64_t>> funnel_rows(const FunnelCounts& f) {
  const std::uint64_t v[] = {f.all_posts,      f.no_retweets,    f.with_images,      f.native_locations,
                             f.overall_images, f.passed_filters, f.places_geolocated};
  std::vector<std::pair<std::string, std::uint64_t>> rows;
  for (std::size_t i = 0; i < 7; ++i) rows.emplace_back(kFunnelLabels[i], v[i]);
  return rows;
}

/// Human-readable list of broken conservation or subset relations; empty
/// when the funnel is consistent.
inline std::vector<std::string> funnel_violations(const FunnelCounts& f) {
  std::vector<std::string> bad;
  auto check = [&](bool ok, const std::string& what) {
    if (!ok) bad.push_back(what);
  };
  check(f.retweets + f.no_retweets == f.all_posts, "all = retweets + no retweets");
  check(f.with_images + f.text_only == f.no_retweets, "no retweets = with images + text only");
  check(f.native_locations <= f.no_retweets, "native locations <= no retweets");
  check(f.with_images <= f.no_retweets, "with images <= no retweets");
  std::uint64_t removed = 0;
  std::uint64_t expected_input = f.overall_images - f.unreadable_images;
  for (const auto& s : f.media_stages) {
    check(s.input == expected_input, "stage '" + s.name + "' input equals previous survivors");
    check(s.removed <= s.input, "stage '" + s.name + "' removes at most its input");
    expected_input = s.input - std::min(s.removed, s.input);
    removed += s.removed;
  }
  check(f.passed_filters == expected_input, "passed = survivors of last stage");
  check(f.unreadable_images + removed + f.passed_filters == f.overall_images,
        "images = unreadable + removed + passed");
  check(f.passed_filters <= f.overall_images, "passed <= overall images");
  check(f.native_in_country + f.native_outside == f.native_locations, "native = in country + outside");
  check(f.text_in_country + f.text_outside == f.text_candidates, "text candidates = in country + outside");
  check(f.text_generic <= f.text_in_country, "generic <= text in country");
  check(f.native_in_country + f.text_in_country == f.places_geolocated, "places = native + text in country");
  return bad;
}

inline nlohmann::ordered_json to_json(const FunnelCounts& f) {
  nlohmann::ordered_json j;
  for (const auto& [label, n] : funnel_rows(f)) j["rows"][label] = n;
  auto& b = j["breakdown"];
  b["retweets"] = f.retweets;
  b["text_only"] = f.text_only;
  b["unreadable_images"] = f.unreadable_images;
  b["media_stages"] = nlohmann::ordered_json::array();
  for (const auto& s : f.media_stages)
    b["media_stages"].push_back({{"name", s.name},
                                 {"stage", to_string(s.stage)},
                                 {"input", s.input},
                                 {"removed", s.removed},
                                 {"failures", s.failures}});
  b["native_in_country"] = f.native_in_country;
  b["native_outside"] = f.native_outside;
  b["text_candidates"] = f.text_candidates;
  b["text_outside"] = f.text_outside;
  b["text_in_country"] = f.text_in_country;
  b["text_generic"] = f.text_generic;
  return j;
}

inline FunnelCounts funnel_from_json(const nlohmann::json& j) {
  FunnelCounts f;
  const auto& r = j.at("rows");
  std::uint64_t* fields[] = {&f.all_posts,      &f.no_retweets,    &f.with_images,      &f.native_locations,
                             &f.overall_images, &f.passed_filters, &f.places_geolocated};
  for (std::size_t i = 0; i < 7; ++i) *fields[i] = r.at(kFunnelLabels[i]).get<std::uint64_t>();
  const auto& b = j.at("breakdown");
  f.retweets = b.at("retweets");
  f.text_only = b.at("text_only");
  f.unreadable_images = b.at("unreadable_images");
  for (const auto& s : b.at("media_stages"))
    f.media_stages.push_back({s.at("name"), parse_filter_stage(s.at("stage").get<std::string>()).value(),
                              s.at("input"), s.at("removed"), s.at("failures")});
  f.native_in_country = b.at("native_in_country");
  f.native_outside = b.at("native_outside");
  f.text_candidates = b.at("text_candidates");
  f.text_outside = b.at("text_outside");
  f.text_in_country = b.at("text_in_country");
  f.text_generic = b.at("text_generic");
  return f;
}

inline void emit_funnel_rows(std::ostream& os, std::span<const std::pair<std::string, std::uint64_t>> rows,
                             std::string_view title) {
  os << "# " << title << '\n';
  for (const auto& [label, n] : rows) os << label << '\t' << n << '\n';
}

/// Table rows in processing order followed by the per-stage breakdown.
inline void emit_funnel_report(std::ostream& os, const FunnelCounts& f) {
  const auto rows = funnel_rows(f);
  emit_funnel_rows(os, rows, "Dataset cardinality through processing");
  os << "\n# Breakdown\n";
  os << "Retweets\t" << f.retweets << '\n';
  os << "Text-only posts\t" << f.text_only << '\n';
  os << "Unreadable images\t" << f.unreadable_images << '\n';
  for (const auto& s : f.media_stages) {
    os << "Removed by " << s.name << " (" << to_string(s.stage) << ")\t" << s.removed << '\n';
    if (s.failures) os << "Failures in " << s.name << " (kept)\t" << s.failures << '\n';
  }
  os << "Native locations in country\t" << f.native_in_country << '\n';
  os << "Native locations outside\t" << f.native_outside << '\n';
  os << "Text places in country\t" << f.text_in_country << '\n';
  os << "Text places outside\t" << f.text_outside << '\n';
  os << "Generic country mentions\t" << f.text_generic << '\n';
}

// ---------------------------------------------------------------------------
// Admin-level histogram

struct AdminLevelRow {
  std::string label;
  int admin_level;
  std::uint64_t count;
};

inline std::string admin_level_label(int level) {
  switch (level) {
    case 2: return "Country";
    case 4: return "Province";
    case 6: return "District";
    case 8: return "Municipality or subdistrict";
    case 10: return "Village or community";
    case 15: return "Other points";
    default: return "Level " + std::to_string(level);
  }
}

/// Levels present in the input, coarse to fine.
inline std::vector<AdminLevelRow> admin_histogram(std::span<const GeoResolution> res) {
  std::map<int, std::uint64_t> counts;
  for (const auto& r : res) ++counts[r.admin_level];
  std::vector<AdminLevelRow> out;
  for (const auto& [level, n] : counts) out.push_back({admin_level_label(level), level, n});
  return out;
}

inline void emit_admin_histogram(std::ostream& os, std::span<const AdminLevelRow> rows) {
  os << "# Administrative level counts\n";
  os << "Level\tAdmin level\tCount\n";
  for (const auto& r : rows) os << r.label << '\t' << r.admin_level << '\t' << r.count << '\n';
}

// ---------------------------------------------------------------------------
// Alert timeline

struct TimelineRow {
  std::string source;
  std::chrono::year_month_day date;
  std::string note;
};

/// Accepts YYYY-MM-DD or DD/MM/YYYY.
inline std::optional<std::chrono::year_month_day> parse_date(std::string_view s) {
  using namespace std::chrono;
  int a, b, c;
  std::optional<year_month_day> ymd;
  if (s.size() == 10 && s[4] == '-' && s[7] == '-' && detail::parse_digits(s, 0, 4, a) &&
      detail::parse_digits(s, 5, 2, b) && detail::parse_digits(s, 8, 2, c))
    ymd = year{a} / month{static_cast<unsigned>(b)} / day{static_cast<unsigned>(c)};
  else if (s.size() == 10 && s[2] == '/' && s[5] == '/' && detail::parse_digits(s, 0, 2, c) &&
           detail::parse_digits(s, 3, 2, b) && detail::parse_digits(s, 6, 4, a))
    ymd = year{a} / month{static_cast<unsigned>(b)} / day{static_cast<unsigned>(c)};
  if (!ymd || !ymd->ok()) return std::nullopt;
  return ymd;
}

/// DD/MM/YYYY
inline std::string format_date(std::chrono::year_month_day d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%02u/%02u/%04d", static_cast<unsigned>(d.day()), static_cast<unsigned>(d.month()),
                static_cast<int>(d.year()));
  return buf;
}

/// Date-sorted merge; rows on the same date keep their input order, with the
/// system's own row (if any) placed first among the external rows.
inline std::vector<TimelineRow> build_alert_timeline(std::optional<TimelineRow> own,
                                                     std::span<const TimelineRow> external) {
  std::vector<TimelineRow> rows;
  if (own) rows.push_back(*own);
  rows.insert(rows.end(), external.begin(), external.end());
  std::stable_sort(rows.begin(), rows.end(), [](const TimelineRow& a, const TimelineRow& b) {
    return std::chrono::sys_days{a.date} < std::chrono::sys_days{b.date};
  });
  return rows;
}

inline std::optional<TimelineRow> own_timeline_row(const TriggerDecision& d, const CountSeries& s,
                                                   std::string source) {
  if (!d.fired || !d.bucket_index) return std::nullopt;
  return TimelineRow{std::move(source), civil_date(s.bucket_start(*d.bucket_index)),
                     "ratio " + format_number(std::round(d.ratio * 100) / 100) + " over baseline"};
}

inline void emit_alert_timeline(std::ostream& os, std::span<const TimelineRow> rows) {
  os << "# Timeline of alerts\n";
  os << "Date\tSource\tNote\n";
  for (const auto& r : rows) os << format_date(r.date) << '\t' << r.source << '\t' << r.note << '\n';
}

}  // namespace floodsense
