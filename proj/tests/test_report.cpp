#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "floodsense/reference_cases.hpp"
#include "floodsense/report.hpp"
#include "floodsense/testing/synthetic.hpp"
#include "test_support.hpp"

using namespace floodsense;
namespace fx = floodsense::testing;
using floodsense::test::TempDir;
using floodsense::test::WarningCapture;

namespace {

Gazetteer thailand() { return Gazetteer::from_entries(fx::toy_thailand_entries()); }

GeoResolution res_at(const Gazetteer& g, const std::string& id, std::string post_id = "p") {
  const auto* e = g.find(id);
  return {std::move(post_id), e->entry_id, e->name, e->admin_level, 0.5, GeoMethod::text_disambiguation,
          e->centroid, e->admin_level == kCountryLevel};
}

std::size_t total(const RollupResult& r) {
  std::size_t n = r.unassigned;
  for (const auto& a : r.regions) n += a.count;
  return n;
}

std::string lines(std::initializer_list<const char*> l) {
  std::string s;
  for (auto* x : l) s += std::string(x) + '\n';
  return s;
}

FunnelCounts consistent_funnel() {
  FunnelCounts f;
  f.all_posts = 100;
  f.retweets = 40;
  f.no_retweets = 60;
  f.with_images = 20;
  f.text_only = 40;
  f.native_locations = 5;
  f.native_in_country = 4;
  f.native_outside = 1;
  f.overall_images = 25;
  f.unreadable_images = 2;
  f.media_stages = {{"dedup", FilterStage::duplicate, 23, 3, 0}, {"photo", FilterStage::non_photo, 20, 6, 1}};
  f.passed_filters = 14;
  f.text_candidates = 12;
  f.text_outside = 2;
  f.text_in_country = 10;
  f.text_generic = 3;
  f.places_geolocated = 14;
  return f;
}

}  // namespace

TEST(Rollup, SingleProvinceAllCounted) {
  const auto g = thailand();
  std::vector<GeoResolution> r;
  for (const char* id : {"th-bkk", "th-bkk-bkp", "th-bkk-brk", "th-bkk-brk"}) r.push_back(res_at(g, id));
  const auto out = rollup(r, g, 4);
  ASSERT_EQ(out.regions.size(), 1u);
  EXPECT_EQ(out.regions[0].entry_id, "th-bkk");
  EXPECT_EQ(out.regions[0].count, 4u);
  EXPECT_EQ(out.unassigned, 0u);
}

TEST(Rollup, DistrictCountsTowardEnclosingProvince) {
  const auto g = thailand();
  // Containment oracle: the province bbox that holds each district centroid.
  for (const char* id : {"th-bkk-bkp", "th-ayu-bpi", "th-ayu-bsi", "th-cmi-mrm", "th-cmi-ssi"}) {
    const auto* d = g.find(id);
    std::string expected;
    for (const auto& e : g.entries())
      if (e.admin_level == 4 && e.bbox.contains(d->centroid)) expected = e.entry_id;
    const auto r = std::vector<GeoResolution>{res_at(g, id)};
    const auto out = rollup(r, g, 4);
    ASSERT_EQ(out.regions.size(), 1u) << id;
    EXPECT_EQ(out.regions[0].entry_id, expected) << id;
  }
}

TEST(Rollup, EmptyInput) {
  const auto out = rollup(std::vector<GeoResolution>{}, thailand(), 4);
  EXPECT_TRUE(out.regions.empty());
  EXPECT_EQ(out.unassigned, 0u);
}

TEST(Rollup, GenericExcludedAndCoarserUnassigned) {
  const auto g = thailand();
  auto outside = res_at(g, "th-bkk-bkp");
  outside.point = {0.0, 0.0};
  std::vector<GeoResolution> r{res_at(g, "th"), res_at(g, "th-cmi"), outside};
  auto coarse = res_at(g, "th");
  coarse.generic = false;  // a native tag bound to the country entry
  r.push_back(coarse);
  const auto out = rollup(r, g, 4);
  EXPECT_EQ(out.generic_excluded, 1u);
  EXPECT_EQ(out.unassigned, 2u);
  ASSERT_EQ(out.regions.size(), 1u);
  EXPECT_EQ(out.regions[0].entry_id, "th-cmi");
}

TEST(Rollup, ConservationOnRandomInput) {
  const auto g = Gazetteer::from_entries(fx::event_gazetteer_entries());
  fx::Rng rng(4);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<GeoResolution> r;
    const int n = fx::uniform_int(rng, 0, 60);
    for (int i = 0; i < n; ++i) {
      auto x = res_at(g, g.entries()[fx::uniform_int(rng, 0, static_cast<int>(g.size()) - 1)].entry_id);
      if (fx::uniform_int(rng, 0, 4) == 0) x.point = {fx::uniform_real(rng, 5, 21), fx::uniform_real(rng, 96, 106)};
      r.push_back(x);
    }
    for (int level : {4, 6}) {
      const auto out = rollup(r, g, level);
      const auto non_generic = static_cast<std::size_t>(std::count_if(r.begin(), r.end(), [](auto& x) { return !x.generic; }));
      EXPECT_EQ(total(out), non_generic);
      EXPECT_EQ(out.generic_excluded + non_generic, r.size());
      for (std::size_t i = 1; i < out.regions.size(); ++i)
        EXPECT_LT(out.regions[i - 1].entry_id, out.regions[i].entry_id);
    }
  }
}

TEST(Normalize, PerCapitaArithmetic) {
  std::vector<RegionAggregate> a{{"th-bkk", "Bangkok", 4, 100, {}, {}}};
  const auto out = normalize(a, {{"th-bkk", 1'000'000}});
  ASSERT_TRUE(out[0].per_capita.has_value());
  EXPECT_DOUBLE_EQ(*out[0].per_capita, 1e-4);
  EXPECT_EQ(out[0].population, 1'000'000);
}

TEST(Normalize, MissingPopulationStaysAbsent) {
  std::vector<RegionAggregate> a{{"th-bkk", "Bangkok", 4, 100, {}, {}}};
  const auto out = normalize(a, {});
  EXPECT_FALSE(out[0].population.has_value());
  EXPECT_FALSE(out[0].per_capita.has_value());
}

TEST(Normalize, NonPositivePopulationWarnsAndSkips) {
  WarningCapture w;
  std::vector<RegionAggregate> a{{"th-bkk", "Bangkok", 4, 10, {}, {}}, {"th-ayu", "Ayutthaya", 4, 5, {}, {}}};
  const auto out = normalize(a, {{"th-bkk", 0}, {"Ayutthaya", -3}});
  EXPECT_FALSE(out[0].per_capita.has_value());
  EXPECT_FALSE(out[1].per_capita.has_value());
  EXPECT_EQ(w.messages.size(), 2u);
}

TEST(Normalize, ThreeProvincesByHand) {
  TempDir dir("pop");
  floodsense::test::write_text(dir / "p.csv", lines({"region,population", "th-bkk,5000000", "Ayutthaya,800000",
                                                      "Chiang Mai,1600000", "Nowhere,0"}));
  WarningCapture w;
  const auto pop = load_population_csv(dir / "p.csv");
  EXPECT_EQ(pop.size(), 3u);
  EXPECT_EQ(w.messages.size(), 1u);
  std::vector<RegionAggregate> a{{"th-bkk", "Bangkok", 4, 250, {}, {}},
                                 {"th-ayu", "Ayutthaya", 4, 40, {}, {}},
                                 {"th-cmi", "Chiang Mai", 4, 8, {}, {}}};
  const auto out = normalize(a, pop);
  EXPECT_DOUBLE_EQ(*out[0].per_capita, 5e-5);
  EXPECT_DOUBLE_EQ(*out[1].per_capita, 5e-5);
  EXPECT_DOUBLE_EQ(*out[2].per_capita, 5e-6);
}

TEST(Aggregates, CsvLayout) {
  RollupResult r;
  r.unassigned = 2;
  std::vector<RegionAggregate> a{{"th-bkk", "Bangkok", 4, 100, 1'000'000, 1e-4}, {"th-ayu", "Ayutthaya", 4, 3, {}, {}}};
  std::ostringstream os;
  write_aggregates_csv(os, r, a);
  EXPECT_EQ(os.str(), lines({"entry_id,name,admin_level,count,population,per_capita",
                             "th-bkk,Bangkok,4,100,1000000,1e-04", "th-ayu,Ayutthaya,4,3,,", "unassigned,,,2,,"}));
}

TEST(GeoJson, EmptyCollection) {
  const auto j = geojson_points(std::vector<GeoResolution>{});
  EXPECT_EQ(j["type"], "FeatureCollection");
  EXPECT_TRUE(j["features"].is_array());
  EXPECT_TRUE(j["features"].empty());
}

TEST(GeoJson, OnePointLonLatOrder) {
  const auto g = thailand();
  const auto j = geojson_points(std::vector<GeoResolution>{res_at(g, "th-bkk")});
  ASSERT_EQ(j["features"].size(), 1u);
  const auto& f = j["features"][0];
  EXPECT_EQ(f["geometry"]["type"], "Point");
  EXPECT_DOUBLE_EQ(f["geometry"]["coordinates"][0].get<double>(), 100.5);
  EXPECT_DOUBLE_EQ(f["geometry"]["coordinates"][1].get<double>(), 13.75);
  EXPECT_EQ(f["properties"]["method"], "text_disambiguation");
  EXPECT_EQ(f["properties"]["name"], "Bangkok");
}

TEST(GeoJson, FileRoundTrip) {
  TempDir dir("gj");
  const auto g = Gazetteer::from_entries(fx::event_gazetteer_entries());
  std::vector<GeoResolution> r;
  fx::Rng rng(2);
  for (int i = 0; i < 40; ++i) {
    auto x = res_at(g, g.entries()[static_cast<std::size_t>(i) % g.size()].entry_id, "p" + std::to_string(i));
    x.point = {fx::uniform_real(rng, -80, 80), fx::uniform_real(rng, -170, 170)};
    r.push_back(x);
  }
  emit_geojson(r, dir / "points.geojson");
  const auto j = nlohmann::json::parse(floodsense::test::read_text(dir / "points.geojson"));
  ASSERT_EQ(j["features"].size(), r.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    const auto& c = j["features"][i]["geometry"]["coordinates"];
    EXPECT_NEAR(c[0].get<double>(), r[i].point.lon, 1e-6);
    EXPECT_NEAR(c[1].get<double>(), r[i].point.lat, 1e-6);
    EXPECT_EQ(j["features"][i]["properties"]["post_id"], r[i].post_id);
  }

  std::vector<RegionAggregate> regions{{"th-bkk", "Bangkok", 4, 7, 100, 0.07}, {"ghost", "Ghost", 4, 1, {}, {}}};
  emit_geojson(regions, g, dir / "regions.geojson");
  const auto rj = nlohmann::json::parse(floodsense::test::read_text(dir / "regions.geojson"));
  ASSERT_EQ(rj["features"].size(), 2u);
  const auto& ring = rj["features"][0]["geometry"]["coordinates"][0];
  EXPECT_EQ(ring.size(), 5u);
  EXPECT_EQ(ring.front(), ring.back());
  EXPECT_EQ(rj["features"][0]["properties"]["count"], 7);
  EXPECT_TRUE(rj["features"][1]["geometry"].is_null());
  EXPECT_TRUE(rj["features"][1]["properties"]["per_capita"].is_null());

  EXPECT_THROW(emit_geojson(r, dir / "no" / "such" / "dir.geojson"), Error);
}

TEST(Funnel, ThailandDemoVerbatim) {
  std::ostringstream os;
  const auto c = reference::thailand_2021();
  emit_funnel_rows(os, c.funnel, "t");
  EXPECT_EQ(os.str(), lines({"# t", "All tweets\t4145447", "No retweets\t66868", "Containing images\t6292",
                             "Native Twitter locations\t227", "Overall images\t8774", "Passed image filters\t3056",
                             "Places geolocated\t1671"}));
}

TEST(Funnel, NepalStoredValues) {
  const auto june = reference::nepal_june_2021().funnel;
  const auto july = reference::nepal_july_2021().funnel;
  const std::uint64_t j6[] = {6639, 2807, 261, 8, 391, 218, 51};
  const std::uint64_t j7[] = {1225, 594, 63, 10, 80, 55, 10};
  for (std::size_t i = 0; i < 7; ++i) {
    EXPECT_EQ(june[i].second, j6[i]);
    EXPECT_EQ(july[i].second, j7[i]);
  }
}

TEST(Funnel, ZeroInputAllZeroRows) {
  const FunnelCounts f;
  EXPECT_TRUE(funnel_violations(f).empty());
  std::ostringstream os;
  emit_funnel_report(os, f);
  const auto s = os.str();
  for (const auto& [label, n] : funnel_rows(f)) {
    EXPECT_EQ(n, 0u);
    EXPECT_NE(s.find(label + "\t0\n"), std::string::npos);
  }
}

TEST(Funnel, ConsistentCountsHaveNoViolations) {
  const auto f = consistent_funnel();
  EXPECT_TRUE(funnel_violations(f).empty());
  const auto rows = funnel_rows(f);
  EXPECT_GE(rows[0].second, rows[1].second);
  EXPECT_GE(rows[1].second, rows[2].second);
}

TEST(Funnel, BrokenCountsAreReported) {
  auto f = consistent_funnel();
  f.passed_filters = 15;
  EXPECT_FALSE(funnel_violations(f).empty());
  f = consistent_funnel();
  f.retweets = 39;
  EXPECT_FALSE(funnel_violations(f).empty());
  f = consistent_funnel();
  f.media_stages[1].input = 21;
  EXPECT_FALSE(funnel_violations(f).empty());
}

TEST(Funnel, JsonRoundTrip) {
  const auto f = consistent_funnel();
  const auto back = funnel_from_json(nlohmann::json::parse(to_json(f).dump()));
  EXPECT_EQ(funnel_rows(back), funnel_rows(f));
  EXPECT_EQ(back.media_stages.size(), 2u);
  EXPECT_EQ(back.media_stages[1].failures, 1u);
  EXPECT_EQ(back.text_generic, f.text_generic);
  EXPECT_TRUE(funnel_violations(back).empty());
}

TEST(AdminHistogram, ThailandStoredRows) {
  const auto rows = reference::thailand_2021().admin_levels;
  std::ostringstream os;
  emit_admin_histogram(os, rows);
  EXPECT_EQ(os.str(), lines({"# Administrative level counts", "Level\tAdmin level\tCount", "Province\t4\t7",
                             "District\t6\t8", "Municipality or subdistrict\t8\t176", "Village or community\t10\t9",
                             "Other points\t15\t1265"}));
}

TEST(AdminHistogram, CountsPerLevelCoarseToFine) {
  const auto g = Gazetteer::from_entries(fx::event_gazetteer_entries());
  std::vector<GeoResolution> r;
  for (const char* id : {"th-poi-wat-arun", "th-bkk", "th-bkk-brk", "th-bkk-brk-slm", "th-bkk", "th-poi-wat-arun"})
    r.push_back(res_at(g, id));
  const auto h = admin_histogram(r);
  ASSERT_EQ(h.size(), 4u);
  EXPECT_EQ(h[0].admin_level, 4);
  EXPECT_EQ(h[0].count, 2u);
  EXPECT_EQ(h[3].label, "Other points");
  EXPECT_EQ(h[3].count, 2u);
}

TEST(Timeline, ThailandOrdering) {
  const auto c = reference::thailand_2021();
  // Feed the rows reversed; the merge must restore date order.
  std::vector<TimelineRow> ext;
  TimelineRow own;
  for (const auto& r : c.timeline)
    if (r.source == "TriggerCit") own = r;
    else ext.insert(ext.begin(), r);
  const auto rows = build_alert_timeline(own, ext);
  std::vector<std::string> got;
  for (const auto& r : rows) got.push_back(format_date(r.date) + " " + r.source);
  EXPECT_EQ(got, (std::vector<std::string>{"24/09/2021 GloFAS", "26/09/2021 TriggerCit",
                                           "27/09/2021 FloodList reported news", "27/09/2021 GDACS Disaster Alerts",
                                           "28/09/2021 UNOSAT activation"}));
}

TEST(Timeline, SingleRow) {
  const TimelineRow own{"floodsense", reference::ymd(2021, 9, 26), ""};
  const auto rows = build_alert_timeline(own, {});
  ASSERT_EQ(rows.size(), 1u);
  std::ostringstream os;
  emit_alert_timeline(os, rows);
  EXPECT_EQ(os.str(), lines({"# Timeline of alerts", "Date\tSource\tNote", "26/09/2021\tfloodsense\t"}));
}

TEST(Timeline, OwnRowFirstOnSameDate) {
  const std::vector<TimelineRow> ext{{"GDACS", reference::ymd(2021, 9, 26), ""}};
  const auto rows = build_alert_timeline(TimelineRow{"own", reference::ymd(2021, 9, 26), ""}, ext);
  EXPECT_EQ(rows[0].source, "own");
}

TEST(Timeline, UnsortedInputIsSorted) {
  fx::Rng rng(12);
  std::vector<TimelineRow> ext;
  for (int i = 0; i < 30; ++i)
    ext.push_back({"s" + std::to_string(i), reference::ymd(2021, static_cast<unsigned>(fx::uniform_int(rng, 1, 12)),
                                                           static_cast<unsigned>(fx::uniform_int(rng, 1, 28))),
                   ""});
  const auto rows = build_alert_timeline(std::nullopt, ext);
  ASSERT_EQ(rows.size(), ext.size());
  for (std::size_t i = 1; i < rows.size(); ++i)
    EXPECT_LE(std::chrono::sys_days{rows[i - 1].date}, std::chrono::sys_days{rows[i].date});
}

TEST(Timeline, DateParsing) {
  EXPECT_EQ(parse_date("2021-09-26"), reference::ymd(2021, 9, 26));
  EXPECT_EQ(parse_date("26/09/2021"), reference::ymd(2021, 9, 26));
  EXPECT_FALSE(parse_date("2021-02-30"));
  EXPECT_FALSE(parse_date("2021/09/26"));
  EXPECT_FALSE(parse_date(""));
}

TEST(Timeline, OwnRowFromTrigger) {
  CountSeries s;
  s.origin = UtcSeconds{1632009600};  // 2021-09-19
  s.counts = {10, 10, 10, 10, 10, 10, 10, 250};
  const auto d = detect_trigger(s, 7, 3.0, 100);
  ASSERT_TRUE(d.fired);
  const auto row = own_timeline_row(d, s, "floodsense");
  ASSERT_TRUE(row);
  EXPECT_EQ(format_date(row->date), "26/09/2021");
  EXPECT_EQ(row->note, "ratio 25 over baseline");
  s.counts.back() = 20;
  EXPECT_FALSE(own_timeline_row(detect_trigger(s, 7, 3.0, 100), s, "x"));
}

TEST(Demo, ReportContainsAllSections) {
  for (const auto& c : reference::all_cases()) {
    std::ostringstream os;
    reference::emit_reference_report(os, c);
    const auto s = os.str();
    EXPECT_NE(s.find("# Dataset cardinality"), std::string::npos);
    EXPECT_NE(s.find("# Timeline of alerts"), std::string::npos);
    EXPECT_EQ(s.find("# Administrative level counts") != std::string::npos, !c.admin_levels.empty());
  }
}
