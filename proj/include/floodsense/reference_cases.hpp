#pragma once

#include <chrono>
#include <cstdint>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "floodsense/report.hpp"

namespace floodsense::reference {

/// Published cardinalities for two 2021 flood activations, kept as stored
/// values so reports can be compared side by side with a new run. Nothing
/// here is recomputed.
struct ReferenceCase {
  std::string name;
  std::vector<std::pair<std::string, std::uint64_t>> funnel;
  std::vector<AdminLevelRow> admin_levels;  // empty when not published
  std::vector<TimelineRow> timeline;
};

inline std::chrono::year_month_day ymd(int y, unsigned m, unsigned d) {
  return std::chrono::year{y} / std::chrono::month{m} / std::chrono::day{d};
}

inline std::vector<std::pair<std::string, std::uint64_t>> labelled(std::initializer_list<std::uint64_t> values) {
  std::vector<std::pair<std::string, std::uint64_t>> rows;
  std::size_t i = 0;
  for (auto v : values) rows.emplace_back(kFunnelLabels[i++], v);
  return rows;
}

/// Thailand, tropical storm Dianmu, 26-27 September 2021.
inline ReferenceCase thailand_2021() {
  return {"thailand-2021",
          labelled({4'145'447, 66'868, 6'292, 227, 8'774, 3'056, 1'671}),
          {{"Province", 4, 7},
           {"District", 6, 8},
           {"Municipality or subdistrict", 8, 176},
           {"Village or community", 10, 9},
           {"Other points", 15, 1'265}},
          {{"GloFAS", ymd(2021, 9, 24), ""},
           {"TriggerCit", ymd(2021, 9, 26), ""},
           {"GDACS Disaster Alerts", ymd(2021, 9, 27), "Green Alert"},
           {"FloodList reported news", ymd(2021, 9, 27), ""},
           {"UNOSAT activation", ymd(2021, 9, 28), ""}}};
}

/// Nepal, 16-17 June 2021 (funnel); the timeline covers the July activation.
inline ReferenceCase nepal_june_2021() {
  return {"nepal-2021-06",
          labelled({6'639, 2'807, 261, 8, 391, 218, 51}),
          {},
          {{"GDACS Disaster Alerts", ymd(2021, 6, 28), "Green Alert"},
           {"GloFAS", ymd(2021, 6, 28), ""},
           {"UNOSAT activation", ymd(2021, 6, 30), ""},
           {"TriggerCit", ymd(2021, 7, 2), ""},
           {"FloodList reported news", ymd(2021, 7, 4), ""}}};
}

/// Nepal, 1-2 July 2021.
inline ReferenceCase nepal_july_2021() {
  return {"nepal-2021-07", labelled({1'225, 594, 63, 10, 80, 55, 10}), {}, nepal_june_2021().timeline};
}

inline std::vector<ReferenceCase> all_cases() { return {thailand_2021(), nepal_june_2021(), nepal_july_2021()}; }

inline void emit_reference_report(std::ostream& os, const ReferenceCase& c) {
  emit_funnel_rows(os, c.funnel, "Dataset cardinality through processing (" + c.name + ", stored values)");
  if (!c.admin_levels.empty()) {
    os << '\n';
    emit_admin_histogram(os, c.admin_levels);
  }
  os << '\n';
  const auto rows = build_alert_timeline(std::nullopt, c.timeline);
  emit_alert_timeline(os, rows);
}

}  // namespace floodsense::reference
