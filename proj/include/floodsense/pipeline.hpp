#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "floodsense/corpus.hpp"
#include "floodsense/error.hpp"
#include "floodsense/expand.hpp"
#include "floodsense/geoloc.hpp"
#include "floodsense/lexicon.hpp"
#include "floodsense/mediafilter.hpp"
#include "floodsense/monitor.hpp"
#include "floodsense/report.hpp"

namespace floodsense {

namespace fs = std::filesystem;

struct PluginSpec {
  std::string name;
  std::optional<double> cost_hint;
  std::optional<double> min_confidence;
};

/// Everything a run needs. Relative paths are resolved against the
/// directory of the config file.
struct PipelineConfig {
  fs::path corpus;
  std::vector<fs::path> dictionaries;
  fs::path gazetteer;
  fs::path boundary;
  std::string country;
  std::optional<TimeWindow> window;
  std::int64_t bucket_width = kSecondsPerDay;
  TriggerConfig trigger;
  int dedup_threshold = 10;
  std::vector<PluginSpec> plugins = {{"nsfw-passthrough", {}, {}}, {"photo-heuristic", {}, {}}};
  DisambiguationConfig geoloc;
  std::size_t keywords = 2;
  double percentile = 0.9;
  IdfVariant idf = IdfVariant::smooth;
  Scorer scorer = Scorer::tfidf;
  std::vector<fs::path> stopwords;
  int rollup_level = 4;
  std::optional<fs::path> population;
  std::vector<TimelineRow> timeline;
  std::string source_name = "floodsense";
  fs::path out_dir = "out";
};

using EnvLookup = std::function<std::optional<std::string>(const char*)>;

inline std::optional<std::string> process_env(const char* name) {
  if (const char* v = std::getenv(name)) return std::string(v);
  return std::nullopt;
}

namespace detail {

inline std::vector<std::string> split_paths(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ':'))
    if (!item.empty()) out.push_back(item);
  return out;
}

}  // namespace detail

/// Parses a JSON config. Path-valued keys can be overridden with
/// FLOODSENSE_CORPUS, FLOODSENSE_DICTIONARIES (colon separated),
/// FLOODSENSE_GAZETTEER, FLOODSENSE_BOUNDARY, FLOODSENSE_POPULATION,
/// FLOODSENSE_STOPWORDS and FLOODSENSE_OUT_DIR.
inline PipelineConfig parse_config(const nlohmann::json& j, const fs::path& base_dir,
                                   const EnvLookup& env = process_env) {
  PipelineConfig c;
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base_dir / p; };
  auto path_key = [&](const char* key, const char* env_name) -> std::optional<fs::path> {
    if (auto v = env(env_name)) return resolve(*v);
    if (j.contains(key) && !j[key].is_null()) return resolve(j[key].get<std::string>());
    return std::nullopt;
  };
  auto path_list = [&](const char* key, const char* env_name) {
    std::vector<fs::path> out;
    if (auto v = env(env_name)) {
      for (const auto& p : detail::split_paths(*v)) out.push_back(resolve(p));
    } else if (j.contains(key)) {
      for (const auto& p : j[key]) out.push_back(resolve(p.get<std::string>()));
    }
    return out;
  };
  try {
    c.corpus = path_key("corpus", "FLOODSENSE_CORPUS").value_or(fs::path{});
    c.dictionaries = path_list("dictionaries", "FLOODSENSE_DICTIONARIES");
    c.gazetteer = path_key("gazetteer", "FLOODSENSE_GAZETTEER").value_or(fs::path{});
    c.boundary = path_key("boundary", "FLOODSENSE_BOUNDARY").value_or(fs::path{});
    c.population = path_key("population", "FLOODSENSE_POPULATION");
    c.stopwords = path_list("stopwords", "FLOODSENSE_STOPWORDS");
    c.out_dir = path_key("out_dir", "FLOODSENSE_OUT_DIR").value_or(base_dir / "out");
    c.country = j.value("country", std::string{});
    if (j.contains("window"))
      c.window = parse_window(j["window"].at("start").get<std::string>(), j["window"].at("end").get<std::string>());
    c.bucket_width = static_cast<std::int64_t>(j.value("bucket_width_hours", 24.0) * kSecondsPerHour);
    if (j.contains("trigger")) {
      const auto& t = j["trigger"];
      c.trigger.baseline_buckets = t.value("baseline_buckets", c.trigger.baseline_buckets);
      c.trigger.ratio_threshold = t.value("ratio_threshold", c.trigger.ratio_threshold);
      c.trigger.min_count = t.value("min_count", c.trigger.min_count);
    }
    c.dedup_threshold = j.value("dedup_threshold", c.dedup_threshold);
    if (j.contains("plugins")) {
      c.plugins.clear();
      for (const auto& p : j["plugins"]) {
        PluginSpec s;
        if (p.is_string()) {
          s.name = p.get<std::string>();
        } else {
          s.name = p.at("name").get<std::string>();
          if (p.contains("cost_hint")) s.cost_hint = p["cost_hint"].get<double>();
          if (p.contains("min_confidence")) s.min_confidence = p["min_confidence"].get<double>();
        }
        c.plugins.push_back(std::move(s));
      }
    }
    if (j.contains("geoloc")) {
      const auto& g = j["geoloc"];
      c.geoloc.coherence_weight = g.value("coherence_weight", c.geoloc.coherence_weight);
      c.geoloc.rank_weight = g.value("rank_weight", c.geoloc.rank_weight);
      c.geoloc.rounds = g.value("rounds", c.geoloc.rounds);
    }
    if (j.contains("expansion")) {
      const auto& e = j["expansion"];
      c.keywords = e.value("keywords", c.keywords);
      c.percentile = e.value("percentile", c.percentile);
      const auto idf_name = e.value("idf", std::string("smooth"));
      if (idf_name == "smooth") c.idf = IdfVariant::smooth;
      else if (idf_name == "plain") c.idf = IdfVariant::plain;
      else throw Error("config", "expansion.idf must be 'smooth' or 'plain'");
      const auto scorer = e.value("scorer", std::string("tfidf"));
      if (scorer == "tfidf") c.scorer = Scorer::tfidf;
      else if (scorer == "cosine") c.scorer = Scorer::cosine;
      else throw Error("config", "expansion.scorer must be 'tfidf' or 'cosine'");
    }
    c.rollup_level = j.value("rollup_level", c.rollup_level);
    c.source_name = j.value("source_name", c.source_name);
    if (j.contains("timeline"))
      for (const auto& r : j["timeline"]) {
        const auto date_s = r.at("date").get<std::string>();
        auto d = parse_date(date_s);
        if (!d) throw Error("config", "invalid timeline date '" + date_s + "'");
        c.timeline.push_back({r.at("source").get<std::string>(), *d, r.value("note", std::string{})});
      }
  } catch (const nlohmann::json::exception& ex) {
    throw Error("config", ex.what());
  }
  return c;
}

inline PipelineConfig load_config(const fs::path& path, const EnvLookup& env = process_env) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("config", "cannot read config '" + path.string() + "'");
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error("config", path.string() + " is not a JSON object");
  return parse_config(j, path.parent_path(), env);
}

/// Checks ranges and that referenced files exist. `need_geo` covers the
/// gazetteer and boundary, which monitoring does not use.
inline void validate(const PipelineConfig& c, bool need_geo) {
  auto must_exist = [](const fs::path& p, const char* what) {
    if (p.empty()) throw Error("config", std::string(what) + " path not set");
    if (!fs::exists(p)) throw Error("config", std::string(what) + " '" + p.string() + "' does not exist");
  };
  must_exist(c.corpus, "corpus");
  if (c.dictionaries.empty()) throw Error("config", "at least one dictionary is required");
  for (const auto& d : c.dictionaries) must_exist(d, "dictionary");
  for (const auto& s : c.stopwords) must_exist(s, "stopword list");
  if (need_geo) {
    must_exist(c.gazetteer, "gazetteer");
    must_exist(c.boundary, "boundary");
    if (c.country.empty()) throw Error("config", "country not set");
    if (c.population) must_exist(*c.population, "population table");
    if (!valid_admin_level(c.rollup_level)) throw Error("config", "rollup_level is not a valid admin level");
  }
  if (c.bucket_width <= 0) throw Error("config", "bucket width must be positive");
  if (c.trigger.baseline_buckets < 1) throw Error("config", "trigger.baseline_buckets must be >= 1");
  if (!(c.trigger.ratio_threshold > 1)) throw Error("config", "trigger.ratio_threshold must be > 1");
  if (c.dedup_threshold < 0 || c.dedup_threshold > 64) throw Error("config", "dedup_threshold must be in [0, 64]");
  if (!(c.percentile > 0 && c.percentile < 1)) throw Error("config", "expansion.percentile must be in (0, 1)");
  if (c.geoloc.rounds < 0) throw Error("config", "geoloc.rounds must be >= 0");
  const auto registry = PluginRegistry::with_builtins();
  for (const auto& p : c.plugins)
    if (!registry.contains(p.name)) throw Error("config", "unknown filter plugin '" + p.name + "'");
}

struct RunOptions {
  std::optional<TimeWindow> window;  // overrides the config window
  std::optional<fs::path> out_dir;
  bool force = false;
  bool skip_expansion = false;
  bool timings = false;
  unsigned threads = 1;
};

namespace detail {

template <typename Fn>
void write_file(const fs::path& path, Fn&& fn) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("report", "cannot write '" + path.string() + "'");
  fn(out);
  if (!out) throw Error("report", "write failed for '" + path.string() + "'");
}

inline std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("expand", "cannot read '" + path.string() + "'");
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(line);
  return out;
}

inline nlohmann::json read_json(const fs::path& path, const char* stage) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(stage, "cannot read '" + path.string() + "'");
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(stage, path.string() + " is not valid JSON");
  return j;
}

}  // namespace detail

/// Inputs shared by the stages, loaded once.
struct LoadedInputs {
  CorpusReadResult corpus;
  std::vector<Dictionary> dictionaries;
  Query query;
};

inline LoadedInputs load_inputs(const PipelineConfig& c) {
  LoadedInputs in;
  in.corpus = read_corpus(c.corpus);
  for (const auto& d : c.dictionaries) in.dictionaries.push_back(load_dictionary(d));
  in.query = build_query(in.dictionaries);
  return in;
}

inline TimeWindow effective_window(const PipelineConfig& c, const RunOptions& o) {
  if (o.window) return *o.window;
  if (c.window) return *c.window;
  throw Error("config", "no time window: set 'window' in the config or pass --window-start/--window-end");
}

inline fs::path effective_out_dir(const PipelineConfig& c, const RunOptions& o) { return o.out_dir.value_or(c.out_dir); }

// ---------------------------------------------------------------------------
// monitor

struct MonitorOutcome {
  CountSeries series;
  TriggerDecision decision;
};

inline MonitorOutcome run_monitor(const PipelineConfig& c, const LoadedInputs& in, const TimeWindow& window,
                                  const fs::path& out_dir) {
  MonitorOutcome m;
  m.series = count_series(in.corpus.posts, in.query, c.bucket_width,
                          monitor_window(window, c.bucket_width, c.trigger.baseline_buckets));
  m.decision = detect_trigger(m.series, c.trigger);
  fs::create_directories(out_dir);
  detail::write_file(out_dir / "series.csv", [&](std::ostream& os) { write_series_csv(os, m.series); });
  detail::write_file(out_dir / "trigger.json",
                     [&](std::ostream& os) { os << to_json(m.decision, m.series).dump(2) << '\n'; });
  return m;
}

inline MonitorOutcome cmd_monitor(const PipelineConfig& c, const RunOptions& o) {
  validate(c, false);
  const auto in = load_inputs(c);
  return run_monitor(c, in, effective_window(c, o), effective_out_dir(c, o));
}

// ---------------------------------------------------------------------------
// expansion

struct ExpandOutcome {
  std::vector<KeywordCount> keywords;
  std::size_t text_only = 0;
  std::size_t promising = 0;
  std::vector<GeoResolution> added;     // from promising posts, in country
  std::vector<GeoResolution> extended;  // base followed by added
};

inline Dictionary merged_seed(const std::vector<Dictionary>& dicts) {
  Dictionary d{"mul", dicts.empty() ? "" : dicts.front().event_type, {}, MatchMode::token};
  for (const auto& x : dicts) d.terms.insert(d.terms.end(), x.terms.begin(), x.terms.end());
  return d;
}

/// Writes keywords.txt, scored.csv and the *_extended outputs.
inline ExpandOutcome run_expansion(const PipelineConfig& c, const RunOptions& o, const LoadedInputs& in,
                                   std::span<const Post> retrieved_no_rt, std::span<const std::string> relevant_ids,
                                   std::span<const GeoResolution> base, const Gazetteer& gaz,
                                   const Boundary& boundary, const fs::path& out_dir) {
  ExpandOutcome x;
  std::set<std::string> relevant(relevant_ids.begin(), relevant_ids.end());
  std::vector<std::string> relevant_texts;
  std::vector<Post> text_only;
  for (const auto& p : retrieved_no_rt) {
    if (relevant.count(p.id)) relevant_texts.push_back(p.text);
    if (!p.has_media()) text_only.push_back(p);
  }
  x.text_only = text_only.size();

  Stopwords stop;
  for (const auto& s : c.stopwords) stop.merge(load_stopwords(s));
  const Dictionary seed = merged_seed(in.dictionaries);
  x.keywords = extract_keywords(relevant_texts, seed, c.keywords, stop);

  std::vector<ScoredPost> marked;
  if (!x.keywords.empty() && !text_only.empty()) {
    Query q = in.query;
    for (const auto& k : x.keywords) {
      const std::string one[] = {k.term};
      q.add(k.term, default_match_mode(one));
    }
    const auto scored = score_posts(text_only, q, {c.idf, c.scorer, o.threads});
    marked = mark_promising(scored.scored, c.percentile);
    std::vector<Post> promising_posts;
    for (std::size_t i = 0; i < text_only.size(); ++i)
      if (marked[i].promising) promising_posts.push_back(text_only[i]);
    x.promising = promising_posts.size();
    const auto res = resolve_posts(promising_posts, gaz, c.geoloc, {}, o.threads);
    x.added = country_filter(res, gaz, c.country, &boundary);
  }
  x.extended.assign(base.begin(), base.end());
  x.extended.insert(x.extended.end(), x.added.begin(), x.added.end());

  detail::write_file(out_dir / "keywords.txt", [&](std::ostream& os) { write_keyword_report(os, x.keywords); });
  detail::write_file(out_dir / "scored.csv", [&](std::ostream& os) { write_scored_csv(os, marked); });
  detail::write_file(out_dir / "resolutions_extended.csv",
                     [&](std::ostream& os) { write_resolutions_csv(os, x.extended); });
  emit_geojson(x.extended, out_dir / "resolutions_extended.geojson");
  const auto roll = rollup(x.extended, gaz, c.rollup_level);
  const auto regions =
      c.population ? normalize(roll.regions, load_population_csv(*c.population)) : roll.regions;
  detail::write_file(out_dir / "aggregates_extended.csv",
                     [&](std::ostream& os) { write_aggregates_csv(os, roll, regions); });
  emit_geojson(regions, gaz, out_dir / "regions_extended.geojson");
  return x;
}

// ---------------------------------------------------------------------------
// run

struct RunOutcome {
  MonitorOutcome monitor;
  bool ran = false;  // false when the trigger did not fire and --force was not given
  FunnelCounts funnel;
  std::vector<FilterVerdict> verdicts;
  std::vector<GeoResolution> base;
  RollupResult rollup;
  std::vector<RegionAggregate> regions;
  std::optional<ExpandOutcome> expansion;
};

/// Retrieval, image filtering, geolocation, aggregation and reports for one
/// window. Outputs depend only on inputs and config.
inline RunOutcome cmd_run(const PipelineConfig& c, const RunOptions& o) {
  validate(c, true);
  const auto window = effective_window(c, o);
  const auto out_dir = effective_out_dir(c, o);
  const auto in = load_inputs(c);

  RunOutcome r;
  r.monitor = run_monitor(c, in, window, out_dir);
  if (!r.monitor.decision.fired && !o.force) return r;
  r.ran = true;

  // Retrieval
  const ReplayFeedClient feed(in.corpus.posts);
  const auto matcher = [&](const Post& p) { return match_post(in.query, p); };
  const auto all = feed.search(matcher, window, false);
  const auto no_rt = drop_retweets(all);
  auto& f = r.funnel;
  f.all_posts = all.size();
  f.no_retweets = no_rt.size();
  f.retweets = f.all_posts - f.no_retweets;
  std::vector<Post> with_images;
  for (const auto& p : no_rt) {
    if (p.has_media()) with_images.push_back(p);
    if (p.native_geo) ++f.native_locations;
  }
  f.with_images = with_images.size();
  f.text_only = f.no_retweets - f.with_images;

  // Image filtering
  const auto media = load_media(with_images, in.corpus.base_dir, o.threads);
  const auto registry = PluginRegistry::with_builtins();
  std::vector<FilterPlugin> plugins;
  for (const auto& spec : c.plugins) {
    auto p = registry.make(spec.name);
    if (spec.cost_hint) p.cost_hint = *spec.cost_hint;
    if (spec.min_confidence) p.min_confidence = *spec.min_confidence;
    plugins.push_back(std::move(p));
  }
  auto filtered = run_filter_pipeline(media, plugins, {c.dedup_threshold, o.threads});
  f.overall_images = media.size();
  f.unreadable_images = filtered.funnel.unreadable;
  f.media_stages = filtered.funnel.stages;
  f.passed_filters = filtered.funnel.passed;
  r.verdicts = std::move(filtered.verdicts);

  std::set<std::string> relevant_set;
  for (std::size_t idx : filtered.kept) relevant_set.insert(media[idx].post_id);
  std::vector<Post> relevant;
  std::vector<std::string> relevant_ids;
  for (const auto& p : with_images)
    if (relevant_set.count(p.id)) {
      relevant.push_back(p);
      relevant_ids.push_back(p.id);
    }

  // Geolocation
  const auto gaz = load_gazetteer(c.gazetteer);
  const auto boundary = load_boundary(c.boundary);
  const auto text_res = resolve_posts(relevant, gaz, c.geoloc, {}, o.threads);
  const auto in_country = country_filter(text_res, gaz, c.country, &boundary);
  r.base = merge_native(no_rt, in_country, gaz, boundary);
  f.text_candidates = text_res.size();
  f.text_in_country = in_country.size();
  f.text_outside = f.text_candidates - f.text_in_country;
  f.text_generic = static_cast<std::uint64_t>(
      std::count_if(in_country.begin(), in_country.end(), [](const GeoResolution& g) { return g.generic; }));
  f.native_in_country = r.base.size() - in_country.size();
  f.native_outside = f.native_locations - f.native_in_country;
  f.places_geolocated = r.base.size();

  // Aggregation and reports
  r.rollup = rollup(r.base, gaz, c.rollup_level);
  r.regions = c.population ? normalize(r.rollup.regions, load_population_csv(*c.population)) : r.rollup.regions;

  const auto w = [&](const char* name, auto&& fn) { detail::write_file(out_dir / name, fn); };
  w("run.json", [&](std::ostream& os) {
    nlohmann::ordered_json j{{"window_start", format_rfc3339(window.start())},
                             {"window_end", format_rfc3339(window.end())},
                             {"forced", !r.monitor.decision.fired}};
    os << j.dump(2) << '\n';
  });
  w("verdicts.csv", [&](std::ostream& os) { write_verdicts_csv(os, r.verdicts, o.timings); });
  w("relevant_posts.txt", [&](std::ostream& os) {
    for (const auto& id : relevant_ids) os << id << '\n';
  });
  w("resolutions.csv", [&](std::ostream& os) { write_resolutions_csv(os, r.base); });
  emit_geojson(r.base, out_dir / "resolutions.geojson");
  w("aggregates.csv", [&](std::ostream& os) { write_aggregates_csv(os, r.rollup, r.regions); });
  emit_geojson(r.regions, gaz, out_dir / "regions.geojson");
  w("funnel.json", [&](std::ostream& os) { os << to_json(f).dump(2) << '\n'; });
  w("funnel.txt", [&](std::ostream& os) { emit_funnel_report(os, f); });
  w("admin_levels.txt", [&](std::ostream& os) {
    const auto hist = admin_histogram(r.base);
    emit_admin_histogram(os, hist);
  });
  w("timeline.txt", [&](std::ostream& os) {
    const auto rows = build_alert_timeline(own_timeline_row(r.monitor.decision, r.monitor.series, c.source_name),
                                           c.timeline);
    emit_alert_timeline(os, rows);
  });

  if (!o.skip_expansion)
    r.expansion = run_expansion(c, o, in, no_rt, relevant_ids, r.base, gaz, boundary, out_dir);
  return r;
}

/// Re-runs the expansion stage against the artifacts of a previous run.
inline ExpandOutcome cmd_expand(const PipelineConfig& c, const RunOptions& o) {
  validate(c, true);
  const auto out_dir = effective_out_dir(c, o);
  for (const char* name : {"run.json", "relevant_posts.txt", "resolutions.csv"})
    if (!fs::exists(out_dir / name))
      throw Error("expand", "no prior run in '" + out_dir.string() + "' (missing " + name + ")");
  const auto manifest = detail::read_json(out_dir / "run.json", "expand");
  const auto window = parse_window(manifest.at("window_start").get<std::string>(),
                                   manifest.at("window_end").get<std::string>());
  const auto in = load_inputs(c);
  const ReplayFeedClient feed(in.corpus.posts);
  const auto no_rt = feed.search([&](const Post& p) { return match_post(in.query, p); }, window, true);
  const auto relevant_ids = detail::read_lines(out_dir / "relevant_posts.txt");
  const auto base = read_resolutions_csv((out_dir / "resolutions.csv").string());
  const auto gaz = load_gazetteer(c.gazetteer);
  const auto boundary = load_boundary(c.boundary);
  return run_expansion(c, o, in, no_rt, relevant_ids, base, gaz, boundary, out_dir);
}

/// Regenerates the text reports of a previous run from its machine-readable
/// artifacts.
inline void cmd_report(const PipelineConfig& c, const fs::path& out_dir) {
  const auto funnel = funnel_from_json(detail::read_json(out_dir / "funnel.json", "report"));
  const auto base = read_resolutions_csv((out_dir / "resolutions.csv").string());
  const auto trigger = detail::read_json(out_dir / "trigger.json", "report");
  detail::write_file(out_dir / "funnel.txt", [&](std::ostream& os) { emit_funnel_report(os, funnel); });
  detail::write_file(out_dir / "admin_levels.txt", [&](std::ostream& os) {
    const auto hist = admin_histogram(base);
    emit_admin_histogram(os, hist);
  });
  std::optional<TimelineRow> own;
  if (trigger.value("fired", false) && trigger["bucket_start"].is_string()) {
    const auto t = parse_rfc3339(trigger["bucket_start"].get<std::string>());
    if (t)
      own = TimelineRow{c.source_name, civil_date(*t),
                        "ratio " + format_number(std::round(trigger.value("ratio", 0.0) * 100) / 100) +
                            " over baseline"};
  }
  detail::write_file(out_dir / "timeline.txt", [&](std::ostream& os) {
    const auto rows = build_alert_timeline(own, c.timeline);
    emit_alert_timeline(os, rows);
  });
}

}  // namespace floodsense
