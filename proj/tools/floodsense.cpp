// Command-line front end: monitor, run, expand, report.
//
// Exit codes: 0 success (monitor: no trigger), 10 monitor fired, 1 error.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "floodsense/floodsense.hpp"

namespace fs = std::filesystem;
using namespace floodsense;

namespace {

constexpr int kExitFired = 10;

struct CommonFlags {
  std::string config;
  std::string window_start, window_end;
  std::string out_dir;
  unsigned threads = 1;
};

void add_common(CLI::App* app, CommonFlags& f, bool need_config) {
  auto* opt = app->add_option("--config", f.config, "Pipeline configuration (JSON)");
  if (need_config) opt->required();
  app->add_option("--window-start", f.window_start, "Override window start (RFC 3339)");
  app->add_option("--window-end", f.window_end, "Override window end (RFC 3339)");
  app->add_option("--out-dir", f.out_dir, "Override output directory");
  app->add_option("--threads", f.threads, "Worker threads")->check(CLI::Range(1u, 256u));
}

RunOptions options_from(const CommonFlags& f) {
  RunOptions o;
  o.threads = f.threads;
  if (!f.out_dir.empty()) o.out_dir = fs::path(f.out_dir);
  if (!f.window_start.empty() || !f.window_end.empty()) {
    if (f.window_start.empty() || f.window_end.empty())
      throw Error("cli", "--window-start and --window-end must be given together");
    o.window = parse_window(f.window_start, f.window_end);
  }
  return o;
}

void print_decision(const TriggerDecision& d, const CountSeries& s) {
  if (d.fired)
    std::cout << "trigger fired at bucket " << *d.bucket_index << " (" << format_rfc3339(s.bucket_start(*d.bucket_index))
              << "): observed " << d.observed << ", baseline " << format_number(d.baseline_mean) << ", ratio "
              << format_number(d.ratio) << '\n';
  else
    std::cout << "no trigger (max ratio " << format_number(d.ratio) << ")\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Flood alerting from social-media posts"};
  app.require_subcommand(1);

  CommonFlags monitor_f, run_f, expand_f, report_f;
  bool force = false, skip_expansion = false, timings = false;
  std::string demo;

  auto* monitor = app.add_subcommand("monitor", "Count matching posts per bucket and evaluate the trigger");
  add_common(monitor, monitor_f, true);

  auto* run = app.add_subcommand("run", "Run the full pipeline for one window");
  add_common(run, run_f, true);
  run->add_flag("--force", force, "Run even when the trigger did not fire");
  run->add_flag("--skip-expansion", skip_expansion, "Skip the text-only expansion stage");
  run->add_flag("--timings", timings, "Record per-item filter latency in verdicts.csv");

  auto* expand = app.add_subcommand("expand", "Re-run expansion against a previous run");
  add_common(expand, expand_f, true);

  auto* report = app.add_subcommand("report", "Regenerate text reports, or print a stored reference case");
  add_common(report, report_f, false);
  report->add_option("--demo", demo, "Stored reference case")
      ->check(CLI::IsMember({"thailand", "nepal-june", "nepal-july"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*monitor) {
      const auto c = load_config(monitor_f.config);
      const auto m = cmd_monitor(c, options_from(monitor_f));
      print_decision(m.decision, m.series);
      return m.decision.fired ? kExitFired : 0;
    }
    if (*run) {
      const auto c = load_config(run_f.config);
      auto o = options_from(run_f);
      o.force = force;
      o.skip_expansion = skip_expansion;
      o.timings = timings;
      const auto r = cmd_run(c, o);
      print_decision(r.monitor.decision, r.monitor.series);
      if (!r.ran) {
        std::cout << "pipeline not run (use --force to override)\n";
        return 0;
      }
      emit_funnel_report(std::cout, r.funnel);
      if (r.expansion)
        std::cout << "expansion: " << r.expansion->promising << " promising of " << r.expansion->text_only
                  << " text-only posts, " << r.expansion->added.size() << " places added\n";
      return 0;
    }
    if (*expand) {
      const auto c = load_config(expand_f.config);
      const auto x = cmd_expand(c, options_from(expand_f));
      std::cout << "expansion: " << x.promising << " promising of " << x.text_only << " text-only posts, "
                << x.added.size() << " places added\n";
      return 0;
    }
    if (*report) {
      if (!demo.empty()) {
        const auto rc = demo == "thailand"     ? reference::thailand_2021()
                        : demo == "nepal-june" ? reference::nepal_june_2021()
                                               : reference::nepal_july_2021();
        reference::emit_reference_report(std::cout, rc);
        return 0;
      }
      if (report_f.config.empty()) throw Error("cli", "report needs --config or --demo");
      const auto c = load_config(report_f.config);
      const auto out_dir = effective_out_dir(c, options_from(report_f));
      cmd_report(c, out_dir);
      std::ifstream in(out_dir / "funnel.txt");
      std::cout << in.rdbuf();
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
