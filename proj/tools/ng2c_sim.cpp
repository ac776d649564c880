// Command-line front end: run workloads, compare GC logs, profile
// allocation sites, self-test the collector.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ng2c/metrics.hpp"
#include "ng2c/profiler.hpp"
#include "ng2c/selftest.hpp"
#include "ng2c/workload.hpp"

namespace {

using namespace ng2c;

constexpr int kExitRunFailed = 1;
constexpr int kExitUsage = 2;

struct HeapFlags {
  HeapConfig cfg;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> pretenure;
  std::optional<std::uint32_t> threads;
  bool timing = false;

  void attach(CLI::App* app) {
    app->add_option("--heap-bytes", cfg.heap_bytes, "heap size (accepts K/M/G suffixes)")
        ->transform(CLI::AsSizeValue(false));
    app->add_option("--region-bytes", cfg.region_bytes, "region size")->transform(CLI::AsSizeValue(false));
    app->add_option("--gen0-bytes", cfg.gen0_max_bytes, "Gen 0 cap")->transform(CLI::AsSizeValue(false));
    app->add_option("--tlab-bytes", cfg.tlab_bytes, "TLAB size")->transform(CLI::AsSizeValue(false));
    app->add_option("--promotion-age", cfg.promotion_age, "survivals before promotion to Old");
    app->add_option("--mixed-occupancy", cfg.mixed_trigger_occupancy, "heap occupancy that triggers mixed collections");
    app->add_option("--live-threshold", cfg.region_live_threshold, "max live fraction of a non-Gen 0 region in a mixed set");
    app->add_option("--alpha", cfg.rset_scan_cost, "cost units per remembered-set entry scanned");
    app->add_option("--seed", seed, "override the spec's seed");
    app->add_option("--pretenure", pretenure, "override the spec's pretenure flag")
        ->check(CLI::IsMember({"on", "off"}));
    app->add_option("--threads", threads, "mutator threads (more than 1 is not deterministic)");
    app->add_flag("--timing", timing, "record wall-clock pause times (logs are then not reproducible)");
  }

  WorkloadSpec apply(WorkloadSpec spec) const {
    if (seed) spec.seed = *seed;
    if (pretenure) spec.pretenure_enabled = *pretenure == "on";
    if (threads) spec.threads = *threads;
    spec.validate();
    return spec;
  }
};

// Writes to `path`, or stdout when path is empty.
void emit(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw Error(Errc::workload_spec, "cannot write " + path);
  out << text;
}

std::string default_log_path(const std::string& out) {
  if (out.empty()) return {};
  std::filesystem::path p(out);
  p.replace_extension(".gc.jsonl");
  return p.string();
}

int cmd_run(const std::string& spec_path, const HeapFlags& flags, const std::string& out, std::string log,
            const std::string& format) {
  const WorkloadSpec spec = flags.apply(load_workload(spec_path));
  RunOptions opts;
  opts.timing = flags.timing;
  RunResult res = run_workload(spec, flags.cfg, opts);
  if (log.empty()) log = default_log_path(out);
  if (!log.empty()) {
    std::ofstream lf(log);
    if (!lf) throw Error(Errc::workload_spec, "cannot write " + log);
    write_gc_log(lf, res.log, res.summary);
  }
  emit(out, format == "structured" ? to_json(res.report).dump(2) + "\n" : format_report(res.report));
  if (!res.summary.valid) {
    std::cerr << "run aborted: " << res.summary.error << '\n';
    return kExitRunFailed;
  }
  return 0;
}

int cmd_compare(const std::string& a_path, const std::string& b_path, const std::string& out,
                const std::string& format) {
  const MetricsReport a = summarize(read_gc_log_file(a_path));
  const MetricsReport b = summarize(read_gc_log_file(b_path));
  const ComparisonTable t = compare_report(a, b);
  if (format == "structured") {
    nlohmann::ordered_json j;
    j["workload"] = t.workload;
    j["seed"] = t.seed;
    for (const auto& r : t.rows) j["ratios"][r.metric] = {{"a", r.a}, {"b", r.b}, {"ratio", r.ratio}};
    emit(out, j.dump(2) + "\n");
  } else {
    emit(out, format_comparison(t));
  }
  return 0;
}

int cmd_profile(const std::string& spec_path, const HeapFlags& flags, const std::string& out,
                const std::string& format, std::uint64_t long_lived, std::uint64_t tolerance) {
  WorkloadSpec spec = flags.apply(load_workload(spec_path));
  Profiler profiler;
  RunOptions opts;
  opts.timing = flags.timing;
  opts.profiler = &profiler;
  RunResult res = run_workload(spec, flags.cfg, opts);
  const Recommendation rec = profiler.analyze(long_lived, tolerance);
  if (format == "structured") {
    nlohmann::ordered_json j;
    j["workload"] = spec.name;
    j["collections_observed"] = profiler.collections_observed();
    j["pretenure_sites"] = rec.pretenure_sites;
    for (const auto& g : rec.groups) j["groups"].push_back({{"label", g.label}, {"sites", g.sites}});
    for (const auto& s : rec.rationale)
      j["sites"].push_back({{"site", s.site_id},
                            {"deaths", s.deaths},
                            {"censored", s.censored},
                            {"median_lifetime", s.median_lifetime},
                            {"median_death_epoch", s.median_death_epoch}});
    emit(out, j.dump(2) + "\n");
  } else {
    emit(out, format_recommendation(rec));
  }
  return res.summary.valid ? 0 : kExitRunFailed;
}

// Gen 0 size sweep: informational cost-unit curve, not a pass/fail check.
void sweep(const std::string& spec_path, const HeapFlags& flags) {
  WorkloadSpec base;
  if (!spec_path.empty()) {
    base = flags.apply(load_workload(spec_path));
  } else {
    base.kind = WorkloadKind::Buffer;
    base.name = "buffer";
    base.duration_ops = 60000;
  }
  std::cout << "gen0_bytes  pretenure  collections  p50_cost  p100_cost  bytes_copied\n";
  for (std::uint64_t mib : {2, 4, 8, 16}) {
    for (bool pre : {false, true}) {
      HeapConfig cfg = flags.cfg;
      cfg.gen0_max_bytes = mib * MiB;
      WorkloadSpec s = base;
      s.pretenure_enabled = pre;
      RunResult r = run_workload(s, cfg);
      std::cout << std::setw(9) << mib << "M  " << std::setw(9) << (pre ? "on" : "off") << "  " << std::setw(11)
                << r.report.collections << "  " << std::setw(8) << r.report.pause_cost.p50 << "  " << std::setw(9)
                << r.report.pause_cost.p100 << "  " << r.report.total_bytes_copied << '\n';
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Region-based heap simulator with dynamic generations and pretenuring"};
  app.require_subcommand(1);

  std::string spec_path, out, log, format = "text", log_a, log_b;
  HeapFlags flags;
  std::uint64_t long_lived = 4, tolerance = 2, programs = 200, selftest_seed = 1;
  bool do_sweep = false;

  auto add_format = [&](CLI::App* sub) {
    sub->add_option("--out", out, "output file (default: stdout)");
    sub->add_option("--format", format, "report format")->check(CLI::IsMember({"text", "structured"}));
  };

  auto* run = app.add_subcommand("run", "run a workload spec and write a report and GC log");
  run->add_option("spec", spec_path, "workload spec file")->required();
  run->add_option("--log", log, "GC log path (default: next to --out)");
  add_format(run);
  flags.attach(run);

  auto* cmp = app.add_subcommand("compare", "compare two GC logs (ratios b / a)");
  cmp->add_option("log_a", log_a, "baseline GC log")->required();
  cmp->add_option("log_b", log_b, "candidate GC log")->required();
  add_format(cmp);

  auto* prof = app.add_subcommand("profile", "run with the lifetime profiler and print pretenuring advice");
  prof->add_option("spec", spec_path, "workload spec file")->required();
  prof->add_option("--long-lived", long_lived, "median lifetime (collections) that counts as long-lived");
  prof->add_option("--tolerance", tolerance, "max median death epoch gap within one cohort");
  add_format(prof);
  flags.attach(prof);

  auto* self = app.add_subcommand("selftest", "random-program invariant suite");
  self->add_option("--programs", programs, "number of random programs");
  self->add_option("--seed", selftest_seed, "first program seed");
  self->add_flag("--sweep", do_sweep, "also print the Gen 0 size sweep");
  self->add_option("--spec", spec_path, "workload spec for the sweep (default: built-in buffer)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*run) return cmd_run(spec_path, flags, out, log, format);
    if (*cmp) return cmd_compare(log_a, log_b, out, format);
    if (*prof) return cmd_profile(spec_path, flags, out, format, long_lived, tolerance);
    if (*self) {
      SelftestResult r = run_selftest(programs, selftest_seed, &std::cout);
      std::cout << "selftest: " << r.programs << " programs, " << r.collections << " collections, " << r.failures
                << " failures\n";
      for (const auto& m : r.messages) std::cout << "  " << m << '\n';
      if (do_sweep) sweep(spec_path, flags);
      return r.failures ? kExitRunFailed : 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    switch (e.code()) {
      case Errc::workload_spec:
      case Errc::config:
      case Errc::incompatible_reports: return kExitUsage;
      default: return kExitRunFailed;
    }
  }
  return 0;
}
