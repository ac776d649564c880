#include <gtest/gtest.h>

#include <sstream>

#include "ng2c/metrics.hpp"
#include "ng2c/profiler.hpp"
#include "ng2c/verify.hpp"
#include "ng2c/workload.hpp"

namespace {

using namespace ng2c;
using nlohmann::json;

WorkloadSpec spec_of(WorkloadKind kind, std::uint64_t ops, bool pretenure, std::uint64_t seed = 7) {
  WorkloadSpec s;
  s.kind = kind;
  s.name = workload_kind_name(kind);
  s.duration_ops = ops;
  s.pretenure_enabled = pretenure;
  s.seed = seed;
  s.object_size = {64, 192, "uniform"};
  if (kind == WorkloadKind::Buffer) s.retention.live_cohorts = 6;
  if (kind == WorkloadKind::Mixed) s.retention.cache_entries = 512;
  return s;
}

std::string log_text(const RunResult& r) {
  std::ostringstream os;
  write_gc_log(os, r.log, r.summary);
  return os.str();
}

Errc error_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error";
  return Errc::insufficient_data;
}

// --- spec parsing -----------------------------------------------------------

TEST(WorkloadSpec, ParsesAllFields) {
  const json j = json::parse(R"({
    "name": "b", "kind": "Buffer", "duration_ops": 500,
    "op_mix": {"read": 0.4, "write": 0.6},
    "object_size_dist": {"min": 40, "max": 80, "distribution": "exponential"},
    "transient": {"size": {"min": 30, "max": 31}, "per_op": 3, "window": 9},
    "retention": {"cohort_bytes": 4096, "cohort_ops": 0, "live_cohorts": 3},
    "pretenure_enabled": true, "seed": 99, "threads": 2})");
  const WorkloadSpec s = parse_workload(j);
  EXPECT_EQ(s.kind, WorkloadKind::Buffer);
  EXPECT_EQ(s.duration_ops, 500u);
  EXPECT_DOUBLE_EQ(s.read_fraction, 0.4);
  EXPECT_EQ(s.object_size.min, 40u);
  EXPECT_EQ(s.object_size.distribution, "exponential");
  EXPECT_EQ(s.transient.size.max, 31u);
  EXPECT_EQ(s.transient.size.distribution, "uniform");
  EXPECT_EQ(s.transient.per_op, 3u);
  EXPECT_EQ(s.retention.cohort_ops, 0u);
  EXPECT_EQ(s.retention.live_cohorts, 3u);
  EXPECT_TRUE(s.pretenure_enabled);
  EXPECT_EQ(s.seed, 99u);
  EXPECT_EQ(s.threads, 2u);
  EXPECT_EQ(parse_workload(json::parse(to_json(s).dump())).seed, 99u);
  EXPECT_EQ(to_json(parse_workload(json::parse(to_json(s).dump()))), to_json(s));
}

TEST(WorkloadSpec, RejectsInvalidSpecs) {
  auto bad = [](const char* text) {
    EXPECT_EQ(error_of([&] { parse_workload(json::parse(text)); }), Errc::workload_spec) << text;
  };
  bad(R"({"kind": "buffer"})");
  bad(R"({"kind": "heap", "duration_ops": 10})");
  bad(R"({"kind": "churn", "duration_ops": 0})");
  bad(R"({"kind": "churn", "duration_ops": 10, "op_mix": {"read": 0.5, "write": 0.6}})");
  bad(R"({"kind": "churn", "duration_ops": 10, "op_mix": {"read": -0.5, "write": 1.5}})");
  bad(R"({"kind": "churn", "duration_ops": 10, "object_size_dist": {"min": 100, "max": 50}})");
  bad(R"({"kind": "churn", "duration_ops": 10, "object_size_dist": {"distribution": "zipf"}})");
  bad(R"({"kind": "mixed", "duration_ops": 10})");
  bad(R"({"kind": "churn", "duration_ops": "many"})");
  EXPECT_EQ(error_of([] { load_workload("/nonexistent/spec.json"); }), Errc::workload_spec);
}

TEST(WorkloadSpec, BundledSpecsLoad) {
  for (const char* name : {"buffer", "batch", "churn", "mixed"}) {
    const WorkloadSpec s = load_workload(std::string(NG2C_WORKLOADS_DIR) + "/" + name + ".json");
    EXPECT_EQ(s.name, name);
    EXPECT_EQ(workload_kind_name(s.kind), std::string(name));
  }
}

// --- GC log and report ------------------------------------------------------

TEST(GcLog, RoundTripsThroughText) {
  const RunResult r = run_workload(spec_of(WorkloadKind::Buffer, 60000, false), HeapConfig{});
  ASSERT_GT(r.log.size(), 3u);
  std::istringstream in(log_text(r));
  const GcLog back = read_gc_log(in);
  ASSERT_EQ(back.records.size(), r.log.size());
  for (std::size_t i = 0; i < r.log.size(); ++i) {
    EXPECT_EQ(gc_record(back.records[i]), gc_record(r.log[i]));
  }
  EXPECT_EQ(summary_record(back.summary), summary_record(r.summary));
  std::ostringstream again;
  write_gc_log(again, back.records, back.summary);
  EXPECT_EQ(again.str(), log_text(r));
}

TEST(GcLog, MalformedLinesAreRejected) {
  std::istringstream missing_summary(R"({"type":"gc","kind":"minor","epoch":0})" "\n");
  EXPECT_THROW(read_gc_log(missing_summary), Error);
  std::istringstream garbage("not json\n");
  EXPECT_THROW(read_gc_log(garbage), Error);
}

TEST(Report, AggregatesAreRecomputableFromLog) {
  const RunResult r = run_workload(spec_of(WorkloadKind::Mixed, 80000, true), HeapConfig{});
  std::uint64_t copied = 0, rset = 0, promoted = 0, peak = r.summary.tail_peak_regions;
  std::uint64_t minor = 0, mixed = 0, full = 0;
  std::vector<double> cost;
  for (const auto& g : r.log) {
    copied += g.bytes_copied;
    rset += g.rset_updates;
    promoted += g.objects_promoted;
    peak = std::max<std::uint64_t>(peak, g.peak_regions);
    cost.push_back(g.pause_cost_units);
    minor += g.kind == CollectionKind::Minor;
    mixed += g.kind == CollectionKind::Mixed;
    full += g.kind == CollectionKind::Full;
  }
  const MetricsReport& m = r.report;
  EXPECT_EQ(m.collections, r.log.size());
  EXPECT_EQ(m.minor, minor);
  EXPECT_EQ(m.mixed, mixed);
  EXPECT_EQ(m.full, full);
  EXPECT_EQ(m.total_bytes_copied, copied);
  EXPECT_EQ(m.total_rset_updates, rset);
  EXPECT_EQ(m.total_objects_promoted, promoted);
  EXPECT_EQ(m.max_regions_in_use, peak);
  // Nearest rank, computed independently of the library helper.
  std::sort(cost.begin(), cost.end());
  auto rank = [&](double p) {
    std::size_t k = 0;
    while (static_cast<double>(k) * 100.0 < p * static_cast<double>(cost.size())) ++k;
    return cost[std::max<std::size_t>(k, 1) - 1];
  };
  EXPECT_EQ(m.pause_cost.p50, rank(50));
  EXPECT_EQ(m.pause_cost.p90, rank(90));
  EXPECT_EQ(m.pause_cost.p99, rank(99));
  EXPECT_EQ(m.pause_cost.p999, rank(99.9));
  EXPECT_EQ(m.pause_cost.p100, cost.back());
  std::istringstream in(log_text(r));
  EXPECT_EQ(to_json(summarize(read_gc_log(in))), to_json(m));
}

TEST(Report, PercentilesAreMonotone) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> v(1 + rng() % 50);
    for (auto& x : v) x = static_cast<double>(rng() % 1000);
    const Percentiles p = percentiles(v);
    EXPECT_LE(p.p50, p.p90);
    EXPECT_LE(p.p90, p.p99);
    EXPECT_LE(p.p99, p.p999);
    EXPECT_LE(p.p999, p.p100);
    EXPECT_EQ(p.p100, *std::max_element(v.begin(), v.end()));
  }
  EXPECT_EQ(percentile({}, 50), 0.0);
  EXPECT_EQ(percentile({1, 2, 3, 4}, 50), 2.0);
  EXPECT_EQ(percentile({1, 2, 3, 4}, 51), 3.0);
}

TEST(Compare, ReportAgainstItselfIsAllOnes) {
  const RunResult r = run_workload(spec_of(WorkloadKind::Batch, 40000, true), HeapConfig{});
  const ComparisonTable t = compare_report(r.report, r.report);
  ASSERT_FALSE(t.rows.empty());
  for (const auto& row : t.rows) EXPECT_EQ(row.ratio, 1.0) << row.metric;
}

TEST(Compare, MismatchedSeedsAreIncompatible) {
  const RunResult a = run_workload(spec_of(WorkloadKind::Churn, 5000, false, 1), HeapConfig{});
  const RunResult b = run_workload(spec_of(WorkloadKind::Churn, 5000, false, 2), HeapConfig{});
  EXPECT_EQ(error_of([&] { compare_report(a.report, b.report); }), Errc::incompatible_reports);
  const RunResult c = run_workload(spec_of(WorkloadKind::Buffer, 5000, false, 1), HeapConfig{});
  EXPECT_EQ(error_of([&] { compare_report(a.report, c.report); }), Errc::incompatible_reports);
}

TEST(Compare, PretenuredBufferReportsCopyRatioBelowOne) {
  const RunResult a = run_workload(spec_of(WorkloadKind::Buffer, 150000, false), HeapConfig{});
  const RunResult b = run_workload(spec_of(WorkloadKind::Buffer, 150000, true), HeapConfig{});
  const ComparisonTable t = compare_report(a.report, b.report);
  EXPECT_LT(t.row("bytes_copied").ratio, 1.0);
  EXPECT_EQ(t.row("bytes_copied").a, static_cast<double>(a.report.total_bytes_copied));
  EXPECT_NE(format_comparison(t).find("copy reduction"), std::string::npos);
}

// --- workload behaviour ------------------------------------------------------

TEST(Workload, ChurnCopiesAlmostNothingInEitherMode) {
  const HeapConfig cfg;
  for (bool pre : {false, true}) {
    const RunResult r = run_workload(spec_of(WorkloadKind::Churn, 200000, pre), cfg);
    ASSERT_TRUE(r.summary.valid);
    ASSERT_GT(r.report.collections, 5u);
    // Only the short request window is live at each pause.
    const double nursery_bytes = static_cast<double>(r.report.collections * cfg.gen0_max_bytes);
    EXPECT_LT(static_cast<double>(r.report.total_bytes_copied), 0.01 * nursery_bytes);
    EXPECT_LE(r.report.total_objects_promoted, 1u);
    EXPECT_EQ(r.report.full, 0u);
  }
}

TEST(Workload, PretenuredBufferCopiesStrictlyLess) {
  for (std::uint64_t seed : {1, 2}) {
    const RunResult off = run_workload(spec_of(WorkloadKind::Buffer, 150000, false, seed), HeapConfig{});
    const RunResult on = run_workload(spec_of(WorkloadKind::Buffer, 150000, true, seed), HeapConfig{});
    EXPECT_EQ(off.summary.ops_completed, on.summary.ops_completed);
    EXPECT_LT(on.report.total_bytes_copied, off.report.total_bytes_copied);
  }
}

TEST(Workload, BatchPretenuringUsesOneGenerationPerBatch) {
  WorkloadSpec s = spec_of(WorkloadKind::Batch, 30000, true);
  std::set<GenId> seen;
  RunOptions opts;
  opts.checkpoint = [&](std::uint64_t, Runtime& rt) {
    for (GenId g = 2; g < rt.heap().generation_count(); ++g)
      if (!rt.heap().generation(g).regions.empty()) seen.insert(g);
  };
  run_workload(s, HeapConfig{}, opts);
  EXPECT_GE(seen.size(), 2u);
  seen.clear();
  s.pretenure_enabled = false;
  opts.checkpoint = [&](std::uint64_t, Runtime& rt) { EXPECT_EQ(rt.heap().generation_count(), 2u); };
  run_workload(s, HeapConfig{}, opts);
}

TEST(Workload, WriteHeavyMixedBaselineCopiesMore) {
  WorkloadSpec write_heavy = spec_of(WorkloadKind::Mixed, 200000, false);
  write_heavy.read_fraction = 0.25;
  write_heavy.write_fraction = 0.75;
  WorkloadSpec read_heavy = write_heavy;
  read_heavy.read_fraction = 0.75;
  read_heavy.write_fraction = 0.25;
  const RunResult w = run_workload(write_heavy, HeapConfig{});
  const RunResult r = run_workload(read_heavy, HeapConfig{});
  EXPECT_GT(w.report.total_bytes_copied, r.report.total_bytes_copied);
}

TEST(Workload, OutOfMemoryFlagsPartialReportInvalid) {
  HeapConfig cfg;
  cfg.heap_bytes = 4 * MiB;
  cfg.gen0_max_bytes = 1 * MiB;
  WorkloadSpec s = spec_of(WorkloadKind::Buffer, 100000, false);
  s.retention.live_cohorts = 16;
  const RunResult r = run_workload(s, cfg);
  EXPECT_FALSE(r.summary.valid);
  EXPECT_FALSE(r.summary.error.empty());
  EXPECT_LT(r.summary.ops_completed, s.duration_ops);
  EXPECT_EQ(r.report.collections, r.log.size());
}

// --- determinism and equivalence ----------------------------------------------

TEST(Determinism, SameSeedGivesByteIdenticalLogs) {
  for (auto kind : {WorkloadKind::Buffer, WorkloadKind::Batch, WorkloadKind::Churn, WorkloadKind::Mixed}) {
    const WorkloadSpec s = spec_of(kind, 50000, true, 5);
    EXPECT_EQ(log_text(run_workload(s, HeapConfig{})), log_text(run_workload(s, HeapConfig{})))
        << workload_kind_name(kind);
  }
}

TEST(Determinism, PretenuringNeverChangesTheObjectGraph) {
  for (auto kind : {WorkloadKind::Buffer, WorkloadKind::Batch, WorkloadKind::Mixed}) {
    std::vector<std::uint64_t> prints[2];
    for (int pre = 0; pre < 2; ++pre) {
      RunOptions opts;
      opts.checkpoint = [&](std::uint64_t op, Runtime& rt) {
        if (op % 2500 == 0) prints[pre].push_back(graph_fingerprint(rt.heap()));
      };
      const RunResult r = run_workload(spec_of(kind, 40000, pre == 1, 9), HeapConfig{}, opts);
      ASSERT_TRUE(r.summary.valid);
    }
    ASSERT_EQ(prints[0].size(), 16u);
    EXPECT_EQ(prints[0], prints[1]) << workload_kind_name(kind);
  }
}

TEST(Determinism, ProfilerDoesNotChangeTheLog) {
  const WorkloadSpec s = spec_of(WorkloadKind::Buffer, 60000, false, 3);
  Profiler p;
  RunOptions opts;
  opts.profiler = &p;
  const std::string with = log_text(run_workload(s, HeapConfig{}, opts));
  EXPECT_GT(p.collections_observed(), 0u);
  EXPECT_EQ(with, log_text(run_workload(s, HeapConfig{})));
}

TEST(MultiThread, RunStaysConsistent) {
  WorkloadSpec s = spec_of(WorkloadKind::Buffer, 40000, true);
  s.threads = 4;
  const RunResult r = run_workload(s, HeapConfig{});
  EXPECT_TRUE(r.summary.valid) << r.summary.error;
  EXPECT_EQ(r.summary.ops_completed, 40000u);
  EXPECT_GT(r.report.collections, 0u);
  EXPECT_EQ(r.report.collections, r.log.size());
}

}  // namespace
