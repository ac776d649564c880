#ifndef NG2C_METRICS_HPP
#define NG2C_METRICS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ng2c/collector.hpp"
#include "ng2c/errors.hpp"

namespace ng2c {

// Closing record of a GC log: identifies the run and carries the figures
// that are not per-collection.
struct RunSummary {
  std::string workload;
  std::string kind;
  std::uint64_t seed = 0;
  std::uint64_t duration_ops = 0;
  std::uint64_t ops_completed = 0;
  bool pretenure = false;
  double wall_seconds = 0;
  std::uint64_t tail_peak_regions = 0;  // peak after the last collection
  std::uint64_t max_regions_in_use = 0;
  bool valid = true;
  std::string error;
};

// ---------------------------------------------------------------------------
// GC log: one JSON object per line. Collections carry "type":"gc"; the last
// line is the run summary with "type":"summary".

inline nlohmann::ordered_json gc_record(const GcReport& r) {
  nlohmann::ordered_json j;
  j["type"] = "gc";
  j["kind"] = kind_name(r.kind);
  j["epoch"] = r.epoch;
  j["pause_cost_units"] = r.pause_cost_units;
  j["wall_ms"] = r.wall_ms;
  j["bytes_copied"] = r.bytes_copied;
  j["objects_promoted"] = r.objects_promoted;
  j["rset_updates"] = r.rset_updates;
  j["rset_entries_scanned"] = r.rset_entries_scanned;
  j["regions_reclaimed"] = r.regions_reclaimed;
  j["marking_ran"] = r.marking_ran;
  j["marking_ms"] = r.marking_ms;
  j["peak_regions"] = r.peak_regions;
  if (r.escalated_from) j["escalated_from"] = kind_name(*r.escalated_from);
  return j;
}

inline nlohmann::ordered_json summary_record(const RunSummary& s) {
  nlohmann::ordered_json j;
  j["type"] = "summary";
  j["workload"] = s.workload;
  j["kind"] = s.kind;
  j["seed"] = s.seed;
  j["duration_ops"] = s.duration_ops;
  j["ops_completed"] = s.ops_completed;
  j["pretenure"] = s.pretenure;
  j["wall_seconds"] = s.wall_seconds;
  j["tail_peak_regions"] = s.tail_peak_regions;
  j["max_regions_in_use"] = s.max_regions_in_use;
  j["valid"] = s.valid;
  j["error"] = s.error;
  return j;
}

inline void write_gc_log(std::ostream& os, const std::vector<GcReport>& log, const RunSummary& summary) {
  for (const auto& r : log) os << gc_record(r).dump() << '\n';
  os << summary_record(summary).dump() << '\n';
}

inline GcReport parse_gc_record(const nlohmann::json& j) {
  GcReport r;
  auto kind = parse_kind(j.at("kind").get<std::string>());
  if (!kind) throw Error(Errc::workload_spec, "unknown collection kind in log");
  r.kind = *kind;
  r.epoch = j.at("epoch").get<std::uint64_t>();
  r.pause_cost_units = j.at("pause_cost_units").get<double>();
  r.wall_ms = j.at("wall_ms").get<double>();
  r.bytes_copied = j.at("bytes_copied").get<std::uint64_t>();
  r.objects_promoted = j.at("objects_promoted").get<std::uint64_t>();
  r.rset_updates = j.at("rset_updates").get<std::uint64_t>();
  r.rset_entries_scanned = j.value("rset_entries_scanned", std::uint64_t{0});
  r.regions_reclaimed = j.at("regions_reclaimed").get<std::uint64_t>();
  r.marking_ran = j.value("marking_ran", false);
  r.marking_ms = j.value("marking_ms", 0.0);
  r.peak_regions = j.value("peak_regions", std::uint64_t{0});
  if (j.contains("escalated_from")) r.escalated_from = parse_kind(j["escalated_from"].get<std::string>());
  return r;
}

struct GcLog {
  std::vector<GcReport> records;
  RunSummary summary;
};

inline GcLog read_gc_log(std::istream& is) {
  GcLog log;
  bool have_summary = false;
  std::string line;
  std::size_t n = 0;
  while (std::getline(is, line)) {
    ++n;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::workload_spec, "gc log line " + std::to_string(n) + ": " + e.what());
    }
    const auto type = j.value("type", std::string("gc"));
    if (type == "gc") {
      try {
        log.records.push_back(parse_gc_record(j));
      } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::workload_spec, "gc log line " + std::to_string(n) + ": " + e.what());
      }
    } else if (type == "summary") {
      RunSummary& s = log.summary;
      s.workload = j.value("workload", std::string());
      s.kind = j.value("kind", std::string());
      s.seed = j.value("seed", std::uint64_t{0});
      s.duration_ops = j.value("duration_ops", std::uint64_t{0});
      s.ops_completed = j.value("ops_completed", std::uint64_t{0});
      s.pretenure = j.value("pretenure", false);
      s.wall_seconds = j.value("wall_seconds", 0.0);
      s.tail_peak_regions = j.value("tail_peak_regions", std::uint64_t{0});
      s.max_regions_in_use = j.value("max_regions_in_use", std::uint64_t{0});
      s.valid = j.value("valid", true);
      s.error = j.value("error", std::string());
      have_summary = true;
    }
  }
  if (!have_summary) throw Error(Errc::workload_spec, "gc log has no summary record");
  return log;
}

inline GcLog read_gc_log_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::workload_spec, "cannot open gc log " + path);
  return read_gc_log(in);
}

// ---------------------------------------------------------------------------

struct Percentiles {
  double p50 = 0, p90 = 0, p99 = 0, p999 = 0, p100 = 0;
};

// Nearest-rank percentile.
inline double percentile(std::vector<double> values, double p) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(values.size())));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  return values[rank - 1];
}

inline Percentiles percentiles(const std::vector<double>& values) {
  return {percentile(values, 50), percentile(values, 90), percentile(values, 99), percentile(values, 99.9),
          percentile(values, 100)};
}

struct MetricsReport {
  RunSummary run;
  std::uint64_t collections = 0;
  std::uint64_t minor = 0, mixed = 0, full = 0;
  Percentiles pause_cost;
  Percentiles pause_wall_ms;
  std::uint64_t total_bytes_copied = 0;
  std::uint64_t total_rset_updates = 0;
  std::uint64_t total_objects_promoted = 0;
  std::uint64_t max_regions_in_use = 0;
  double throughput_ops_per_sec = 0;
};

inline MetricsReport summarize(const std::vector<GcReport>& log, const RunSummary& run) {
  MetricsReport m;
  m.run = run;
  std::vector<double> cost, wall;
  m.max_regions_in_use = run.tail_peak_regions;
  for (const auto& r : log) {
    ++m.collections;
    switch (r.kind) {
      case CollectionKind::Minor: ++m.minor; break;
      case CollectionKind::Mixed: ++m.mixed; break;
      case CollectionKind::Full: ++m.full; break;
    }
    cost.push_back(r.pause_cost_units);
    wall.push_back(r.wall_ms);
    m.total_bytes_copied += r.bytes_copied;
    m.total_rset_updates += r.rset_updates;
    m.total_objects_promoted += r.objects_promoted;
    m.max_regions_in_use = std::max<std::uint64_t>(m.max_regions_in_use, r.peak_regions);
  }
  m.pause_cost = percentiles(cost);
  m.pause_wall_ms = percentiles(wall);
  m.throughput_ops_per_sec = run.wall_seconds > 0 ? static_cast<double>(run.ops_completed) / run.wall_seconds : 0;
  return m;
}

inline MetricsReport summarize(const GcLog& log) { return summarize(log.records, log.summary); }

struct ComparisonRow {
  std::string metric;
  double a = 0;
  double b = 0;
  double ratio = 0;  // b / a; 1 when both are zero
};

struct ComparisonTable {
  std::string workload;
  std::uint64_t seed = 0;
  std::vector<ComparisonRow> rows;

  const ComparisonRow& row(const std::string& metric) const {
    for (const auto& r : rows)
      if (r.metric == metric) return r;
    throw Error(Errc::incompatible_reports, "no metric " + metric);
  }
};

// Ratios b/a per metric. Both reports must come from the same workload
// trace (same workload, seed and length).
inline ComparisonTable compare_report(const MetricsReport& a, const MetricsReport& b) {
  if (a.run.workload != b.run.workload || a.run.kind != b.run.kind)
    throw Error(Errc::incompatible_reports, "workloads differ: " + a.run.workload + " vs " + b.run.workload);
  if (a.run.seed != b.run.seed)
    throw Error(Errc::incompatible_reports,
                "seeds differ: " + std::to_string(a.run.seed) + " vs " + std::to_string(b.run.seed));
  if (a.run.duration_ops != b.run.duration_ops) throw Error(Errc::incompatible_reports, "run lengths differ");
  ComparisonTable t;
  t.workload = a.run.workload;
  t.seed = a.run.seed;
  auto add = [&](const char* name, double x, double y) {
    double ratio = x == 0 ? (y == 0 ? 1.0 : INFINITY) : y / x;
    t.rows.push_back({name, x, y, ratio});
  };
  add("collections", a.collections, b.collections);
  add("pause_cost_p50", a.pause_cost.p50, b.pause_cost.p50);
  add("pause_cost_p90", a.pause_cost.p90, b.pause_cost.p90);
  add("pause_cost_p99", a.pause_cost.p99, b.pause_cost.p99);
  add("pause_cost_p99.9", a.pause_cost.p999, b.pause_cost.p999);
  add("pause_cost_p100", a.pause_cost.p100, b.pause_cost.p100);
  add("pause_wall_ms_p100", a.pause_wall_ms.p100, b.pause_wall_ms.p100);
  add("bytes_copied", static_cast<double>(a.total_bytes_copied), static_cast<double>(b.total_bytes_copied));
  add("rset_updates", static_cast<double>(a.total_rset_updates), static_cast<double>(b.total_rset_updates));
  add("objects_promoted", static_cast<double>(a.total_objects_promoted),
      static_cast<double>(b.total_objects_promoted));
  add("max_regions_in_use", static_cast<double>(a.max_regions_in_use), static_cast<double>(b.max_regions_in_use));
  add("throughput_ops_per_sec", a.throughput_ops_per_sec, b.throughput_ops_per_sec);
  return t;
}

inline nlohmann::ordered_json to_json(const Percentiles& p) {
  return {{"p50", p.p50}, {"p90", p.p90}, {"p99", p.p99}, {"p99.9", p.p999}, {"p100", p.p100}};
}

inline nlohmann::ordered_json to_json(const MetricsReport& m) {
  nlohmann::ordered_json j;
  j["workload"] = m.run.workload;
  j["kind"] = m.run.kind;
  j["seed"] = m.run.seed;
  j["pretenure"] = m.run.pretenure;
  j["valid"] = m.run.valid;
  if (!m.run.valid) j["error"] = m.run.error;
  j["ops_completed"] = m.run.ops_completed;
  j["collections"] = {{"total", m.collections}, {"minor", m.minor}, {"mixed", m.mixed}, {"full", m.full}};
  j["pause_cost_units"] = to_json(m.pause_cost);
  j["pause_wall_ms"] = to_json(m.pause_wall_ms);
  j["total_bytes_copied"] = m.total_bytes_copied;
  j["total_rset_updates"] = m.total_rset_updates;
  j["total_objects_promoted"] = m.total_objects_promoted;
  j["max_regions_in_use"] = m.max_regions_in_use;
  j["throughput_ops_per_sec"] = m.throughput_ops_per_sec;
  return j;
}

inline std::string format_report(const MetricsReport& m) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(1);
  os << "workload " << m.run.workload << " (" << m.run.kind << "), seed " << m.run.seed << ", pretenure "
     << (m.run.pretenure ? "on" : "off") << (m.run.valid ? "" : "  [INVALID: " + m.run.error + "]") << '\n';
  os << "  ops completed       " << m.run.ops_completed << '\n';
  os << "  collections         " << m.collections << " (minor " << m.minor << ", mixed " << m.mixed << ", full "
     << m.full << ")\n";
  auto line = [&](const char* name, const Percentiles& p) {
    os << "  " << name << "  p50 " << p.p50 << "  p90 " << p.p90 << "  p99 " << p.p99 << "  p99.9 " << p.p999
       << "  p100 " << p.p100 << '\n';
  };
  line("pause cost units ", m.pause_cost);
  line("pause wall ms    ", m.pause_wall_ms);
  os << "  bytes copied        " << m.total_bytes_copied << '\n';
  os << "  objects promoted    " << m.total_objects_promoted << '\n';
  os << "  rset updates        " << m.total_rset_updates << '\n';
  os << "  max regions in use  " << m.max_regions_in_use << '\n';
  os << "  throughput ops/s    " << m.throughput_ops_per_sec << '\n';
  return os.str();
}

inline std::string format_comparison(const ComparisonTable& t) {
  std::ostringstream os;
  os << "comparison for " << t.workload << " seed " << t.seed << " (ratio = b / a)\n";
  os << std::left << std::setw(24) << "metric" << std::right << std::setw(16) << "a" << std::setw(16) << "b"
     << std::setw(10) << "ratio" << '\n';
  os << std::fixed;
  for (const auto& r : t.rows) {
    os << std::left << std::setw(24) << r.metric << std::right << std::setprecision(1) << std::setw(16) << r.a
       << std::setw(16) << r.b << std::setprecision(3) << std::setw(10) << r.ratio << '\n';
  }
  const auto& copy = t.row("bytes_copied");
  if (copy.a > 0) os << std::setprecision(1) << "copy reduction: " << (1.0 - copy.ratio) * 100.0 << "%\n";
  const auto& worst = t.row("pause_cost_p100");
  if (worst.a > 0) os << std::setprecision(1) << "worst-pause reduction: " << (1.0 - worst.ratio) * 100.0 << "%\n";
  return os.str();
}

}  // namespace ng2c

#endif  // NG2C_METRICS_HPP
