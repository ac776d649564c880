#ifndef NG2C_WORKLOAD_HPP
#define NG2C_WORKLOAD_HPP

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <deque>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "ng2c/config.hpp"
#include "ng2c/errors.hpp"
#include "ng2c/metrics.hpp"
#include "ng2c/runtime.hpp"

namespace ng2c {

enum class WorkloadKind { Buffer, Batch, Churn, Mixed };

inline const char* workload_kind_name(WorkloadKind k) {
  switch (k) {
    case WorkloadKind::Buffer: return "buffer";
    case WorkloadKind::Batch: return "batch";
    case WorkloadKind::Churn: return "churn";
    case WorkloadKind::Mixed: return "mixed";
  }
  return "?";
}

struct SizeDist {
  std::uint32_t min = 64;
  std::uint32_t max = 192;
  std::string distribution = "uniform";  // uniform | exponential
};

struct WorkloadSpec {
  std::string name;
  WorkloadKind kind = WorkloadKind::Churn;
  std::uint64_t duration_ops = 100000;
  double read_fraction = 0.25;
  double write_fraction = 0.75;
  SizeDist object_size;  // buffer rows, batch chunks

  struct Transient {
    SizeDist size{256, 1024, "uniform"};
    std::uint32_t per_op = 1;   // payload arrays per request
    std::uint32_t window = 64;  // requests kept reachable from the ring
  } transient;

  struct Retention {
    std::uint64_t cohort_bytes = 1 * MiB;
    std::uint64_t cohort_ops = 10000;  // 0: flush on bytes only
    std::uint32_t live_cohorts = 2;    // flushed buffers kept rooted / concurrent batches
    std::uint32_t cache_entries = 0;   // Mixed only
  } retention;

  bool pretenure_enabled = false;
  std::uint64_t seed = 1;
  std::uint32_t threads = 1;

  void validate() const {
    auto bad = [](const std::string& m) { throw Error(Errc::workload_spec, m); };
    if (duration_ops == 0) bad("duration_ops must be > 0");
    if (read_fraction < 0 || write_fraction < 0 || std::abs(read_fraction + write_fraction - 1.0) > 1e-9)
      bad("op_mix fractions must be non-negative and sum to 1");
    auto check = [&](const SizeDist& d, const char* what, std::uint32_t least) {
      if (d.min < least || d.max < d.min)
        bad(std::string(what) + ": need " + std::to_string(least) + " <= min <= max");
      if (d.distribution != "uniform" && d.distribution != "exponential")
        bad(std::string(what) + ": unknown distribution " + d.distribution);
    };
    check(object_size, "object_size_dist", 32);
    check(transient.size, "transient.size", 24);
    if (transient.window == 0) bad("transient.window must be > 0");
    if (transient.per_op == 0 || transient.per_op > 64) bad("transient.per_op must be in [1, 64]");
    if (retention.cohort_bytes == 0 && retention.cohort_ops == 0) bad("retention needs cohort_bytes or cohort_ops");
    if (kind == WorkloadKind::Batch && retention.live_cohorts == 0) bad("batch needs live_cohorts >= 1");
    if (kind == WorkloadKind::Mixed && retention.cache_entries == 0) bad("mixed needs cache_entries >= 1");
    if (threads == 0 || threads > 64) bad("threads must be in [1, 64]");
  }
};

inline WorkloadKind parse_workload_kind(const std::string& s) {
  std::string k = s;
  std::transform(k.begin(), k.end(), k.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (k == "buffer") return WorkloadKind::Buffer;
  if (k == "batch") return WorkloadKind::Batch;
  if (k == "churn") return WorkloadKind::Churn;
  if (k == "mixed") return WorkloadKind::Mixed;
  throw Error(Errc::workload_spec, "unknown workload kind " + s);
}

inline WorkloadSpec parse_workload(const nlohmann::json& j) {
  WorkloadSpec s;
  try {
    s.kind = parse_workload_kind(j.at("kind").get<std::string>());
    s.name = j.value("name", std::string(workload_kind_name(s.kind)));
    s.duration_ops = j.at("duration_ops").get<std::uint64_t>();
    if (j.contains("op_mix")) {
      s.read_fraction = j["op_mix"].at("read").get<double>();
      s.write_fraction = j["op_mix"].at("write").get<double>();
    }
    auto dist = [](const nlohmann::json& d, SizeDist def) {
      def.min = d.value("min", def.min);
      def.max = d.value("max", def.max);
      def.distribution = d.value("distribution", def.distribution);
      return def;
    };
    if (j.contains("object_size_dist")) s.object_size = dist(j["object_size_dist"], s.object_size);
    if (j.contains("transient")) {
      const auto& t = j["transient"];
      if (t.contains("size")) s.transient.size = dist(t["size"], s.transient.size);
      s.transient.per_op = t.value("per_op", s.transient.per_op);
      s.transient.window = t.value("window", s.transient.window);
    }
    if (j.contains("retention")) {
      const auto& r = j["retention"];
      s.retention.cohort_bytes = r.value("cohort_bytes", s.retention.cohort_bytes);
      s.retention.cohort_ops = r.value("cohort_ops", s.retention.cohort_ops);
      s.retention.live_cohorts = r.value("live_cohorts", s.retention.live_cohorts);
      s.retention.cache_entries = r.value("cache_entries", s.retention.cache_entries);
    }
    s.pretenure_enabled = j.value("pretenure_enabled", false);
    s.seed = j.value("seed", s.seed);
    s.threads = j.value("threads", s.threads);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::workload_spec, e.what());
  }
  s.validate();
  return s;
}

inline WorkloadSpec load_workload(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::workload_spec, "cannot open workload spec " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::workload_spec, path + ": " + e.what());
  }
  return parse_workload(j);
}

inline nlohmann::ordered_json to_json(const WorkloadSpec& s) {
  auto dist = [](const SizeDist& d) {
    return nlohmann::ordered_json{{"min", d.min}, {"max", d.max}, {"distribution", d.distribution}};
  };
  nlohmann::ordered_json j;
  j["name"] = s.name;
  j["kind"] = workload_kind_name(s.kind);
  j["duration_ops"] = s.duration_ops;
  j["op_mix"] = {{"read", s.read_fraction}, {"write", s.write_fraction}};
  j["object_size_dist"] = dist(s.object_size);
  j["transient"] = {{"size", dist(s.transient.size)}, {"per_op", s.transient.per_op}, {"window", s.transient.window}};
  j["retention"] = {{"cohort_bytes", s.retention.cohort_bytes},
                    {"cohort_ops", s.retention.cohort_ops},
                    {"live_cohorts", s.retention.live_cohorts},
                    {"cache_entries", s.retention.cache_entries}};
  j["pretenure_enabled"] = s.pretenure_enabled;
  j["seed"] = s.seed;
  j["threads"] = s.threads;
  return j;
}

// Allocation sites used by the driver, as reported to the profiler.
namespace sites {
inline constexpr const char* ring = "ring";
inline constexpr const char* request = "request";
inline constexpr const char* payload = "request.payload";
inline constexpr const char* buffer_root = "memtable.root";
inline constexpr const char* buffer_segment = "memtable.segment";
inline constexpr const char* buffer_row = "memtable.row";
inline constexpr const char* cache = "cache";
inline constexpr const char* cache_entry = "cache.entry";
inline constexpr const char* batch_root = "batch.root";
inline constexpr const char* batch_chunk = "batch.chunk";
}  // namespace sites

// Classes the driver allocates, registered once before any mutator starts.
class WorkloadClasses {
 public:
  static constexpr std::uint32_t kSegmentRows = 64;

  WorkloadClasses(Runtime& rt, const WorkloadSpec& s) {
    const std::uint32_t lo = std::min(s.object_size.min, s.transient.size.min);
    const std::uint32_t hi = std::max(s.object_size.max, s.transient.size.max);
    base_ = static_cast<std::uint32_t>(align_up(lo));
    for (std::uint32_t sz = base_; sz <= align_up(hi); sz += kAlignment) {
      rows_.push_back(rt.register_class(0, sz - kHeaderBytes));
      chunks_.push_back(rt.register_class(1, sz - kHeaderBytes - kRefBytes));
      arrays_.push_back(rt.register_class(0, sz - kHeaderBytes, true));
    }
    request = rt.register_class(s.transient.per_op, 32);
    ring = rt.register_class(s.transient.window, 0, true);
    root = rt.register_class(1, 16);
    segment = rt.register_class(kSegmentRows + 1, 0);
    if (s.retention.cache_entries) cache = rt.register_class(s.retention.cache_entries, 0, true);
  }

  ClassId row(std::uint32_t size) const { return rows_[index(size)]; }
  ClassId chunk(std::uint32_t size) const { return chunks_[index(size)]; }
  ClassId array(std::uint32_t size) const { return arrays_[index(size)]; }

  ClassId request = 0, ring = 0, root = 0, segment = 0, cache = 0;

 private:
  std::size_t index(std::uint32_t size) const { return (align_up(size) - base_) / kAlignment; }
  std::uint32_t base_ = 0;
  std::vector<ClassId> rows_, chunks_, arrays_;
};

// One mutator executing the operation trace. Every random draw depends only
// on the seed and on placement-independent driver state, so the trace is the
// same whatever the collector does.
class WorkloadDriver {
 public:
  WorkloadDriver(Runtime& rt, const WorkloadSpec& spec, const WorkloadClasses& classes, std::uint64_t seed)
      : rt_(rt), spec_(spec), cls_(classes), ctx_(rt.attach_thread()), rng_(seed),
        pretenure_(spec.pretenure_enabled) {}

  // Runs ops [0, n). `checkpoint` (may be empty) is called after each op.
  void run(std::uint64_t n, const std::function<void(std::uint64_t)>& checkpoint = {}) {
    {
      Runtime::MutatorScope scope(rt_);
      setup();
    }
    for (std::uint64_t i = 0; i < n; ++i) {
      {
        Runtime::MutatorScope scope(rt_);
        step(i);
      }
      ++completed_;
      if (checkpoint) checkpoint(i);
    }
  }

  std::uint64_t completed() const { return completed_; }
  ThreadContext& context() { return ctx_; }

 private:
  struct Cohort {
    RootHandle root;
    GenId gen = kGen0;
    std::uint64_t bytes = 0;
    std::uint64_t ops = 0;
    std::uint32_t seg_fill = WorkloadClasses::kSegmentRows;  // forces a first segment
    std::uint64_t items = 0;
  };

  std::uint32_t draw_size(const SizeDist& d) {
    if (d.distribution == "exponential") {
      const double mean = std::max(1.0, (d.max - d.min) / 4.0);
      std::exponential_distribution<double> e(1.0 / mean);
      const double v = d.min + e(rng_);
      return static_cast<std::uint32_t>(std::min<double>(v, d.max));
    }
    return std::uniform_int_distribution<std::uint32_t>(d.min, d.max)(rng_);
  }
  std::uint64_t draw_below(std::uint64_t n) { return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(rng_); }

  ObjectRef alloc(ClassId k, bool pretenure, const char* site) { return rt_.allocate(ctx_, k, pretenure, site); }

  void stamp(ObjectRef obj, std::uint64_t key) {
    auto p = rt_.heap().payload(obj);
    std::memcpy(p.data(), &key, std::min<std::size_t>(sizeof key, p.size()));
  }

  void setup() {
    ObjectRef ring = alloc(cls_.ring, false, sites::ring);
    ring_ = rt_.register_root(ring);
    if (spec_.kind == WorkloadKind::Mixed) cache_ = rt_.register_root(alloc(cls_.cache, false, sites::cache));
    if (spec_.kind == WorkloadKind::Buffer || spec_.kind == WorkloadKind::Mixed) active_ = open_cohort(sites::buffer_root);
    if (spec_.kind == WorkloadKind::Batch) {
      for (std::uint32_t t = 0; t < spec_.retention.live_cohorts; ++t) tasks_.push_back(open_cohort(sites::batch_root));
    }
  }

  Cohort open_cohort(const char* site) {
    Cohort c;
    if (pretenure_) c.gen = rt_.new_generation(ctx_);
    c.root = rt_.register_root(alloc(cls_.root, pretenure_, site));
    c.bytes = rt_.heap().klass(cls_.root).size_bytes();
    return c;
  }

  void use(const Cohort& c) {
    if (pretenure_) rt_.set_generation(ctx_, c.gen);
  }

  // A request object with its payload arrays, published in the ring.
  // Returns the ring slot that holds it.
  std::uint32_t request(std::uint64_t op) {
    const auto slot = static_cast<std::uint32_t>(ring_pos_++ % spec_.transient.window);
    ObjectRef req = alloc(cls_.request, false, sites::request);
    stamp(req, op);
    rt_.write_ref(rt_.resolve(ring_), slot, req);
    for (std::uint32_t i = 0; i < spec_.transient.per_op; ++i) {
      const auto size = draw_size(spec_.transient.size);
      ObjectRef arr = alloc(cls_.array(size), false, sites::payload);
      stamp(arr, op * 64 + i);
      rt_.write_ref(*rt_.read_ref(rt_.resolve(ring_), slot), i, arr);
    }
    return slot;
  }

  // Copies the leading payload bytes of src into the request in ring slot.
  void copy_into_request(std::uint32_t slot, ObjectRef src) {
    ObjectRef req = *rt_.read_ref(rt_.resolve(ring_), slot);
    auto from = rt_.heap().payload(src);
    auto to = rt_.heap().payload(req);
    std::memcpy(to.data(), from.data(), std::min(from.size(), to.size()));
  }

  void step(std::uint64_t op) {
    const bool is_read = std::uniform_real_distribution<double>(0.0, 1.0)(rng_) < spec_.read_fraction;
    switch (spec_.kind) {
      case WorkloadKind::Churn: {
        const std::uint32_t slot = request(op);
        const auto pick = static_cast<std::uint32_t>(draw_below(spec_.transient.window));
        if (is_read) {
          if (auto other = rt_.read_ref(rt_.resolve(ring_), pick)) copy_into_request(slot, *other);
        }
        break;
      }
      case WorkloadKind::Buffer:
      case WorkloadKind::Mixed: {
        const std::uint32_t slot = request(op);
        if (is_read) buffer_read(slot);
        else buffer_write(op);
        ++active_.ops;
        if (active_.bytes >= spec_.retention.cohort_bytes ||
            (spec_.retention.cohort_ops && active_.ops >= spec_.retention.cohort_ops))
          flush();
        break;
      }
      case WorkloadKind::Batch: batch_step(op, is_read); break;
    }
  }

  void buffer_write(std::uint64_t op) {
    const auto size = draw_size(spec_.object_size);
    use(active_);
    if (active_.seg_fill == WorkloadClasses::kSegmentRows) {
      ObjectRef seg = alloc(cls_.segment, pretenure_, sites::buffer_segment);
      ObjectRef root = rt_.resolve(active_.root);
      rt_.write_ref(seg, WorkloadClasses::kSegmentRows, rt_.read_ref(root, 0));
      rt_.write_ref(root, 0, seg);
      active_.seg_fill = 0;
      active_.bytes += rt_.heap().klass(cls_.segment).size_bytes();
    }
    ObjectRef row = alloc(cls_.row(size), pretenure_, sites::buffer_row);
    stamp(row, op);
    ObjectRef seg = *rt_.read_ref(rt_.resolve(active_.root), 0);
    rt_.write_ref(seg, active_.seg_fill++, row);
    active_.bytes += rt_.heap().klass(cls_.row(size)).size_bytes();
    ++active_.items;
  }

  void buffer_read(std::uint32_t slot) {
    const std::uint64_t pick = draw_below(WorkloadClasses::kSegmentRows);
    if (active_.items == 0) return;
    const auto idx = static_cast<std::uint32_t>(pick % active_.seg_fill);
    ObjectRef seg = *rt_.read_ref(rt_.resolve(active_.root), 0);
    ObjectRef row = *rt_.read_ref(seg, idx);
    copy_into_request(slot, row);
    if (spec_.kind != WorkloadKind::Mixed) return;

    // Read results are cached; the cache keeps rows alive for a while.
    const ClassId k = header::class_id(rt_.heap().object(row));
    ObjectRef entry = alloc(k, false, sites::cache_entry);
    seg = *rt_.read_ref(rt_.resolve(active_.root), 0);
    row = *rt_.read_ref(seg, idx);
    auto from = rt_.heap().payload(row);
    auto to = rt_.heap().payload(entry);
    std::memcpy(to.data(), from.data(), std::min(from.size(), to.size()));
    const auto at = static_cast<std::uint32_t>(cache_pos_++ % spec_.retention.cache_entries);
    rt_.write_ref(rt_.resolve(cache_), at, entry);
  }

  // The full buffer leaves the write path; only the most recent
  // live_cohorts flushed buffers stay reachable.
  void flush() {
    flushed_.push_back(active_);
    while (flushed_.size() > spec_.retention.live_cohorts) {
      rt_.unregister_root(flushed_.front().root);
      flushed_.pop_front();
    }
    active_ = open_cohort(sites::buffer_root);
  }

  void batch_step(std::uint64_t op, bool is_read) {
    (void)is_read;  // batches load first, then process
    Cohort& task = tasks_[op % tasks_.size()];
    const std::uint32_t slot = request(op);
    const auto size = draw_size(spec_.object_size);
    const auto hops = draw_below(4);
    if (task.bytes < spec_.retention.cohort_bytes) {
      use(task);
      ObjectRef chunk = alloc(cls_.chunk(size), pretenure_, sites::batch_chunk);
      stamp(chunk, op);
      ObjectRef root = rt_.resolve(task.root);
      rt_.write_ref(chunk, 0, rt_.read_ref(root, 0));
      rt_.write_ref(root, 0, chunk);
      task.bytes += rt_.heap().klass(cls_.chunk(size)).size_bytes();
      ++task.items;
    } else {
      auto at = rt_.read_ref(rt_.resolve(task.root), 0);
      for (std::uint64_t h = 0; h < hops && at; ++h) {
        auto next = rt_.read_ref(*at, 0);
        if (!next) break;
        at = next;
      }
      if (at) copy_into_request(slot, *at);
    }
    if (++task.ops >= spec_.retention.cohort_ops && spec_.retention.cohort_ops) {
      rt_.unregister_root(task.root);
      task = open_cohort(sites::batch_root);
    }
  }

  Runtime& rt_;
  const WorkloadSpec& spec_;
  const WorkloadClasses& cls_;
  ThreadContext& ctx_;
  std::mt19937_64 rng_;
  bool pretenure_;
  std::uint64_t completed_ = 0;

  RootHandle ring_;
  std::uint64_t ring_pos_ = 0;
  RootHandle cache_;
  std::uint64_t cache_pos_ = 0;
  Cohort active_;
  std::deque<Cohort> flushed_;
  std::vector<Cohort> tasks_;
};

struct RunOptions {
  bool timing = false;
  Profiler* profiler = nullptr;
  // Called after every operation with the op index (single-threaded only).
  std::function<void(std::uint64_t, Runtime&)> checkpoint;
};

struct RunResult {
  std::vector<GcReport> log;
  RunSummary summary;
  MetricsReport report;
};

inline RunResult run_workload(const WorkloadSpec& spec, const HeapConfig& config, const RunOptions& opts = {}) {
  spec.validate();
  config.validate();
  RuntimeOptions ro;
  ro.timing = opts.timing;
  ro.concurrent = spec.threads > 1;
  Runtime rt(config, ro);
  if (opts.profiler) rt.attach_profiler(opts.profiler);
  WorkloadClasses classes(rt, spec);

  RunResult out;
  RunSummary& s = out.summary;
  s.workload = spec.name;
  s.kind = workload_kind_name(spec.kind);
  s.seed = spec.seed;
  s.duration_ops = spec.duration_ops;
  s.pretenure = spec.pretenure_enabled;

  const auto t0 = std::chrono::steady_clock::now();
  if (spec.threads == 1) {
    WorkloadDriver d(rt, spec, classes, spec.seed);
    std::function<void(std::uint64_t)> cp;
    if (opts.checkpoint) cp = [&](std::uint64_t i) { opts.checkpoint(i, rt); };
    try {
      d.run(spec.duration_ops, cp);
    } catch (const Error& e) {
      if (e.code() != Errc::out_of_memory) throw;
      s.valid = false;
      s.error = e.what();
    }
    s.ops_completed = d.completed();
  } else {
    std::vector<std::unique_ptr<WorkloadDriver>> drivers;
    for (std::uint32_t t = 0; t < spec.threads; ++t)
      drivers.push_back(std::make_unique<WorkloadDriver>(rt, spec, classes, spec.seed + 0x9e3779b97f4a7c15ull * t));
    std::mutex err_mutex;
    std::vector<std::thread> threads;
    for (std::uint32_t t = 0; t < spec.threads; ++t) {
      const std::uint64_t n = spec.duration_ops / spec.threads + (t < spec.duration_ops % spec.threads ? 1 : 0);
      threads.emplace_back([&, t, n] {
        try {
          drivers[t]->run(n);
        } catch (const Error& e) {
          std::lock_guard g(err_mutex);
          s.valid = false;
          if (s.error.empty()) s.error = e.what();
        }
      });
    }
    for (auto& th : threads) th.join();
    for (auto& d : drivers) s.ops_completed += d->completed();
  }
  if (opts.timing) s.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  out.log = rt.reports();
  s.tail_peak_regions = rt.heap().peak_regions_in_use();
  s.max_regions_in_use = s.tail_peak_regions;
  for (const auto& r : out.log) s.max_regions_in_use = std::max<std::uint64_t>(s.max_regions_in_use, r.peak_regions);
  out.report = summarize(out.log, s);
  return out;
}

}  // namespace ng2c

#endif  // NG2C_WORKLOAD_HPP
