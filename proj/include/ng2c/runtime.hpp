#ifndef NG2C_RUNTIME_HPP
#define NG2C_RUNTIME_HPP

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string_view>
#include <vector>

#include "ng2c/allocator.hpp"
#include "ng2c/collector.hpp"
#include "ng2c/heap.hpp"
#include "ng2c/profiler.hpp"
#include "ng2c/verify.hpp"

namespace ng2c {

struct RuntimeOptions {
  // Record wall-clock pause times; off keeps reports bit-reproducible.
  bool timing = false;
  // Several mutator threads; mutator calls then take a shared safepoint lock.
  bool concurrent = false;
  bool record_forwarding = false;
};

// Heap + allocator + collector wired together: allocation failures trigger
// the collection chosen by should_trigger, every pause retires TLABs, and
// finished collections are reported to listeners and the profiler.
class Runtime {
 public:
  using GcListener = std::function<void(const GcReport&)>;

  explicit Runtime(const HeapConfig& config, RuntimeOptions options = {})
      : options_(options), heap_(config), collector_(heap_), allocator_(heap_) {
    collector_.set_timing(options_.timing);
    collector_.set_record_forwarding(options_.record_forwarding);
    allocator_.set_gc_hook([this](GcCause cause) { collect_for(cause); });
  }

  Runtime(const Runtime&) = delete;
  Runtime& operator=(const Runtime&) = delete;

  Heap& heap() { return heap_; }
  const Heap& heap() const { return heap_; }
  Collector& collector() { return collector_; }
  Allocator& allocator() { return allocator_; }
  const RuntimeOptions& options() const { return options_; }

  ThreadContext& attach_thread() {
    std::lock_guard g(threads_mutex_);
    threads_.emplace_back(static_cast<std::uint32_t>(threads_.size()));
    return threads_.back();
  }

  ClassId register_class(std::uint32_t ref_slots, std::uint32_t payload_bytes, bool is_array = false) {
    return heap_.register_class(ref_slots, payload_bytes, is_array);
  }

  ObjectRef allocate(ThreadContext& ctx, ClassId klass, bool pretenure, std::string_view site = {}) {
    MutatorScope scope(*this);
    const ClassDescriptor& k = heap_.klass(klass);
    ObjectRef ref = allocator_.allocate(ctx, k, pretenure);
    if (profiler_ && profiler_->enabled()) profiler_->record_allocation(site.empty() ? "?" : site, ref, k.size_bytes());
    return ref;
  }

  GenId new_generation(ThreadContext& ctx) { return allocator_.new_generation(ctx); }
  GenId get_generation(const ThreadContext& ctx) const { return allocator_.get_generation(ctx); }
  void set_generation(ThreadContext& ctx, GenId gen) { allocator_.set_generation(ctx, gen); }

  std::optional<ObjectRef> read_ref(ObjectRef obj, std::uint32_t slot) {
    MutatorScope scope(*this);
    return heap_.read_ref(obj, slot);
  }
  void write_ref(ObjectRef obj, std::uint32_t slot, std::optional<ObjectRef> target) {
    MutatorScope scope(*this);
    heap_.write_ref(obj, slot, target);
  }
  RootHandle register_root(ObjectRef obj) { return heap_.register_root(obj); }
  void unregister_root(RootHandle h) { heap_.unregister_root(h); }
  ObjectRef resolve(RootHandle h) const { return heap_.resolve(h); }

  // Explicit collection at a safepoint.
  GcReport collect(CollectionKind kind) {
    if (options_.concurrent) {
      std::unique_lock l(safepoint_);
      return collect_at_safepoint(kind);
    }
    return collect_at_safepoint(kind);
  }

  MarkingStats run_marking() {
    std::unique_lock l(safepoint_, std::defer_lock);
    if (options_.concurrent) l.lock();
    retire_all_tlabs();
    return collector_.run_marking();
  }

  void retire_all_tlabs() {
    std::lock_guard g(threads_mutex_);
    for (auto& t : threads_) t.retire_tlabs();
  }

  HeapCheck verify() const { return check_heap(heap_); }

  void add_gc_listener(GcListener l) { listeners_.push_back(std::move(l)); }

  void attach_profiler(Profiler* p) {
    profiler_ = p;
    collector_.set_record_forwarding(options_.record_forwarding || p != nullptr);
  }

  const std::vector<GcReport>& reports() const { return reports_; }
  std::uint64_t epoch() const { return heap_.epoch(); }

  // Holds the safepoint lock shared for the span of a mutator call when
  // several mutators run; nested scopes reuse the outer lock. A thread that
  // keeps raw references across several calls should hold one for the whole
  // span: collections can then only happen inside its own allocations. The
  // GC hook drops the lock to stop the world.
  class MutatorScope {
   public:
    explicit MutatorScope(Runtime& rt) : prev_(current_) {
      if (rt.options_.concurrent && current_ == nullptr) {
        lock_ = std::shared_lock(rt.safepoint_);
        current_ = &lock_;
      }
    }
    ~MutatorScope() { current_ = prev_; }
    MutatorScope(const MutatorScope&) = delete;
    MutatorScope& operator=(const MutatorScope&) = delete;

   private:
    friend class Runtime;
    static inline thread_local std::shared_lock<std::shared_mutex>* current_ = nullptr;
    std::shared_lock<std::shared_mutex>* prev_;
    std::shared_lock<std::shared_mutex> lock_;
  };


 private:
  void collect_for(GcCause cause) {
    auto kind = collector_.should_trigger(cause == GcCause::Gen0Full, cause == GcCause::HeapExhausted)
                    .value_or(CollectionKind::Minor);
    if (!options_.concurrent) {
      collect_at_safepoint(kind);
      return;
    }
    const std::uint64_t seen = heap_.epoch();
    auto* held = MutatorScope::current_;
    if (held && held->owns_lock()) held->unlock();
    {
      std::unique_lock l(safepoint_);
      // Another thread may have collected while we waited.
      if (heap_.epoch() == seen) collect_at_safepoint(kind);
    }
    if (held) held->lock();
  }

  GcReport collect_at_safepoint(CollectionKind kind) {
    retire_all_tlabs();
    GcReport report = collector_.collect(kind);
    if (profiler_ && profiler_->enabled())
      profiler_->observe_collection(ReachableMap(heap_), collector_.last_forwarding(), report.epoch);
    reports_.push_back(report);
    for (auto& l : listeners_) l(reports_.back());
    return report;
  }

  RuntimeOptions options_;
  Heap heap_;
  Collector collector_;
  Allocator allocator_;
  std::deque<ThreadContext> threads_;
  std::mutex threads_mutex_;
  std::shared_mutex safepoint_;
  Profiler* profiler_ = nullptr;
  std::vector<GcReport> reports_;
  std::vector<GcListener> listeners_;
};

}  // namespace ng2c

#endif  // NG2C_RUNTIME_HPP
