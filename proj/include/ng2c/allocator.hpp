#ifndef NG2C_ALLOCATOR_HPP
#define NG2C_ALLOCATOR_HPP

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>

#include "ng2c/errors.hpp"
#include "ng2c/heap.hpp"
#include "ng2c/object_model.hpp"

namespace ng2c {

enum class GcCause { Gen0Full, HeapExhausted };

// A thread-private slice [start, end) of one region; objects are bumped at
// top. [top, end) is kept formatted as a filler so the region stays
// parsable while the TLAB is live.
struct Tlab {
  std::optional<RegionId> region;
  std::uint32_t start = 0;
  std::uint32_t top = 0;
  std::uint32_t end = 0;

  std::uint32_t free() const { return region ? end - top : 0; }
  bool contains(ObjectRef r) const { return region && *region == r.region && r.offset >= start && r.offset < end; }
};

struct AllocStats {
  std::uint64_t fast_path = 0;     // bump in an existing TLAB, no slow path
  std::uint64_t tlab_slow = 0;     // slow path satisfied inside a TLAB
  std::uint64_t tlab_refills = 0;  // TLABs materialized or replaced
  std::uint64_t region_allocs = 0; // placed directly in an allocation region
  std::uint64_t gc_retries = 0;
};

class ThreadContext {
 public:
  explicit ThreadContext(std::uint32_t thread_id) : thread_id_(thread_id) {}

  std::uint32_t thread_id() const { return thread_id_; }
  GenId current_generation() const { return current_generation_; }
  const std::map<GenId, Tlab>& tlabs() const { return tlabs_; }
  const AllocStats& stats() const { return stats_; }

  // Drops TLAB extents at a safepoint. Entries stay, so the set of
  // generations this thread has used is preserved.
  void retire_tlabs() {
    for (auto& [gen, t] : tlabs_) t = Tlab{};
  }

 private:
  friend class Allocator;
  std::uint32_t thread_id_;
  GenId current_generation_ = kGen0;
  std::map<GenId, Tlab> tlabs_;
  AllocStats stats_;
};

// Object allocation over per-thread, per-generation TLABs and per-generation
// allocation regions. The GC hook is invoked (without locks held) when a
// region cannot be obtained; the allocation is then retried once.
class Allocator {
 public:
  using GcHook = std::function<void(GcCause)>;

  explicit Allocator(Heap& heap, GcHook hook = {}) : heap_(heap), hook_(std::move(hook)) {}

  void set_gc_hook(GcHook hook) { hook_ = std::move(hook); }

  std::uint32_t large_object_threshold() const {
    return static_cast<std::uint32_t>(heap_.config().tlab_bytes / 8);
  }

  GenId new_generation(ThreadContext& ctx) {
    ctx.current_generation_ = heap_.create_generation();
    return ctx.current_generation_;
  }

  GenId get_generation(const ThreadContext& ctx) const { return ctx.current_generation_; }

  void set_generation(ThreadContext& ctx, GenId gen) {
    if (!heap_.generation_exists(gen)) throw Error(Errc::unknown_generation, std::to_string(gen));
    ctx.current_generation_ = gen;
  }

  ObjectRef allocate(ThreadContext& ctx, const ClassDescriptor& k, bool pretenure) {
    const std::size_t size = k.size_bytes();
    if (size > heap_.config().region_bytes)
      throw Error(Errc::too_large, std::to_string(size) + " bytes exceeds region size");
    const GenId gen = pretenure ? ctx.current_generation_ : kGen0;

    if (!k.is_array && size < large_object_threshold()) {
      auto it = ctx.tlabs_.find(gen);
      if (it != ctx.tlabs_.end() && it->second.free() >= size) {
        ++ctx.stats_.fast_path;
        return bump(it->second, k);
      }
    }
    if (size >= large_object_threshold()) return alloc_in_region(ctx, gen, k);
    return alloc_in_tlab(ctx, gen, k);
  }

  // Slow path for small objects: bump the generation's TLAB if it fits,
  // otherwise materialize a fresh one from the generation's allocation
  // region.
  ObjectRef alloc_in_tlab(ThreadContext& ctx, GenId gen, const ClassDescriptor& k) {
    return with_gc_retry(ctx, [&]() -> Attempt {
      Tlab& tlab = ctx.tlabs_[gen];
      if (tlab.free() >= k.size_bytes()) {
        ++ctx.stats_.tlab_slow;
        return {bump(tlab, k), {}};
      }
      auto lock = heap_.lock();
      const auto size = static_cast<std::uint32_t>(k.size_bytes());
      auto region = region_with_room(gen, size);
      if (!region.id) return {std::nullopt, region.cause};
      Region& r = heap_.region(*region.id);
      const auto room = static_cast<std::uint32_t>(heap_.config().region_bytes) - r.top;
      const auto n = std::min(static_cast<std::uint32_t>(heap_.config().tlab_bytes), room);
      tlab = Tlab{*region.id, r.top, r.top, r.top + n};
      r.top += n;
      heap_.fill(*region.id, tlab.top, tlab.end);
      ++ctx.stats_.tlab_refills;
      ++ctx.stats_.tlab_slow;
      return {bump(tlab, k), {}};
    });
  }

  // Places an object directly in the generation's allocation region,
  // taking a new region when the current one lacks room.
  ObjectRef alloc_in_region(ThreadContext& ctx, GenId gen, const ClassDescriptor& k) {
    return with_gc_retry(ctx, [&]() -> Attempt {
      auto lock = heap_.lock();
      const auto size = static_cast<std::uint32_t>(k.size_bytes());
      auto region = region_with_room(gen, size);
      if (!region.id) return {std::nullopt, region.cause};
      Region& r = heap_.region(*region.id);
      ObjectRef ref = heap_.init_object(*region.id, r.top, k);
      r.top += size;
      ++ctx.stats_.region_allocs;
      return {ref, {}};
    });
  }

 private:
  struct Attempt {
    std::optional<ObjectRef> ref;
    GcCause cause = GcCause::HeapExhausted;
  };
  struct RegionPick {
    std::optional<RegionId> id;
    GcCause cause = GcCause::HeapExhausted;
  };

  ObjectRef bump(Tlab& tlab, const ClassDescriptor& k) {
    ObjectRef ref = heap_.init_object(*tlab.region, tlab.top, k);
    tlab.top += static_cast<std::uint32_t>(k.size_bytes());
    heap_.fill(*tlab.region, tlab.top, tlab.end);
    return ref;
  }

  // Current allocation region of gen with at least `size` free bytes,
  // retiring the old one (its tail becomes a filler) and acquiring a new one
  // if needed. Caller holds the heap lock.
  RegionPick region_with_room(GenId gen_id, std::uint32_t size) {
    heap_.ensure_generation(gen_id);
    Generation& gen = heap_.generation(gen_id);
    const auto region_bytes = static_cast<std::uint32_t>(heap_.config().region_bytes);
    if (gen.current_alloc_region) {
      Region& r = heap_.region(*gen.current_alloc_region);
      if (region_bytes - r.top >= size) return {r.id, {}};
      heap_.fill(r.id, r.top, region_bytes);
      r.top = region_bytes;
      gen.current_alloc_region.reset();
    }
    if (gen_id == kGen0 && heap_.gen0_full()) return {std::nullopt, GcCause::Gen0Full};
    const SpaceKind space = gen_id == kGen0 ? SpaceKind::Eden : SpaceKind::Tenured;
    auto id = heap_.region_acquire(gen_id, space);
    if (!id) return {std::nullopt, GcCause::HeapExhausted};
    return {id, {}};
  }

  template <typename F>
  ObjectRef with_gc_retry(ThreadContext& ctx, F&& attempt) {
    Attempt a = attempt();
    if (a.ref) return *a.ref;
    if (hook_) {
      ++ctx.stats_.gc_retries;
      hook_(a.cause);
      a = attempt();
      if (a.ref) return *a.ref;
    }
    throw Error(Errc::out_of_memory, a.cause == GcCause::Gen0Full ? "Gen 0 exhausted after collection"
                                                                   : "no free region after collection");
  }

  Heap& heap_;
  GcHook hook_;
};

}  // namespace ng2c

#endif  // NG2C_ALLOCATOR_HPP
