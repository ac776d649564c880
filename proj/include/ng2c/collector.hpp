#ifndef NG2C_COLLECTOR_HPP
#define NG2C_COLLECTOR_HPP

#include <algorithm>
#include <cassert>
#include <chrono>
#include <cstdint>
#include <cstring>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "ng2c/heap.hpp"
#include "ng2c/object_model.hpp"

namespace ng2c {

enum class CollectionKind { Minor, Mixed, Full };

inline const char* kind_name(CollectionKind k) {
  switch (k) {
    case CollectionKind::Minor: return "minor";
    case CollectionKind::Mixed: return "mixed";
    case CollectionKind::Full: return "full";
  }
  return "?";
}

inline std::optional<CollectionKind> parse_kind(const std::string& s) {
  if (s == "minor") return CollectionKind::Minor;
  if (s == "mixed") return CollectionKind::Mixed;
  if (s == "full") return CollectionKind::Full;
  return std::nullopt;
}

struct GcReport {
  CollectionKind kind = CollectionKind::Minor;
  std::uint64_t epoch = 0;
  double pause_cost_units = 0;
  double wall_ms = 0;
  std::uint64_t bytes_copied = 0;
  std::uint64_t objects_promoted = 0;
  std::uint64_t rset_updates = 0;
  std::uint64_t rset_entries_scanned = 0;
  std::uint64_t regions_reclaimed = 0;
  bool marking_ran = false;
  double marking_ms = 0;
  // High-water mark of regions in use since the previous collection,
  // including this pause.
  std::uint64_t peak_regions = 0;
  std::optional<CollectionKind> escalated_from;
  std::vector<RegionId> collection_set;
};

struct MarkingStats {
  std::map<RegionId, std::uint64_t> live_bytes;
  std::uint64_t epoch = 0;
  std::uint64_t regions_freed = 0;
};

// Where each evacuated object went during the most recent collection.
class ForwardingLog {
 public:
  void reset(std::size_t region_count) {
    moves_.clear();
    collected_.assign(region_count, false);
  }
  void mark_collected(RegionId r) { collected_[r] = true; }
  void record(ObjectRef from, ObjectRef to) { moves_[from.encode()] = to; }

  bool was_collected(RegionId r) const { return r < collected_.size() && collected_[r]; }
  std::optional<ObjectRef> forwarded(ObjectRef from) const {
    auto it = moves_.find(from.encode());
    if (it == moves_.end()) return std::nullopt;
    return it->second;
  }
  // Post-collection address of a pre-collection reference, or nullopt if the
  // object was reclaimed by evacuation.
  std::optional<ObjectRef> resolve(ObjectRef from) const {
    if (auto to = forwarded(from)) return to;
    if (was_collected(from.region)) return std::nullopt;
    return from;
  }
  std::size_t size() const { return moves_.size(); }

 private:
  std::unordered_map<std::uint64_t, ObjectRef> moves_;
  std::vector<bool> collected_;
};

// Minor, mixed and full collections plus stop-the-world marking. Every
// entry point assumes a safepoint: no mutator runs, TLABs are retired.
class Collector {
 public:
  explicit Collector(Heap& heap) : heap_(heap) {}

  void set_timing(bool on) { timing_ = on; }
  void set_record_forwarding(bool on) { record_forwarding_ = on; }
  const ForwardingLog& last_forwarding() const { return forwarding_; }
  const std::optional<MarkingStats>& last_marking() const { return last_marking_; }

  static constexpr double kFullOccupancy = 0.95;

  std::optional<CollectionKind> should_trigger(bool gen0_full, bool free_list_exhausted) const {
    const double occ = heap_.occupancy();
    if (free_list_exhausted || heap_.free_region_count() == 0 || occ >= kFullOccupancy) return CollectionKind::Full;
    if (gen0_full) return occ >= heap_.config().mixed_trigger_occupancy ? CollectionKind::Mixed : CollectionKind::Minor;
    return std::nullopt;
  }

  GcReport collect(CollectionKind kind) {
    switch (kind) {
      case CollectionKind::Minor: return minor_collect();
      case CollectionKind::Mixed: return mixed_collect();
      case CollectionKind::Full: return full_collect();
    }
    return full_collect();
  }

  // Collects all of Gen 0.
  GcReport minor_collect() {
    Pause pause(*this, CollectionKind::Minor);
    std::vector<RegionId> cset = heap_.generation(kGen0).regions;
    std::sort(cset.begin(), cset.end());
    if (!evacuate(cset, pause.report)) escalate(pause.report);
    return pause.finish();
  }

  // Collects Gen 0 plus every other region whose estimated live fraction is
  // at most region_live_threshold, then runs a marking cycle.
  GcReport mixed_collect() {
    Pause pause(*this, CollectionKind::Mixed);
    std::vector<RegionId> cset = mixed_collection_set();
    if (!evacuate(cset, pause.report)) {
      escalate(pause.report);
      return pause.finish();
    }
    auto t0 = Clock::now();
    run_marking_locked();
    pause.report.marking_ran = true;
    pause.report.marking_ms = elapsed_ms(t0);
    return pause.finish();
  }

  // Mark-compact of the whole heap into Old.
  GcReport full_collect() {
    Pause pause(*this, CollectionKind::Full);
    compact_all(pause.report);
    return pause.finish();
  }

  // Marks from the roots, records per-region live bytes, releases regions
  // holding only unreachable objects and turns dead objects elsewhere into
  // fillers.
  MarkingStats run_marking() {
    auto lock = heap_.lock();
    const bool was = heap_.in_collection();
    heap_.set_in_collection(true);
    MarkingStats stats = run_marking_locked();
    heap_.set_in_collection(was);
    return stats;
  }

  // Regions a mixed collection would take given current marking data.
  std::vector<RegionId> mixed_collection_set() const {
    std::vector<RegionId> cset;
    const double threshold = heap_.config().region_live_threshold;
    for (RegionId id = 0; id < heap_.region_count(); ++id) {
      const Region& r = heap_.region(id);
      if (r.is_free()) continue;
      if (r.owner == kGen0) {
        cset.push_back(id);
        continue;
      }
      if (!r.has_live_stats || r.top == 0) continue;
      // Space allocated after marking is presumed live.
      const double live = static_cast<double>(r.live_bytes_estimate) + (r.top - std::min(r.top, r.top_at_mark));
      if (live / r.top <= threshold) cset.push_back(id);
    }
    return cset;
  }

 private:
  using Clock = std::chrono::steady_clock;

  double elapsed_ms(Clock::time_point t0) const {
    if (!timing_) return 0.0;
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
  }

  // Bookkeeping shared by every collection kind.
  struct Pause {
    Collector& c;
    GcReport report;
    std::unique_lock<std::recursive_mutex> lock;
    Clock::time_point t0 = Clock::now();
    std::size_t in_use_before;

    Pause(Collector& col, CollectionKind kind) : c(col), lock(col.heap_.lock()) {
      report.kind = kind;
      in_use_before = c.heap_.regions_in_use();
      report.rset_updates = c.heap_.take_rset_updates();
      c.heap_.set_in_collection(true);
      c.forwarding_.reset(c.heap_.region_count());
    }

    GcReport finish() {
      Heap& h = c.heap_;
      c.restore_builtin_regions();
      h.advance_epoch();
      report.epoch = h.epoch();
      const std::size_t after = h.regions_in_use();
      report.regions_reclaimed = in_use_before > after ? in_use_before - after : 0;
      report.peak_regions = h.peak_regions_in_use();
      h.reset_peak();
      report.pause_cost_units = static_cast<double>(report.bytes_copied) +
                                h.config().rset_scan_cost * static_cast<double>(report.rset_entries_scanned);
      report.wall_ms = c.elapsed_ms(t0) - report.marking_ms;
      if (report.wall_ms < 0) report.wall_ms = 0;
      h.set_in_collection(false);
      return report;
    }
  };

  void escalate(GcReport& report) {
    report.escalated_from = report.kind;
    report.kind = CollectionKind::Full;
    report.bytes_copied = 0;
    report.objects_promoted = 0;
    report.rset_entries_scanned = 0;
    report.collection_set.clear();
    forwarding_.reset(heap_.region_count());
    compact_all(report);
  }

  // Gen 0 always ends a pause with an empty Eden allocation region, and Old
  // always owns at least one region.
  void restore_builtin_regions() {
    Generation& g0 = heap_.generation(kGen0);
    bool eden_current = g0.current_alloc_region && heap_.region(*g0.current_alloc_region).space == SpaceKind::Eden;
    if (!eden_current) {
      g0.current_alloc_region.reset();
      heap_.region_acquire(kGen0, SpaceKind::Eden);
    }
    if (heap_.generation(kOldGen).regions.empty()) heap_.region_acquire(kOldGen, SpaceKind::Tenured);
  }

  // Bump allocator over destination regions used during evacuation.
  class Destination {
   public:
    Destination(Heap& heap, GenId gen, SpaceKind space, std::size_t max_regions, bool make_current)
        : heap_(heap), gen_(gen), space_(space), max_regions_(max_regions), make_current_(make_current) {}

    // Continue filling an existing region.
    void adopt(RegionId id) {
      current_ = id;
      adopted_ = id;
      adopted_top_ = heap_.region(id).top;
    }

    struct Full {};  // free list exhausted

    // nullopt when this destination's region budget is spent.
    std::optional<ObjectRef> reserve(std::uint32_t size) {
      const auto region_bytes = static_cast<std::uint32_t>(heap_.config().region_bytes);
      if (current_) {
        Region& r = heap_.region(*current_);
        if (region_bytes - r.top >= size) {
          ObjectRef ref{r.id, r.top};
          r.top += size;
          return ref;
        }
      }
      if (acquired_.size() >= max_regions_) return std::nullopt;
      auto id = heap_.region_acquire(gen_, space_, make_current_);
      if (!id) throw Full{};
      if (current_) {
        Region& old = heap_.region(*current_);
        tails_.push_back({old.id, old.top});
      }
      acquired_.push_back(*id);
      current_ = id;
      Region& r = heap_.region(*id);
      r.top = size;
      return ObjectRef{*id, 0};
    }

    // Formats the unused tails of filled regions once copying is done.
    void seal() {
      const auto region_bytes = static_cast<std::uint32_t>(heap_.config().region_bytes);
      for (auto [id, top] : tails_) {
        heap_.fill(id, top, region_bytes);
        heap_.region(id).top = region_bytes;
      }
    }

    void rollback(std::optional<RegionId> old_current) {
      for (RegionId id : acquired_) {
        heap_.region(id).top = 0;
        heap_.region_release(id);
      }
      if (adopted_) heap_.region(*adopted_).top = adopted_top_;
      if (make_current_) heap_.generation(gen_).current_alloc_region = old_current;
    }

   private:
    Heap& heap_;
    GenId gen_;
    SpaceKind space_;
    std::size_t max_regions_;
    bool make_current_;
    std::optional<RegionId> current_;
    std::optional<RegionId> adopted_;
    std::uint32_t adopted_top_ = 0;
    std::vector<RegionId> acquired_;
    std::vector<std::pair<RegionId, std::uint32_t>> tails_;
  };

  struct Planned {
    ObjectRef from;
    ObjectRef to;
    std::uint32_t size;
    std::uint8_t age;
  };

  // Copies everything in the collection set that is reachable from the roots
  // or from outside the set (via remembered sets), then frees the set.
  // Destinations are planned before any byte moves, so running out of
  // regions leaves the heap untouched and returns false.
  bool evacuate(const std::vector<RegionId>& cset, GcReport& report) {
    const HeapConfig& cfg = heap_.config();
    report.collection_set = cset;
    std::vector<bool> in_cset(heap_.region_count(), false);
    for (RegionId id : cset) in_cset[id] = true;

    std::vector<std::pair<GenId, RegionId>> reset_alloc;
    for (RegionId id : cset) {
      Generation& g = heap_.generation(heap_.region(id).owner);
      if (g.current_alloc_region == id) {
        reset_alloc.push_back({g.gen_id, id});
        g.current_alloc_region.reset();
      }
    }

    // Regions outside the set that hold references into it.
    std::map<RegionId, std::uint32_t> sources;  // region -> top at pause start
    std::uint64_t scanned = 0;
    for (RegionId id : cset) {
      for (RegionId src : heap_.region(id).remembered_set.sources()) {
        if (in_cset[src]) continue;
        ++scanned;
        sources.emplace(src, heap_.region(src).top);
      }
    }

    const std::optional<RegionId> old_current = heap_.generation(kOldGen).current_alloc_region;
    Destination survivor(heap_, kGen0, SpaceKind::Survivor, cfg.survivor_regions, false);
    Destination old(heap_, kOldGen, SpaceKind::Tenured, SIZE_MAX, true);
    if (old_current) old.adopt(*old_current);

    std::vector<Planned> plan;
    std::uint64_t promoted = 0;
    auto evac = [&](ObjectRef t) {
      std::byte* p = heap_.object(t);
      if (header::is_forwarded(p)) return;
      const std::uint32_t size = header::size(p);
      const std::uint8_t age = header::age(p);
      const GenId owner = heap_.region(t.region).owner;
      std::optional<ObjectRef> to;
      std::uint8_t new_age = age;
      if (owner == kGen0 && age < cfg.promotion_age) {
        to = survivor.reserve(size);
        if (to) new_age = static_cast<std::uint8_t>(age + 1);
      }
      if (!to) {
        to = old.reserve(size);
        if (owner != kOldGen) ++promoted;
      }
      header::set_forwardee(p, *to);
      plan.push_back({t, *to, size, new_age});
    };
    auto visit_slots = [&](const std::byte* obj, auto&& f) {
      const auto n = heap_.klass(header::class_id(obj)).ref_slot_count;
      for (std::uint32_t s = 0; s < n; ++s) f(s, ObjectRef::decode(header::slot_bits(obj, s)));
    };

    try {
      heap_.for_each_root_slot([&](std::uint64_t& bits) {
        ObjectRef r = *ObjectRef::decode(bits);
        if (in_cset[r.region]) evac(r);
      });
      for (auto [src, top] : sources) {
        walk_to(src, top, [&](ObjectRef, const std::byte* obj) {
          visit_slots(obj, [&](std::uint32_t, std::optional<ObjectRef> t) {
            if (t && in_cset[t->region]) evac(*t);
          });
        });
      }
      for (std::size_t i = 0; i < plan.size(); ++i) {
        visit_slots(heap_.object(plan[i].from), [&](std::uint32_t, std::optional<ObjectRef> t) {
          if (t && in_cset[t->region]) evac(*t);
        });
      }
    } catch (const Destination::Full&) {
      for (const Planned& p : plan) header::clear_forwardee(heap_.object(p.from));
      survivor.rollback(std::nullopt);
      old.rollback(old_current);
      for (auto [gen, id] : reset_alloc) heap_.generation(gen).current_alloc_region = id;
      return false;
    }

    auto forward = [&](ObjectRef t) { return *header::forwardee(heap_.object(t)); };

    for (const Planned& p : plan) {
      std::byte* dst = heap_.object(p.to);
      std::memcpy(dst, heap_.object(p.from), p.size);
      header::clear_forwardee(dst);
      header::set_marked(dst, false);
      header::set_age(dst, p.age);
    }
    survivor.seal();
    old.seal();
    for (const Planned& p : plan) {
      std::byte* dst = heap_.object(p.to);
      visit_slots(dst, [&](std::uint32_t s, std::optional<ObjectRef> t) {
        if (!t) return;
        ObjectRef target = in_cset[t->region] ? forward(*t) : *t;
        header::set_slot_bits(dst, s, target.encode());
        heap_.add_edge(p.to.region, target.region);
      });
    }
    for (auto [src, top] : sources) {
      walk_to(src, top, [&](ObjectRef ref, const std::byte*) {
        std::byte* obj = heap_.object(ref);
        visit_slots(obj, [&](std::uint32_t s, std::optional<ObjectRef> t) {
          if (!t || !in_cset[t->region]) return;
          ObjectRef target = forward(*t);
          heap_.remove_edge(src, t->region);
          header::set_slot_bits(obj, s, target.encode());
          heap_.add_edge(src, target.region);
        });
      });
    }
    heap_.for_each_root_slot([&](std::uint64_t& bits) {
      ObjectRef r = *ObjectRef::decode(bits);
      if (in_cset[r.region]) bits = forward(r).encode();
    });

    for (RegionId id : cset) forwarding_.mark_collected(id);
    std::uint64_t copied = 0;
    for (const Planned& p : plan) {
      copied += p.size;
      if (record_forwarding_) forwarding_.record(p.from, p.to);
    }
    for (RegionId id : cset) heap_.region_release(id);

    report.bytes_copied += copied;
    report.objects_promoted += promoted;
    report.rset_entries_scanned += scanned;
    return true;
  }

  template <typename F>
  void walk_to(RegionId id, std::uint32_t top, F&& f) {
    const Region& r = heap_.region(id);
    std::uint32_t off = 0;
    while (off < top) {
      const std::byte* p = r.at(off);
      const std::uint32_t sz = header::size(p);
      if (!header::is_filler(p)) f(ObjectRef{id, off}, p);
      off += sz;
    }
  }

  // Sets mark bits on everything reachable from the roots; returns live
  // bytes per region.
  std::map<RegionId, std::uint64_t> mark_from_roots() {
    std::map<RegionId, std::uint64_t> live;
    std::vector<ObjectRef> stack;
    auto mark = [&](ObjectRef r) {
      std::byte* p = heap_.object(r);
      if (header::is_marked(p)) return;
      header::set_marked(p, true);
      live[r.region] += header::size(p);
      stack.push_back(r);
    };
    heap_.for_each_root([&](ObjectRef r) { mark(r); });
    while (!stack.empty()) {
      ObjectRef r = stack.back();
      stack.pop_back();
      const std::byte* p = heap_.object(r);
      const auto n = heap_.klass(header::class_id(p)).ref_slot_count;
      for (std::uint32_t s = 0; s < n; ++s)
        if (auto t = ObjectRef::decode(header::slot_bits(p, s))) mark(*t);
    }
    return live;
  }

  MarkingStats run_marking_locked() {
    MarkingStats stats;
    auto live = mark_from_roots();
    for (RegionId id = 0; id < heap_.region_count(); ++id) {
      Region& r = heap_.region(id);
      if (r.is_free()) continue;
      const std::uint64_t lb = live.count(id) ? live[id] : 0;
      if (r.top > 0 && lb == 0) {
        heap_.region_release(id);
        ++stats.regions_freed;
        continue;
      }
      std::uint32_t off = 0;
      while (off < r.top) {
        std::byte* p = r.at(off);
        const std::uint32_t sz = header::size(p);
        if (!header::is_filler(p)) {
          if (header::is_marked(p)) {
            header::set_marked(p, false);
          } else {
            const auto n = heap_.klass(header::class_id(p)).ref_slot_count;
            for (std::uint32_t s = 0; s < n; ++s)
              if (auto t = ObjectRef::decode(header::slot_bits(p, s))) heap_.remove_edge(id, t->region);
            header::init_filler(p, sz);
          }
        }
        off += sz;
      }
      r.has_live_stats = true;
      r.live_bytes_estimate = lb;
      r.top_at_mark = r.top;
      stats.live_bytes[id] = lb;
    }
    stats.epoch = heap_.epoch();
    last_marking_ = stats;
    return stats;
  }

  // Sliding mark-compact. Old regions come first in the compaction order so
  // a compacted heap stays put on a repeat run; everything lands in Old.
  void compact_all(GcReport& report) {
    const auto region_bytes = static_cast<std::uint32_t>(heap_.config().region_bytes);
    mark_from_roots();

    std::vector<RegionId> order;
    for (RegionId id : heap_.generation(kOldGen).regions) order.push_back(id);
    std::sort(order.begin(), order.end());
    for (RegionId id = 0; id < heap_.region_count(); ++id) {
      const Region& r = heap_.region(id);
      if (!r.is_free() && r.owner != kOldGen) order.push_back(id);
    }
    std::vector<std::uint32_t> tops;
    for (RegionId id : order) tops.push_back(heap_.region(id).top);
    report.collection_set = order;
    for (RegionId id : order) forwarding_.mark_collected(id);

    // Pass 1: assign destinations.
    std::size_t dest_idx = 0;
    std::uint32_t dest_off = 0;
    std::vector<std::uint32_t> dest_top(order.size(), 0);
    bool any_live = false;
    for (std::size_t i = 0; i < order.size(); ++i) {
      walk_to(order[i], tops[i], [&](ObjectRef ref, const std::byte*) {
        std::byte* p = heap_.object(ref);
        if (!header::is_marked(p)) return;
        const std::uint32_t sz = header::size(p);
        if (region_bytes - dest_off < sz) {
          ++dest_idx;
          dest_off = 0;
        }
        header::set_forwardee(p, ObjectRef{order[dest_idx], dest_off});
        dest_off += sz;
        dest_top[dest_idx] = dest_off;
        any_live = true;
        report.bytes_copied += sz;
        if (heap_.region(ref.region).owner != kOldGen) ++report.objects_promoted;
        if (record_forwarding_) forwarding_.record(ref, ObjectRef{order[dest_idx], dest_off - sz});
      });
    }
    const std::size_t dest_count = any_live ? dest_idx + 1 : 0;

    // Pass 2: rewrite references.
    auto forward = [&](std::uint64_t bits) {
      ObjectRef t = *ObjectRef::decode(bits);
      return header::forwardee(heap_.object(t))->encode();
    };
    for (std::size_t i = 0; i < order.size(); ++i) {
      walk_to(order[i], tops[i], [&](ObjectRef ref, const std::byte*) {
        std::byte* p = heap_.object(ref);
        if (!header::is_marked(p)) return;
        const auto n = heap_.klass(header::class_id(p)).ref_slot_count;
        for (std::uint32_t s = 0; s < n; ++s) {
          const std::uint64_t bits = header::slot_bits(p, s);
          if (bits) header::set_slot_bits(p, s, forward(bits));
        }
      });
    }
    heap_.for_each_root_slot([&](std::uint64_t& bits) { bits = forward(bits); });

    // Pass 3: slide. A destination never lies past its source in `order`.
    for (std::size_t i = 0; i < order.size(); ++i) {
      Region& r = heap_.region(order[i]);
      std::uint32_t off = 0;
      while (off < tops[i]) {
        std::byte* p = r.at(off);
        const std::uint32_t sz = header::size(p);
        if (!header::is_filler(p) && header::is_marked(p)) {
          ObjectRef to = *header::forwardee(p);
          std::byte* dst = heap_.object(to);
          std::memmove(dst, p, sz);
          header::clear_forwardee(dst);
          header::set_marked(dst, false);
        }
        off += sz;
      }
    }

    // Re-home regions and rebuild remembered sets from scratch.
    for (RegionId id : order) heap_.region(id).remembered_set.clear();
    for (std::size_t i = dest_count; i < order.size(); ++i) {
      heap_.region(order[i]).top = 0;
      heap_.region_release(order[i]);
    }
    for (std::size_t i = 0; i < dest_count; ++i) {
      Region& r = heap_.region(order[i]);
      r.top = dest_top[i];
      r.has_live_stats = false;
      heap_.region_transfer(order[i], kOldGen, SpaceKind::Tenured);
    }
    for (std::size_t i = 0; i < dest_count; ++i) {
      heap_.for_each_object(order[i], [&](ObjectRef ref, const std::byte* p) {
        const auto n = heap_.klass(header::class_id(p)).ref_slot_count;
        for (std::uint32_t s = 0; s < n; ++s)
          if (auto t = ObjectRef::decode(header::slot_bits(p, s))) heap_.add_edge(ref.region, t->region);
      });
    }
    Generation& old = heap_.generation(kOldGen);
    old.current_alloc_region = dest_count ? std::optional<RegionId>(order[dest_count - 1]) : std::nullopt;
    heap_.generation(kGen0).current_alloc_region.reset();
    for (GenId g = 2; g < heap_.generation_count(); ++g) {
      Generation& gen = heap_.generation(g);
      gen.current_alloc_region.reset();
      if (gen.regions.empty()) gen.discarded = true;
    }
    last_marking_.reset();
  }

  Heap& heap_;
  bool timing_ = false;
  bool record_forwarding_ = false;
  ForwardingLog forwarding_;
  std::optional<MarkingStats> last_marking_;
};

}  // namespace ng2c

#endif  // NG2C_COLLECTOR_HPP
