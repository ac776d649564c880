#ifndef NG2C_HEAP_HPP
#define NG2C_HEAP_HPP

#include <algorithm>
#include <atomic>
#include <cassert>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "ng2c/config.hpp"
#include "ng2c/errors.hpp"
#include "ng2c/object_model.hpp"

namespace ng2c {

enum class SpaceKind : std::uint8_t { Eden, Survivor, Tenured };

inline const char* space_name(SpaceKind k) {
  switch (k) {
    case SpaceKind::Eden: return "eden";
    case SpaceKind::Survivor: return "survivor";
    case SpaceKind::Tenured: return "tenured";
  }
  return "?";
}

inline constexpr GenId kFreeOwner = kNoGeneration;

// Incoming-reference summary of one region: for each other region holding
// references into this one, the number of such reference slots. The key set
// is the remembered set proper; the counts let stores that overwrite a
// cross-region reference retire the entry exactly.
class RememberedSet {
 public:
  void add(RegionId source) { ++entries_[source]; }

  void remove(RegionId source) {
    auto it = entries_.find(source);
    assert(it != entries_.end() && "remembered-set entry underflow");
    if (it == entries_.end()) return;
    if (--it->second == 0) entries_.erase(it);
  }

  bool contains(RegionId source) const { return entries_.count(source) != 0; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  void clear() { entries_.clear(); }

  std::vector<RegionId> sources() const {
    std::vector<RegionId> out;
    out.reserve(entries_.size());
    for (const auto& [src, n] : entries_) out.push_back(src);
    return out;
  }
  const std::map<RegionId, std::uint32_t>& counts() const { return entries_; }

 private:
  std::map<RegionId, std::uint32_t> entries_;
};

struct Region {
  RegionId id = 0;
  std::unique_ptr<std::byte[]> base;
  std::uint32_t top = 0;
  GenId owner = kFreeOwner;
  SpaceKind space = SpaceKind::Eden;
  RememberedSet remembered_set;
  // Filled in by marking; live_bytes_estimate is meaningful only with has_live_stats.
  bool has_live_stats = false;
  std::uint64_t live_bytes_estimate = 0;
  std::uint32_t top_at_mark = 0;

  bool is_free() const { return owner == kFreeOwner; }
  std::byte* at(std::uint32_t offset) { return base.get() + offset; }
  const std::byte* at(std::uint32_t offset) const { return base.get() + offset; }
};

struct Generation {
  GenId gen_id = 0;
  std::vector<RegionId> regions;
  std::optional<RegionId> current_alloc_region;
  std::uint64_t created_epoch = 0;
  bool discarded = false;
  std::uint32_t recreations = 0;
};

// The region pool, generation descriptors, object storage, the write
// barrier, and the root registry.
class Heap {
 public:
  explicit Heap(const HeapConfig& config) : config_(config) {
    config_.validate();
    regions_.resize(config_.region_count());
    for (RegionId id = 0; id < regions_.size(); ++id) {
      regions_[id].id = id;
      free_.insert(id);
    }
    classes_.push_back(ClassDescriptor{});  // filler
    for (GenId g : {kGen0, kOldGen}) gens_.push_back(Generation{g, {}, std::nullopt, 0, false, 0});
    region_acquire(kGen0, SpaceKind::Eden);
    region_acquire(kOldGen, SpaceKind::Tenured);
  }

  Heap(const Heap&) = delete;
  Heap& operator=(const Heap&) = delete;

  const HeapConfig& config() const { return config_; }

  // Structural lock for region/generation bookkeeping. Recursive so the
  // allocator can hold it across region_acquire.
  std::unique_lock<std::recursive_mutex> lock() const { return std::unique_lock(mutex_); }

  // --- classes -----------------------------------------------------------

  ClassId register_class(std::uint32_t ref_slots, std::uint32_t payload_bytes, bool is_array = false) {
    std::lock_guard g(mutex_);
    if (classes_.size() > UINT16_MAX) throw Error(Errc::config, "too many classes");
    ClassDescriptor d{static_cast<ClassId>(classes_.size()), ref_slots, payload_bytes, is_array};
    if (d.size_bytes() > config_.region_bytes)
      throw Error(Errc::too_large, "class of " + std::to_string(d.size_bytes()) + " bytes exceeds a region");
    classes_.push_back(d);
    return d.class_id;
  }

  const ClassDescriptor& klass(ClassId id) const {
    if (id == kFillerClass || id >= classes_.size()) throw Error(Errc::config, "unknown class id " + std::to_string(id));
    return classes_[id];
  }
  std::size_t class_count() const { return classes_.size(); }

  // --- regions -----------------------------------------------------------

  std::size_t region_count() const { return regions_.size(); }
  Region& region(RegionId id) { return regions_.at(id); }
  const Region& region(RegionId id) const { return regions_.at(id); }
  std::size_t free_region_count() const { return free_.size(); }
  std::size_t regions_in_use() const { return regions_.size() - free_.size(); }
  const std::set<RegionId>& free_regions() const { return free_; }

  std::size_t peak_regions_in_use() const { return peak_in_use_; }
  // Restarts peak tracking at the current usage.
  void reset_peak() { peak_in_use_ = regions_in_use(); }

  double occupancy() const {
    return static_cast<double>(regions_in_use()) / static_cast<double>(regions_.size());
  }

  std::size_t eden_region_count() const {
    std::size_t n = 0;
    for (RegionId id : gens_[kGen0].regions)
      if (regions_[id].space == SpaceKind::Eden) ++n;
    return n;
  }
  bool gen0_full() const { return eden_region_count() >= config_.gen0_max_regions(); }

  // Moves a free region into gen_id (re-creating it if discarded). Returns
  // nullopt when the free list is empty; the caller decides whether to
  // collect and retry.
  std::optional<RegionId> region_acquire(GenId gen_id, SpaceKind space, bool make_current = true) {
    std::lock_guard g(mutex_);
    ensure_generation(gen_id);
    if (free_.empty()) return std::nullopt;
    RegionId id = *free_.begin();
    free_.erase(free_.begin());
    Region& r = regions_[id];
    if (!r.base) r.base = std::make_unique<std::byte[]>(config_.region_bytes);
    r.top = 0;
    r.owner = gen_id;
    r.space = space;
    r.remembered_set.clear();
    r.has_live_stats = false;
    r.live_bytes_estimate = 0;
    r.top_at_mark = 0;
    gens_[gen_id].regions.push_back(id);
    if (make_current) gens_[gen_id].current_alloc_region = id;
    peak_in_use_ = std::max(peak_in_use_, regions_in_use());
    return id;
  }

  // Returns a region to the free list. Outgoing references held by objects
  // still formatted in the region are retired from their targets'
  // remembered sets. A dynamic generation left without regions is discarded.
  void region_release(RegionId id) {
    std::lock_guard g(mutex_);
    Region& r = regions_.at(id);
    if (r.is_free()) throw Error(Errc::double_free, "region " + std::to_string(id) + " is already free");
    for_each_object(id, [&](ObjectRef ref, const std::byte* obj) {
      const auto n = classes_[header::class_id(obj)].ref_slot_count;
      for (std::uint32_t s = 0; s < n; ++s)
        if (auto t = ObjectRef::decode(header::slot_bits(obj, s))) remove_edge(ref.region, t->region);
    });
    detach_from_owner(r);
    r.remembered_set.clear();
    r.top = 0;
    r.owner = kFreeOwner;
    r.space = SpaceKind::Eden;
    r.has_live_stats = false;
    r.live_bytes_estimate = 0;
    r.top_at_mark = 0;
    free_.insert(id);
  }

  // Hands a region to another generation without touching its contents.
  void region_transfer(RegionId id, GenId gen_id, SpaceKind space) {
    std::lock_guard g(mutex_);
    Region& r = regions_.at(id);
    assert(!r.is_free());
    if (r.owner == gen_id) {
      r.space = space;
      return;
    }
    ensure_generation(gen_id);
    detach_from_owner(r);
    r.owner = gen_id;
    r.space = space;
    gens_[gen_id].regions.push_back(id);
  }

  // Formats [from, to) of a region as dead space.
  void fill(RegionId id, std::uint32_t from, std::uint32_t to) {
    if (to > from) header::init_filler(regions_[id].at(from), to - from);
  }

  // --- generations -------------------------------------------------------

  std::size_t generation_count() const { return gens_.size(); }
  bool generation_exists(GenId id) const { return id < gens_.size(); }
  Generation& generation(GenId id) {
    if (id >= gens_.size()) throw Error(Errc::unknown_generation, std::to_string(id));
    return gens_[id];
  }
  const Generation& generation(GenId id) const {
    if (id >= gens_.size()) throw Error(Errc::unknown_generation, std::to_string(id));
    return gens_[id];
  }

  // Creates a generation with no regions; memory is taken on first use.
  GenId create_generation() {
    std::lock_guard g(mutex_);
    GenId id = static_cast<GenId>(gens_.size());
    gens_.push_back(Generation{id, {}, std::nullopt, epoch_, false, 0});
    return id;
  }

  // Re-creates a discarded generation under the same id.
  void ensure_generation(GenId id) {
    std::lock_guard g(mutex_);
    Generation& gen = generation(id);
    if (gen.discarded) {
      gen.discarded = false;
      gen.created_epoch = epoch_;
      ++gen.recreations;
    }
  }

  std::vector<GenId> live_dynamic_generations() const {
    std::vector<GenId> out;
    for (GenId id = 2; id < gens_.size(); ++id)
      if (!gens_[id].regions.empty()) out.push_back(id);
    return out;
  }

  // --- epochs ------------------------------------------------------------

  std::uint64_t epoch() const { return epoch_; }
  void advance_epoch() { ++epoch_; }

  // --- objects -----------------------------------------------------------

  // Formats a zeroed object at region offset. The caller owns the space.
  ObjectRef init_object(RegionId id, std::uint32_t offset, const ClassDescriptor& k) {
    header::init(regions_[id].at(offset), static_cast<std::uint32_t>(k.size_bytes()), k.class_id);
    return ObjectRef{id, offset};
  }

  bool is_valid(ObjectRef ref) const {
    if (ref.region >= regions_.size()) return false;
    const Region& r = regions_[ref.region];
    if (r.is_free() || ref.offset >= r.top || ref.offset % kAlignment != 0) return false;
    const std::byte* obj = r.at(ref.offset);
    if (header::is_filler(obj) || header::class_id(obj) >= classes_.size()) return false;
    if (header::is_forwarded(obj) && !in_collection_) return false;
    return ref.offset + header::size(obj) <= r.top;
  }

  std::byte* object(ObjectRef ref) { return regions_[ref.region].at(ref.offset); }
  const std::byte* object(ObjectRef ref) const { return regions_[ref.region].at(ref.offset); }

  const ClassDescriptor& class_of(ObjectRef ref) const { return classes_[header::class_id(checked(ref))]; }
  std::uint32_t object_size(ObjectRef ref) const { return header::size(checked(ref)); }
  std::uint8_t object_age(ObjectRef ref) const { return header::age(checked(ref)); }
  GenId owner_of(ObjectRef ref) const { return regions_.at(ref.region).owner; }

  std::span<std::byte> payload(ObjectRef ref) {
    const std::byte* obj = checked(ref);
    const auto& k = classes_[header::class_id(obj)];
    return {object(ref) + k.payload_offset(), k.payload_bytes};
  }
  std::span<const std::byte> payload(ObjectRef ref) const {
    const std::byte* obj = checked(ref);
    const auto& k = classes_[header::class_id(obj)];
    return {obj + k.payload_offset(), k.payload_bytes};
  }

  std::optional<ObjectRef> read_ref(ObjectRef obj, std::uint32_t slot) const {
    const std::byte* p = checked(obj);
    check_slot(p, slot);
    return ObjectRef::decode(header::slot_bits(p, slot));
  }

  // Reference store with the write barrier: a cross-region store records
  // the source region in the target region's remembered set.
  void write_ref(ObjectRef obj, std::uint32_t slot, std::optional<ObjectRef> target) {
    std::byte* p = checked_mut(obj);
    check_slot(p, slot);
    if (target && !is_valid(*target))
      throw Error(Errc::invalid_reference, "store of invalid target " + describe(*target));
    std::lock_guard g(barrier_mutex_);
    if (auto old = ObjectRef::decode(header::slot_bits(p, slot))) remove_edge(obj.region, old->region);
    header::set_slot_bits(p, slot, target ? target->encode() : 0);
    if (target && target->region != obj.region) {
      add_edge(obj.region, target->region);
      rset_updates_.fetch_add(1, std::memory_order_relaxed);
    }
  }

  // Cross-region stores recorded by the barrier since the last reset.
  std::uint64_t rset_updates() const { return rset_updates_.load(std::memory_order_relaxed); }
  std::uint64_t take_rset_updates() { return rset_updates_.exchange(0, std::memory_order_relaxed); }

  void add_edge(RegionId source, RegionId target) {
    if (source != target) regions_[target].remembered_set.add(source);
  }
  void remove_edge(RegionId source, RegionId target) {
    if (source != target && !regions_[target].is_free()) regions_[target].remembered_set.remove(source);
  }

  // Walks every formatted chunk (objects and fillers) in [0, top).
  template <typename F>
  void walk(RegionId id, F&& f) const {
    const Region& r = regions_[id];
    std::uint32_t off = 0;
    while (off < r.top) {
      const std::byte* p = r.at(off);
      const std::uint32_t sz = header::size(p);
      assert(sz >= kAlignment && sz % kAlignment == 0);
      f(ObjectRef{id, off}, p);
      off += sz;
    }
  }

  template <typename F>
  void for_each_object(RegionId id, F&& f) const {
    walk(id, [&](ObjectRef ref, const std::byte* p) {
      if (!header::is_filler(p)) f(ref, p);
    });
  }

  // --- roots -------------------------------------------------------------

  RootHandle register_root(ObjectRef obj) {
    if (!is_valid(obj)) throw Error(Errc::invalid_reference, "root " + describe(obj));
    std::lock_guard g(root_mutex_);
    std::uint32_t index;
    if (!free_roots_.empty()) {
      index = free_roots_.back();
      free_roots_.pop_back();
    } else {
      index = static_cast<std::uint32_t>(roots_.size());
      roots_.push_back({});
    }
    RootSlot& s = roots_[index];
    s.bits = obj.encode();
    s.live = true;
    ++s.serial;
    return RootHandle{index, s.serial};
  }

  void unregister_root(RootHandle h) {
    std::lock_guard g(root_mutex_);
    root_slot(h).live = false;
    roots_[h.index].bits = 0;
    free_roots_.push_back(h.index);
  }

  ObjectRef resolve(RootHandle h) const {
    std::lock_guard g(root_mutex_);
    return *ObjectRef::decode(root_slot(h).bits);
  }

  // Repoints a root at another object.
  void set_root(RootHandle h, ObjectRef obj) {
    if (!is_valid(obj)) throw Error(Errc::invalid_reference, "root " + describe(obj));
    std::lock_guard g(root_mutex_);
    root_slot(h).bits = obj.encode();
  }

  std::size_t root_count() const { return roots_.size() - free_roots_.size(); }

  // Visits live root slots in handle order. For the collector only.
  template <typename F>
  void for_each_root_slot(F&& f) {
    for (auto& s : roots_)
      if (s.live) f(s.bits);
  }
  template <typename F>
  void for_each_root(F&& f) const {
    for (const auto& s : roots_)
      if (s.live) f(*ObjectRef::decode(s.bits));
  }

  // Set by the collector for the span of a pause.
  void set_in_collection(bool on) { in_collection_ = on; }
  bool in_collection() const { return in_collection_; }

  std::string describe(ObjectRef r) const {
    return "(region " + std::to_string(r.region) + ", offset " + std::to_string(r.offset) + ")";
  }

 private:
  struct RootSlot {
    std::uint64_t bits = 0;
    std::uint32_t serial = 0;
    bool live = false;
  };

  const RootSlot& root_slot(RootHandle h) const {
    if (h.index >= roots_.size() || !roots_[h.index].live || roots_[h.index].serial != h.serial)
      throw Error(Errc::invalid_handle, "root handle " + std::to_string(h.index));
    return roots_[h.index];
  }
  RootSlot& root_slot(RootHandle h) { return const_cast<RootSlot&>(std::as_const(*this).root_slot(h)); }

  const std::byte* checked(ObjectRef ref) const {
    if (!is_valid(ref)) throw Error(Errc::invalid_reference, describe(ref));
    return object(ref);
  }
  std::byte* checked_mut(ObjectRef ref) {
    if (!is_valid(ref)) throw Error(Errc::invalid_reference, describe(ref));
    return object(ref);
  }
  void check_slot(const std::byte* obj, std::uint32_t slot) const {
    const auto n = classes_[header::class_id(obj)].ref_slot_count;
    if (slot >= n)
      throw Error(Errc::slot_bounds, "slot " + std::to_string(slot) + " of " + std::to_string(n));
  }

  void detach_from_owner(Region& r) {
    Generation& gen = gens_[r.owner];
    auto it = std::find(gen.regions.begin(), gen.regions.end(), r.id);
    if (it != gen.regions.end()) gen.regions.erase(it);
    if (gen.current_alloc_region == r.id) gen.current_alloc_region.reset();
    if (gen.gen_id >= 2 && gen.regions.empty()) gen.discarded = true;
  }

  HeapConfig config_;
  std::vector<Region> regions_;
  std::set<RegionId> free_;
  std::vector<Generation> gens_;
  std::vector<ClassDescriptor> classes_;
  std::vector<RootSlot> roots_;
  std::vector<std::uint32_t> free_roots_;
  std::uint64_t epoch_ = 0;
  std::size_t peak_in_use_ = 0;
  std::atomic<std::uint64_t> rset_updates_{0};
  bool in_collection_ = false;
  mutable std::recursive_mutex mutex_;
  mutable std::mutex barrier_mutex_;
  mutable std::mutex root_mutex_;
};

}  // namespace ng2c

#endif  // NG2C_HEAP_HPP
