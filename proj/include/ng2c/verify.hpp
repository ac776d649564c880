#ifndef NG2C_VERIFY_HPP
#define NG2C_VERIFY_HPP

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "ng2c/heap.hpp"

namespace ng2c {

// Everything reachable from the roots. Does not touch object headers.
inline std::unordered_set<ObjectRef> reachable_set(const Heap& heap) {
  std::unordered_set<ObjectRef> seen;
  std::vector<ObjectRef> stack;
  heap.for_each_root([&](ObjectRef r) {
    if (seen.insert(r).second) stack.push_back(r);
  });
  while (!stack.empty()) {
    ObjectRef r = stack.back();
    stack.pop_back();
    const std::byte* p = heap.object(r);
    const auto n = heap.klass(header::class_id(p)).ref_slot_count;
    for (std::uint32_t s = 0; s < n; ++s) {
      auto t = ObjectRef::decode(header::slot_bits(p, s));
      if (t && seen.insert(*t).second) stack.push_back(*t);
    }
  }
  return seen;
}

// Reachable objects as one bit per 8-byte offset of each region.
class ReachableMap {
 public:
  explicit ReachableMap(const Heap& heap) : words_(heap.config().region_bytes / 8 / 64 + 1), bits_(heap.region_count()) {
    std::vector<ObjectRef> stack;
    heap.for_each_root([&](ObjectRef r) {
      if (insert(r)) stack.push_back(r);
    });
    while (!stack.empty()) {
      ObjectRef r = stack.back();
      stack.pop_back();
      const std::byte* p = heap.object(r);
      const auto n = heap.klass(header::class_id(p)).ref_slot_count;
      for (std::uint32_t s = 0; s < n; ++s) {
        auto t = ObjectRef::decode(header::slot_bits(p, s));
        if (t && insert(*t)) stack.push_back(*t);
      }
    }
  }

  std::size_t count(ObjectRef r) const {
    if (r.region >= bits_.size() || bits_[r.region].empty()) return 0;
    const std::uint32_t i = r.offset / 8;
    return (bits_[r.region][i / 64] >> (i % 64)) & 1;
  }
  std::size_t size() const { return size_; }

 private:
  bool insert(ObjectRef r) {
    auto& v = bits_[r.region];
    if (v.empty()) v.assign(words_, 0);
    const std::uint32_t i = r.offset / 8;
    const std::uint64_t m = std::uint64_t{1} << (i % 64);
    if (v[i / 64] & m) return false;
    v[i / 64] |= m;
    ++size_;
    return true;
  }

  std::size_t words_;
  std::vector<std::vector<std::uint64_t>> bits_;
  std::size_t size_ = 0;
};

// Placement-independent digest of the reachable graph: objects are numbered
// in BFS order from the roots (in handle order), and the digest covers
// classes, payload bytes and edges by number.
inline std::uint64_t graph_fingerprint(const Heap& heap) {
  std::unordered_map<ObjectRef, std::uint64_t> index;
  std::vector<ObjectRef> order;
  auto visit = [&](ObjectRef r) -> std::uint64_t {
    auto [it, fresh] = index.emplace(r, order.size());
    if (fresh) order.push_back(r);
    return it->second;
  };
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xff;
      h *= 1099511628211ull;
    }
  };
  heap.for_each_root([&](ObjectRef r) { mix(visit(r)); });
  for (std::size_t i = 0; i < order.size(); ++i) {
    const std::byte* p = heap.object(order[i]);
    const auto& k = heap.klass(header::class_id(p));
    mix(k.class_id);
    for (std::uint32_t s = 0; s < k.ref_slot_count; ++s) {
      auto t = ObjectRef::decode(header::slot_bits(p, s));
      mix(t ? visit(*t) + 1 : 0);
    }
    for (std::size_t b = 0; b < k.payload_bytes; ++b) mix(static_cast<std::uint8_t>(p[k.payload_offset() + b]));
  }
  mix(order.size());
  return h;
}

struct HeapCheck {
  std::vector<std::string> problems;
  bool ok() const { return problems.empty(); }
};

// Structural audit: region partition, parsability and accounting, closed
// reference graph, and remembered sets equal to a full slot scan.
inline HeapCheck check_heap(const Heap& heap) {
  HeapCheck out;
  auto fail = [&](std::string s) {
    if (out.problems.size() < 50) out.problems.push_back(std::move(s));
  };
  const std::size_t n = heap.region_count();
  const auto region_bytes = heap.config().region_bytes;

  std::vector<int> listed(n, 0);
  for (GenId g = 0; g < heap.generation_count(); ++g) {
    const Generation& gen = heap.generation(g);
    if (gen.discarded && !gen.regions.empty()) fail("discarded generation " + std::to_string(g) + " owns regions");
    for (RegionId id : gen.regions) {
      ++listed[id];
      if (heap.region(id).owner != g) fail("region " + std::to_string(id) + " listed under wrong generation");
    }
    if (gen.current_alloc_region && heap.region(*gen.current_alloc_region).owner != g)
      fail("generation " + std::to_string(g) + " allocates in a foreign region");
  }
  for (RegionId id : heap.free_regions()) ++listed[id];
  for (RegionId id = 0; id < n; ++id) {
    if (listed[id] != 1) fail("region " + std::to_string(id) + " appears " + std::to_string(listed[id]) + " times");
    const Region& r = heap.region(id);
    if (r.is_free() && (r.top != 0 || !r.remembered_set.empty()))
      fail("free region " + std::to_string(id) + " not reset");
    if (r.top > region_bytes) fail("region " + std::to_string(id) + " top past end");
  }

  std::unordered_set<ObjectRef> starts;
  for (RegionId id = 0; id < n; ++id) {
    const Region& r = heap.region(id);
    if (r.is_free()) continue;
    std::uint64_t off = 0;
    while (off < r.top) {
      const std::byte* p = r.at(static_cast<std::uint32_t>(off));
      const std::uint32_t sz = header::size(p);
      if (sz < kAlignment || sz % kAlignment || off + sz > r.top) {
        fail("region " + std::to_string(id) + " unparsable at " + std::to_string(off));
        break;
      }
      if (!header::is_filler(p)) {
        if (header::class_id(p) >= heap.class_count()) fail("bad class at " + heap.describe({id, std::uint32_t(off)}));
        else if (heap.klass(header::class_id(p)).size_bytes() != sz)
          fail("size/class mismatch at " + heap.describe({id, std::uint32_t(off)}));
        if (header::flags(p) != 0) fail("stale mark/forward at " + heap.describe({id, std::uint32_t(off)}));
        starts.insert(ObjectRef{id, static_cast<std::uint32_t>(off)});
      }
      off += sz;
    }
  }

  std::map<RegionId, std::map<RegionId, std::uint32_t>> expected;
  for (const ObjectRef& ref : starts) {
    const std::byte* p = heap.object(ref);
    const auto& k = heap.klass(header::class_id(p));
    for (std::uint32_t s = 0; s < k.ref_slot_count; ++s) {
      auto t = ObjectRef::decode(header::slot_bits(p, s));
      if (!t) continue;
      if (!starts.count(*t)) fail("dangling slot in " + heap.describe(ref) + " -> " + heap.describe(*t));
      else if (t->region != ref.region) ++expected[t->region][ref.region];
    }
  }
  heap.for_each_root([&](ObjectRef r) {
    if (!starts.count(r)) fail("dangling root -> " + heap.describe(r));
  });
  for (RegionId id = 0; id < n; ++id) {
    const auto& actual = heap.region(id).remembered_set.counts();
    auto it = expected.find(id);
    const std::map<RegionId, std::uint32_t> none;
    const auto& want = it == expected.end() ? none : it->second;
    if (actual != want) fail("remembered set of region " + std::to_string(id) + " differs from slot scan");
  }
  return out;
}

}  // namespace ng2c

#endif  // NG2C_VERIFY_HPP
