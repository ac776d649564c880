// Test-side oracles. These decode the heap from raw bytes using the
// documented object layout and do not call into verify.hpp or the
// collector, so they can judge both.
#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

#include "ng2c/heap.hpp"

namespace oracle {

using ng2c::ObjectRef;
using ng2c::RegionId;

// Layout: [0,4) size, [4,6) class id (0 = filler), [6] age, [7] flags,
// [8,16) forwarding word, then 8-byte reference slots, then payload.
// Reference encoding: 0 = null, else ((region + 1) << 32) | offset.
inline std::optional<ObjectRef> decode(std::uint64_t bits) {
  if (bits == 0) return std::nullopt;
  return ObjectRef{static_cast<RegionId>((bits >> 32) - 1), static_cast<std::uint32_t>(bits & 0xffffffffu)};
}

inline std::uint32_t raw_size(const std::byte* p) {
  std::uint32_t s;
  std::memcpy(&s, p, 4);
  return s;
}
inline std::uint16_t raw_class(const std::byte* p) {
  std::uint16_t c;
  std::memcpy(&c, p + 4, 2);
  return c;
}

struct RawObject {
  ObjectRef ref;
  std::uint32_t size = 0;
  std::uint16_t cls = 0;
  std::uint8_t age = 0;
  std::uint8_t flags = 0;
  std::uint32_t slot_begin = 0, slot_count = 0;
  std::uint32_t payload_begin = 0, payload_count = 0;
};

// Snapshot of every non-filler object in in-use regions. Slots and payload
// bytes are copied, so the snapshot outlives later heap changes.
struct ParsedHeap {
  bool parsable = true;
  std::vector<RawObject> objects;
  std::vector<std::uint64_t> slot_bits;
  std::vector<std::byte> bytes;
  // Per region, offset / 8 -> object index or -1. Empty for free regions.
  std::vector<std::vector<std::int32_t>> index;

  std::int32_t index_of(ObjectRef r) const {
    if (r.region >= index.size() || r.offset % 8 != 0) return -1;
    const auto& v = index[r.region];
    return r.offset / 8 < v.size() ? v[r.offset / 8] : -1;
  }
  const RawObject* find(ObjectRef r) const {
    const auto i = index_of(r);
    return i < 0 ? nullptr : &objects[static_cast<std::size_t>(i)];
  }
  const RawObject& at(ObjectRef r) const {
    const RawObject* o = find(r);
    if (!o) throw std::out_of_range("no object at reference");
    return *o;
  }
  std::optional<ObjectRef> slot(const RawObject& o, std::uint32_t s) const { return decode(slot_bits[o.slot_begin + s]); }
  const std::byte* payload(const RawObject& o) const { return bytes.data() + o.payload_begin; }
  std::uint64_t stamp(const RawObject& o) const {
    std::uint64_t id = 0;
    std::memcpy(&id, payload(o), std::min<std::size_t>(8, o.payload_count));
    return id;
  }
  bool same_payload(const RawObject& a, const ParsedHeap& other, const RawObject& b) const {
    return a.payload_count == b.payload_count && std::memcmp(payload(a), other.payload(b), a.payload_count) == 0;
  }
};

// Walks every in-use region from offset 0 to top.
inline ParsedHeap parse(const ng2c::Heap& heap) {
  ParsedHeap out;
  out.index.resize(heap.region_count());
  for (RegionId id = 0; id < heap.region_count(); ++id) {
    const ng2c::Region& r = heap.region(id);
    if (r.owner == ng2c::kFreeOwner) continue;
    auto& idx = out.index[id];
    idx.assign(r.top / 8, -1);
    std::uint32_t off = 0;
    while (off < r.top) {
      const std::byte* p = r.at(off);
      const std::uint32_t size = raw_size(p);
      if (size < 8 || size % 8 != 0 || off + size > r.top) {
        out.parsable = false;
        break;
      }
      const std::uint16_t cls = size == 8 ? 0 : raw_class(p);
      if (cls != 0) {
        const auto& k = heap.klass(cls);
        RawObject o;
        o.ref = {id, off};
        o.size = size;
        o.cls = cls;
        o.age = static_cast<std::uint8_t>(p[6]);
        o.flags = static_cast<std::uint8_t>(p[7]);
        o.slot_begin = static_cast<std::uint32_t>(out.slot_bits.size());
        o.slot_count = k.ref_slot_count;
        for (std::uint32_t s = 0; s < k.ref_slot_count; ++s) {
          std::uint64_t bits;
          std::memcpy(&bits, p + 16 + 8 * s, 8);
          out.slot_bits.push_back(bits);
        }
        const std::byte* pay = p + 16 + 8 * k.ref_slot_count;
        o.payload_begin = static_cast<std::uint32_t>(out.bytes.size());
        o.payload_count = k.payload_bytes;
        out.bytes.insert(out.bytes.end(), pay, pay + k.payload_bytes);
        idx[off / 8] = static_cast<std::int32_t>(out.objects.size());
        out.objects.push_back(o);
      }
      off += size;
    }
  }
  return out;
}

// Cross-region reference counts from a full slot scan: target region ->
// source region -> number of slots.
using RsetMap = std::map<RegionId, std::map<RegionId, std::uint32_t>>;

inline RsetMap rset_scan(const ParsedHeap& ph) {
  RsetMap m;
  for (const auto& o : ph.objects)
    for (std::uint32_t s = 0; s < o.slot_count; ++s) {
      auto t = ph.slot(o, s);
      if (t && t->region != o.ref.region) ++m[t->region][o.ref.region];
    }
  return m;
}

inline RsetMap rset_actual(const ng2c::Heap& heap) {
  RsetMap m;
  for (RegionId id = 0; id < heap.region_count(); ++id) {
    const auto& c = heap.region(id).remembered_set.counts();
    if (!c.empty()) m[id] = c;
  }
  return m;
}

// The application's view of the object graph, kept outside the heap.
// Node ids are dense, start at 1 and are stamped into payloads so heap
// objects can be matched up after they move.
class ShadowGraph {
 public:
  std::uint64_t add(std::size_t slot_count) {
    nodes_.emplace_back(slot_count, 0);
    roots_.push_back(0);
    return nodes_.size() - 1;
  }
  void set(std::uint64_t from, std::size_t slot, std::uint64_t to) { nodes_.at(from).at(slot) = to; }
  std::uint64_t get(std::uint64_t from, std::size_t slot) const { return nodes_.at(from).at(slot); }
  std::size_t slots(std::uint64_t id) const { return nodes_.at(id).size(); }
  // One past the largest id handed out.
  std::uint64_t limit() const { return nodes_.size(); }

  void add_root(std::uint64_t id) { ++roots_.at(id); }
  void remove_root(std::uint64_t id) { --roots_.at(id); }

  // Reachable ids in BFS order.
  std::vector<std::uint64_t> reachable() const {
    std::vector<char> seen(nodes_.size(), 0);
    std::vector<std::uint64_t> queue;
    for (std::uint64_t id = 1; id < roots_.size(); ++id)
      if (roots_[id] > 0 && !seen[id]) {
        seen[id] = 1;
        queue.push_back(id);
      }
    for (std::size_t i = 0; i < queue.size(); ++i)
      for (std::uint64_t t : nodes_[queue[i]])
        if (t && !seen[t]) {
          seen[t] = 1;
          queue.push_back(t);
        }
    return queue;
  }

  // Releases the edge lists of unreachable nodes. Their ids are never
  // reused.
  void prune() {
    std::vector<char> live(nodes_.size(), 0);
    for (auto id : reachable()) live[id] = 1;
    for (std::size_t id = 1; id < nodes_.size(); ++id)
      if (!live[id]) std::vector<std::uint64_t>().swap(nodes_[id]);
  }

 private:
  std::vector<std::vector<std::uint64_t>> nodes_{1};
  std::vector<int> roots_{0};
};

// Indices (into ph.objects) of the objects reachable from the heap's own
// roots, following raw slots, in BFS order. `dangling` counts references
// that do not land on an object start.
struct HeapTrace {
  std::vector<std::uint32_t> objects;
  std::size_t dangling = 0;
};

inline HeapTrace heap_reachable(const ng2c::Heap& heap, const ParsedHeap& ph) {
  HeapTrace out;
  std::vector<char> seen(ph.objects.size(), 0);
  auto push = [&](ObjectRef r) {
    const auto i = ph.index_of(r);
    if (i < 0) {
      ++out.dangling;
      return;
    }
    if (!seen[static_cast<std::size_t>(i)]) {
      seen[static_cast<std::size_t>(i)] = 1;
      out.objects.push_back(static_cast<std::uint32_t>(i));
    }
  };
  heap.for_each_root(push);
  for (std::size_t q = 0; q < out.objects.size(); ++q) {
    const RawObject& o = ph.objects[out.objects[q]];
    for (std::uint32_t s = 0; s < o.slot_count; ++s)
      if (auto t = ph.slot(o, s)) push(*t);
  }
  return out;
}

}  // namespace oracle
