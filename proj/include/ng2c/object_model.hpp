#ifndef NG2C_OBJECT_MODEL_HPP
#define NG2C_OBJECT_MODEL_HPP

#include <compare>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <functional>
#include <optional>

namespace ng2c {

using RegionId = std::uint32_t;
using GenId = std::uint32_t;
using ClassId = std::uint16_t;

inline constexpr GenId kGen0 = 0;
inline constexpr GenId kOldGen = 1;
inline constexpr GenId kNoGeneration = UINT32_MAX;

// Word-level layout of a simulated object:
//
//   [0, 4)   size in bytes (total, aligned)
//   [4, 6)   class id (0 = filler)
//   [6]      age
//   [7]      flags
//   [8, 16)  forwarding reference (valid only while kForwarded is set)
//   [16, ..) reference slots, 8 bytes each, then payload bytes
//
// A filler may be a single 8-byte word; only [0, 8) is meaningful for it.
inline constexpr std::size_t kHeaderBytes = 16;
inline constexpr std::size_t kAlignment = 8;
inline constexpr std::size_t kRefBytes = 8;
inline constexpr ClassId kFillerClass = 0;

constexpr std::size_t align_up(std::size_t n) { return (n + kAlignment - 1) & ~(kAlignment - 1); }

// Simulated address: a byte offset inside one region.
struct ObjectRef {
  RegionId region = 0;
  std::uint32_t offset = 0;

  // Slot encoding. Zero is reserved for null so zero-filled memory reads as null.
  constexpr std::uint64_t encode() const {
    return (static_cast<std::uint64_t>(region) + 1) << 32 | offset;
  }
  static constexpr std::optional<ObjectRef> decode(std::uint64_t bits) {
    if (bits == 0) return std::nullopt;
    return ObjectRef{static_cast<RegionId>((bits >> 32) - 1), static_cast<std::uint32_t>(bits)};
  }

  friend constexpr auto operator<=>(const ObjectRef&, const ObjectRef&) = default;
};

struct ClassDescriptor {
  ClassId class_id = kFillerClass;
  std::uint32_t ref_slot_count = 0;
  std::uint32_t payload_bytes = 0;
  bool is_array = false;

  std::size_t size_bytes() const {
    return align_up(kHeaderBytes + std::size_t{ref_slot_count} * kRefBytes + payload_bytes);
  }
  std::size_t payload_offset() const { return kHeaderBytes + std::size_t{ref_slot_count} * kRefBytes; }
};

namespace header {

enum Flag : std::uint8_t {
  kMarked = 1 << 0,
  kForwarded = 1 << 1,
};

inline std::uint32_t size(const std::byte* obj) {
  std::uint32_t v;
  std::memcpy(&v, obj, 4);
  return v;
}
inline ClassId class_id(const std::byte* obj) {
  ClassId v;
  std::memcpy(&v, obj + 4, 2);
  return v;
}
inline std::uint8_t age(const std::byte* obj) { return static_cast<std::uint8_t>(obj[6]); }
inline std::uint8_t flags(const std::byte* obj) { return static_cast<std::uint8_t>(obj[7]); }
inline bool is_filler(const std::byte* obj) { return class_id(obj) == kFillerClass; }
inline bool is_marked(const std::byte* obj) { return flags(obj) & kMarked; }
inline bool is_forwarded(const std::byte* obj) { return flags(obj) & kForwarded; }

inline void set_age(std::byte* obj, std::uint8_t a) { obj[6] = std::byte{a}; }
inline void set_flags(std::byte* obj, std::uint8_t f) { obj[7] = std::byte{f}; }
inline void set_marked(std::byte* obj, bool on) {
  set_flags(obj, on ? (flags(obj) | kMarked) : (flags(obj) & ~kMarked));
}

inline std::optional<ObjectRef> forwardee(const std::byte* obj) {
  if (!is_forwarded(obj)) return std::nullopt;
  std::uint64_t bits;
  std::memcpy(&bits, obj + 8, 8);
  return ObjectRef::decode(bits);
}
inline void set_forwardee(std::byte* obj, ObjectRef to) {
  std::uint64_t bits = to.encode();
  std::memcpy(obj + 8, &bits, 8);
  set_flags(obj, flags(obj) | kForwarded);
}
inline void clear_forwardee(std::byte* obj) {
  std::memset(obj + 8, 0, 8);
  set_flags(obj, flags(obj) & ~kForwarded);
}

inline void init(std::byte* obj, std::uint32_t size_bytes, ClassId klass) {
  std::memset(obj, 0, size_bytes);
  std::memcpy(obj, &size_bytes, 4);
  std::memcpy(obj + 4, &klass, 2);
}

// Formats [obj, obj + size) as dead space.
inline void init_filler(std::byte* obj, std::uint32_t size_bytes) {
  std::memset(obj, 0, size_bytes < kHeaderBytes ? size_bytes : kHeaderBytes);
  std::memcpy(obj, &size_bytes, 4);
}

inline std::uint64_t slot_bits(const std::byte* obj, std::uint32_t slot) {
  std::uint64_t v;
  std::memcpy(&v, obj + kHeaderBytes + std::size_t{slot} * kRefBytes, 8);
  return v;
}
inline void set_slot_bits(std::byte* obj, std::uint32_t slot, std::uint64_t v) {
  std::memcpy(obj + kHeaderBytes + std::size_t{slot} * kRefBytes, &v, 8);
}

}  // namespace header

// Stable name for a GC root. Survives object moves; the collector rewrites
// the slot it names.
struct RootHandle {
  std::uint32_t index = 0;
  std::uint32_t serial = 0;
  friend constexpr bool operator==(const RootHandle&, const RootHandle&) = default;
};

}  // namespace ng2c

template <>
struct std::hash<ng2c::ObjectRef> {
  std::size_t operator()(const ng2c::ObjectRef& r) const noexcept {
    return std::hash<std::uint64_t>{}(r.encode());
  }
};

#endif  // NG2C_OBJECT_MODEL_HPP
