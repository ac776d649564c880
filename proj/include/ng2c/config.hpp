#ifndef NG2C_CONFIG_HPP
#define NG2C_CONFIG_HPP

#include <cstddef>
#include <cstdint>
#include <string>

#include "ng2c/errors.hpp"

namespace ng2c {

inline constexpr std::size_t KiB = 1024;
inline constexpr std::size_t MiB = 1024 * KiB;

// Heap geometry and collection policy knobs. Defaults model a 64 MiB heap.
struct HeapConfig {
  std::size_t heap_bytes = 64 * MiB;
  std::size_t region_bytes = 32 * KiB;
  std::size_t gen0_max_bytes = 8 * MiB;  // cap on Eden regions
  std::size_t tlab_bytes = 1 * KiB;
  std::uint32_t promotion_age = 2;
  double mixed_trigger_occupancy = 0.45;
  double region_live_threshold = 0.50;
  // Cost units charged per remembered-set entry scanned during a pause.
  double rset_scan_cost = 0.5;
  // To-space capacity of a minor collection; overflow is promoted to Old.
  std::size_t survivor_regions = 2;

  std::size_t region_count() const { return heap_bytes / region_bytes; }
  std::size_t gen0_max_regions() const { return gen0_max_bytes / region_bytes; }

  void validate() const {
    auto fail = [](const char* field, const std::string& why) {
      throw Error(Errc::config, std::string(field) + ": " + why);
    };
    if (region_bytes == 0 || region_bytes % 8 != 0) fail("region_bytes", "must be a positive multiple of 8");
    if (region_bytes > (std::size_t{1} << 31)) fail("region_bytes", "must fit a 31-bit offset");
    if (heap_bytes == 0 || heap_bytes % region_bytes != 0) fail("heap_bytes", "region_bytes must divide heap_bytes");
    if (region_count() < 4) fail("heap_bytes", "heap must hold at least 4 regions");
    if (tlab_bytes == 0 || tlab_bytes % 8 != 0) fail("tlab_bytes", "must be a positive multiple of 8");
    if (tlab_bytes > region_bytes) fail("tlab_bytes", "must not exceed region_bytes");
    if (gen0_max_bytes < 2 * region_bytes) fail("gen0_max_bytes", "must be at least 2 regions");
    if (gen0_max_bytes > heap_bytes) fail("gen0_max_bytes", "must not exceed heap_bytes");
    if (!(mixed_trigger_occupancy > 0.0 && mixed_trigger_occupancy < 1.0))
      fail("mixed_trigger_occupancy", "must lie in (0, 1)");
    if (!(region_live_threshold > 0.0 && region_live_threshold <= 1.0))
      fail("region_live_threshold", "must lie in (0, 1]");
    if (!(rset_scan_cost >= 0.0)) fail("rset_scan_cost", "must be non-negative");
    if (survivor_regions == 0) fail("survivor_regions", "must be positive");
  }
};

}  // namespace ng2c

#endif  // NG2C_CONFIG_HPP
