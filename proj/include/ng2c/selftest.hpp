#ifndef NG2C_SELFTEST_HPP
#define NG2C_SELFTEST_HPP

#include <cstdint>
#include <cstring>
#include <ostream>
#include <random>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "ng2c/runtime.hpp"
#include "ng2c/verify.hpp"

namespace ng2c {

struct SelftestResult {
  std::uint64_t programs = 0;
  std::uint64_t collections = 0;
  std::uint64_t failures = 0;
  std::vector<std::string> messages;
};

// Random mutator programs against a small heap. Each object carries a node
// id in its payload; a shadow edge list kept outside the heap is compared
// with the heap after every collection, together with check_heap().
inline SelftestResult run_selftest(std::uint64_t programs, std::uint64_t seed, std::ostream* progress = nullptr) {
  SelftestResult res;
  for (std::uint64_t p = 0; p < programs; ++p) {
    std::mt19937_64 rng(seed + p);
    HeapConfig cfg;
    cfg.heap_bytes = 2 * MiB;
    cfg.region_bytes = 16 * KiB;
    cfg.gen0_max_bytes = 256 * KiB;
    cfg.tlab_bytes = 1 * KiB;
    Runtime rt(cfg);
    ThreadContext& ctx = rt.attach_thread();
    std::vector<ClassId> classes;
    for (std::uint32_t s = 0; s <= 4; ++s) classes.push_back(rt.register_class(s, 8 + 8 * (s % 3)));
    classes.push_back(rt.register_class(2, 600, true));

    struct Node {
      std::vector<std::int64_t> slots;
    };
    std::unordered_map<std::uint64_t, Node> shadow;
    std::vector<std::pair<RootHandle, std::uint64_t>> roots;
    std::vector<GenId> gens{kGen0};
    std::uint64_t next_id = 1;

    auto id_of = [&](ObjectRef r) {
      std::uint64_t id;
      std::memcpy(&id, rt.heap().payload(r).data(), sizeof id);
      return id;
    };
    // Finds the current address of node `id` by tracing from the roots.
    auto locate = [&]() {
      std::unordered_map<std::uint64_t, ObjectRef> where;
      for (auto r : reachable_set(rt.heap())) where[id_of(r)] = r;
      return where;
    };
    auto fail = [&](const std::string& m) {
      ++res.failures;
      if (res.messages.size() < 20) res.messages.push_back("program " + std::to_string(p) + ": " + m);
    };
    auto audit = [&]() {
      auto hc = rt.verify();
      for (const auto& m : hc.problems) fail(m);
      std::unordered_set<std::uint64_t> live;
      std::vector<std::uint64_t> stack;
      for (auto& [h, id] : roots)
        if (live.insert(id).second) stack.push_back(id);
      while (!stack.empty()) {
        auto id = stack.back();
        stack.pop_back();
        for (auto t : shadow[id].slots)
          if (t > 0 && live.insert(static_cast<std::uint64_t>(t)).second) stack.push_back(static_cast<std::uint64_t>(t));
      }
      auto where = locate();
      if (where.size() != live.size()) fail("live set size " + std::to_string(where.size()) + " vs " + std::to_string(live.size()));
      for (auto& [id, ref] : where) {
        if (!live.count(id)) {
          fail("unexpected survivor");
          continue;
        }
        const auto& n = shadow[id];
        for (std::uint32_t s = 0; s < n.slots.size(); ++s) {
          auto t = rt.read_ref(ref, s);
          const std::int64_t got = t ? static_cast<std::int64_t>(id_of(*t)) : 0;
          if (got != n.slots[s]) fail("edge mismatch");
        }
      }
      // Drop dead shadow nodes.
      for (auto it = shadow.begin(); it != shadow.end();)
        it = live.count(it->first) ? std::next(it) : shadow.erase(it);
    };

    rt.add_gc_listener([&](const GcReport&) { ++res.collections; });
    const int steps = 400;
    try {
      for (int step = 0; step < steps; ++step) {
        const auto op = rng() % 100;
        if (op < 55 || roots.empty()) {
          const ClassId k = classes[rng() % classes.size()];
          if (rng() % 4 == 0 && gens.size() < 6) gens.push_back(rt.new_generation(ctx));
          rt.set_generation(ctx, gens[rng() % gens.size()]);
          ObjectRef r = rt.allocate(ctx, k, rng() % 3 == 0, "selftest");
          const std::uint64_t id = next_id++;
          std::memcpy(rt.heap().payload(r).data(), &id, sizeof id);
          shadow[id].slots.assign(rt.heap().klass(k).ref_slot_count, 0);
          if (roots.empty() || rng() % 3 == 0) {
            roots.emplace_back(rt.register_root(r), id);
          } else {
            // Store into a random slot of a random rooted object.
            auto& [h, pid] = roots[rng() % roots.size()];
            ObjectRef parent = rt.resolve(h);
            auto& ps = shadow[pid].slots;
            if (!ps.empty()) {
              const auto s = static_cast<std::uint32_t>(rng() % ps.size());
              rt.write_ref(parent, s, r);
              ps[s] = static_cast<std::int64_t>(id);
            }
          }
        } else if (op < 80) {
          // Rewire: a slot of one rooted object to another rooted object or null.
          auto& [h, pid] = roots[rng() % roots.size()];
          auto& ps = shadow[pid].slots;
          if (ps.empty()) continue;
          const auto s = static_cast<std::uint32_t>(rng() % ps.size());
          if (rng() % 4 == 0) {
            rt.write_ref(rt.resolve(h), s, std::nullopt);
            ps[s] = 0;
          } else {
            auto& [h2, tid] = roots[rng() % roots.size()];
            rt.write_ref(rt.resolve(h), s, rt.resolve(h2));
            ps[s] = static_cast<std::int64_t>(tid);
          }
        } else if (op < 92) {
          const auto i = rng() % roots.size();
          rt.unregister_root(roots[i].first);
          roots.erase(roots.begin() + static_cast<std::ptrdiff_t>(i));
        } else {
          const auto kind = static_cast<CollectionKind>(rng() % 3);
          audit();
          rt.collect(kind);
          audit();
        }
      }
      audit();
    } catch (const Error& e) {
      if (e.code() != Errc::out_of_memory) fail(std::string("error: ") + e.what());
    }
    ++res.programs;
    if (progress && (p + 1) % 100 == 0) *progress << "  " << (p + 1) << " programs\n";
  }
  return res;
}

}  // namespace ng2c

#endif  // NG2C_SELFTEST_HPP
