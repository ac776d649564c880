#ifndef NG2C_PROFILER_HPP
#define NG2C_PROFILER_HPP

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "ng2c/collector.hpp"
#include "ng2c/errors.hpp"
#include "ng2c/object_model.hpp"

namespace ng2c {

struct AllocationSite {
  std::string site_id;
  std::uint64_t alloc_count = 0;
  std::uint64_t alloc_bytes = 0;
};

struct LifetimeRecord {
  std::string_view site_id;  // points into Profiler::sites()
  std::uint64_t birth_epoch = 0;
  std::optional<std::uint64_t> death_epoch;

  // Collections survived.
  std::optional<std::uint64_t> lifetime() const {
    if (!death_epoch) return std::nullopt;
    return *death_epoch - birth_epoch - 1;
  }
};

struct SiteSummary {
  std::string site_id;
  std::uint64_t deaths = 0;
  std::uint64_t censored = 0;
  std::uint64_t median_lifetime = 0;
  std::uint64_t median_death_epoch = 0;
  std::optional<std::size_t> cohort;
};

struct Recommendation {
  struct Group {
    std::string label;
    std::vector<std::string> sites;
  };
  std::vector<Group> groups;
  std::vector<std::string> pretenure_sites;
  std::vector<SiteSummary> rationale;  // every site with at least one observed death

  const Group* group_of(std::string_view site) const {
    for (const auto& g : groups)
      if (std::find(g.sites.begin(), g.sites.end(), site) != g.sites.end()) return &g;
    return nullptr;
  }
};

// Records allocation sites and per-object lifetimes measured in collection
// epochs, and turns them into pretenuring advice.
class Profiler {
 public:
  explicit Profiler(bool enabled = true) : enabled_(enabled) {}

  bool enabled() const { return enabled_; }
  void set_enabled(bool on) { enabled_ = on; }

  void record_allocation(std::string_view site_id, ObjectRef obj, std::uint64_t size) {
    if (!enabled_) return;
    std::lock_guard g(mutex_);
    AllocationSite& site = lookup(site_id);
    ++site.alloc_count;
    site.alloc_bytes += size;
    records_.push_back({site.site_id, epoch_, std::nullopt});
    tracked_.push_back({obj, records_.size() - 1});
  }

  // End-of-collection observation. `survivors` holds post-collection
  // addresses of everything still reachable (anything with count(ref));
  // `moves` maps pre-collection addresses of evacuated objects.
  template <typename LiveSet>
  void observe_collection(const LiveSet& survivors, const ForwardingLog& moves, std::uint64_t epoch) {
    if (!enabled_) return;
    std::lock_guard g(mutex_);
    std::size_t kept = 0;
    for (std::size_t i = 0; i < tracked_.size(); ++i) {
      auto now = moves.resolve(tracked_[i].first);
      if (now && survivors.count(*now)) tracked_[kept++] = {*now, tracked_[i].second};
      else records_[tracked_[i].second].death_epoch = epoch;
    }
    tracked_.resize(kept);
    epoch_ = epoch;
    ++collections_;
  }

  std::uint64_t collections_observed() const { return collections_; }
  std::uint64_t current_epoch() const { return epoch_; }
  const std::vector<LifetimeRecord>& records() const { return records_; }
  const std::map<std::string, AllocationSite, std::less<>>& sites() const { return sites_; }
  std::size_t tracked_count() const { return tracked_.size(); }

  // Sites whose median lifetime reaches long_lived_epochs are recommended.
  // They are sorted by median death epoch and chained into groups: a site
  // joins the current group when its median death epoch is within
  // cohort_tolerance of the previous site's.
  Recommendation analyze(std::uint64_t long_lived_epochs = 4, std::uint64_t cohort_tolerance = 2) const {
    std::lock_guard g(mutex_);
    if (collections_ == 0) throw Error(Errc::insufficient_data, "no collection observed yet");
    // Record site names all point into sites_, so the pointer identifies the site.
    struct Acc {
      std::vector<std::uint64_t> life, death;
      std::uint64_t censored = 0;
    };
    std::map<const char*, Acc> acc;
    for (const auto& [name, site] : sites_) acc[site.site_id.data()];
    for (const auto& r : records_) {
      Acc& a = acc[r.site_id.data()];
      if (r.death_epoch) {
        a.life.push_back(*r.lifetime());
        a.death.push_back(*r.death_epoch);
      } else {
        ++a.censored;
      }
    }
    Recommendation rec;
    std::vector<SiteSummary*> candidates;
    for (const auto& [name, site] : sites_) {
      Acc& a = acc[site.site_id.data()];
      if (a.death.empty()) continue;
      SiteSummary s;
      s.site_id = name;
      s.deaths = a.death.size();
      s.censored = a.censored;
      s.median_lifetime = lower_median(a.life);
      s.median_death_epoch = lower_median(a.death);
      rec.rationale.push_back(std::move(s));
    }
    for (auto& s : rec.rationale)
      if (s.median_lifetime >= long_lived_epochs) candidates.push_back(&s);
    std::sort(candidates.begin(), candidates.end(), [](const SiteSummary* a, const SiteSummary* b) {
      return std::tie(a->median_death_epoch, a->site_id) < std::tie(b->median_death_epoch, b->site_id);
    });
    std::optional<std::uint64_t> prev;
    for (SiteSummary* s : candidates) {
      if (!prev || s->median_death_epoch - *prev > cohort_tolerance) {
        rec.groups.push_back({"cohort-" + std::to_string(rec.groups.size() + 1), {}});
      }
      s->cohort = rec.groups.size() - 1;
      rec.groups.back().sites.push_back(s->site_id);
      rec.pretenure_sites.push_back(s->site_id);
      prev = s->median_death_epoch;
    }
    std::sort(rec.pretenure_sites.begin(), rec.pretenure_sites.end());
    return rec;
  }

 private:
  template <typename T>
  static T lower_median(std::vector<T>& v) {
    const std::size_t mid = (v.size() - 1) / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    return v[mid];
  }

  // A handful of sites usually alternate; check recent ones before the map.
  AllocationSite& lookup(std::string_view id) {
    for (AllocationSite* c : recent_)
      if (c && c->site_id == id) return *c;
    auto it = sites_.find(id);
    if (it == sites_.end()) it = sites_.emplace(std::string(id), AllocationSite{std::string(id)}).first;
    recent_[next_recent_++ % recent_.size()] = &it->second;
    return it->second;
  }

  bool enabled_;
  mutable std::mutex mutex_;
  std::map<std::string, AllocationSite, std::less<>> sites_;
  std::vector<LifetimeRecord> records_;
  std::array<AllocationSite*, 8> recent_{};
  std::size_t next_recent_ = 0;
  std::vector<std::pair<ObjectRef, std::size_t>> tracked_;  // current address, record index
  std::uint64_t epoch_ = 0;
  std::uint64_t collections_ = 0;
};

// Human-readable advice: one block per cohort, naming the sites to annotate
// and where to open a generation.
inline std::string format_recommendation(const Recommendation& rec) {
  std::ostringstream os;
  os << "pretenuring recommendation: " << rec.groups.size() << " generation(s), " << rec.pretenure_sites.size()
     << " site(s)\n";
  for (const auto& g : rec.groups) {
    os << "\n[" << g.label << "]\n";
    for (const auto& site : g.sites) {
      for (const auto& s : rec.rationale) {
        if (s.site_id != site) continue;
        os << "  site " << site << ": median lifetime " << s.median_lifetime << " epochs, median death epoch "
           << s.median_death_epoch << " (" << s.deaths << " deaths, " << s.censored << " still live)\n";
      }
    }
    os << "  action: call new_generation() where a " << g.label << " cohort begins; allocate at";
    for (const auto& site : g.sites) os << ' ' << site;
    os << " with pretenure=true\n";
  }
  os << "\nsites left in Gen 0:\n";
  for (const auto& s : rec.rationale)
    if (!s.cohort)
      os << "  site " << s.site_id << ": median lifetime " << s.median_lifetime << " epochs (" << s.deaths
         << " deaths)\n";
  return os.str();
}

}  // namespace ng2c

#endif  // NG2C_PROFILER_HPP
