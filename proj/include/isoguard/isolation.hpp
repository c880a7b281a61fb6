#pragma once

// Isolation-level instances of the abstract model. A level is a dependency
// relation R_IL over the store's transactions plus a view-shift predicate
// constraining a client's view across its own commit.

#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "isoguard/core.hpp"

namespace isoguard {

struct IsolationLevel {
  using DepFn = std::function<DepRelation(const KVStore&)>;
  using ShiftFn = std::function<bool(const KVStore&, const View&, const KVStore&, const View&)>;

  std::string name;
  DepFn dep_relation;
  ShiftFn v_shift;
};

inline IsolationLevel level_ra() {
  return IsolationLevel{
      "ra",
      [](const KVStore&) { return DepRelation{}; },
      [](const KVStore&, const View&, const KVStore&, const View&) { return true; },
  };
}

/// Monotonic reads (u ⊑ u') and read-your-writes: every version appended by
/// the commit (the suffix of K' beyond K) is in u'.
inline bool v_shift_mr_ryw(const KVStore& kvs, const View& u, const KVStore& kvs_post, const View& u_post) {
  if (!view_leq(u, u_post)) return false;
  for (const auto& [k, vl] : kvs_post) {
    auto pre = kvs.find(k);
    std::size_t from = pre == kvs.end() ? 0 : pre->second.size();
    auto uk = u_post.find(k);
    for (std::size_t i = from; i < vl.size(); ++i) {
      if (uk == u_post.end() || !uk->second.count(i)) return false;
    }
  }
  return true;
}

inline IsolationLevel level_tcc() {
  return IsolationLevel{
      "tcc",
      [](const KVStore& kvs) { return unite(so_rel(txids(kvs)), wr_rel(kvs)); },
      v_shift_mr_ryw,
  };
}

inline IsolationLevel level_sser() {
  return IsolationLevel{
      "sser",
      [](const KVStore& kvs) { return inverse(ww_rel(kvs)); },
      [](const KVStore&, const View&, const KVStore&, const View&) { return true; },
  };
}

/// Name -> level table. Ships RA, TCC and SSER; further levels are added with
/// `add`.
class LevelRegistry {
 public:
  LevelRegistry() {
    add(level_ra());
    add(level_tcc());
    add(level_sser());
  }

  void add(IsolationLevel level) {
    auto name = level.name;
    levels_[name] = std::move(level);
  }

  const IsolationLevel& get(const std::string& name) const {
    auto it = levels_.find(name);
    if (it == levels_.end()) throw std::invalid_argument("unknown isolation level: " + name);
    return it->second;
  }

  bool contains(const std::string& name) const { return levels_.count(name) != 0; }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& [n, _] : levels_) out.push_back(n);
    return out;
  }

 private:
  std::map<std::string, IsolationLevel> levels_;
};

inline const IsolationLevel& level_by_name(const std::string& name) {
  static const LevelRegistry registry;
  return registry.get(name);
}

}  // namespace isoguard
