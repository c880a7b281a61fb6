#pragma once

// Abstract transaction model: multi-versioned key-value store, client views,
// fingerprints and the pure predicates shared by every isolation level.

#include <algorithm>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace isoguard {

using ClientId = std::string;
using Key = std::string;
using Value = std::string;

/// Raised when an operation is called outside its precondition.
class contract_error : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Transaction identifier Tn(sn, cl).
///
/// The initial writer of every key is a reserved identifier whose client
/// component can never be produced by a real client (see `is_client_id`).
struct TxId {
  ClientId cl;
  std::uint64_t sn = 0;

  static constexpr const char* kInitClient = "__init__";

  static TxId init() { return TxId{kInitClient, 0}; }
  bool is_init() const { return cl == kInitClient; }

  auto operator<=>(const TxId&) const = default;
  bool operator==(const TxId&) const = default;
};

inline bool is_client_id(const ClientId& cl) {
  return !cl.empty() && cl != TxId::kInitClient;
}

inline std::string to_string(const TxId& t) {
  if (t.is_init()) return "T_init";
  return "Tn(" + std::to_string(t.sn) + "," + t.cl + ")";
}

inline const Value& initial_value() {
  static const Value v0 = "v0";
  return v0;
}

struct Version {
  Value value;
  TxId writer;
  std::set<TxId> readers;

  bool operator==(const Version&) const = default;
};

using VersionList = std::vector<Version>;
using KVStore = std::map<Key, VersionList>;
using View = std::map<Key, std::set<std::size_t>>;

/// Read/write effect of one transaction on one key.
struct KeyOps {
  std::optional<Value> read;
  std::optional<Value> write;

  bool empty() const { return !read && !write; }
  bool operator==(const KeyOps&) const = default;
};

/// Partial map (key, {R,W}) -> value. Absent keys and empty KeyOps both mean
/// "no operation on this key".
using Fingerprint = std::map<Key, KeyOps>;

struct Config {
  KVStore kvs;
  std::map<ClientId, View> views;

  bool operator==(const Config&) const = default;
};

enum class DepKind { SO, WR, WW };

inline const char* to_string(DepKind k) {
  switch (k) {
    case DepKind::SO: return "SO";
    case DepKind::WR: return "WR";
    case DepKind::WW: return "WW";
  }
  return "?";
}

struct DepEdge {
  TxId from;
  TxId to;
  DepKind kind = DepKind::SO;

  auto operator<=>(const DepEdge&) const = default;
  bool operator==(const DepEdge&) const = default;
};

using DepRelation = std::set<DepEdge>;

inline DepRelation inverse(const DepRelation& r) {
  DepRelation out;
  for (const auto& e : r) out.insert(DepEdge{e.to, e.from, e.kind});
  return out;
}

inline DepRelation unite(DepRelation a, const DepRelation& b) {
  a.insert(b.begin(), b.end());
  return a;
}

// --- construction helpers ---------------------------------------------------

inline KVStore initial_store(const std::vector<Key>& keys) {
  KVStore kvs;
  for (const auto& k : keys) kvs[k] = {Version{initial_value(), TxId::init(), {}}};
  return kvs;
}

inline View initial_view(const KVStore& kvs) {
  View u;
  for (const auto& [k, _] : kvs) u[k] = {0};
  return u;
}

/// λk. {0, ..., len(kvs(k)) - 1}
inline View full_view(const KVStore& kvs) {
  View u;
  for (const auto& [k, vl] : kvs) {
    auto& idx = u[k];
    for (std::size_t i = 0; i < vl.size(); ++i) idx.insert(idx.end(), i);
  }
  return u;
}

/// Pointwise inclusion u1 ⊑ u2.
inline bool view_leq(const View& u1, const View& u2) {
  for (const auto& [k, idx] : u1) {
    auto it = u2.find(k);
    if (it == u2.end()) {
      if (!idx.empty()) return false;
      continue;
    }
    if (!std::includes(it->second.begin(), it->second.end(), idx.begin(), idx.end())) return false;
  }
  return true;
}

// --- predicates ---------------------------------------------------------------

namespace detail {

inline std::optional<std::string> wf_failure(const KVStore& kvs, const View& u) {
  for (const auto& [k, _] : u) {
    if (!kvs.count(k)) return "view mentions unknown key " + k;
  }
  for (const auto& [k, vl] : kvs) {
    auto it = u.find(k);
    if (it == u.end() || !it->second.count(0)) return "index 0 missing from view of key " + k;
    if (!it->second.empty() && *it->second.rbegin() >= vl.size()) {
      return "index " + std::to_string(*it->second.rbegin()) + " out of range for key " + k;
    }
  }
  // Atomicity: a writer's versions are visible all together or not at all.
  std::map<TxId, std::pair<bool, bool>> seen;  // (some visible, some invisible)
  for (const auto& [k, vl] : kvs) {
    const auto& idx = u.at(k);
    for (std::size_t i = 0; i < vl.size(); ++i) {
      auto& s = seen[vl[i].writer];
      (idx.count(i) ? s.first : s.second) = true;
    }
  }
  for (const auto& [t, s] : seen) {
    if (s.first && s.second) return "view is not atomic for writer " + to_string(t);
  }
  return std::nullopt;
}

inline std::optional<std::string> lww_failure(const KVStore& kvs, const View& u, const Fingerprint& f) {
  for (const auto& [k, ops] : f) {
    if (!ops.read) continue;
    auto kv = kvs.find(k);
    auto uk = u.find(k);
    if (kv == kvs.end() || uk == u.end() || uk->second.empty()) {
      return "read of key " + k + " outside the view";
    }
    std::size_t top = *uk->second.rbegin();
    if (top >= kv->second.size()) return "view index out of range for key " + k;
    if (kv->second[top].value != *ops.read) {
      return "read " + k + "=" + *ops.read + " but latest visible version " + k + "@" +
             std::to_string(top) + " holds " + kv->second[top].value;
    }
  }
  return std::nullopt;
}

}  // namespace detail

/// View wellformedness: index 0 present, indices in range, atomic.
inline bool wf(const KVStore& kvs, const View& u) { return !detail::wf_failure(kvs, u); }

/// Last-write-wins: every read returns the value at the highest visible index.
inline bool lww(const KVStore& kvs, const View& u, const Fingerprint& f) {
  return !detail::lww_failure(kvs, u, f);
}

inline std::set<TxId> vis_tx(const KVStore& kvs, const View& u) {
  std::set<TxId> out;
  for (const auto& [k, idx] : u) {
    auto kv = kvs.find(k);
    if (kv == kvs.end()) continue;
    for (auto i : idx) {
      if (i < kv->second.size()) out.insert(kv->second[i].writer);
    }
  }
  return out;
}

inline std::set<TxId> writers(const KVStore& kvs) {
  std::set<TxId> out;
  for (const auto& [_, vl] : kvs)
    for (const auto& v : vl) out.insert(v.writer);
  return out;
}

/// All transaction ids occurring in the store, as writers or readers.
inline std::set<TxId> txids(const KVStore& kvs) {
  std::set<TxId> out;
  for (const auto& [_, vl] : kvs) {
    for (const auto& v : vl) {
      out.insert(v.writer);
      out.insert(v.readers.begin(), v.readers.end());
    }
  }
  return out;
}

/// Transactions that read something but wrote nothing.
inline std::set<TxId> rdonly(const KVStore& kvs) {
  std::set<TxId> w = writers(kvs), out;
  for (const auto& [_, vl] : kvs)
    for (const auto& v : vl)
      for (const auto& t : v.readers)
        if (!w.count(t)) out.insert(t);
  return out;
}

/// Closedness of the visible transactions under r: following r backwards
/// (transitively) from visTx only reaches visible or read-only transactions.
inline bool closed(const KVStore& kvs, const View& u, const DepRelation& r) {
  std::map<TxId, std::vector<TxId>> preds;
  for (const auto& e : r) preds[e.to].push_back(e.from);

  const std::set<TxId> vis = vis_tx(kvs, u);
  const std::set<TxId> ro = rdonly(kvs);
  std::set<TxId> reached;
  std::vector<TxId> work(vis.begin(), vis.end());
  while (!work.empty()) {
    TxId t = std::move(work.back());
    work.pop_back();
    auto it = preds.find(t);
    if (it == preds.end()) continue;
    for (const auto& p : it->second) {
      if (!reached.insert(p).second) continue;
      if (!vis.count(p) && !ro.count(p)) return false;
      work.push_back(p);
    }
  }
  return true;
}

/// Central commit condition. The fingerprint is unused by the closedness
/// check; it is kept for signature parity with the commit guard.
inline bool can_commit(const KVStore& kvs, const View& u, const Fingerprint& /*f*/, const DepRelation& r) {
  return closed(kvs, u, r);
}

/// Smallest sequence number of `cl` not used in the store (as writer or reader).
inline std::uint64_t min_fresh_sn(const KVStore& kvs, const ClientId& cl) {
  std::optional<std::uint64_t> top;
  auto note = [&](const TxId& t) {
    if (t.cl == cl && (!top || t.sn > *top)) top = t.sn;
  };
  for (const auto& [_, vl] : kvs) {
    for (const auto& v : vl) {
      note(v.writer);
      for (const auto& r : v.readers) note(r);
    }
  }
  return top ? *top + 1 : 0;
}

/// Membership in nextTxids(kvs, cl-of-t).
inline bool in_next_txids(const KVStore& kvs, const TxId& t) {
  return is_client_id(t.cl) && t.sn >= min_fresh_sn(kvs, t.cl);
}

// --- dependency relations -----------------------------------------------------

inline DepRelation so_rel(const std::set<TxId>& ts) {
  DepRelation out;
  for (auto a = ts.begin(); a != ts.end(); ++a) {
    for (auto b = std::next(a); b != ts.end(); ++b) {
      if (a->cl != b->cl) break;  // std::set orders by client first
      if (a->sn < b->sn) out.insert(DepEdge{*a, *b, DepKind::SO});
    }
  }
  return out;
}

inline DepRelation wr_rel(const KVStore& kvs) {
  DepRelation out;
  for (const auto& [_, vl] : kvs)
    for (const auto& v : vl)
      for (const auto& t : v.readers) out.insert(DepEdge{v.writer, t, DepKind::WR});
  return out;
}

inline DepRelation ww_rel(const KVStore& kvs) {
  DepRelation out;
  for (const auto& [_, vl] : kvs)
    for (std::size_t i = 0; i < vl.size(); ++i)
      for (std::size_t j = i + 1; j < vl.size(); ++j)
        out.insert(DepEdge{vl[i].writer, vl[j].writer, DepKind::WW});
  return out;
}

// --- store update -------------------------------------------------------------

/// UpdateKV without precondition checks: reads attach to the highest index of
/// u(k) in the pre-update list (skipped when there is none), writes append.
inline KVStore apply_fingerprint(KVStore kvs, const TxId& t, const View& u, const Fingerprint& f) {
  for (const auto& [k, ops] : f) {
    auto kv = kvs.find(k);
    if (kv == kvs.end()) continue;
    auto& vl = kv->second;
    if (ops.read) {
      auto uk = u.find(k);
      if (uk != u.end() && !uk->second.empty() && *uk->second.rbegin() < vl.size()) {
        vl[*uk->second.rbegin()].readers.insert(t);
      }
    }
    if (ops.write) vl.push_back(Version{*ops.write, t, {}});
  }
  return kvs;
}

/// UpdateKV(kvs, t, u, f). Throws contract_error on a precondition violation.
inline KVStore update_kv(const KVStore& kvs, const TxId& t, const View& u, const Fingerprint& f) {
  if (auto why = detail::wf_failure(kvs, u)) throw contract_error("update_kv: " + *why);
  if (!in_next_txids(kvs, t)) throw contract_error("update_kv: " + to_string(t) + " is not fresh");
  for (const auto& [k, ops] : f) {
    if (!ops.empty() && !kvs.count(k)) throw contract_error("update_kv: unknown key " + k);
  }
  return apply_fingerprint(kvs, t, u, f);
}

/// Checks the store invariants: non-empty lists whose index 0 is written by
/// T_init, and the snapshot property (per key, a transaction writes at most one
/// version, reads at most one version, and never reads its own version).
/// Returns a description of the first problem found.
inline std::optional<std::string> store_invariant_failure(const KVStore& kvs) {
  for (const auto& [k, vl] : kvs) {
    if (vl.empty()) return "empty version list for key " + k;
    if (!vl[0].writer.is_init()) return "index 0 of key " + k + " not written by T_init";
    std::set<TxId> seen;
    for (std::size_t i = 0; i < vl.size(); ++i) {
      const auto& v = vl[i];
      if (i > 0 && v.writer.is_init()) return "T_init writes a later version of " + k;
      if (v.readers.count(v.writer)) return to_string(v.writer) + " reads its own version of " + k;
      if (!seen.insert(v.writer).second && !v.writer.is_init()) {
        return to_string(v.writer) + " writes two versions of " + k;
      }
    }
    std::set<TxId> readers;
    for (const auto& v : vl) {
      for (const auto& r : v.readers) {
        if (r.is_init()) return "T_init appears as a reader of " + k;
        if (!readers.insert(r).second) return to_string(r) + " reads two versions of " + k;
      }
    }
  }
  return std::nullopt;
}

// --- test helpers -------------------------------------------------------------

struct Op {
  enum class Kind { Read, Write } kind;
  Key key;
  Value value;
};

/// Collapses an operation sequence into a fingerprint: the first read of a key
/// that precedes any write to it, and the last write.
inline Fingerprint fold_fingerprint(const std::vector<Op>& ops) {
  Fingerprint f;
  for (const auto& op : ops) {
    auto& k = f[op.key];
    if (op.kind == Op::Kind::Read) {
      if (!k.read && !k.write) k.read = op.value;
    } else {
      k.write = op.value;
    }
  }
  return f;
}

}  // namespace isoguard
