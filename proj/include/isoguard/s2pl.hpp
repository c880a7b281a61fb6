#pragma once

// Strict two-phase locking combined with two-phase commit, no-wait variant.
// Each key is served by its own server; clients run their transactions one at
// a time. Every event is a guard over the global configuration plus an update
// of exactly one client or one server.

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "isoguard/abstract_model.hpp"
#include "isoguard/core.hpp"
#include "isoguard/protocol.hpp"
#include "isoguard/serialize.hpp"

namespace isoguard::s2pl {

enum class VerState { Working, Prepared, ReadLock, WriteLock, NotOkay, Committed, Aborted };

inline const char* to_string(VerState v) {
  switch (v) {
    case VerState::Working: return "working";
    case VerState::Prepared: return "prepared";
    case VerState::ReadLock: return "read_lock";
    case VerState::WriteLock: return "write_lock";
    case VerState::NotOkay: return "not_okay";
    case VerState::Committed: return "committed";
    case VerState::Aborted: return "aborted";
  }
  return "?";
}

inline bool is_locked(VerState v) { return v == VerState::ReadLock || v == VerState::WriteLock; }

struct ClientConf {
  ClPhase state = ClPhase::Init;
  std::uint64_t sn = 0;
  /// Index into the scope's candidate footprints, chosen at cl_prepare.
  std::size_t footprint = 0;

  bool operator==(const ClientConf&) const = default;
};

struct ServerConf {
  std::map<TxId, VerState> state;  // absent entries are `working`
  VersionList vl;
  std::map<TxId, KeyOps> fp;

  VerState at(const TxId& t) const {
    auto it = state.find(t);
    return it == state.end() ? VerState::Working : it->second;
  }

  bool operator==(const ServerConf&) const = default;
};

struct State {
  std::map<ClientId, ClientConf> cls;
  std::map<Key, ServerConf> svrs;

  bool operator==(const State&) const = default;
};

enum class EventKind {
  ClPrepare,
  SvrPrepare,
  AcqRdLock,
  AcqWrLock,
  SvrNok,
  ClCommit,
  ClAbort,
  SvrCommit,
  SvrAbort,
  ClReadyC,
  ClReadyA,
};

inline const char* event_name(EventKind k) {
  switch (k) {
    case EventKind::ClPrepare: return "cl_prepare";
    case EventKind::SvrPrepare: return "svr_prepare";
    case EventKind::AcqRdLock: return "acq_rd_lock";
    case EventKind::AcqWrLock: return "acq_wr_lock";
    case EventKind::SvrNok: return "svr_nok";
    case EventKind::ClCommit: return "cl_commit";
    case EventKind::ClAbort: return "cl_abort";
    case EventKind::SvrCommit: return "svr_commit";
    case EventKind::SvrAbort: return "svr_abort";
    case EventKind::ClReadyC: return "cl_ready_c";
    case EventKind::ClReadyA: return "cl_ready_a";
  }
  return "?";
}

/// Client events use `cl` (plus `footprint` or `sn`); server events use `key`
/// and `txn` (plus the lock values).
struct Event {
  EventKind kind = EventKind::ClPrepare;
  ClientId cl;
  Key key;
  TxId txn;
  std::optional<Value> v_w;
  std::optional<Value> v_r;
  std::size_t footprint = 0;
  std::uint64_t sn = 0;

  bool operator==(const Event&) const = default;
};

inline json to_json(const Event& e) {
  json p = json::object();
  switch (e.kind) {
    case EventKind::ClPrepare: p = {{"cl", e.cl}, {"footprint", e.footprint}}; break;
    case EventKind::ClCommit: p = {{"cl", e.cl}, {"sn", e.sn}}; break;
    case EventKind::ClAbort:
    case EventKind::ClReadyC:
    case EventKind::ClReadyA: p = {{"cl", e.cl}}; break;
    case EventKind::AcqRdLock: p = {{"key", e.key}, {"txn", to_json(e.txn)}, {"v_r", *e.v_r}}; break;
    case EventKind::AcqWrLock:
      p = {{"key", e.key}, {"txn", to_json(e.txn)}, {"v_w", *e.v_w}, {"v_r", e.v_r ? json(*e.v_r) : json(nullptr)}};
      break;
    default: p = {{"key", e.key}, {"txn", to_json(e.txn)}}; break;
  }
  return json{{"name", event_name(e.kind)}, {"params", p}};
}

inline Event event_from_json(const json& j) {
  const auto name = j.at("name").get<std::string>();
  const json& p = j.at("params");
  Event e;
  bool found = false;
  for (int k = 0; k <= static_cast<int>(EventKind::ClReadyA); ++k) {
    if (name == event_name(static_cast<EventKind>(k))) {
      e.kind = static_cast<EventKind>(k);
      found = true;
    }
  }
  if (!found) throw format_error("unknown s2pl event: " + name);
  if (p.contains("cl")) e.cl = p.at("cl").get<std::string>();
  if (p.contains("key")) e.key = p.at("key").get<std::string>();
  if (p.contains("txn")) {
    e.txn = txid_from_json(p.at("txn"));
    e.cl = e.txn.cl;
  }
  if (p.contains("footprint")) e.footprint = p.at("footprint").get<std::size_t>();
  if (p.contains("sn")) e.sn = p.at("sn").get<std::uint64_t>();
  if (p.contains("v_w") && !p.at("v_w").is_null()) e.v_w = p.at("v_w").get<std::string>();
  if (p.contains("v_r") && !p.at("v_r").is_null()) e.v_r = p.at("v_r").get<std::string>();
  return e;
}

inline json to_json(const State& s) {
  json cls = json::object();
  for (const auto& [cl, c] : s.cls) {
    cls[cl] = json{{"state", to_string(c.state)}, {"sn", c.sn}, {"footprint", c.footprint}};
  }
  json svrs = json::object();
  for (const auto& [k, sv] : s.svrs) {
    json st = json::array();
    for (const auto& [t, v] : sv.state) st.push_back(json{to_json(t), to_string(v)});
    json fp = json::array();
    for (const auto& [t, ops] : sv.fp) fp.push_back(json{to_json(t), to_json(Fingerprint{{k, ops}})});
    json vl = json::array();
    for (const auto& v : sv.vl) vl.push_back(to_json(v));
    svrs[k] = json{{"state", st}, {"vl", vl}, {"fp", fp}};
  }
  return json{{"cls", cls}, {"svrs", svrs}};
}

class Protocol {
 public:
  using StateType = State;
  using EventType = Event;

  explicit Protocol(Scope scope) : scope_(std::move(scope)) { scope_.validate(); }

  static constexpr const char* name() { return "s2pl"; }
  static Event parse_event(const json& j) { return event_from_json(j); }
  const Scope& scope() const { return scope_; }

  State initial_state() const {
    State s;
    for (const auto& cl : scope_.clients) s.cls[cl] = ClientConf{};
    for (const auto& k : scope_.keys) s.svrs[k].vl = {Version{initial_value(), TxId::init(), {}}};
    return s;
  }

  static TxId get_txn(const State& s, const ClientId& cl) { return TxId{cl, s.cls.at(cl).sn}; }

  /// Footprint of the client's current transaction (meaningful once prepared).
  const Footprint& footprint(const State& s, const ClientId& cl) const {
    return scope_.candidates(cl).at(s.cls.at(cl).footprint);
  }

  static const Value& last_ver_v(const ServerConf& sv) { return sv.vl.back().value; }

  bool enabled(const State& s, const Event& e) const {
    if (!s.cls.count(e.cl)) return false;
    const ClientConf& c = s.cls.at(e.cl);
    switch (e.kind) {
      case EventKind::ClPrepare:
        return c.state == ClPhase::Init && c.sn < scope_.txns_per_client &&
               e.footprint < scope_.candidates(e.cl).size();
      case EventKind::ClCommit: {
        if (c.state != ClPhase::Prepared || e.sn != c.sn) return false;
        const TxId t = get_txn(s, e.cl);
        for (const auto& [k, _] : footprint(s, e.cl))
          if (!is_locked(s.svrs.at(k).at(t))) return false;
        return true;
      }
      case EventKind::ClAbort: {
        if (c.state != ClPhase::Prepared) return false;
        const TxId t = get_txn(s, e.cl);
        for (const auto& [k, _] : footprint(s, e.cl))
          if (s.svrs.at(k).at(t) == VerState::NotOkay) return true;
        return false;
      }
      case EventKind::ClReadyC:
      case EventKind::ClReadyA: {
        const bool commit = e.kind == EventKind::ClReadyC;
        if (c.state != (commit ? ClPhase::Committed : ClPhase::Aborted)) return false;
        const TxId t = get_txn(s, e.cl);
        for (const auto& [k, _] : footprint(s, e.cl))
          if (s.svrs.at(k).at(t) != (commit ? VerState::Committed : VerState::Aborted)) return false;
        return true;
      }
      default: break;
    }

    // Server events: the transaction must be the client's current one and the
    // key part of its footprint.
    if (c.state == ClPhase::Init || e.txn != get_txn(s, e.cl)) return false;
    const Footprint& fp = footprint(s, e.cl);
    auto in = fp.find(e.key);
    if (in == fp.end() || !s.svrs.count(e.key)) return false;
    const Intent intent = in->second;
    const ServerConf& sv = s.svrs.at(e.key);
    const VerState vs = sv.at(e.txn);
    switch (e.kind) {
      case EventKind::SvrPrepare: return vs == VerState::Working && c.state == ClPhase::Prepared;
      case EventKind::AcqRdLock:
        return vs == VerState::Prepared && intent.read && !intent.write && !write_locked_by_other(sv, e.txn) &&
               e.v_r == last_ver_v(sv) && !e.v_w;
      case EventKind::AcqWrLock: {
        if (vs != VerState::Prepared || !intent.write || locked_by_other(sv, e.txn)) return false;
        const std::optional<Value> expect_r = intent.read ? std::optional<Value>(last_ver_v(sv)) : std::nullopt;
        if (e.v_r != expect_r || !e.v_w) return false;
        for (std::size_t j = 0; j < scope_.value_domain; ++j)
          if (*e.v_w == write_value(e.txn, e.key, j)) return true;
        return false;
      }
      case EventKind::SvrNok:
        if (vs != VerState::Prepared) return false;
        return intent.write ? locked_by_other(sv, e.txn) : write_locked_by_other(sv, e.txn);
      case EventKind::SvrCommit: return is_locked(vs) && c.state == ClPhase::Committed;
      case EventKind::SvrAbort: return c.state == ClPhase::Aborted && vs != VerState::Committed && vs != VerState::Aborted;
      default: return false;
    }
  }

  /// Update of an enabled event.
  State update(State s, const Event& e) const {
    ClientConf& c = s.cls.at(e.cl);
    switch (e.kind) {
      case EventKind::ClPrepare:
        c.state = ClPhase::Prepared;
        c.footprint = e.footprint;
        return s;
      case EventKind::ClCommit: c.state = ClPhase::Committed; return s;
      case EventKind::ClAbort: c.state = ClPhase::Aborted; return s;
      case EventKind::ClReadyC:
      case EventKind::ClReadyA:
        c.state = ClPhase::Init;
        c.sn += 1;
        c.footprint = 0;
        return s;
      default: break;
    }
    ServerConf& sv = s.svrs.at(e.key);
    switch (e.kind) {
      case EventKind::SvrPrepare: sv.state[e.txn] = VerState::Prepared; break;
      case EventKind::AcqRdLock:
        sv.state[e.txn] = VerState::ReadLock;
        sv.fp[e.txn] = KeyOps{e.v_r, std::nullopt};
        break;
      case EventKind::AcqWrLock:
        sv.state[e.txn] = VerState::WriteLock;
        sv.fp[e.txn] = KeyOps{e.v_r, e.v_w};
        break;
      case EventKind::SvrNok: sv.state[e.txn] = VerState::NotOkay; break;
      case EventKind::SvrCommit: {
        sv.state[e.txn] = VerState::Committed;
        auto it = sv.fp.find(e.txn);
        if (it != sv.fp.end()) apply_key_ops(sv.vl, e.txn, it->second);
        break;
      }
      case EventKind::SvrAbort:
        sv.state[e.txn] = VerState::Aborted;
        sv.fp.erase(e.txn);
        break;
      default: break;
    }
    return s;
  }

  std::optional<State> apply(const State& s, const Event& e) const {
    if (!enabled(s, e)) return std::nullopt;
    return update(s, e);
  }

  /// All enabled events, in canonical (name, parameters) order.
  std::vector<Event> enabled_events(const State& s) const {
    std::vector<Event> cand;
    for (const auto& [cl, c] : s.cls) {
      const auto n_fp = scope_.candidates(cl).size();
      for (std::size_t i = 0; i < n_fp; ++i) cand.push_back(Event{EventKind::ClPrepare, cl, {}, {}, {}, {}, i, 0});
      cand.push_back(Event{EventKind::ClCommit, cl, {}, {}, {}, {}, 0, c.sn});
      for (auto k : {EventKind::ClAbort, EventKind::ClReadyC, EventKind::ClReadyA})
        cand.push_back(Event{k, cl, {}, {}, {}, {}, 0, 0});
      if (c.state == ClPhase::Init) continue;
      const TxId t = get_txn(s, cl);
      for (const auto& [k, intent] : footprint(s, cl)) {
        const ServerConf& sv = s.svrs.at(k);
        for (auto kind : {EventKind::SvrPrepare, EventKind::SvrNok, EventKind::SvrCommit, EventKind::SvrAbort})
          cand.push_back(Event{kind, cl, k, t, {}, {}, 0, 0});
        if (sv.vl.empty()) continue;
        cand.push_back(Event{EventKind::AcqRdLock, cl, k, t, std::nullopt, last_ver_v(sv), 0, 0});
        std::optional<Value> v_r = intent.read ? std::optional<Value>(last_ver_v(sv)) : std::nullopt;
        for (std::size_t j = 0; j < scope_.value_domain; ++j)
          cand.push_back(Event{EventKind::AcqWrLock, cl, k, t, write_value(t, k, j), v_r, 0, 0});
      }
    }
    std::vector<std::pair<std::string, Event>> keyed;
    for (auto& e : cand)
      if (enabled(s, e)) keyed.emplace_back(to_json(e).dump(), std::move(e));
    std::sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<Event> out;
    for (auto& [_, e] : keyed) out.push_back(std::move(e));
    return out;
  }

  // --- refinement mapping ---------------------------------------------------

  /// Servers' version lists extended with the client-committed operations of
  /// transactions whose servers still hold their locks.
  KVStore r_kvs(const State& s) const {
    KVStore kvs;
    for (const auto& [k, sv] : s.svrs) {
      VersionList vl = sv.vl;
      for (const auto& [cl, c] : s.cls) {
        if (c.state != ClPhase::Committed) continue;
        const TxId t = get_txn(s, cl);
        if (!is_locked(sv.at(t))) continue;
        auto it = sv.fp.find(t);
        if (it != sv.fp.end()) apply_key_ops(vl, t, it->second);
      }
      kvs[k] = std::move(vl);
    }
    return kvs;
  }

  std::map<ClientId, View> r_views(const State& s) const {
    std::map<ClientId, View> out;
    View init;
    for (const auto& [k, _] : s.svrs) init[k] = {0};
    for (const auto& [cl, _] : s.cls) out[cl] = init;
    return out;
  }

  /// π: cl_commit maps to the abstract commit with its ghost parameters (full
  /// view of the reconstructed store, fingerprint assembled from the servers);
  /// every other event maps to skip.
  std::optional<CommitEvent> commit_event(const State& s, const Event& e) const {
    if (e.kind != EventKind::ClCommit) return std::nullopt;
    const TxId t = get_txn(s, e.cl);
    CommitEvent c{e.cl, e.sn, full_view(r_kvs(s)), {}};
    for (const auto& [k, sv] : s.svrs) {
      auto it = sv.fp.find(t);
      if (it != sv.fp.end() && !it->second.empty()) c.f[k] = it->second;
    }
    return c;
  }

  // --- invariants -----------------------------------------------------------

  std::vector<std::string> invariant_failures(const State& s) const {
    std::vector<std::string> out;
    for (const auto& [k, sv] : s.svrs) {
      std::size_t readers = 0, writers_ = 0;
      for (const auto& [t, v] : sv.state) {
        readers += v == VerState::ReadLock;
        writers_ += v == VerState::WriteLock;
        if (!is_locked(v)) continue;
        auto it = sv.fp.find(t);
        const KeyOps ops = it == sv.fp.end() ? KeyOps{} : it->second;
        if (v == VerState::ReadLock && (!ops.read || ops.write || *ops.read != last_ver_v(sv))) {
          out.push_back("fingerprint: read lock of " + isoguard::to_string(t) + " on " + k +
                        " without a read of the latest version");
        }
        if (v == VerState::WriteLock && (!ops.write || (ops.read && *ops.read != last_ver_v(sv)))) {
          out.push_back("fingerprint: write lock of " + isoguard::to_string(t) + " on " + k +
                        " inconsistent with its fingerprint");
        }
      }
      if (writers_ > 1 || (writers_ == 1 && readers > 0)) out.push_back("lock exclusivity violated on key " + k);
      for (const auto& [t, v] : sv.state) {
        auto c = s.cls.find(t.cl);
        if (c == s.cls.end()) continue;
        if (t.sn < c->second.sn && v != VerState::Committed && v != VerState::Aborted) {
          out.push_back("past transaction " + isoguard::to_string(t) + " still " + to_string(v) + " on " + k);
        }
        if (t.sn > c->second.sn) out.push_back("future transaction " + isoguard::to_string(t) + " active on " + k);
      }
    }
    std::size_t pending_writes = 0;
    const KVStore kvs = r_kvs(s);
    for (const auto& [k, sv] : s.svrs) {
      pending_writes = 0;
      for (const auto& [cl, c] : s.cls) {
        const TxId t = get_txn(s, cl);
        if (c.state == ClPhase::Committed && sv.at(t) == VerState::WriteLock) ++pending_writes;
      }
      if (pending_writes > 1) out.push_back("two client-committed writes pending on key " + k);
    }
    const auto used = txids(kvs);
    for (const auto& [cl, c] : s.cls) {
      if (c.state == ClPhase::Committed) continue;
      if (used.count(get_txn(s, cl))) out.push_back("freshness: " + isoguard::to_string(get_txn(s, cl)) + " already in the store");
    }
    if (auto why = store_invariant_failure(kvs)) out.push_back("reconstructed store: " + *why);
    return out;
  }

 private:
  static void apply_key_ops(VersionList& vl, const TxId& t, const KeyOps& ops) {
    if (ops.read) vl.back().readers.insert(t);
    if (ops.write) vl.push_back(Version{*ops.write, t, {}});
  }

  static bool locked_by_other(const ServerConf& sv, const TxId& t) {
    for (const auto& [u, v] : sv.state)
      if (u != t && is_locked(v)) return true;
    return false;
  }

  static bool write_locked_by_other(const ServerConf& sv, const TxId& t) {
    for (const auto& [u, v] : sv.state)
      if (u != t && v == VerState::WriteLock) return true;
    return false;
  }

  Scope scope_;
};

}  // namespace isoguard::s2pl
