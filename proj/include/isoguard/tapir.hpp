#pragma once

// TAPIR's concurrency-control core: two-phase commit where servers validate
// each prepare with a timestamp-based OCC check instead of taking locks.
// Results live directly in the per-(key, txn) version states; `commit_order`
// is a history variable read only by the refinement mapping.

#include <algorithm>
#include <compare>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "isoguard/abstract_model.hpp"
#include "isoguard/core.hpp"
#include "isoguard/protocol.hpp"
#include "isoguard/serialize.hpp"

namespace isoguard::tapir {

enum class OccVariant { Journal, Conference };

inline const char* to_string(OccVariant v) { return v == OccVariant::Journal ? "journal" : "conference"; }

inline OccVariant variant_from_string(const std::string& s) {
  if (s == "journal") return OccVariant::Journal;
  if (s == "conference") return OccVariant::Conference;
  throw std::invalid_argument("unknown OCC variant: " + s);
}

/// Lexicographic (clock, client) pair; ties between clients cannot occur.
struct Timestamp {
  std::uint64_t n = 0;
  ClientId cl;

  auto operator<=>(const Timestamp&) const = default;
  bool operator==(const Timestamp&) const = default;
};

inline json to_json(const Timestamp& ts) { return json::array({ts.n, ts.cl}); }

inline std::string to_string(const Timestamp& ts) {
  return ts.cl.empty() ? std::to_string(ts.n) : std::to_string(ts.n) + "@" + ts.cl;
}

enum class Phase { Working, Prepared, Committed, Aborted };

inline const char* to_string(Phase p) {
  switch (p) {
    case Phase::Working: return "working";
    case Phase::Prepared: return "prepared";
    case Phase::Committed: return "committed";
    case Phase::Aborted: return "aborted";
  }
  return "?";
}

/// prepared/committed carry (ts, read version's writer, written value).
struct VerState {
  Phase phase = Phase::Working;
  Timestamp ts;
  std::optional<TxId> read;
  std::optional<Value> write;

  bool operator==(const VerState&) const = default;

  static VerState prepared(Timestamp ts, std::optional<TxId> r, std::optional<Value> w) {
    return VerState{Phase::Prepared, std::move(ts), std::move(r), std::move(w)};
  }
  static VerState committed(Timestamp ts, std::optional<TxId> r, std::optional<Value> w) {
    return VerState{Phase::Committed, std::move(ts), std::move(r), std::move(w)};
  }
  static VerState aborted() { return VerState{Phase::Aborted, {}, {}, {}}; }
};

inline json to_json(const VerState& v) {
  json out{{"phase", to_string(v.phase)}};
  if (v.phase == Phase::Prepared || v.phase == Phase::Committed) {
    out["ts"] = to_json(v.ts);
    out["read"] = v.read ? to_json(*v.read) : json(nullptr);
    out["write"] = v.write ? json(*v.write) : json(nullptr);
  }
  return out;
}

struct ServerConf {
  std::map<TxId, VerState> state;  // absent entries are `working`

  const VerState& at(const TxId& t) const {
    static const VerState working{};
    auto it = state.find(t);
    return it == state.end() ? working : it->second;
  }

  bool operator==(const ServerConf&) const = default;
};

struct ClientConf {
  ClPhase state = ClPhase::Init;
  std::uint64_t sn = 0;
  std::uint64_t local_time = 0;
  Timestamp ts;  // valid in prepared/committed
  std::map<Key, TxId> readmap;
  std::map<Key, Value> writemap;
  std::size_t footprint = 0;

  bool operator==(const ClientConf&) const = default;
};

struct State {
  std::map<ClientId, ClientConf> cls;
  std::map<Key, ServerConf> svrs;
  std::map<Key, std::vector<TxId>> commit_order;

  bool operator==(const State&) const = default;
};

inline json to_json(const State& s) {
  json cls = json::object();
  for (const auto& [cl, c] : s.cls) {
    json rm = json::object();
    for (const auto& [k, t] : c.readmap) rm[k] = to_json(t);
    cls[cl] = json{{"state", to_string(c.state)}, {"sn", c.sn},     {"local_time", c.local_time},
                   {"ts", to_json(c.ts)},         {"readmap", rm}, {"writemap", c.writemap},
                   {"footprint", c.footprint}};
  }
  json svrs = json::object();
  for (const auto& [k, sv] : s.svrs) {
    json st = json::array();
    for (const auto& [t, v] : sv.state) st.push_back(json{to_json(t), to_json(v)});
    svrs[k] = st;
  }
  json co = json::object();
  for (const auto& [k, list] : s.commit_order) {
    json arr = json::array();
    for (const auto& t : list) arr.push_back(to_json(t));
    co[k] = arr;
  }
  return json{{"cls", cls}, {"svrs", svrs}, {"commit_order", co}};
}

// --- OCC check --------------------------------------------------------------

inline std::set<Timestamp> prepared_rd_tstmps(const ServerConf& sv) {
  std::set<Timestamp> out;
  for (const auto& [_, v] : sv.state)
    if (v.phase == Phase::Prepared && v.read) out.insert(v.ts);
  return out;
}

inline std::set<Timestamp> prepared_wr_tstmps(const ServerConf& sv) {
  std::set<Timestamp> out;
  for (const auto& [_, v] : sv.state)
    if (v.phase == Phase::Prepared && v.write) out.insert(v.ts);
  return out;
}

inline std::set<Timestamp> committed_wr_tstmps(const ServerConf& sv) {
  std::set<Timestamp> out;
  for (const auto& [_, v] : sv.state)
    if (v.phase == Phase::Committed && v.write) out.insert(v.ts);
  return out;
}

/// Timestamp of the version state of `t` on this server.
inline Timestamp ver_ts(const ServerConf& sv, const TxId& t) { return sv.at(t).ts; }

/// The validation cascade. Both ABSTAIN and RETRY outcomes become `aborted`.
inline VerState tapir_occ_check(const ServerConf& sv, const Timestamp& ts, const std::optional<TxId>& t_r,
                                const std::optional<Value>& v_w, OccVariant variant) {
  const auto committed_wr = committed_wr_tstmps(sv);
  const auto prepared_wr = prepared_wr_tstmps(sv);
  const auto prepared_rd = prepared_rd_tstmps(sv);
  if (t_r && !committed_wr.empty() && ver_ts(sv, *t_r) < *committed_wr.rbegin()) return VerState::aborted();
  if (t_r && !prepared_wr.empty()) {
    const Timestamp& lo = *prepared_wr.begin();
    if (variant == OccVariant::Journal ? ts > lo : ver_ts(sv, *t_r) < lo) return VerState::aborted();
  }
  if (v_w && !prepared_rd.empty() && ts < *prepared_rd.rbegin()) return VerState::aborted();
  if (v_w && !committed_wr.empty() && ts < *committed_wr.rbegin()) return VerState::aborted();
  return VerState::prepared(ts, t_r, v_w);
}

/// Writer of the committed version with the greatest timestamp.
inline TxId latest_committed_writer(const ServerConf& sv) {
  std::optional<std::pair<Timestamp, TxId>> best;
  for (const auto& [t, v] : sv.state) {
    if (v.phase != Phase::Committed || !v.write) continue;
    if (!best || best->first < v.ts) best = {v.ts, t};
  }
  if (!best) throw contract_error("server without a committed version");
  return best->second;
}

// --- events -----------------------------------------------------------------

enum class EventKind { ClPrepare, SvrPrepare, ClCommit, ClAbort, SvrCommit, SvrAbort, ClReadyC, ClReadyA };

inline const char* event_name(EventKind k) {
  switch (k) {
    case EventKind::ClPrepare: return "cl_prepare";
    case EventKind::SvrPrepare: return "svr_prepare";
    case EventKind::ClCommit: return "cl_commit";
    case EventKind::ClAbort: return "cl_abort";
    case EventKind::SvrCommit: return "svr_commit";
    case EventKind::SvrAbort: return "svr_abort";
    case EventKind::ClReadyC: return "cl_ready_c";
    case EventKind::ClReadyA: return "cl_ready_a";
  }
  return "?";
}

struct Event {
  EventKind kind = EventKind::ClPrepare;
  ClientId cl;
  Key key;
  TxId txn;
  std::uint64_t ts = 0;
  std::size_t footprint = 0;
  std::size_t value = 0;
  std::uint64_t sn = 0;

  bool operator==(const Event&) const = default;
};

inline json to_json(const Event& e) {
  json p;
  switch (e.kind) {
    case EventKind::ClPrepare: p = {{"cl", e.cl}, {"ts", e.ts}, {"footprint", e.footprint}, {"value", e.value}}; break;
    case EventKind::ClCommit: p = {{"cl", e.cl}, {"sn", e.sn}}; break;
    case EventKind::ClAbort:
    case EventKind::ClReadyC:
    case EventKind::ClReadyA: p = {{"cl", e.cl}}; break;
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
  if (!found) throw format_error("unknown tapir event: " + name);
  if (p.contains("cl")) e.cl = p.at("cl").get<std::string>();
  if (p.contains("key")) e.key = p.at("key").get<std::string>();
  if (p.contains("txn")) {
    e.txn = txid_from_json(p.at("txn"));
    e.cl = e.txn.cl;
  }
  if (p.contains("ts")) e.ts = p.at("ts").get<std::uint64_t>();
  if (p.contains("footprint")) e.footprint = p.at("footprint").get<std::size_t>();
  if (p.contains("value")) e.value = p.at("value").get<std::size_t>();
  if (p.contains("sn")) e.sn = p.at("sn").get<std::uint64_t>();
  return e;
}

class Protocol {
 public:
  using StateType = State;
  using EventType = Event;

  Protocol(Scope scope, OccVariant variant) : scope_(std::move(scope)), variant_(variant) { scope_.validate(); }

  static constexpr const char* name() { return "tapir"; }
  static Event parse_event(const json& j) { return event_from_json(j); }
  const Scope& scope() const { return scope_; }
  OccVariant variant() const { return variant_; }

  static Timestamp init_ts() { return Timestamp{0, ""}; }

  State initial_state() const {
    State s;
    for (const auto& cl : scope_.clients) s.cls[cl] = ClientConf{};
    for (const auto& k : scope_.keys) {
      s.svrs[k].state[TxId::init()] = VerState::committed(init_ts(), std::nullopt, initial_value());
      s.commit_order[k] = {TxId::init()};
    }
    return s;
  }

  static TxId get_txn(const State& s, const ClientId& cl) { return TxId{cl, s.cls.at(cl).sn}; }

  const Footprint& footprint(const State& s, const ClientId& cl) const {
    return scope_.candidates(cl).at(s.cls.at(cl).footprint);
  }

  bool enabled(const State& s, const Event& e) const {
    if (!s.cls.count(e.cl)) return false;
    const ClientConf& c = s.cls.at(e.cl);
    switch (e.kind) {
      case EventKind::ClPrepare:
        return c.state == ClPhase::Init && c.sn < scope_.txns_per_client && e.ts > c.local_time &&
               e.ts <= scope_.ts_bound && e.footprint < scope_.candidates(e.cl).size() && e.value < scope_.value_domain;
      case EventKind::ClCommit: {
        if (c.state != ClPhase::Prepared || e.sn != c.sn) return false;
        const TxId t = get_txn(s, e.cl);
        for (const auto& [k, _] : footprint(s, e.cl))
          if (s.svrs.at(k).at(t).phase != Phase::Prepared) return false;
        return true;
      }
      case EventKind::ClAbort: {
        if (c.state != ClPhase::Prepared) return false;
        const TxId t = get_txn(s, e.cl);
        for (const auto& [k, _] : footprint(s, e.cl))
          if (s.svrs.at(k).at(t).phase == Phase::Aborted) return true;
        return false;
      }
      case EventKind::ClReadyC:
      case EventKind::ClReadyA: {
        const bool commit = e.kind == EventKind::ClReadyC;
        if (c.state != (commit ? ClPhase::Committed : ClPhase::Aborted)) return false;
        const TxId t = get_txn(s, e.cl);
        for (const auto& [k, _] : footprint(s, e.cl))
          if (s.svrs.at(k).at(t).phase != (commit ? Phase::Committed : Phase::Aborted)) return false;
        return true;
      }
      default: break;
    }
    if (c.state == ClPhase::Init || e.txn != get_txn(s, e.cl)) return false;
    if (!footprint(s, e.cl).count(e.key) || !s.svrs.count(e.key)) return false;
    const Phase ph = s.svrs.at(e.key).at(e.txn).phase;
    switch (e.kind) {
      case EventKind::SvrPrepare: return ph == Phase::Working && c.state == ClPhase::Prepared;
      case EventKind::SvrCommit: return ph == Phase::Prepared && c.state == ClPhase::Committed;
      case EventKind::SvrAbort: return c.state == ClPhase::Aborted && (ph == Phase::Working || ph == Phase::Prepared);
      default: return false;
    }
  }

  State update(State s, const Event& e) const {
    ClientConf& c = s.cls.at(e.cl);
    const TxId t = get_txn(s, e.cl);
    switch (e.kind) {
      case EventKind::ClPrepare: {
        c.state = ClPhase::Prepared;
        c.local_time = e.ts;
        c.ts = Timestamp{e.ts, e.cl};
        c.footprint = e.footprint;
        c.readmap.clear();
        c.writemap.clear();
        for (const auto& [k, in] : footprint(s, e.cl))
          if (in.write) c.writemap[k] = write_value(t, k, e.value);
        return s;
      }
      case EventKind::ClCommit: {
        c.state = ClPhase::Committed;
        for (const auto& [k, in] : footprint(s, e.cl)) {
          const VerState& v = s.svrs.at(k).at(t);
          if (v.read) c.readmap[k] = *v.read;
          if (in.write) s.commit_order[k].push_back(t);
        }
        return s;
      }
      case EventKind::ClAbort: c.state = ClPhase::Aborted; return s;
      case EventKind::ClReadyC:
      case EventKind::ClReadyA:
        c.state = ClPhase::Init;
        c.sn += 1;
        c.ts = {};
        c.readmap.clear();
        c.writemap.clear();
        c.footprint = 0;
        return s;
      default: break;
    }
    ServerConf& sv = s.svrs.at(e.key);
    switch (e.kind) {
      case EventKind::SvrPrepare: {
        const Intent in = footprint(s, e.cl).at(e.key);
        std::optional<TxId> t_r;
        if (in.read) t_r = latest_committed_writer(sv);
        std::optional<Value> v_w;
        if (in.write) v_w = c.writemap.at(e.key);
        sv.state[t] = tapir_occ_check(sv, c.ts, t_r, v_w, variant_);
        break;
      }
      case EventKind::SvrCommit: sv.state[t].phase = Phase::Committed; break;
      case EventKind::SvrAbort: sv.state[t] = VerState::aborted(); break;
      default: break;
    }
    return s;
  }

  std::optional<State> apply(const State& s, const Event& e) const {
    if (!enabled(s, e)) return std::nullopt;
    return update(s, e);
  }

  std::vector<Event> enabled_events(const State& s) const {
    std::vector<Event> cand;
    for (const auto& [cl, c] : s.cls) {
      if (c.state == ClPhase::Init) {
        const auto n_fp = scope_.candidates(cl).size();
        for (std::uint64_t ts = c.local_time + 1; ts <= scope_.ts_bound; ++ts)
          for (std::size_t i = 0; i < n_fp; ++i) {
            bool writes = false;
            for (const auto& [_, in] : scope_.candidates(cl)[i]) writes = writes || in.write;
            for (std::size_t v = 0; v < (writes ? scope_.value_domain : 1); ++v)
              cand.push_back(Event{EventKind::ClPrepare, cl, {}, {}, ts, i, v, 0});
          }
        continue;
      }
      cand.push_back(Event{EventKind::ClCommit, cl, {}, {}, 0, 0, 0, c.sn});
      for (auto k : {EventKind::ClAbort, EventKind::ClReadyC, EventKind::ClReadyA})
        cand.push_back(Event{k, cl, {}, {}, 0, 0, 0, 0});
      const TxId t = get_txn(s, cl);
      for (const auto& [k, _] : footprint(s, cl))
        for (auto kind : {EventKind::SvrPrepare, EventKind::SvrCommit, EventKind::SvrAbort})
          cand.push_back(Event{kind, cl, k, t, 0, 0, 0, 0});
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

  /// Has `t` reached cl_committed (now or in the past)?
  static bool client_committed(const State& s, const TxId& t) {
    if (t.is_init()) return true;
    auto c = s.cls.find(t.cl);
    if (c == s.cls.end()) return false;
    if (t.sn < c->second.sn) {
      for (const auto& [_, sv] : s.svrs)
        if (sv.at(t).phase == Phase::Committed) return true;
      return false;
    }
    return t.sn == c->second.sn && c->second.state == ClPhase::Committed;
  }

  /// Version lists in commit_order; a version's readers are the client-committed
  /// transactions whose state on the key names its writer as the version read.
  KVStore r_kvs(const State& s) const {
    KVStore kvs;
    for (const auto& [k, order] : s.commit_order) {
      const ServerConf& sv = s.svrs.at(k);
      VersionList& vl = kvs[k];
      for (const auto& w : order) {
        const VerState& v = sv.at(w);
        vl.push_back(Version{v.write.value_or(""), w, {}});
      }
      for (const auto& [t, v] : sv.state) {
        if (!v.read || (v.phase != Phase::Prepared && v.phase != Phase::Committed)) continue;
        if (!client_committed(s, t)) continue;
        for (auto& ver : vl)
          if (ver.writer == *v.read) ver.readers.insert(t);
      }
    }
    return kvs;
  }

  std::map<ClientId, View> r_views(const State& s) const {
    View init;
    for (const auto& [k, _] : s.svrs) init[k] = {0};
    std::map<ClientId, View> out;
    for (const auto& [cl, _] : s.cls) out[cl] = init;
    return out;
  }

  std::optional<CommitEvent> commit_event(const State& s, const Event& e) const {
    if (e.kind != EventKind::ClCommit) return std::nullopt;
    const TxId t = get_txn(s, e.cl);
    CommitEvent c{e.cl, e.sn, full_view(r_kvs(s)), {}};
    for (const auto& [k, in] : footprint(s, e.cl)) {
      const ServerConf& sv = s.svrs.at(k);
      const VerState& v = sv.at(t);
      KeyOps ops;
      if (v.read) ops.read = sv.at(*v.read).write;
      if (in.write) ops.write = s.cls.at(e.cl).writemap.at(k);
      if (!ops.empty()) c.f[k] = ops;
    }
    return c;
  }

  std::vector<std::string> invariant_failures(const State& s) const {
    std::vector<std::string> out;
    for (const auto& [k, order] : s.commit_order) {
      std::set<TxId> seen(order.begin(), order.end());
      if (seen.size() != order.size()) out.push_back("commit_order(" + k + ") has duplicates");
      std::set<TxId> expected{TxId::init()};
      for (const auto& [t, v] : s.svrs.at(k).state)
        if (v.write && (v.phase == Phase::Prepared || v.phase == Phase::Committed) && client_committed(s, t))
          expected.insert(t);
      if (seen != expected) out.push_back("commit_order(" + k + ") differs from the client-committed writers");
      for (const auto& [t, v] : s.svrs.at(k).state) {
        if (t.is_init()) continue;
        auto c = s.cls.find(t.cl);
        if (c == s.cls.end()) continue;
        if (v.phase == Phase::Committed && !client_committed(s, t))
          out.push_back("server commit of " + isoguard::to_string(t) + " on " + k + " before its client commit");
        if ((v.phase == Phase::Prepared || v.phase == Phase::Committed) && t.sn == c->second.sn &&
            v.ts != c->second.ts)
          out.push_back("timestamp of " + isoguard::to_string(t) + " on " + k + " differs from its client's");
        if (t.sn < c->second.sn && v.phase == Phase::Prepared)
          out.push_back("past transaction " + isoguard::to_string(t) + " still prepared on " + k);
        if (t.sn > c->second.sn) out.push_back("future transaction " + isoguard::to_string(t) + " active on " + k);
      }
    }
    const KVStore kvs = r_kvs(s);
    const auto used = txids(kvs);
    for (const auto& [cl, c] : s.cls) {
      if (c.state == ClPhase::Committed) continue;
      if (used.count(get_txn(s, cl))) out.push_back("freshness: " + isoguard::to_string(get_txn(s, cl)) + " already in the store");
    }
    if (auto why = store_invariant_failure(kvs)) out.push_back("reconstructed store: " + *why);
    return out;
  }

 private:
  Scope scope_;
  OccVariant variant_;
};

}  // namespace isoguard::tapir
