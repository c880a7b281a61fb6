#pragma once

// Scripted TAPIR executions whose client commit of the reading transaction
// observes only part of another transaction's writes.

#include <optional>
#include <string>
#include <vector>

#include "isoguard/protocol.hpp"
#include "isoguard/tapir.hpp"

namespace isoguard::schedules {

struct Schedule {
  std::string name;
  Scope scope;
  tapir::OccVariant variant = tapir::OccVariant::Journal;
  std::vector<tapir::Event> events;
};

namespace detail {

using tapir::Event;
using tapir::EventKind;

inline Event prepare(const ClientId& cl, std::uint64_t ts) { return Event{EventKind::ClPrepare, cl, {}, {}, ts, 0, 0, 0}; }
inline Event svr(EventKind k, const Key& key, const ClientId& cl) { return Event{k, cl, key, TxId{cl, 0}, 0, 0, 0, 0}; }
inline Event client(EventKind k, const ClientId& cl) { return Event{k, cl, {}, {}, 0, 0, 0, 0}; }

inline Scope scope_for(const std::vector<std::pair<ClientId, std::string>>& footprints) {
  Scope s;
  s.keys = {"A", "B"};
  s.ts_bound = 9;
  for (const auto& [cl, fp] : footprints) {
    s.clients.push_back(cl);
    s.footprints[cl] = {parse_footprint(fp)};
  }
  return s;
}

}  // namespace detail

/// tx1 (c1, ts 8) writes A and B; tx2 (c2, ts 5) reads A after tx1's A is
/// server-committed but B while tx1's B is only prepared.
inline Schedule fig9a() {
  using namespace detail;
  Schedule s{"fig9a", scope_for({{"c1", "wA,wB"}, {"c2", "rA,rB"}}), tapir::OccVariant::Journal, {}};
  s.events = {
      prepare("c1", 8),
      svr(EventKind::SvrPrepare, "A", "c1"),
      svr(EventKind::SvrPrepare, "B", "c1"),
      Event{EventKind::ClCommit, "c1", {}, {}, 0, 0, 0, 0},
      svr(EventKind::SvrCommit, "A", "c1"),
      prepare("c2", 5),
      svr(EventKind::SvrPrepare, "A", "c2"),  // reads tx1's A
      svr(EventKind::SvrPrepare, "B", "c2"),  // reads the initial B; 5 does not exceed Min{8}
      Event{EventKind::ClCommit, "c2", {}, {}, 0, 0, 0, 0},
      svr(EventKind::SvrCommit, "B", "c1"),
      svr(EventKind::SvrCommit, "A", "c2"),
      svr(EventKind::SvrCommit, "B", "c2"),
      client(EventKind::ClReadyC, "c1"),
      client(EventKind::ClReadyC, "c2"),
  };
  return s;
}

/// Conference check: tx3 (ts 6) commits a newer B than the initial one, tx4
/// (ts 3) keeps a prepared write on B, so tx2's read of tx3's B passes since
/// 6 is not below Min{3, 8}.
inline Schedule fig9b() {
  using namespace detail;
  Schedule s{"fig9b", scope_for({{"c1", "wA,wB"}, {"c2", "rA,rB"}, {"c3", "wB"}, {"c4", "wB"}}),
             tapir::OccVariant::Conference, {}};
  s.events = {
      prepare("c1", 8),
      svr(EventKind::SvrPrepare, "A", "c1"),
      svr(EventKind::SvrPrepare, "B", "c1"),
      prepare("c3", 6),
      svr(EventKind::SvrPrepare, "B", "c3"),
      prepare("c4", 3),
      svr(EventKind::SvrPrepare, "B", "c4"),
      Event{EventKind::ClCommit, "c3", {}, {}, 0, 0, 0, 0},
      svr(EventKind::SvrCommit, "B", "c3"),
      Event{EventKind::ClCommit, "c1", {}, {}, 0, 0, 0, 0},
      svr(EventKind::SvrCommit, "A", "c1"),
      prepare("c2", 5),
      svr(EventKind::SvrPrepare, "A", "c2"),
      svr(EventKind::SvrPrepare, "B", "c2"),
      Event{EventKind::ClCommit, "c2", {}, {}, 0, 0, 0, 0},
      svr(EventKind::SvrCommit, "B", "c1"),
      svr(EventKind::SvrCommit, "A", "c2"),
      svr(EventKind::SvrCommit, "B", "c2"),
      client(EventKind::ClReadyC, "c1"),
      client(EventKind::ClReadyC, "c2"),
      client(EventKind::ClReadyC, "c3"),
  };
  return s;
}

inline std::optional<Schedule> by_name(const std::string& name) {
  if (name == "fig9a") return fig9a();
  if (name == "fig9b") return fig9b();
  return std::nullopt;
}

}  // namespace isoguard::schedules
