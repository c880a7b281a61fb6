#pragma once

// Black-box read-atomicity checking over client histories. The dependency
// graph has session order (SO), write-read (WR) and write-write (WW) edges;
// WW is inferred from the RA axiom: if t reads k from t1 and another writer t2
// of k is directly visible to t (t2 SO t or t2 WR t), then t2 precedes t1.
// RA holds iff the graph is acyclic.

#include <algorithm>
#include <deque>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "isoguard/core.hpp"
#include "isoguard/serialize.hpp"

namespace isoguard::history {

struct Op {
  bool write = false;
  Key key;
  Value value;
  std::optional<std::string> writer;  // optional hint; checked against inference

  bool operator==(const Op&) const = default;
};

struct Txn {
  std::uint64_t sn = 0;
  std::string id;  // display name; defaults to Tn(sn,client)
  std::vector<Op> ops;
};

struct Session {
  ClientId client;
  std::vector<Txn> txns;
};

struct History {
  std::vector<Session> sessions;
  Value initial = initial_value();
};

inline constexpr const char* kInitName = "T_init";

inline std::string txn_name(const Session& s, const Txn& t) {
  return t.id.empty() ? to_string(TxId{s.client, t.sn}) : t.id;
}

// --- serialization ----------------------------------------------------------

inline json to_json(const History& h) {
  json sessions = json::array();
  for (const auto& s : h.sessions) {
    json txns = json::array();
    for (const auto& t : s.txns) {
      json ops = json::array();
      for (const auto& o : t.ops) {
        json op{{"op", o.write ? "w" : "r"}, {"key", o.key}, {"value", o.value}};
        if (o.writer) op["writer"] = *o.writer;
        ops.push_back(std::move(op));
      }
      json tj{{"sn", t.sn}, {"ops", ops}};
      if (!t.id.empty()) tj["id"] = t.id;
      txns.push_back(std::move(tj));
    }
    sessions.push_back(json{{"client", s.client}, {"txns", txns}});
  }
  json out{{"sessions", sessions}};
  if (h.initial != initial_value()) out["initial"] = h.initial;
  return out;
}

inline History history_from_json(const json& j) {
  History h;
  if (!j.is_object() || !j.contains("sessions") || !j.at("sessions").is_array()) {
    throw format_error("history: expected an object with a \"sessions\" array");
  }
  if (j.contains("initial")) h.initial = j.at("initial").get<std::string>();
  for (const auto& sj : j.at("sessions")) {
    Session s{sj.at("client").get<std::string>(), {}};
    std::uint64_t next_sn = 0;
    for (const auto& tj : sj.at("txns")) {
      Txn t;
      t.sn = tj.contains("sn") ? tj.at("sn").get<std::uint64_t>() : next_sn;
      next_sn = t.sn + 1;
      if (tj.contains("id")) t.id = tj.at("id").get<std::string>();
      for (const auto& oj : tj.at("ops")) {
        const auto kind = oj.at("op").get<std::string>();
        if (kind != "r" && kind != "w") throw format_error("history: op must be \"r\" or \"w\", got " + kind);
        Op o{kind == "w", oj.at("key").get<std::string>(), oj.at("value").get<std::string>(), std::nullopt};
        if (oj.contains("writer") && !oj.at("writer").is_null()) o.writer = oj.at("writer").get<std::string>();
        t.ops.push_back(std::move(o));
      }
      s.txns.push_back(std::move(t));
    }
    h.sessions.push_back(std::move(s));
  }
  return h;
}

/// Line format: `session txn op key value`, op in {r, w}; `#` starts a comment.
/// Transactions of a session appear in session order; a txn token names it.
inline History history_from_lines(std::istream& in) {
  History h;
  std::map<std::string, std::size_t> session_idx;
  std::map<std::pair<std::string, std::string>, std::size_t> txn_idx;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string session, txn, op, key, value, extra;
    if (!(ls >> session)) continue;
    if (!(ls >> txn >> op >> key >> value) || (ls >> extra) || (op != "r" && op != "w")) {
      throw format_error("history line " + std::to_string(lineno) + ": expected `session txn r|w key value`");
    }
    auto [sit, new_session] = session_idx.emplace(session, h.sessions.size());
    if (new_session) h.sessions.push_back(Session{session, {}});
    Session& s = h.sessions[sit->second];
    auto [tit, new_txn] = txn_idx.emplace(std::make_pair(session, txn), s.txns.size());
    if (new_txn) {
      s.txns.push_back(Txn{s.txns.size(), txn, {}});
    } else if (tit->second + 1 != s.txns.size()) {
      throw format_error("history line " + std::to_string(lineno) + ": transaction " + txn +
                         " resumes after a later transaction of its session");
    }
    s.txns.back().ops.push_back(Op{op == "w", key, value, std::nullopt});
  }
  return h;
}

inline History load_history(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw format_error("cannot open history file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      throw format_error(std::string("history: invalid JSON: ") + e.what());
    }
    try {
      return history_from_json(j);
    } catch (const json::exception& e) {
      throw format_error(std::string("history: ") + e.what());
    }
  }
  std::istringstream ls(text);
  return history_from_lines(ls);
}

// --- graph ------------------------------------------------------------------

struct Edge {
  std::size_t from = 0;
  std::size_t to = 0;
  DepKind kind = DepKind::SO;
  Key key;  // empty for SO

  auto operator<=>(const Edge&) const = default;
  bool operator==(const Edge&) const = default;
};

/// Node 0 is T_init; nodes 1.. are the transactions in session-major order.
struct Graph {
  std::vector<std::string> names;
  std::vector<std::size_t> session_of;  // T_init has npos
  std::set<Edge> edges;
};

namespace detail {

struct Summary {
  std::map<Key, Value> writes;                              // final write per key
  std::vector<std::pair<Key, Value>> external_reads;        // reads before any own write of the key
};

struct Analysis {
  Graph g;
  std::vector<Summary> txns;  // index = node; txns[0] is T_init
  std::vector<std::vector<std::pair<Key, std::size_t>>> reads_from;  // per node: (key, writer node)
};

inline Analysis analyse(const History& h) {
  Analysis a;
  a.g.names.push_back(kInitName);
  a.g.session_of.push_back(static_cast<std::size_t>(-1));
  a.txns.emplace_back();

  std::map<std::pair<Key, Value>, std::size_t> final_writer;
  std::map<std::pair<Key, Value>, std::size_t> any_writer;
  std::set<std::string> names;
  for (std::size_t si = 0; si < h.sessions.size(); ++si) {
    for (const auto& t : h.sessions[si].txns) {
      const std::size_t node = a.g.names.size();
      const std::string name = txn_name(h.sessions[si], t);
      if (name == kInitName || !names.insert(name).second) throw format_error("history: duplicate transaction " + name);
      a.g.names.push_back(name);
      a.g.session_of.push_back(si);
      Summary sum;
      for (const auto& o : t.ops) {
        if (o.write) {
          if (o.value == h.initial) throw format_error("history: " + name + " writes the initial value to " + o.key);
          if (!any_writer.emplace(std::make_pair(o.key, o.value), node).second) {
            throw format_error("history: duplicate write " + o.key + "=" + o.value);
          }
          sum.writes[o.key] = o.value;
        } else if (!sum.writes.count(o.key)) {
          sum.external_reads.emplace_back(o.key, o.value);
        }
      }
      for (const auto& [k, v] : sum.writes) final_writer[{k, v}] = node;
      a.txns.push_back(std::move(sum));
    }
  }

  a.reads_from.resize(a.txns.size());
  for (std::size_t n = 1; n < a.txns.size(); ++n) {
    for (const auto& [k, v] : a.txns[n].external_reads) {
      std::size_t w = 0;
      if (v != h.initial) {
        auto it = final_writer.find({k, v});
        if (it == final_writer.end()) {
          throw format_error(any_writer.count({k, v}) ? "history: " + a.g.names[n] + " reads intermediate write " + k + "=" + v
                                                      : "history: " + a.g.names[n] + " reads unwritten value " + k + "=" + v);
        }
        w = it->second;
        if (w == n) throw format_error("history: " + a.g.names[n] + " reads its own later write " + k + "=" + v);
      }
      a.reads_from[n].emplace_back(k, w);
    }
  }

  // Optional writer hints must agree with the value-based inference.
  std::size_t node = 1;
  for (const auto& s : h.sessions) {
    for (const auto& t : s.txns) {
      std::size_t r = 0;
      std::set<Key> written;
      for (const auto& o : t.ops) {
        if (o.write) {
          written.insert(o.key);
          continue;
        }
        if (written.count(o.key)) continue;
        const std::size_t w = a.reads_from[node][r++].second;
        if (o.writer && *o.writer != a.g.names[w]) {
          throw format_error("history: " + a.g.names[node] + " read of " + o.key + " names writer " + *o.writer +
                             " but the value was written by " + a.g.names[w]);
        }
      }
      ++node;
    }
  }

  auto& E = a.g.edges;
  const std::size_t n = a.txns.size();
  for (std::size_t i = 1; i < n; ++i) {
    E.insert(Edge{0, i, DepKind::SO, {}});
    for (std::size_t j = i + 1; j < n; ++j)
      if (a.g.session_of[i] == a.g.session_of[j]) E.insert(Edge{i, j, DepKind::SO, {}});
  }
  for (std::size_t t = 1; t < n; ++t)
    for (const auto& [k, w] : a.reads_from[t]) E.insert(Edge{w, t, DepKind::WR, k});

  // Direct visibility into each reader: SO and WR predecessors.
  std::vector<std::set<std::size_t>> visible(n);
  for (const auto& e : E) visible[e.to].insert(e.from);
  auto writes_key = [&](std::size_t node_, const Key& k) { return node_ == 0 || a.txns[node_].writes.count(k) != 0; };
  for (std::size_t t = 1; t < n; ++t) {
    for (const auto& [k, t1] : a.reads_from[t]) {
      for (std::size_t t2 : visible[t]) {
        if (t2 == t1 || t2 == t || !writes_key(t2, k)) continue;
        E.insert(Edge{t2, t1, DepKind::WW, k});
      }
    }
  }
  return a;
}

}  // namespace detail

inline Graph build_graph(const History& h) { return detail::analyse(h).g; }

inline json to_json(const Graph& g, const Edge& e) {
  json out{{"from", g.names[e.from]}, {"to", g.names[e.to]}, {"kind", to_string(e.kind)}};
  if (!e.key.empty()) out["key"] = e.key;
  return out;
}

inline std::string edge_label(const Graph& g, const Edge& e) {
  std::string kind = to_string(e.kind);
  if (!e.key.empty()) kind += "(" + e.key + ")";
  return kind + ": " + g.names[e.from] + " -> " + g.names[e.to];
}

/// t reads k1 from t1 and k2 from t0 although t1 also wrote k2 and t0 precedes
/// t1 in the dependency graph.
struct FracturedRead {
  std::size_t reader, t1, t0;
  Key k1, k2;
};

struct Verdict {
  bool ra_holds = true;
  std::vector<Edge> cycle;  // shortest cycle, empty when RA holds
  std::vector<FracturedRead> fractured;
  Graph graph;
};

namespace detail {

inline int kind_rank(DepKind k) { return k == DepKind::SO ? 0 : k == DepKind::WR ? 1 : 2; }

/// Shortest cycle through the graph; ties go to the smallest start node and
/// then to edges ordered by (kind SO < WR < WW, key, target).
inline std::vector<Edge> shortest_cycle(const Graph& g) {
  const std::size_t n = g.names.size();
  std::vector<std::vector<Edge>> out(n);
  for (const auto& e : g.edges) out[e.from].push_back(e);
  for (auto& list : out) {
    std::sort(list.begin(), list.end(), [](const Edge& a, const Edge& b) {
      return std::tuple(a.to, kind_rank(a.kind), a.key) < std::tuple(b.to, kind_rank(b.kind), b.key);
    });
    // Keep one edge per target: the preferred kind.
    list.erase(std::unique(list.begin(), list.end(), [](const Edge& a, const Edge& b) { return a.to == b.to; }),
               list.end());
  }
  std::vector<Edge> best;
  for (std::size_t start = 0; start < n; ++start) {
    std::vector<std::optional<Edge>> via(n);
    std::vector<bool> seen(n, false);
    std::deque<std::size_t> q{start};
    seen[start] = true;
    std::optional<Edge> closing;
    while (!q.empty() && !closing) {
      std::size_t u = q.front();
      q.pop_front();
      for (const auto& e : out[u]) {
        if (e.to == start) {
          closing = e;
          break;
        }
        if (seen[e.to]) continue;
        seen[e.to] = true;
        via[e.to] = e;
        q.push_back(e.to);
      }
    }
    if (!closing) continue;
    std::vector<Edge> cyc{*closing};
    for (std::size_t v = closing->from; v != start; v = via[v]->from) cyc.push_back(*via[v]);
    std::reverse(cyc.begin(), cyc.end());
    if (best.empty() || cyc.size() < best.size()) best = std::move(cyc);
  }
  return best;
}

inline std::vector<std::vector<bool>> reachability(const Graph& g) {
  const std::size_t n = g.names.size();
  std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
  for (const auto& e : g.edges) reach[e.from][e.to] = true;
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      if (reach[i][k])
        for (std::size_t j = 0; j < n; ++j)
          if (reach[k][j]) reach[i][j] = true;
  return reach;
}

}  // namespace detail

inline Verdict check_ra(const History& h) {
  auto a = detail::analyse(h);
  Verdict v;
  v.cycle = detail::shortest_cycle(a.g);
  v.ra_holds = v.cycle.empty();
  const auto reach = detail::reachability(a.g);
  for (std::size_t t = 1; t < a.txns.size(); ++t) {
    for (const auto& [k1, t1] : a.reads_from[t]) {
      if (t1 == 0 || t1 == t) continue;
      for (const auto& [k2, t0] : a.reads_from[t]) {
        if (k2 == k1 || t0 == t1 || !a.txns[t1].writes.count(k2)) continue;
        if (t0 == 0 || reach[t0][t1]) v.fractured.push_back(FracturedRead{t, t1, t0, k1, k2});
      }
    }
  }
  v.graph = std::move(a.g);
  return v;
}

inline json to_json(const Verdict& v) {
  json cycle = json::array();
  for (const auto& e : v.cycle) cycle.push_back(to_json(v.graph, e));
  json fr = json::array();
  for (const auto& f : v.fractured) {
    fr.push_back(json{{"reader", v.graph.names[f.reader]},
                      {"observed", {{"key", f.k1}, {"writer", v.graph.names[f.t1]}}},
                      {"missed", {{"key", f.k2}, {"writer", v.graph.names[f.t0]}}}});
  }
  return json{{"ra_holds", v.ra_holds}, {"cycle", cycle}, {"fractured_reads", fr}};
}

inline std::string to_text(const Verdict& v) {
  if (v.ra_holds) return "RA holds: dependency graph is acyclic\n";
  std::string out = "RA violated: cycle of length " + std::to_string(v.cycle.size()) + "\n";
  for (const auto& e : v.cycle) out += "  " + edge_label(v.graph, e) + "\n";
  for (const auto& f : v.fractured) {
    out += "fractured reads: " + v.graph.names[f.reader] + " reads " + f.k1 + " from " + v.graph.names[f.t1] +
           " but " + f.k2 + " from " + v.graph.names[f.t0] + "\n";
  }
  return out;
}

inline std::string to_dot(const Graph& g) {
  std::string out = "digraph history {\n  rankdir=LR;\n";
  for (std::size_t i = 0; i < g.names.size(); ++i) out += "  n" + std::to_string(i) + " [label=\"" + g.names[i] + "\"];\n";
  for (const auto& e : g.edges) {
    if (e.kind == DepKind::SO && e.from == 0) continue;  // T_init precedes everything
    std::string label = to_string(e.kind);
    if (!e.key.empty()) label += "(" + e.key + ")";
    const char* style = e.kind == DepKind::SO ? "solid" : e.kind == DepKind::WR ? "bold" : "dashed";
    out += "  n" + std::to_string(e.from) + " -> n" + std::to_string(e.to) + " [label=\"" + label + "\", style=" + style +
           "];\n";
  }
  return out + "}\n";
}

// --- builtin ------------------------------------------------------------------

/// Two sessions; Txn81 observes Txn68's write of K56 but Txn67's older K87.
inline History appendix_a() {
  History h;
  h.sessions.push_back(Session{"Clt70",
                               {Txn{0, "Txn67", {Op{true, "K87", "67", std::nullopt}}},
                                Txn{1, "Txn68", {Op{true, "K56", "68", std::nullopt}, Op{true, "K87", "68", std::nullopt}}}}});
  h.sessions.push_back(Session{"Clt01",
                               {Txn{0, "Txn81", {Op{false, "K87", "67", std::nullopt}, Op{false, "K56", "68", std::nullopt}}}}});
  return h;
}

// --- projection from committed fingerprints ---------------------------------

/// Committed transactions with their fingerprints, in commit order. Reads are
/// listed before writes, each sorted by key.
inline History from_commits(const std::vector<std::pair<TxId, Fingerprint>>& commits) {
  std::map<std::pair<Key, Value>, TxId> writer_of;
  for (const auto& [t, f] : commits)
    for (const auto& [k, ops] : f)
      if (ops.write) writer_of[{k, *ops.write}] = t;

  History h;
  std::map<ClientId, std::size_t> idx;
  for (const auto& [t, f] : commits) {
    auto [it, fresh] = idx.emplace(t.cl, h.sessions.size());
    if (fresh) h.sessions.push_back(Session{t.cl, {}});
    Txn txn{t.sn, {}, {}};
    for (const auto& [k, ops] : f) {
      if (!ops.read) continue;
      Op o{false, k, *ops.read, std::nullopt};
      if (*ops.read == initial_value()) {
        o.writer = kInitName;
      } else if (auto w = writer_of.find({k, *ops.read}); w != writer_of.end()) {
        o.writer = to_string(w->second);
      }
      txn.ops.push_back(std::move(o));
    }
    for (const auto& [k, ops] : f)
      if (ops.write) txn.ops.push_back(Op{true, k, *ops.write, std::nullopt});
    h.sessions[it->second].txns.push_back(std::move(txn));
  }
  for (auto& s : h.sessions)
    std::sort(s.txns.begin(), s.txns.end(), [](const Txn& a, const Txn& b) { return a.sn < b.sn; });
  return h;
}

inline std::size_t txn_count(const History& h) {
  std::size_t n = 0;
  for (const auto& s : h.sessions) n += s.txns.size();
  return n;
}

}  // namespace isoguard::history
