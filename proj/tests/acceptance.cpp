// Acceptance gate: runs the eight criteria and prints one PASS/FAIL line each.
// Exit status is the number of failed criteria.

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "isoguard/isoguard.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

using namespace isoguard;
using namespace isoguard::testing;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

// Histories emitted by the exploration criteria, fed to the agreement check.
std::map<std::string, history::History> g_histories;

void collect(const history::History& h) {
  if (history::txn_count(h) == 0 || history::txn_count(h) > 5) return;
  g_histories.emplace(to_json(h).dump(), h);
}

Outcome replay_schedule(const schedules::Schedule& sched, bool exactly_one) {
  tapir::Protocol p(sched.scope, sched.variant);
  auto run = replay(p, level_sser(), sched.events);
  std::ostringstream d;
  if (run.first_disabled) {
    d << "event " << *run.first_disabled << " disabled";
    return {false, d.str()};
  }
  std::size_t lww = 0;
  for (const auto& v : run.violations) lww += v.guard == "lww";
  d << run.violations.size() << " violation(s)";
  for (const auto& v : run.violations) d << "; " << to_text(v);
  const bool at_reader_commit = !run.violations.empty() && run.violations[0].event["name"] == "cl_commit" &&
                                run.violations[0].event["params"]["cl"] == "c2";
  const bool ok = exactly_one ? run.violations.size() == 1 && lww == 1 && at_reader_commit : lww >= 1;
  return {ok, d.str()};
}

Outcome criterion1() { return replay_schedule(schedules::fig9a(), true); }
Outcome criterion2() { return replay_schedule(schedules::fig9b(), false); }

Outcome criterion3() {
  Scope sc = make_scope(2, 2, 1);
  sc.ts_bound = 9;
  tapir::Protocol p(sc, tapir::OccVariant::Journal);
  ExploreOptions<tapir::Protocol> opt;
  opt.on_terminal = [&](const std::vector<tapir::Event>& path) { collect(emit_history(p, path)); };
  auto r = explore_dfs(p, level_sser(), opt);
  std::size_t lww = 0;
  for (const auto& f : r.findings) {
    lww += f.violation.guard == "lww";
    collect(emit_history(p, f.trace));
  }
  std::ostringstream d;
  d << r.findings.size() << " finding(s), " << r.stats.states << " states, " << r.stats.transitions
    << " transitions";
  if (!r.findings.empty()) d << "; first: " << to_text(r.findings[0].violation) << " after " << r.findings[0].trace.size()
                             << " events";
  return {lww >= 1, d.str()};
}

Outcome criterion4() {
  Scope sc = make_scope(2, 2, 1);
  bool r_only = false, w_only = false, rw = false;
  for (const auto& fp : sc.candidates("c1")) {
    for (const auto& [k, in] : fp) {
      r_only = r_only || (in.read && !in.write);
      w_only = w_only || (!in.read && in.write);
      rw = rw || (in.read && in.write);
    }
  }
  s2pl::Protocol p(sc);
  ExploreOptions<s2pl::Protocol> opt;
  opt.keep_going = true;
  opt.on_terminal = [&](const std::vector<s2pl::Event>& path) { collect(emit_history(p, path)); };
  auto r = explore_dfs(p, level_sser(), opt);

  std::vector<std::uint64_t> seeds;
  for (std::uint64_t i = 1; i <= 20; ++i) seeds.push_back(1000 + i);
  auto walks = random_walks(p, level_sser(), seeds, 10000);
  std::size_t walk_findings = 0;
  std::uint64_t walk_steps = 0;
  for (const auto& w : walks) {
    walk_findings += w.findings.size();
    walk_steps += w.steps;
    collect(emit_history(p, w.last_episode));
  }
  std::ostringstream d;
  d << "dfs: " << r.stats.states << " states, " << r.stats.transitions << " transitions, " << r.stats.terminals
    << " terminals, " << r.findings.size() << " violation(s)"
    << (r.stats.bound_hit ? ", depth bound hit" : "") << "; walks: 20 seeds, " << walk_steps << " steps, "
    << walk_findings << " violation(s)";
  if (!r.findings.empty()) d << "; first: " << to_text(r.findings[0].violation);
  const bool ok = r_only && w_only && rw && r.findings.empty() && !r.stats.bound_hit && walk_findings == 0 &&
                  walk_steps == 20 * 10000;
  return {ok, d.str()};
}

Outcome criterion5() {
  std::size_t checked = 0, disagree = 0, violations = 0;
  std::string first;
  auto check = [&](const history::History& h) {
    const bool oracle = check_ra_oracle(h);
    const bool got = history::check_ra(h).ra_holds;
    ++checked;
    violations += !oracle;
    if (oracle != got) {
      ++disagree;
      if (first.empty()) first = to_json(h).dump();
    }
  };
  for (const auto& [_, h] : g_histories) check(h);
  const std::size_t explored = checked;
  Rng rng(20240501);
  for (int i = 0; i < 1000; ++i) check(random_history(rng, 5, 3));
  std::ostringstream d;
  d << explored << " explorer histories + 1000 random; " << disagree << " disagreement(s), " << violations
    << " non-RA histories";
  if (!first.empty()) d << "; first: " << first;
  return {disagree == 0 && explored > 0, d.str()};
}

Outcome criterion6() {
  auto v = history::check_ra(history::appendix_a());
  std::set<std::string> labels;
  for (const auto& e : v.cycle) labels.insert(history::edge_label(v.graph, e));
  const std::set<std::string> want{"SO: Txn67 -> Txn68", "WW(K87): Txn68 -> Txn67"};
  std::string d = v.ra_holds ? "RA holds" : "cycle:";
  for (const auto& l : labels) d += " [" + l + "]";
  return {!v.ra_holds && labels == want, d};
}

Outcome criterion7() {
  std::size_t closed_checks = 0, closed_bad = 0, stores = 0;
  // (i) every serial store of up to six transactions, every atomic view, and
  // the relations the levels use plus random ones.
  Rng rng(7);
  std::vector<Shape> shapes;
  std::function<void(std::size_t)> rec = [&](std::size_t depth) {
    const KVStore kvs = serial_store(shapes);
    ++stores;
    const auto ids = txids(kvs);
    const std::vector<DepRelation> rels{
        {}, wr_rel(kvs), unite(so_rel(ids), wr_rel(kvs)), inverse(ww_rel(kvs)), random_relation(rng, ids, 0.25)};
    for (const auto& u : all_atomic_views(kvs))
      for (const auto& r : rels) {
        ++closed_checks;
        closed_bad += closed(kvs, u, r) != closed_oracle(kvs, u, r);
      }
    if (depth == 6) return;
    for (Shape sh : kShapes) {
      shapes.push_back(sh);
      rec(depth + 1);
      shapes.pop_back();
    }
  };
  rec(0);
  // Non-serial stores: views pick arbitrary older versions.
  for (int i = 0; i < 3000; ++i) {
    const KVStore kvs = random_store(rng, 2, 1 + pick(rng, 6), 3);
    const auto u = random_atomic_view(rng, kvs, initial_view(kvs));
    const auto r = random_relation(rng, txids(kvs), 0.3);
    ++closed_checks;
    closed_bad += closed(kvs, u, r) != closed_oracle(kvs, u, r);
  }

  // (ii) full views are wellformed and closed under any relation.
  std::size_t full_bad = 0;
  for (int i = 0; i < 2000; ++i) {
    const KVStore kvs = random_store(rng, 1 + pick(rng, 3), pick(rng, 7), 3);
    const View u = full_view(kvs);
    full_bad += !wf(kvs, u) || !closed(kvs, u, random_relation(rng, txids(kvs), 0.5));
  }

  // (iii) update_kv on random (store, fingerprint, fresh txid) triples.
  std::size_t update_bad = 0;
  for (int i = 0; i < 10000; ++i) {
    const KVStore kvs = random_store(rng, 1 + pick(rng, 3), pick(rng, 5), 3);
    const View u = random_atomic_view(rng, kvs, initial_view(kvs));
    const ClientId cl = "c" + std::to_string(1 + pick(rng, 3));
    const TxId t{cl, min_fresh_sn(kvs, cl) + pick(rng, 3)};
    const KVStore post = update_kv(kvs, t, u, random_fingerprint(rng, kvs, u, t, coin(rng)));
    update_bad += store_invariant_failure(post).has_value() || !wf(post, full_view(post)) ||
                  !wf(post, extend_with_new_versions(u, kvs, post)) || !wf(post, u);
  }

  // (iv) abstract runs keep the store and all views wellformed.
  std::size_t run_bad = 0;
  const std::vector<ClientId> clients{"c1", "c2", "c3"};
  for (int run = 0; run < 1000; ++run) {
    const auto& level = level_by_name(run % 3 == 0 ? "ra" : run % 3 == 1 ? "tcc" : "sser");
    Config cfg = initial_config({"A", "B", "C"}, clients);
    bool ok = true;
    for (int i = 0; i < 25 && ok; ++i) {
      cfg = abs_step(level, cfg, random_abstract_event(rng, cfg, clients)).first;
      ok = !store_invariant_failure(cfg.kvs);
      for (const auto& [_, u] : cfg.views) ok = ok && wf(cfg.kvs, u);
    }
    run_bad += !ok;
  }

  std::ostringstream d;
  d << "(i) " << closed_checks << " closedness checks over " << stores << " serial stores + 3000 random, " << closed_bad
    << " mismatch(es); (ii) 2000 full views, " << full_bad << " failure(s); (iii) 10000 updates, " << update_bad
    << " failure(s); (iv) 1000 runs, " << run_bad << " failure(s)";
  return {closed_bad + full_bad + update_bad + run_bad == 0, d.str()};
}

Outcome criterion8() {
  using namespace tapir;
  auto base = [] {
    ServerConf sv;
    sv.state[TxId::init()] = VerState::committed(Protocol::init_ts(), std::nullopt, "v0");
    return sv;
  };
  const TxId t1{"c1", 0}, t2{"c2", 0}, t3{"c3", 0}, t4{"c4", 0};
  auto ts = [](std::uint64_t n, const char* cl) { return Timestamp{n, cl}; };
  struct Case {
    const char* name;
    ServerConf sv;
    Timestamp ts;
    std::optional<TxId> t_r;
    std::optional<Value> v_w;
    OccVariant variant;
    Phase expect;
  };
  std::vector<Case> cases;
  {
    ServerConf sv = base();
    sv.state[t3] = VerState::committed(ts(6, "c3"), std::nullopt, "b3");
    cases.push_back({"read of stale version", sv, ts(5, "c2"), TxId::init(), std::nullopt, OccVariant::Journal, Phase::Aborted});
    cases.push_back({"write below committed write", sv, ts(4, "c1"), std::nullopt, "b1", OccVariant::Journal, Phase::Aborted});
  }
  {
    ServerConf sv = base();
    sv.state[t1] = VerState::prepared(ts(8, "c1"), std::nullopt, "b1");
    cases.push_back({"read above prepared write", sv, ts(9, "c2"), TxId::init(), std::nullopt, OccVariant::Journal, Phase::Aborted});
    cases.push_back({"read below prepared write", sv, ts(5, "c2"), TxId::init(), std::nullopt, OccVariant::Journal, Phase::Prepared});
    cases.push_back({"conference: read version older than prepared write", sv, ts(5, "c2"), TxId::init(), std::nullopt,
                     OccVariant::Conference, Phase::Aborted});
    sv.state[t3] = VerState::committed(ts(6, "c3"), std::nullopt, "b3");
    sv.state[t4] = VerState::prepared(ts(3, "c4"), std::nullopt, "b4");
    cases.push_back({"conference: minimum pulled down", sv, ts(5, "c2"), t3, std::nullopt, OccVariant::Conference, Phase::Prepared});
    cases.push_back({"journal: same state aborts", sv, ts(5, "c2"), t3, std::nullopt, OccVariant::Journal, Phase::Aborted});
  }
  {
    ServerConf sv = base();
    sv.state[t2] = VerState::prepared(ts(7, "c2"), TxId::init(), std::nullopt);
    cases.push_back({"write below prepared read", sv, ts(5, "c1"), std::nullopt, "a1", OccVariant::Journal, Phase::Aborted});
    cases.push_back({"write above prepared read", sv, ts(9, "c1"), std::nullopt, "a1", OccVariant::Journal, Phase::Prepared});
  }
  std::size_t bad = 0;
  std::string d;
  for (const auto& c : cases) {
    const VerState got = tapir_occ_check(c.sv, c.ts, c.t_r, c.v_w, c.variant);
    const bool ok = got.phase == c.expect &&
                    (c.expect != Phase::Prepared || (got.ts == c.ts && got.read == c.t_r && got.write == c.v_w));
    if (!ok) {
      ++bad;
      d += std::string(" [") + c.name + ": got " + to_string(got.phase) + "]";
    }
  }
  return {bad == 0, std::to_string(cases.size()) + " cascade cases, " + std::to_string(bad) + " wrong" + d};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* title;
    double budget_s;
    Outcome (*fn)();
  };
  const Criterion criteria[] = {
      {1, "fig9a replay: exactly one lww violation at the reader's client commit", 1.0, criterion1},
      {2, "fig9b replay: lww violation under the conference check", 1.0, criterion2},
      {3, "TAPIR(journal) exhaustive search 2/2/1, ts<=9 rediscovers an lww violation", 600.0, criterion3},
      {4, "S2PL under SSER: exhaustive 2/2/1 and 20 x 10^4-step walks are clean", 900.0, criterion4},
      {5, "history checker agrees with the commit-order oracle", 600.0, criterion5},
      {6, "appendixA: SO(Txn67->Txn68) + WW(Txn68->Txn67) cycle", 1.0, criterion6},
      {7, "core properties: closedness oracle, full views, update_kv, abstract runs", 600.0, criterion7},
      {8, "OCC check: four abort branches, prepared outcome, conference branch", 1.0, criterion8},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o = c.fn();
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < c.budget_s;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::printf("%s criterion %d: %s (%.2fs%s) -- %s\n", pass ? "PASS" : "FAIL", c.id, c.title, secs,
                in_time ? "" : ", over time budget", o.detail.c_str());
    std::fflush(stdout);
  }
  return failed;
}
