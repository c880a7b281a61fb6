#pragma once

// Random and exhaustive generators of abstract-model inputs for property tests.

#include <random>
#include <set>
#include <string>
#include <vector>

#include "isoguard/abstract_model.hpp"
#include "isoguard/core.hpp"
#include "isoguard/history.hpp"

namespace isoguard::testing {

using Rng = std::mt19937_64;

inline std::size_t pick(Rng& rng, std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); }
inline bool coin(Rng& rng, double p = 0.5) { return std::bernoulli_distribution(p)(rng); }

/// Atomic view containing the versions of every writer in `include` (plus
/// T_init) and nothing else.
inline View view_of_writers(const KVStore& kvs, const std::set<TxId>& include) {
  View u;
  for (const auto& [k, vl] : kvs) {
    auto& idx = u[k];
    for (std::size_t i = 0; i < vl.size(); ++i)
      if (i == 0 || include.count(vl[i].writer)) idx.insert(i);
  }
  return u;
}

/// Random wellformed view that extends `floor`.
inline View random_atomic_view(Rng& rng, const KVStore& kvs, const View& floor) {
  std::set<TxId> include = vis_tx(kvs, floor);
  for (const auto& t : writers(kvs))
    if (coin(rng)) include.insert(t);
  return view_of_writers(kvs, include);
}

/// Random fingerprint over the store's keys. With `lww`, reads return the
/// value at the top of `u`; otherwise any version's value.
inline Fingerprint random_fingerprint(Rng& rng, const KVStore& kvs, const View& u, const TxId& t, bool lww) {
  Fingerprint f;
  std::size_t n = 0;
  for (const auto& [k, vl] : kvs) {
    KeyOps ops;
    if (coin(rng, 0.4)) {
      ops.read = lww ? vl[*u.at(k).rbegin()].value : vl[pick(rng, vl.size())].value;
    }
    if (coin(rng, 0.4)) ops.write = t.cl + "." + std::to_string(t.sn) + ":" + k + "#" + std::to_string(n++);
    if (!ops.empty()) f[k] = ops;
  }
  return f;
}

inline std::vector<Key> keys_n(std::size_t n) {
  std::vector<Key> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(std::string(1, static_cast<char>('A' + i)));
  return out;
}

/// Store produced by `n_txns` commits of random clients through update_kv with
/// random wellformed views.
inline KVStore random_store(Rng& rng, std::size_t n_keys, std::size_t n_txns, std::size_t n_clients) {
  KVStore kvs = initial_store(keys_n(n_keys));
  for (std::size_t i = 0; i < n_txns; ++i) {
    const ClientId cl = "c" + std::to_string(pick(rng, n_clients) + 1);
    const TxId t{cl, min_fresh_sn(kvs, cl) + pick(rng, 2)};
    const View u = random_atomic_view(rng, kvs, initial_view(kvs));
    kvs = update_kv(kvs, t, u, random_fingerprint(rng, kvs, u, t, coin(rng)));
  }
  return kvs;
}

/// Random dependency relation over the given transactions.
inline DepRelation random_relation(Rng& rng, const std::set<TxId>& txns, double density) {
  DepRelation r;
  for (const auto& a : txns)
    for (const auto& b : txns)
      if (!(a == b) && coin(rng, density)) r.insert(DepEdge{a, b, DepKind::WR});
  return r;
}

/// Random abstract event for `cfg`: mostly commits with a view that extends
/// the client's current one, sometimes view extensions or skips.
inline AbstractEvent random_abstract_event(Rng& rng, const Config& cfg, const std::vector<ClientId>& clients) {
  const ClientId cl = clients[pick(rng, clients.size())];
  const View current = view_of(cfg, cl);
  const std::size_t kind = pick(rng, 10);
  if (kind == 0) return SkipEvent{};
  const View u = random_atomic_view(rng, cfg.kvs, current);
  if (kind <= 2) return XViewEvent{cl, u};
  const TxId t{cl, min_fresh_sn(cfg.kvs, cl) + (coin(rng, 0.9) ? 0 : 1)};
  return CommitEvent{cl, t.sn, u, random_fingerprint(rng, cfg.kvs, u, t, coin(rng, 0.8))};
}

// --- histories ----------------------------------------------------------------

/// Random unique-write history: up to `max_txns` transactions over up to
/// `max_keys` keys in 1-3 sessions. Reads pick the initial value or the final
/// write of some other transaction.
inline history::History random_history(Rng& rng, std::size_t max_txns, std::size_t max_keys) {
  const std::size_t n = 1 + pick(rng, max_txns);
  const std::size_t n_keys = 1 + pick(rng, max_keys);
  const std::size_t n_sessions = 1 + pick(rng, std::min<std::size_t>(3, n));
  const auto keys = keys_n(n_keys);

  struct Plan {
    std::vector<std::pair<bool, Key>> ops;
  };
  std::vector<Plan> plans(n);
  for (auto& p : plans) {
    const std::size_t n_ops = 1 + pick(rng, 3);
    for (std::size_t i = 0; i < n_ops; ++i) p.ops.emplace_back(coin(rng), keys[pick(rng, n_keys)]);
  }
  auto write_val = [](std::size_t txn, const Key& k) { return "t" + std::to_string(txn) + k; };
  auto final_writes = [&](std::size_t txn, const Key& k) {
    for (const auto& [w, key] : plans[txn].ops)
      if (w && key == k) return true;
    return false;
  };

  history::History h;
  for (std::size_t s = 0; s < n_sessions; ++s) h.sessions.push_back(history::Session{"s" + std::to_string(s), {}});
  for (std::size_t i = 0; i < n; ++i) {
    auto& session = h.sessions[i < n_sessions ? i : pick(rng, n_sessions)];
    history::Txn txn{session.txns.size(), "T" + std::to_string(i), {}};
    std::set<Key> written;
    for (const auto& [w, k] : plans[i].ops) {
      if (w) {
        written.insert(k);
        txn.ops.push_back(history::Op{true, k, write_val(i, k), std::nullopt});
        continue;
      }
      if (written.count(k)) continue;  // internal reads carry no information
      std::vector<Value> choices{initial_value()};
      for (std::size_t j = 0; j < n; ++j)
        if (j != i && final_writes(j, k)) choices.push_back(write_val(j, k));
      txn.ops.push_back(history::Op{false, k, choices[pick(rng, choices.size())], std::nullopt});
    }
    // A write repeated on one key keeps only its last value visible; give the
    // earlier ones distinct values so the history stays unique-write.
    std::map<Key, std::size_t> count;
    for (auto& op : txn.ops)
      if (op.write) ++count[op.key];
    for (auto& op : txn.ops)
      if (op.write && --count[op.key] > 0) op.value += "_" + std::to_string(count[op.key]);
    session.txns.push_back(std::move(txn));
  }
  return h;
}

}  // namespace isoguard::testing
