#pragma once

// The parametrized abstract LTS: configurations (K, U) and the events commit,
// xview and skip. Guards are evaluated one by one into a GuardReport so that a
// failed step says exactly which obligation broke.

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "isoguard/core.hpp"
#include "isoguard/isolation.hpp"
#include "isoguard/serialize.hpp"

namespace isoguard {

struct CommitEvent {
  ClientId cl;
  std::uint64_t sn = 0;
  View u;
  Fingerprint f;

  bool operator==(const CommitEvent&) const = default;
};

struct XViewEvent {
  ClientId cl;
  View u;

  bool operator==(const XViewEvent&) const = default;
};

struct SkipEvent {
  bool operator==(const SkipEvent&) const = default;
};

using AbstractEvent = std::variant<CommitEvent, XViewEvent, SkipEvent>;

enum class Guard {
  ViewExtension,
  WfU,
  WfUPrime,
  Lww,
  Freshness,
  CanCommit,
  VShift,
  UpdateCorrespondence,
};

inline constexpr std::array<Guard, 8> kAllGuards = {
    Guard::ViewExtension, Guard::WfU,       Guard::WfUPrime, Guard::Lww,
    Guard::Freshness,     Guard::CanCommit, Guard::VShift,   Guard::UpdateCorrespondence,
};

inline constexpr std::string_view guard_name(Guard g) {
  switch (g) {
    case Guard::ViewExtension: return "view_extension";
    case Guard::WfU: return "wf_u";
    case Guard::WfUPrime: return "wf_u_prime";
    case Guard::Lww: return "lww";
    case Guard::Freshness: return "freshness";
    case Guard::CanCommit: return "can_commit";
    case Guard::VShift: return "v_shift";
    case Guard::UpdateCorrespondence: return "update_correspondence";
  }
  return "?";
}

struct GuardResult {
  bool passed = true;
  std::string detail;
};

struct GuardReport {
  std::array<GuardResult, kAllGuards.size()> results{};

  GuardResult& operator[](Guard g) { return results[static_cast<std::size_t>(g)]; }
  const GuardResult& operator[](Guard g) const { return results[static_cast<std::size_t>(g)]; }

  void set(Guard g, bool passed, std::string detail = {}) { (*this)[g] = GuardResult{passed, std::move(detail)}; }

  bool passed() const {
    for (const auto& r : results)
      if (!r.passed) return false;
    return true;
  }

  /// Failed guards in evaluation order.
  std::vector<Guard> failed() const {
    std::vector<Guard> out;
    for (auto g : kAllGuards)
      if (!(*this)[g].passed) out.push_back(g);
    return out;
  }
};

inline json to_json(const GuardReport& r) {
  json out = json::object();
  for (auto g : kAllGuards) {
    json e{{"passed", r[g].passed}};
    if (!r[g].detail.empty()) e["detail"] = r[g].detail;
    out[std::string(guard_name(g))] = std::move(e);
  }
  return out;
}

inline json to_json(const AbstractEvent& ev) {
  return std::visit(
      [](const auto& e) -> json {
        using E = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<E, CommitEvent>) {
          return json{{"event", "commit"}, {"cl", e.cl}, {"sn", e.sn}, {"u", to_json(e.u)}, {"f", to_json(e.f)}};
        } else if constexpr (std::is_same_v<E, XViewEvent>) {
          return json{{"event", "xview"}, {"cl", e.cl}, {"u", to_json(e.u)}};
        } else {
          return json{{"event", "skip"}};
        }
      },
      ev);
}

inline AbstractEvent abstract_event_from_json(const json& j) {
  const auto kind = j.at("event").get<std::string>();
  if (kind == "commit") {
    return CommitEvent{j.at("cl").get<std::string>(), j.at("sn").get<std::uint64_t>(), view_from_json(j.at("u")),
                       fingerprint_from_json(j.at("f"))};
  }
  if (kind == "xview") return XViewEvent{j.at("cl").get<std::string>(), view_from_json(j.at("u"))};
  if (kind == "skip") return SkipEvent{};
  throw format_error("unknown abstract event: " + kind);
}

/// One initial version per key (value "v0"); every client sees λk.{0}.
inline Config initial_config(const std::vector<Key>& keys, const std::vector<ClientId>& clients) {
  Config cfg{initial_store(keys), {}};
  for (const auto& cl : clients) cfg.views[cl] = initial_view(cfg.kvs);
  return cfg;
}

/// U(cl); clients without an explicit entry hold the initial view.
inline View view_of(const Config& cfg, const ClientId& cl) {
  auto it = cfg.views.find(cl);
  return it == cfg.views.end() ? initial_view(cfg.kvs) : it->second;
}

/// u extended with the indices of every version appended between K and K'.
inline View extend_with_new_versions(const View& u, const KVStore& kvs, const KVStore& kvs_post) {
  View out = u;
  for (const auto& [k, vl] : kvs_post) {
    auto pre = kvs.find(k);
    std::size_t from = pre == kvs.end() ? 0 : pre->second.size();
    for (std::size_t i = from; i < vl.size(); ++i) out[k].insert(i);
  }
  return out;
}

/// Evaluates every guard of `ev` on `cfg` and, if all pass, applies the update.
/// For commits, `u_prime` is the client's post-commit view; when absent it
/// defaults to u extended with the committed transaction's new versions.
inline std::pair<Config, GuardReport> abs_step(const IsolationLevel& level, const Config& cfg,
                                               const AbstractEvent& ev,
                                               const std::optional<View>& u_prime = std::nullopt) {
  GuardReport rep;
  if (const auto* c = std::get_if<CommitEvent>(&ev)) {
    const KVStore& K = cfg.kvs;
    const View current = view_of(cfg, c->cl);
    const TxId t{c->cl, c->sn};
    const KVStore K_post = apply_fingerprint(K, t, c->u, c->f);
    const View u_post = u_prime ? *u_prime : extend_with_new_versions(c->u, K, K_post);

    rep.set(Guard::ViewExtension, view_leq(current, c->u), view_leq(current, c->u) ? "" : "u does not extend U(cl)");
    auto wf_u = detail::wf_failure(K, c->u);
    rep.set(Guard::WfU, !wf_u, wf_u.value_or(""));
    auto wf_up = detail::wf_failure(K_post, u_post);
    rep.set(Guard::WfUPrime, !wf_up, wf_up.value_or(""));
    auto lww_fail = detail::lww_failure(K, c->u, c->f);
    rep.set(Guard::Lww, !lww_fail, lww_fail.value_or(""));
    bool fresh = in_next_txids(K, t);
    rep.set(Guard::Freshness, fresh, fresh ? "" : to_string(t) + " already used in the store");
    bool cc = can_commit(K, c->u, c->f, level.dep_relation(K));
    rep.set(Guard::CanCommit, cc, cc ? "" : "visible transactions not closed under R_" + level.name);
    bool vs = level.v_shift(K, c->u, K_post, u_post);
    rep.set(Guard::VShift, vs, vs ? "" : "vShift_" + level.name + " rejects the post-commit view");

    if (!rep.passed()) return {cfg, rep};
    Config next = cfg;
    next.kvs = K_post;
    next.views[c->cl] = u_post;
    return {std::move(next), rep};
  }
  if (const auto* x = std::get_if<XViewEvent>(&ev)) {
    bool ext = view_leq(view_of(cfg, x->cl), x->u);
    rep.set(Guard::ViewExtension, ext, ext ? "" : "u does not extend U(cl)");
    auto wf_u = detail::wf_failure(cfg.kvs, x->u);
    rep.set(Guard::WfU, !wf_u, wf_u.value_or(""));
    if (!rep.passed()) return {cfg, rep};
    Config next = cfg;
    next.views[x->cl] = x->u;
    return {std::move(next), rep};
  }
  return {cfg, rep};
}

struct AbstractRun {
  Config final;
  std::vector<GuardReport> reports;
};

/// Left fold of abs_step; stops after the first failing event unless
/// `keep_going` (failed events leave the configuration unchanged).
inline AbstractRun abs_run(const IsolationLevel& level, const Config& cfg0, const std::vector<AbstractEvent>& events,
                           bool keep_going = false) {
  AbstractRun run{cfg0, {}};
  for (const auto& ev : events) {
    auto [next, rep] = abs_step(level, run.final, ev);
    run.final = std::move(next);
    bool ok = rep.passed();
    run.reports.push_back(std::move(rep));
    if (!ok && !keep_going) break;
  }
  return run;
}

inline json abstract_trace_to_json(const std::vector<AbstractEvent>& events, const std::vector<GuardReport>& reports) {
  json out = json::object();
  json evs = json::array();
  for (const auto& e : events) evs.push_back(to_json(e));
  json reps = json::array();
  for (const auto& r : reports) reps.push_back(to_json(r));
  out["events"] = std::move(evs);
  out["reports"] = std::move(reps);
  return out;
}

}  // namespace isoguard
