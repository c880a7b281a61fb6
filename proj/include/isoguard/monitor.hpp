#pragma once

// Runtime refinement checking. Every concrete step s -e-> s' is mapped through
// (r, π): commit steps must pass the abstract guards on r(s) and land on r(s');
// all other steps must leave r unchanged.

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "isoguard/abstract_model.hpp"
#include "isoguard/core.hpp"
#include "isoguard/isolation.hpp"
#include "isoguard/serialize.hpp"

namespace isoguard {

enum class Diagnosis { RaCandidate, LevelSpecific, MappingSuspect, Invariant };

inline const char* to_string(Diagnosis d) {
  switch (d) {
    case Diagnosis::RaCandidate: return "RA-candidate";
    case Diagnosis::LevelSpecific: return "level-specific";
    case Diagnosis::MappingSuspect: return "mapping-suspect";
    case Diagnosis::Invariant: return "invariant";
  }
  return "?";
}

/// Guards any isolation level shares point at atomic visibility itself; the
/// level's own guards point at the level; the rest point at the mapping.
inline Diagnosis diagnose(std::string_view guard) {
  if (guard == "view_extension" || guard == "wf_u" || guard == "wf_u_prime" || guard == "lww") {
    return Diagnosis::RaCandidate;
  }
  if (guard == "can_commit" || guard == "v_shift") return Diagnosis::LevelSpecific;
  if (guard == "invariant") return Diagnosis::Invariant;
  return Diagnosis::MappingSuspect;
}

struct Violation {
  long step = -1;  // index of the concrete event; -1 for the initial state
  json event;      // null for the initial state
  std::string guard;
  std::vector<std::string> failed;  // every failed check at this step, in order
  Diagnosis diagnosis = Diagnosis::MappingSuspect;
  std::string detail;
  json abstract_state;
};

inline json to_json(const Violation& v) {
  return json{{"step", v.step},
              {"event", v.event},
              {"guard", v.guard},
              {"failed", v.failed},
              {"diagnosis", to_string(v.diagnosis)},
              {"detail", v.detail},
              {"abstract_state", v.abstract_state}};
}

inline std::string to_text(const Violation& v) {
  std::string where = v.step < 0 ? "initial state" : "step " + std::to_string(v.step) + " " +
                                                           v.event.at("name").get<std::string>() + " " +
                                                           v.event.at("params").dump();
  std::string out = where + ": guard " + v.guard + " failed (" + to_string(v.diagnosis) + ")";
  if (!v.detail.empty()) out += ": " + v.detail;
  return out;
}

template <class P>
Config r_config(const P& proto, const typename P::StateType& s) {
  return Config{proto.r_kvs(s), proto.r_views(s)};
}

inline Violation make_violation(long step, json event, std::vector<std::string> failed, std::string detail,
                                const Config& abs) {
  Violation v;
  v.step = step;
  v.event = std::move(event);
  v.guard = failed.front();
  v.failed = std::move(failed);
  v.diagnosis = diagnose(v.guard);
  v.detail = std::move(detail);
  v.abstract_state = to_json(abs);
  return v;
}

using StepVerdict = std::variant<GuardReport, Violation>;

/// Checks one concrete transition. `step` is only used for labelling.
template <class P>
StepVerdict monitor_step(const P& proto, const IsolationLevel& level, const typename P::StateType& s,
                         const typename P::EventType& e, const typename P::StateType& s_post, long step = 0) {
  const Config pre = r_config(proto, s);
  const Config post = r_config(proto, s_post);
  const json ev = to_json(e);

  if (auto inv = proto.invariant_failures(s_post); !inv.empty()) {
    std::string detail;
    for (const auto& m : inv) detail += (detail.empty() ? "" : "; ") + m;
    return make_violation(step, ev, {"invariant"}, detail, post);
  }
  if (auto bad = store_invariant_failure(pre.kvs)) {
    return make_violation(step, ev, {"malformed_store"}, *bad, pre);
  }

  auto commit = proto.commit_event(s, e);
  if (!commit) {
    if (pre == post) return GuardReport{};
    return make_violation(step, ev, {"skip_identity"}, "a non-commit step changed the abstract state", pre);
  }

  auto [abs_post, rep] = abs_step(level, pre, *commit);
  // Update correspondence is judged on the store: the mapped views are constant
  // while the abstract commit moves U(cl) to u'.
  // A disabled abstract commit has no post-state to correspond to.
  if (rep.passed()) {
    const TxId t{commit->cl, commit->sn};
    const KVStore expected = apply_fingerprint(pre.kvs, t, commit->u, commit->f);
    const bool corresponds = expected == post.kvs;
    rep.set(Guard::UpdateCorrespondence, corresponds,
            corresponds ? "" : "r_kvs after the step " + canonical(post.kvs) + " differs from " + canonical(expected));
  } else {
    rep.set(Guard::UpdateCorrespondence, true, "not evaluated: the abstract commit is disabled");
  }
  if (rep.passed()) return rep;

  std::vector<std::string> failed;
  for (auto g : rep.failed()) failed.emplace_back(guard_name(g));
  return make_violation(step, ev, failed, rep[rep.failed().front()].detail, pre);
}

/// r(s0) must be the abstract initial configuration.
template <class P>
std::optional<Violation> check_initial(const P& proto, const typename P::StateType& s0) {
  const Config got = r_config(proto, s0);
  const Config want = initial_config(proto.scope().keys, proto.scope().clients);
  if (got == want) return std::nullopt;
  return make_violation(-1, nullptr, {"initial_state"}, "r(s0) is not the abstract initial configuration", got);
}

template <class P>
struct MonitorRun {
  std::vector<Violation> violations;
  /// Index of the first event whose guard does not hold; the run stops there.
  std::optional<std::size_t> first_disabled;
  typename P::StateType final_state;
  std::vector<GuardReport> commit_reports;
};

/// Executes `trace` from the initial state, checking every step.
template <class P>
MonitorRun<P> monitor_run(const P& proto, const IsolationLevel& level, const std::vector<typename P::EventType>& trace,
                          bool keep_going = true) {
  MonitorRun<P> run{{}, std::nullopt, proto.initial_state(), {}};
  if (auto v = check_initial(proto, run.final_state)) {
    run.violations.push_back(*v);
    if (!keep_going) return run;
  }
  for (std::size_t i = 0; i < trace.size(); ++i) {
    auto next = proto.apply(run.final_state, trace[i]);
    if (!next) {
      run.first_disabled = i;
      return run;
    }
    const bool is_commit = proto.commit_event(run.final_state, trace[i]).has_value();
    auto verdict = monitor_step(proto, level, run.final_state, trace[i], *next, static_cast<long>(i));
    run.final_state = std::move(*next);
    if (auto* v = std::get_if<Violation>(&verdict)) {
      run.violations.push_back(std::move(*v));
      if (!keep_going) return run;
    } else if (is_commit) {
      run.commit_reports.push_back(std::get<GuardReport>(verdict));
    }
  }
  return run;
}

}  // namespace isoguard
