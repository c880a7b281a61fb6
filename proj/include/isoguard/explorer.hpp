#pragma once

// Bounded exploration of a protocol LTS under the refinement monitor:
// depth-first search with a visited set, seeded random walks, trace replay and
// projection of runs onto client histories.

#include <chrono>
#include <cstdlib>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <unordered_map>
#include <variant>
#include <vector>

#include "isoguard/history.hpp"
#include "isoguard/isolation.hpp"
#include "isoguard/monitor.hpp"
#include "isoguard/protocol.hpp"
#include "isoguard/serialize.hpp"

namespace isoguard {

template <class P>
struct Finding {
  Violation violation;
  std::vector<typename P::EventType> trace;  // ends with the violating event
};

struct ExploreStats {
  std::uint64_t states = 0;       // distinct states expanded
  std::uint64_t transitions = 0;  // monitored steps
  std::uint64_t terminals = 0;    // states without enabled events
  std::size_t max_depth = 0;
  bool bound_hit = false;       // some path was cut at the depth bound
  bool dedup_disabled = false;  // the visited set hit its memory cap
  bool stopped_early = false;   // stopped at the first violation
  double seconds = 0;
};

inline json to_json(const ExploreStats& s) {
  return json{{"states", s.states},           {"transitions", s.transitions}, {"terminals", s.terminals},
              {"max_depth", s.max_depth},     {"bound_hit", s.bound_hit},     {"dedup_disabled", s.dedup_disabled},
              {"stopped_early", s.stopped_early}};
}

template <class P>
struct ExploreResult {
  ExploreStats stats;
  std::vector<Finding<P>> findings;
};

template <class P>
struct ExploreOptions {
  bool keep_going = false;
  /// Approximate byte budget of the visited set.
  std::size_t visited_bytes_cap = std::size_t{2} << 30;
  /// Called with the path to every terminal state reached.
  std::function<void(const std::vector<typename P::EventType>&)> on_terminal;
};

template <class P>
std::string state_key(const typename P::StateType& s) {
  return to_json(s).dump();
}

namespace detail {

template <class P>
class Dfs {
 public:
  using S = typename P::StateType;
  using E = typename P::EventType;

  Dfs(const P& proto, const IsolationLevel& level, const ExploreOptions<P>& opt)
      : proto_(proto), level_(level), opt_(opt) {}

  ExploreResult<P> run() {
    const auto t0 = std::chrono::steady_clock::now();
    S s0 = proto_.initial_state();
    if (auto v = check_initial(proto_, s0)) {
      result_.findings.push_back(Finding<P>{*v, {}});
      if (!opt_.keep_going) {
        result_.stats.stopped_early = true;
        return finish(t0);
      }
    }
    visit(s0);
    return finish(t0);
  }

 private:
  ExploreResult<P> finish(std::chrono::steady_clock::time_point t0) {
    result_.stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return std::move(result_);
  }

  /// True when `s` needs expanding at the current depth.
  bool claim(const S& s) {
    const std::size_t depth = path_.size();
    if (result_.stats.dedup_disabled) return true;
    std::string key = state_key<P>(s);
    auto it = visited_.find(key);
    if (it != visited_.end()) {
      if (it->second <= depth) return false;
      it->second = depth;  // reached again with more remaining budget
      return true;
    }
    bytes_ += key.size() + 64;
    if (bytes_ > opt_.visited_bytes_cap) {
      result_.stats.dedup_disabled = true;
      visited_.clear();
      return true;
    }
    visited_.emplace(std::move(key), depth);
    return true;
  }

  // Returns false to stop the whole search.
  bool visit(const S& s) {
    if (!claim(s)) return true;
    ++result_.stats.states;
    result_.stats.max_depth = std::max(result_.stats.max_depth, path_.size());
    const auto events = proto_.enabled_events(s);
    if (events.empty()) {
      ++result_.stats.terminals;
      if (opt_.on_terminal) opt_.on_terminal(path_);
      return true;
    }
    if (path_.size() >= proto_.scope().depth_bound) {
      result_.stats.bound_hit = true;
      return true;
    }
    for (const auto& e : events) {
      S next = proto_.update(s, e);
      ++result_.stats.transitions;
      path_.push_back(e);
      auto verdict = monitor_step(proto_, level_, s, e, next, static_cast<long>(path_.size() - 1));
      if (auto* v = std::get_if<Violation>(&verdict)) {
        result_.findings.push_back(Finding<P>{std::move(*v), path_});
        if (!opt_.keep_going) {
          result_.stats.stopped_early = true;
          return false;
        }
        // Continue below the violating step: later steps are still monitored.
      }
      if (!visit(next)) return false;
      path_.pop_back();
    }
    return true;
  }

  const P& proto_;
  const IsolationLevel& level_;
  const ExploreOptions<P>& opt_;
  ExploreResult<P> result_;
  std::vector<E> path_;
  std::unordered_map<std::string, std::size_t> visited_;
  std::size_t bytes_ = 0;
};

}  // namespace detail

/// Exhaustive depth-first exploration within the scope's depth bound. Every
/// transition is monitored, including those into already visited states.
template <class P>
ExploreResult<P> explore_dfs(const P& proto, const IsolationLevel& level, const ExploreOptions<P>& opt = {}) {
  return detail::Dfs<P>(proto, level, opt).run();
}

// --- random walks -------------------------------------------------------------

template <class P>
struct WalkResult {
  std::uint64_t seed = 0;
  std::uint64_t steps = 0;
  std::uint64_t episodes = 0;
  std::vector<Finding<P>> findings;
  /// Events of the last (possibly unfinished) episode.
  std::vector<typename P::EventType> last_episode;
};

/// One seeded walk of `steps` transitions choosing uniformly among enabled
/// events. A quiescent state, a violation or the depth bound ends the episode
/// and the walk restarts from the initial state.
template <class P>
WalkResult<P> random_walk(const P& proto, const IsolationLevel& level, std::uint64_t seed, std::uint64_t steps) {
  using S = typename P::StateType;
  WalkResult<P> out;
  out.seed = seed;
  std::mt19937_64 rng(seed);
  const S s0 = proto.initial_state();
  if (auto v = check_initial(proto, s0)) {
    out.findings.push_back(Finding<P>{*v, {}});
    return out;
  }
  S s = s0;
  std::vector<typename P::EventType> episode;
  out.episodes = 1;
  auto restart = [&] {
    s = s0;
    out.last_episode = std::move(episode);
    episode.clear();
    ++out.episodes;
  };
  while (out.steps < steps) {
    const auto events = proto.enabled_events(s);
    if (events.empty() || episode.size() >= proto.scope().depth_bound) {
      restart();
      continue;
    }
    std::uniform_int_distribution<std::size_t> pick(0, events.size() - 1);
    const auto& e = events[pick(rng)];
    S next = proto.update(s, e);
    episode.push_back(e);
    ++out.steps;
    auto verdict = monitor_step(proto, level, s, e, next, static_cast<long>(episode.size() - 1));
    if (auto* v = std::get_if<Violation>(&verdict)) {
      out.findings.push_back(Finding<P>{std::move(*v), episode});
      restart();
      continue;
    }
    s = std::move(next);
  }
  out.last_episode = std::move(episode);
  return out;
}

/// Worker count: ISOGUARD_THREADS if set and positive, else the hardware
/// concurrency.
inline unsigned worker_count() {
  if (const char* env = std::getenv("ISOGUARD_THREADS")) {
    char* end = nullptr;
    long n = std::strtol(env, &end, 10);
    if (end != env && n > 0) return static_cast<unsigned>(n);
  }
  unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : hc;
}

/// Runs one walk per seed; results come back in seed order regardless of the
/// number of workers.
template <class P>
std::vector<WalkResult<P>> random_walks(const P& proto, const IsolationLevel& level,
                                        const std::vector<std::uint64_t>& seeds, std::uint64_t steps,
                                        unsigned workers = worker_count()) {
  std::vector<WalkResult<P>> out(seeds.size());
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(seeds.size())));
  if (workers <= 1) {
    for (std::size_t i = 0; i < seeds.size(); ++i) out[i] = random_walk(proto, level, seeds[i], steps);
    return out;
  }
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < seeds.size(); i += workers) out[i] = random_walk(proto, level, seeds[i], steps);
    });
  }
  for (auto& t : pool) t.join();
  return out;
}

// --- replay and histories -----------------------------------------------------

template <class P>
MonitorRun<P> replay(const P& proto, const IsolationLevel& level, const std::vector<typename P::EventType>& trace) {
  return monitor_run(proto, level, trace, /*keep_going=*/true);
}

/// Committed transactions of a run, in client-commit order, as a history.
/// Transactions that never reach the client commit are dropped.
template <class P>
history::History emit_history(const P& proto, const std::vector<typename P::EventType>& trace) {
  std::vector<std::pair<TxId, Fingerprint>> commits;
  auto s = proto.initial_state();
  for (const auto& e : trace) {
    if (!proto.enabled(s, e)) break;
    if (auto c = proto.commit_event(s, e)) commits.emplace_back(TxId{c->cl, c->sn}, c->f);
    s = proto.update(s, e);
  }
  return history::from_commits(commits);
}

// --- trace files --------------------------------------------------------------

struct TraceHeader {
  std::string protocol;
  std::optional<std::string> variant;
  std::string isolation;
  Scope scope;
};

template <class E>
json trace_to_json(const TraceHeader& h, const std::vector<E>& events, const json& verdict) {
  json evs = json::array();
  for (const auto& e : events) evs.push_back(to_json(e));
  return json{{"protocol", h.protocol},
              {"variant", h.variant ? json(*h.variant) : json(nullptr)},
              {"isolation", h.isolation},
              {"scope", to_json(h.scope)},
              {"events", evs},
              {"verdict", verdict}};
}

inline TraceHeader trace_header_from_json(const json& j) {
  for (const char* field : {"protocol", "isolation", "scope", "events"}) {
    if (!j.contains(field)) throw format_error(std::string("trace: missing field \"") + field + "\"");
  }
  TraceHeader h;
  h.protocol = j.at("protocol").get<std::string>();
  if (j.contains("variant") && !j.at("variant").is_null()) h.variant = j.at("variant").get<std::string>();
  h.isolation = j.at("isolation").get<std::string>();
  h.scope = scope_from_json(j.at("scope"));
  return h;
}

template <class P>
std::vector<typename P::EventType> trace_events_from_json(const json& j) {
  std::vector<typename P::EventType> out;
  for (const auto& e : j.at("events")) out.push_back(P::parse_event(e));
  return out;
}

inline json verdict_json(const std::vector<Violation>& violations, const std::optional<std::size_t>& first_disabled = {}) {
  json vs = json::array();
  for (const auto& v : violations) vs.push_back(to_json(v));
  std::string status = first_disabled ? "invalid" : violations.empty() ? "clean" : "violation";
  json out{{"status", status}, {"violations", vs}};
  if (first_disabled) out["first_disabled"] = *first_disabled;
  return out;
}

}  // namespace isoguard
