// isoguard: explore, replay and simulate transaction protocols under the
// refinement monitor, and check client histories for read atomicity.
//
// Exit codes: 0 clean, 1 violation found, 2 usage or input error.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "isoguard/isoguard.hpp"

namespace {

using namespace isoguard;

constexpr int kClean = 0;
constexpr int kViolation = 1;
constexpr int kError = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string protocol = "s2pl";
  std::optional<std::string> variant;
  std::string isolation = "sser";
  std::size_t clients = 2;
  std::size_t keys = 2;
  std::size_t txns = 1;
  std::size_t values = 1;
  std::uint64_t ts_bound = 9;
  std::size_t depth = 64;
  std::vector<std::string> footprints;
  std::uint64_t seed = 1;
  std::uint64_t steps = 10000;
  std::size_t walks = 1;
  bool keep_going = false;
  bool json_out = false;
  std::string out;
  std::string emit_history;
  std::string emit_dot;
  std::string target;  // replay schedule/file or history file
};

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw UsageError("cannot write " + path);
  f << text;
}

json read_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw UsageError("cannot open " + path);
  try {
    return json::parse(f);
  } catch (const json::parse_error& e) {
    throw UsageError(path + ": invalid JSON: " + e.what());
  }
}

/// "c1=wA,wB|rA" restricts c1's candidate footprints.
void apply_footprints(Scope& scope, const std::vector<std::string>& specs) {
  for (const auto& spec : specs) {
    auto eq = spec.find('=');
    if (eq == std::string::npos) throw UsageError("--footprint expects CLIENT=SPEC[|SPEC...], got " + spec);
    const std::string cl = spec.substr(0, eq);
    if (!scope.footprints.count(cl)) throw UsageError("--footprint names unknown client " + cl);
    std::vector<Footprint> list;
    std::stringstream rest(spec.substr(eq + 1));
    std::string item;
    while (std::getline(rest, item, '|')) list.push_back(parse_footprint(item));
    scope.footprints[cl] = std::move(list);
  }
}

Scope scope_from(const Options& o) {
  Scope s = make_scope(o.clients, o.keys, o.txns);
  s.value_domain = o.values;
  s.ts_bound = o.ts_bound;
  s.depth_bound = o.depth;
  apply_footprints(s, o.footprints);
  s.validate();
  return s;
}

void check_protocol_flags(const Options& o) {
  if (o.protocol != "s2pl" && o.protocol != "tapir") throw UsageError("--protocol must be s2pl or tapir");
  if (o.protocol == "s2pl" && o.variant) throw UsageError("--variant is only valid with --protocol tapir");
  if (o.variant && *o.variant != "journal" && *o.variant != "conference") {
    throw UsageError("--variant must be journal or conference");
  }
}

TraceHeader header_for(const Options& o, const Scope& scope) {
  TraceHeader h{o.protocol, std::nullopt, o.isolation, scope};
  if (o.protocol == "tapir") h.variant = o.variant.value_or("journal");
  return h;
}

void print_history_outputs(const Options& o, const history::History& h) {
  if (!o.emit_history.empty()) write_file(o.emit_history, history::to_json(h).dump(2) + "\n");
  if (!o.emit_dot.empty()) write_file(o.emit_dot, history::to_dot(history::build_graph(h)));
}

// --- explore ------------------------------------------------------------------

template <class P>
int explore(const Options& o, const P& proto, const TraceHeader& header) {
  const IsolationLevel& level = level_by_name(o.isolation);
  ExploreOptions<P> opt;
  opt.keep_going = o.keep_going;
  auto result = explore_dfs(proto, level, opt);

  std::vector<Violation> violations;
  for (const auto& f : result.findings) violations.push_back(f.violation);
  const bool found = !result.findings.empty();

  if (found && !o.out.empty()) {
    const auto& f = result.findings.front();
    write_file(o.out, trace_to_json(header, f.trace, verdict_json({f.violation})).dump(2) + "\n");
  }
  if (found) print_history_outputs(o, emit_history(proto, result.findings.front().trace));

  if (o.json_out) {
    json out{{"command", "explore"}, {"stats", to_json(result.stats)}, {"verdict", verdict_json(violations)}};
    if (found) {
      json trace = json::array();
      for (const auto& e : result.findings.front().trace) trace.push_back(to_json(e));
      out["trace"] = trace;
    }
    std::cout << out.dump(2) << "\n";
  } else {
    std::cout << "explored " << result.stats.states << " states, " << result.stats.transitions
              << " transitions, max depth " << result.stats.max_depth << "\n";
    if (found) {
      for (const auto& v : violations) std::cout << "VIOLATION " << to_text(v) << "\n";
      std::cout << "trace (" << result.findings.front().trace.size() << " events):\n";
      for (const auto& e : result.findings.front().trace) {
        const json j = to_json(e);
        std::cout << "  " << j.at("name").get<std::string>() << " " << j.at("params").dump() << "\n";
      }
    } else if (result.stats.bound_hit || result.stats.dedup_disabled) {
      std::cout << "no violation found, but the search was bounded ("
                << (result.stats.bound_hit ? "depth bound reached" : "visited set capped") << ")\n";
    } else {
      std::cout << "no violation: state space exhausted\n";
    }
  }
  return found ? kViolation : kClean;
}

// --- simulate -----------------------------------------------------------------

template <class P>
int simulate(const Options& o, const P& proto, const TraceHeader& header) {
  const IsolationLevel& level = level_by_name(o.isolation);
  if (o.walks < 1) throw UsageError("--walks must be >= 1");
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < o.walks; ++i) seeds.push_back(o.seed + i);
  auto walks = random_walks(proto, level, seeds, o.steps);

  std::vector<Violation> violations;
  const Finding<P>* first = nullptr;
  for (const auto& w : walks) {
    for (const auto& f : w.findings) {
      violations.push_back(f.violation);
      if (!first) first = &f;
    }
  }
  const auto& episode = first ? first->trace : walks.front().last_episode;
  print_history_outputs(o, emit_history(proto, episode));
  if (!o.out.empty()) {
    write_file(o.out, trace_to_json(header, episode, verdict_json(first ? std::vector<Violation>{first->violation}
                                                                        : std::vector<Violation>{}))
                              .dump(2) +
                          "\n");
  }

  if (o.json_out) {
    json ws = json::array();
    for (const auto& w : walks) {
      ws.push_back(json{{"seed", w.seed}, {"steps", w.steps}, {"episodes", w.episodes}, {"violations", w.findings.size()}});
    }
    std::cout << json{{"command", "simulate"}, {"walks", ws}, {"verdict", verdict_json(violations)}}.dump(2) << "\n";
  } else {
    for (const auto& w : walks) {
      std::cout << "walk seed " << w.seed << ": " << w.steps << " steps, " << w.episodes << " episodes, "
                << w.findings.size() << " violations\n";
    }
    for (const auto& v : violations) std::cout << "VIOLATION " << to_text(v) << "\n";
    if (violations.empty()) std::cout << "no violation\n";
  }
  return violations.empty() ? kClean : kViolation;
}

// --- replay -------------------------------------------------------------------

template <class P>
int replay_events(const Options& o, const P& proto, const IsolationLevel& level,
                  const std::vector<typename P::EventType>& events, const std::string& label) {
  auto run = replay(proto, level, events);
  print_history_outputs(o, emit_history(proto, events));
  const json verdict = verdict_json(run.violations, run.first_disabled);
  if (o.json_out) {
    std::cout << json{{"command", "replay"}, {"schedule", label}, {"events", events.size()}, {"verdict", verdict}}.dump(2)
              << "\n";
  } else {
    std::cout << "replayed " << label << ": "
              << (run.first_disabled ? *run.first_disabled : events.size()) << "/" << events.size() << " events\n";
    if (run.first_disabled) {
      const json j = to_json(events[*run.first_disabled]);
      std::cout << "INVALID event " << *run.first_disabled << " is not enabled: " << j.at("name").get<std::string>()
                << " " << j.at("params").dump() << "\n";
    }
    for (const auto& v : run.violations) std::cout << "VIOLATION " << to_text(v) << "\n";
    if (run.violations.empty() && !run.first_disabled) std::cout << "no violation\n";
  }
  if (run.first_disabled) return kError;
  return run.violations.empty() ? kClean : kViolation;
}

int cmd_replay(const Options& o, bool isolation_given) {
  if (auto sched = schedules::by_name(o.target)) {
    if (o.variant && tapir::variant_from_string(*o.variant) != sched->variant) {
      throw UsageError("schedule " + o.target + " is defined for the " + tapir::to_string(sched->variant) + " variant");
    }
    tapir::Protocol proto(sched->scope, sched->variant);
    return replay_events(o, proto, level_by_name(o.isolation), sched->events, o.target);
  }
  const json j = read_json_file(o.target);
  TraceHeader h;
  try {
    h = trace_header_from_json(j);
  } catch (const json::exception& e) {
    throw UsageError(o.target + ": " + e.what());
  }
  const std::string iso = isolation_given ? o.isolation : h.isolation;
  if (h.protocol == "s2pl") {
    s2pl::Protocol proto(h.scope);
    return replay_events(o, proto, level_by_name(iso), trace_events_from_json<s2pl::Protocol>(j), o.target);
  }
  if (h.protocol == "tapir") {
    tapir::Protocol proto(h.scope, tapir::variant_from_string(h.variant.value_or("journal")));
    return replay_events(o, proto, level_by_name(iso), trace_events_from_json<tapir::Protocol>(j), o.target);
  }
  throw UsageError(o.target + ": unknown protocol " + h.protocol);
}

// --- check-history ------------------------------------------------------------

int cmd_check_history(const Options& o) {
  history::History h = o.target == "appendixA" ? history::appendix_a() : history::load_history(o.target);
  const auto verdict = history::check_ra(h);
  if (!o.emit_dot.empty()) write_file(o.emit_dot, history::to_dot(verdict.graph));
  if (o.json_out) {
    std::cout << json{{"command", "check-history"}, {"transactions", history::txn_count(h)}, {"verdict", history::to_json(verdict)}}
                     .dump(2)
              << "\n";
  } else {
    std::cout << history::to_text(verdict);
  }
  return verdict.ra_holds ? kClean : kViolation;
}

template <class Fn>
int with_protocol(const Options& o, Fn&& fn) {
  check_protocol_flags(o);
  level_by_name(o.isolation);
  Scope scope = scope_from(o);
  TraceHeader header = header_for(o, scope);
  if (o.protocol == "s2pl") return fn(s2pl::Protocol(scope), header);
  return fn(tapir::Protocol(scope, tapir::variant_from_string(*header.variant)), header);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"isoguard: isolation checking for transaction protocols"};
  app.require_subcommand(1);
  Options o;

  auto add_scope = [&](CLI::App* sub) {
    sub->add_option("--protocol", o.protocol, "s2pl or tapir")->capture_default_str();
    sub->add_option("--variant", o.variant, "TAPIR OCC check: journal (default) or conference");
    sub->add_option("--isolation", o.isolation, "ra, tcc or sser")->capture_default_str();
    sub->add_option("--clients", o.clients, "number of clients")->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--keys", o.keys, "number of keys")->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--txns", o.txns, "transactions per client")->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--values", o.values, "write values per (txn, key)")->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--ts-bound", o.ts_bound, "largest TAPIR timestamp")->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--depth", o.depth, "depth bound")->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--footprint", o.footprints, "CLIENT=SPEC[|SPEC...], SPEC like rA,wB,rwC");
    sub->add_option("--out", o.out, "write the (violating) trace JSON here");
    sub->add_option("--emit-history", o.emit_history, "write the run's history JSON here");
    sub->add_option("--emit-dot", o.emit_dot, "write the history's dependency graph (DOT) here");
    sub->add_flag("--json", o.json_out, "machine-readable output");
  };

  auto* explore_cmd = app.add_subcommand("explore", "bounded exhaustive exploration");
  add_scope(explore_cmd);
  explore_cmd->add_flag("--keep-going", o.keep_going, "collect every violation instead of stopping at the first");

  auto* simulate_cmd = app.add_subcommand("simulate", "seeded random walks");
  add_scope(simulate_cmd);
  simulate_cmd->add_option("--seed", o.seed, "seed of the first walk")->capture_default_str();
  simulate_cmd->add_option("--steps", o.steps, "steps per walk")->capture_default_str();
  simulate_cmd->add_option("--walks", o.walks, "number of walks (seeds seed, seed+1, ...)")->capture_default_str();

  auto* replay_cmd = app.add_subcommand("replay", "replay a builtin schedule (fig9a, fig9b) or a trace file");
  replay_cmd->add_option("schedule", o.target, "fig9a, fig9b or a trace JSON file")->required();
  auto* replay_iso = replay_cmd->add_option("--isolation", o.isolation, "ra, tcc or sser (default: sser or the trace's)");
  replay_cmd->add_option("--variant", o.variant, "must match the schedule's variant if given");
  replay_cmd->add_option("--emit-history", o.emit_history, "write the replayed history JSON here");
  replay_cmd->add_option("--emit-dot", o.emit_dot, "write the history's dependency graph (DOT) here");
  replay_cmd->add_flag("--json", o.json_out, "machine-readable output");

  auto* check_cmd = app.add_subcommand("check-history", "check a history for read atomicity");
  check_cmd->add_option("history", o.target, "appendixA or a history file (JSON or line format)")->required();
  check_cmd->add_option("--emit-dot", o.emit_dot, "write the dependency graph (DOT) here");
  check_cmd->add_flag("--json", o.json_out, "machine-readable output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kError;
  }

  try {
    if (*explore_cmd) {
      return with_protocol(o, [&](const auto& proto, const TraceHeader& h) { return explore(o, proto, h); });
    }
    if (*simulate_cmd) {
      return with_protocol(o, [&](const auto& proto, const TraceHeader& h) { return simulate(o, proto, h); });
    }
    if (*replay_cmd) {
      level_by_name(o.isolation);
      return cmd_replay(o, replay_iso->count() > 0);
    }
    if (*check_cmd) return cmd_check_history(o);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kError;
  } catch (const format_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kError;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kError;
  } catch (const contract_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kError;
  }
  return kError;
}
