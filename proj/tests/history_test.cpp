#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "isoguard/history.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

using namespace isoguard;
using namespace isoguard::history;

namespace {

History parse(const std::string& text) {
  std::istringstream in(text);
  return history_from_lines(in);
}

std::string write_temp(const std::string& name, const std::string& text) {
  const std::string path = ::testing::TempDir() + name;
  std::ofstream(path) << text;
  return path;
}

}  // namespace

TEST(History, EmptyAndTrivialHistoriesHold) {
  EXPECT_TRUE(check_ra(History{}).ra_holds);
  History h = parse("s1 t1 w x 1\ns1 t1 w y 1\ns2 t2 r x 1\ns2 t2 r y 1\n");
  auto v = check_ra(h);
  EXPECT_TRUE(v.ra_holds);
  EXPECT_TRUE(v.fractured.empty());
  EXPECT_EQ(to_text(v), "RA holds: dependency graph is acyclic\n");
}

TEST(History, AppendixWitness) {
  auto v = check_ra(appendix_a());
  ASSERT_FALSE(v.ra_holds);
  ASSERT_EQ(v.cycle.size(), 2u);
  std::set<std::string> labels;
  for (const auto& e : v.cycle) labels.insert(edge_label(v.graph, e));
  EXPECT_EQ(labels, (std::set<std::string>{"SO: Txn67 -> Txn68", "WW(K87): Txn68 -> Txn67"}));
  ASSERT_EQ(v.fractured.size(), 1u);
  EXPECT_EQ(v.graph.names[v.fractured[0].reader], "Txn81");
  EXPECT_FALSE(isoguard::testing::check_ra_oracle(appendix_a()));
}

TEST(History, EdgesOfTheAppendixGraph) {
  Graph g = build_graph(appendix_a());
  ASSERT_EQ(g.names.size(), 4u);
  auto has = [&](const std::string& from, const std::string& to, DepKind kind) {
    for (const auto& e : g.edges)
      if (g.names[e.from] == from && g.names[e.to] == to && e.kind == kind) return true;
    return false;
  };
  EXPECT_TRUE(has("Txn67", "Txn68", DepKind::SO));
  EXPECT_TRUE(has("T_init", "Txn81", DepKind::SO));
  EXPECT_TRUE(has("Txn67", "Txn81", DepKind::WR));
  EXPECT_TRUE(has("Txn68", "Txn81", DepKind::WR));
  EXPECT_TRUE(has("Txn68", "Txn67", DepKind::WW));
  EXPECT_FALSE(has("Txn81", "Txn67", DepKind::SO));
  EXPECT_NE(to_dot(g).find("WW(K87)"), std::string::npos);
}

TEST(History, FracturedFromInitialValue) {
  // t2 sees t1's x but the initial y that t1 overwrote.
  auto v = check_ra(parse("a t1 w x 1\na t1 w y 1\nb t2 r x 1\nb t2 r y v0\n"));
  EXPECT_FALSE(v.ra_holds);
  ASSERT_EQ(v.cycle.size(), 2u);
  ASSERT_EQ(v.fractured.size(), 1u);
  EXPECT_EQ(v.fractured[0].k2, "y");
}

// Visibility for the WW axiom is direct: t4 depends on t3, which read t2, but
// t4 itself need not observe t2.
TEST(History, TransitiveReadersDoNotForceVisibility) {
  History h = parse(
      "s t1 w x 1\n"
      "s t2 w x 2\n"
      "s t2 w y 1\n"
      "u t3 r y 1\n"
      "u t3 w z 1\n"
      "v t4 r z 1\n"
      "v t4 r x 1\n");
  EXPECT_TRUE(isoguard::testing::check_ra_oracle(h));
  EXPECT_TRUE(check_ra(h).ra_holds);
}

TEST(History, LineFormat) {
  History h = parse("# comment\n\ns1 a w x 1  # trailing\ns1 b r x 1\ns2 c r x v0\n");
  ASSERT_EQ(h.sessions.size(), 2u);
  EXPECT_EQ(h.sessions[0].txns.size(), 2u);
  EXPECT_EQ(h.sessions[0].txns[1].id, "b");
  EXPECT_EQ(h.sessions[0].txns[1].sn, 1u);
  EXPECT_THROW(parse("s1 a q x 1\n"), format_error);
  EXPECT_THROW(parse("s1 a w x\n"), format_error);
  EXPECT_THROW(parse("s1 a w x 1 extra\n"), format_error);
  EXPECT_THROW(parse("s1 a w x 1\ns1 b w y 1\ns1 a w z 1\n"), format_error);
}

TEST(History, RejectsMalformedHistories) {
  EXPECT_THROW(check_ra(parse("s a w x 1\nt b w x 1\n")), format_error);          // duplicate write
  EXPECT_THROW(check_ra(parse("s a w x 1\ns a w x 2\nt b r x 1\n")), format_error);  // intermediate write
  EXPECT_THROW(check_ra(parse("s a r x 7\n")), format_error);                      // never written
  EXPECT_THROW(check_ra(parse("s a w x v0\n")), format_error);                     // initial value
  EXPECT_THROW(check_ra(parse("s a r x 1\ns a w x 1\n")), format_error);           // own later write
  EXPECT_THROW(check_ra(parse("s T_init w x 1\n")), format_error);

  History dup;
  dup.sessions = {Session{"s", {Txn{0, "a", {}}}}, Session{"t", {Txn{0, "a", {}}}}};
  EXPECT_THROW(check_ra(dup), format_error);

  History hint = parse("s a w x 1\nt b r x 1\n");
  hint.sessions[1].txns[0].ops[0].writer = "T_init";
  EXPECT_THROW(check_ra(hint), format_error);
  hint.sessions[1].txns[0].ops[0].writer = "a";
  EXPECT_TRUE(check_ra(hint).ra_holds);
}

TEST(History, InternalReadsCarryNoDependency) {
  auto v = check_ra(parse("s a w x 1\ns a r x 1\n"));
  EXPECT_TRUE(v.ra_holds);
  for (const auto& e : v.graph.edges) EXPECT_NE(e.kind, DepKind::WR);
}

TEST(History, JsonAndFileLoading) {
  const History h = appendix_a();
  const History back = history_from_json(json::parse(to_json(h).dump()));
  EXPECT_EQ(to_json(back), to_json(h));

  const auto json_path = write_temp("isoguard_hist.json", to_json(h).dump(2));
  EXPECT_EQ(to_json(load_history(json_path)), to_json(h));
  const auto line_path = write_temp("isoguard_hist.txt", "Clt70 Txn67 w K87 67\n");
  EXPECT_EQ(load_history(line_path).sessions.size(), 1u);
  const auto bad_path = write_temp("isoguard_bad.json", "{ \"sessions\": [ {\"client\": 1} ] }");
  EXPECT_THROW(load_history(bad_path), format_error);
  EXPECT_THROW(load_history("/nonexistent/history.json"), format_error);
  EXPECT_THROW(history_from_json(json::array()), format_error);
}

TEST(History, FromCommitsOrdersBySessionNumber) {
  Fingerprint w{{"x", {std::nullopt, "c1.0:x"}}};
  Fingerprint r{{"x", {"c1.0:x", std::nullopt}}, {"y", {"v0", std::nullopt}}};
  History h = from_commits({{TxId{"c1", 0}, w}, {TxId{"c2", 0}, r}});
  ASSERT_EQ(h.sessions.size(), 2u);
  EXPECT_EQ(h.sessions[1].txns[0].ops[0].writer, std::optional<std::string>("Tn(0,c1)"));
  EXPECT_EQ(h.sessions[1].txns[0].ops[1].writer, std::optional<std::string>("T_init"));
  EXPECT_TRUE(check_ra(h).ra_holds);
}

TEST(History, AgreesWithOracleOnRandomHistories) {
  isoguard::testing::Rng rng(99);
  std::size_t violations = 0;
  for (int i = 0; i < 400; ++i) {
    const History h = isoguard::testing::random_history(rng, 5, 3);
    const bool oracle = isoguard::testing::check_ra_oracle(h);
    const auto v = check_ra(h);
    EXPECT_EQ(v.ra_holds, oracle) << to_json(h).dump();
    violations += !oracle;
  }
  EXPECT_GT(violations, 10u);
}
