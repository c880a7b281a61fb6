#include <gtest/gtest.h>

#include "isoguard/isolation.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

using namespace isoguard;
using namespace isoguard::testing;

namespace {

const TxId tx1{"c1", 0};
const TxId tx2{"c2", 0};

bool can_commit_at(const IsolationLevel& level, const KVStore& kvs, const View& u) {
  return can_commit(kvs, u, {}, level.dep_relation(kvs));
}

// tx1 writes A; tx2 reads tx1's A and writes B. The view sees tx2 but not tx1.
std::pair<KVStore, View> reader_without_writer() {
  KVStore kvs = initial_store({"A", "B"});
  kvs = update_kv(kvs, tx1, initial_view(kvs), {{"A", {std::nullopt, "a1"}}});
  kvs = update_kv(kvs, tx2, full_view(kvs), {{"A", {"a1", std::nullopt}}, {"B", {std::nullopt, "b2"}}});
  return {kvs, View{{"A", {0}}, {"B", {0, 1}}}};
}

}  // namespace

TEST(Registry, ShipsThreeLevels) {
  EXPECT_EQ(level_by_name("ra").name, "ra");
  EXPECT_EQ(level_by_name("tcc").name, "tcc");
  EXPECT_EQ(level_by_name("sser").name, "sser");
  EXPECT_THROW(level_by_name("rc"), std::invalid_argument);

  LevelRegistry reg;
  reg.add(IsolationLevel{"ua", [](const KVStore&) { return DepRelation{}; },
                         [](const KVStore&, const View&, const KVStore&, const View&) { return true; }});
  EXPECT_TRUE(reg.contains("ua"));
  EXPECT_EQ(reg.names().size(), 4u);
}

TEST(Ra, AcceptsEveryWellformedView) {
  Rng rng(3);
  for (int i = 0; i < 300; ++i) {
    KVStore kvs = random_store(rng, 2, 4, 2);
    View u = random_atomic_view(rng, kvs, initial_view(kvs));
    EXPECT_TRUE(can_commit_at(level_ra(), kvs, u));
    EXPECT_TRUE(level_ra().v_shift(kvs, u, kvs, initial_view(kvs)));
  }
}

TEST(Tcc, RejectsReaderWithoutWriter) {
  auto [kvs, u] = reader_without_writer();
  ASSERT_TRUE(wf(kvs, u));
  EXPECT_FALSE(can_commit_at(level_tcc(), kvs, u));
  EXPECT_TRUE(can_commit_at(level_ra(), kvs, u));
}

TEST(Tcc, SessionOrderCountsAsDependency) {
  KVStore kvs = initial_store({"A", "B"});
  kvs = update_kv(kvs, TxId{"c1", 0}, initial_view(kvs), {{"A", {std::nullopt, "a"}}});
  kvs = update_kv(kvs, TxId{"c1", 1}, initial_view(kvs), {{"B", {std::nullopt, "b"}}});
  View later_only{{"A", {0}}, {"B", {0, 1}}};
  EXPECT_FALSE(can_commit_at(level_tcc(), kvs, later_only));
  EXPECT_TRUE(can_commit_at(level_tcc(), kvs, full_view(kvs)));
}

TEST(Tcc, VShiftClauses) {
  KVStore pre = initial_store({"A"});
  View u = initial_view(pre);
  KVStore post = apply_fingerprint(pre, tx1, u, {{"A", {std::nullopt, "a1"}}});
  EXPECT_FALSE(level_tcc().v_shift(pre, u, post, u));                              // own write missing
  EXPECT_TRUE(level_tcc().v_shift(pre, u, post, extend_with_new_versions(u, pre, post)));
  EXPECT_FALSE(level_tcc().v_shift(pre, View{{"A", {0, 1}}}, post, View{{"A", {0, 2}}}));  // not monotone
}

TEST(Sser, NeedsLatestVersions) {
  KVStore kvs = initial_store({"A"});
  kvs = update_kv(kvs, tx1, initial_view(kvs), {{"A", {std::nullopt, "a1"}}});
  kvs = update_kv(kvs, tx2, full_view(kvs), {{"A", {std::nullopt, "a2"}}});
  EXPECT_TRUE(can_commit_at(level_sser(), kvs, full_view(kvs)));
  EXPECT_FALSE(can_commit_at(level_sser(), kvs, View{{"A", {0, 1}}}));
  EXPECT_FALSE(can_commit_at(level_sser(), kvs, initial_view(kvs)));
  EXPECT_TRUE(level_sser().v_shift(kvs, full_view(kvs), kvs, initial_view(kvs)));
}

TEST(AllLevels, FullViewAlwaysCommits) {
  Rng rng(8);
  for (int i = 0; i < 300; ++i) {
    KVStore kvs = random_store(rng, 3, 5, 3);
    for (const auto* level : {&level_by_name("ra"), &level_by_name("tcc"), &level_by_name("sser")})
      EXPECT_TRUE(can_commit_at(*level, kvs, full_view(kvs))) << level->name;
  }
}

TEST(AllLevels, DependenciesStayInsideTheStore) {
  Rng rng(9);
  for (int i = 0; i < 200; ++i) {
    KVStore kvs = random_store(rng, 2, 4, 2);
    const auto ids = txids(kvs);
    for (const auto* level : {&level_by_name("tcc"), &level_by_name("sser")})
      for (const auto& e : level->dep_relation(kvs)) {
        EXPECT_TRUE(ids.count(e.from));
        EXPECT_TRUE(ids.count(e.to));
      }
  }
}

// SSER ⇒ TCC ⇒ RA for the commit guard, over every serial store of up to four
// transactions and every atomic view of it.
TEST(AllLevels, GuardImplicationChain) {
  std::size_t checked = 0;
  std::vector<Shape> shapes;
  std::function<void(std::size_t)> rec = [&](std::size_t depth) {
    const KVStore kvs = serial_store(shapes);
    for (const auto& u : all_atomic_views(kvs)) {
      const bool s = can_commit_at(level_sser(), kvs, u);
      const bool t = can_commit_at(level_tcc(), kvs, u);
      const bool r = can_commit_at(level_ra(), kvs, u);
      EXPECT_TRUE(!s || t);
      EXPECT_TRUE(!t || r);
      ++checked;
    }
    if (depth == 4) return;
    for (Shape sh : kShapes) {
      shapes.push_back(sh);
      rec(depth + 1);
      shapes.pop_back();
    }
  };
  rec(0);
  EXPECT_GT(checked, 1000u);
}
