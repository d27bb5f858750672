#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "oracles.hpp"
#include "stella/interleave.hpp"

using namespace stella;
using namespace stella::interleave;

namespace {

Ranking rk(const std::vector<std::string>& docs, const char* source = "sys", const char* ctx = "q1") {
  Ranking r{ContextId(ctx), {}, SystemId(source)};
  for (const auto& d : docs) r.items.emplace_back(d);
  return r;
}

std::vector<DocId> ids(const std::vector<std::string>& docs) {
  std::vector<DocId> out;
  for (const auto& d : docs) out.emplace_back(d);
  return out;
}

}  // namespace

TEST(Tdi, IdenticalInputsKeepOrder) {
  const auto a = rk({"d1", "d2", "d3"}, "base");
  const auto b = rk({"d1", "d2", "d3"}, "exp");
  for (bool c0 : {false, true}) {
    for (bool c1 : {false, true}) {
      const auto imp = team_draft_interleave(a, b, 3, fixed_coins({c0, c1}));
      EXPECT_EQ(imp.docs(), ids({"d1", "d2", "d3"}));
      EXPECT_EQ(imp.items[0].team, c0 ? TeamLabel::baseline : TeamLabel::experimental);
      EXPECT_NE(imp.items[0].team, imp.items[1].team);
      EXPECT_EQ(imp.items[2].team, c1 ? TeamLabel::baseline : TeamLabel::experimental);
    }
  }
}

TEST(Tdi, HandTracedRound) {
  const auto imp = team_draft_interleave(rk({"x", "y"}, "base"), rk({"y", "x"}, "exp"), 2, fixed_coins({true}));
  ASSERT_EQ(imp.items.size(), 2u);
  EXPECT_EQ(imp.items[0], (TeamItem{DocId("x"), TeamLabel::baseline}));
  EXPECT_EQ(imp.items[1], (TeamItem{DocId("y"), TeamLabel::experimental}));
  EXPECT_EQ(imp.coin_trace, std::vector<bool>{true});
  EXPECT_EQ(imp.source_baseline.str(), "base");
  EXPECT_EQ(imp.source_experimental.str(), "exp");
}

TEST(Tdi, ContextMismatch) {
  try {
    team_draft_interleave(rk({"a"}, "b", "q1"), rk({"a"}, "e", "q2"), 2, fixed_coins({true}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ContextMismatch);
  }
}

TEST(Tdi, RejectsInvalidRankings) {
  EXPECT_THROW(team_draft_interleave(rk({"a", "a"}), rk({"a"}), 2, fixed_coins({true})), Error);
  EXPECT_THROW(team_draft_interleave(rk({"a"}), rk({"a"}), 0, fixed_coins({true})), Error);
}

TEST(Tdi, StopsWhenBothExhausted) {
  const auto imp = team_draft_interleave(rk({"a", "b"}), rk({"b", "c"}), 10, fixed_coins({true, false, true}));
  EXPECT_EQ(imp.items.size(), 3u);
  EXPECT_LE(imp.coin_trace.size(), 3u);
}

TEST(Tdi, SeededCoinsAreReplayable) {
  const auto a = rk({"a", "b", "c", "d", "e", "f"});
  const auto b = rk({"f", "e", "d", "c", "b", "a"});
  const auto x = team_draft_interleave(a, b, 6, SeededCoins("imp-1"), "imp-1");
  const auto y = team_draft_interleave(a, b, 6, SeededCoins("imp-1"), "imp-1");
  EXPECT_EQ(x, y);
  EXPECT_EQ(x.impression_id, "imp-1");
}

TEST(Tdi, MatchesReferenceOnRandomInputs) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<std::string> pool;
    for (int i = 0; i < 8; ++i) pool.push_back("d" + std::to_string(i));
    std::shuffle(pool.begin(), pool.end(), rng);
    std::vector<std::string> a(pool.begin(), pool.begin() + 1 + static_cast<long>(rng() % 8));
    std::shuffle(pool.begin(), pool.end(), rng);
    std::vector<std::string> b(pool.begin(), pool.begin() + 1 + static_cast<long>(rng() % 8));
    const std::size_t target = 1 + rng() % 10;
    std::vector<bool> coins;
    for (int i = 0; i < 12; ++i) coins.push_back(rng() & 1);

    const auto ref = oracle::tdi(a, b, target, coins);
    const auto imp = team_draft_interleave(rk(a), rk(b), target, fixed_coins(coins));
    ASSERT_EQ(imp.items.size(), ref.docs.size());
    for (std::size_t i = 0; i < ref.docs.size(); ++i) {
      EXPECT_EQ(imp.items[i].doc.str(), ref.docs[i]);
      EXPECT_EQ(imp.items[i].team == TeamLabel::experimental ? 1 : 0, ref.team[i]);
    }
    // Every coin drawn is recorded, and only the ones a round used.
    EXPECT_TRUE(std::equal(imp.coin_trace.begin(), imp.coin_trace.end(), coins.begin()));
  }
}

TEST(Credit, Cases) {
  const auto imp = team_draft_interleave(rk({"a", "b", "c", "d"}), rk({"e", "f", "g", "h"}), 4,
                                         fixed_coins({true, true}));
  // a(base) e(exp) b(base) f(exp)
  const auto exp_only = ids({"e", "f"});
  const auto none = ids({});
  const auto two_two = ids({"a", "b", "e", "f"});
  const auto base_win = ids({"a", "b", "e"});
  EXPECT_EQ(credit(imp, exp_only), Outcome::win_experimental);
  EXPECT_EQ(credit(imp, none), Outcome::tie);
  EXPECT_EQ(credit(imp, two_two), Outcome::tie);
  EXPECT_EQ(credit(imp, base_win), Outcome::win_baseline);
}

TEST(Credit, RepeatedClicksCountOnce) {
  const auto imp = team_draft_interleave(rk({"a", "b"}), rk({"c", "d"}), 4, fixed_coins({true, true}));
  const auto clicks = ids({"a", "a", "a", "c", "d"});
  EXPECT_EQ(credit(imp, clicks), Outcome::win_experimental);
}

TEST(Credit, UnknownDoc) {
  const auto imp = team_draft_interleave(rk({"a"}), rk({"b"}), 2, fixed_coins({true}));
  const auto clicks = ids({"zz"});
  try {
    credit(imp, clicks);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownClickedDoc);
  }
}

TEST(Aggregate, Examples) {
  const std::vector<Outcome> mixed{Outcome::win_experimental, Outcome::win_baseline, Outcome::tie};
  EXPECT_EQ(aggregate_preference(mixed), (Preference{1, 1, 1, 0.5}));
  EXPECT_EQ(aggregate_preference({}), (Preference{0, 0, 0, 0.5}));
  std::vector<Outcome> six_four(6, Outcome::win_experimental);
  six_four.insert(six_four.end(), 4, Outcome::win_baseline);
  EXPECT_DOUBLE_EQ(aggregate_preference(six_four).preference_score, 0.6);
  EXPECT_DOUBLE_EQ(preference_score(0, 0), 0.5);
}

TEST(Json, ImpressionRoundTrip) {
  const auto imp = team_draft_interleave(rk({"a", "b"}, "base"), rk({"b", "c"}, "exp"), 3, SeededCoins("i9"), "i9");
  EXPECT_EQ(nlohmann::json(imp).get<InterleavedImpression>(), imp);
}
