#include <gtest/gtest.h>

#include <fstream>

#include "oracles.hpp"
#include "stella/metrics.hpp"

using namespace stella;
using namespace stella::metrics;

namespace {

const std::filesystem::path kFixtures = STELLA_FIXTURES;

ImpressionRecord rec_impression(const std::string& id, const std::string& session, const char* system, TimestampMs at) {
  ImpressionRecord r;
  r.impression_id = id;
  r.session_id = session;
  r.task = Task::recommendation;
  r.context = ContextId("seed");
  r.items = {DocId("a"), DocId("b"), DocId("c")};
  r.system = SystemId(system);
  r.at = at;
  return r;
}

FeedbackEvent ev(const std::string& id, const std::string& session, const std::string& imp, EventKind kind,
                 TimestampMs at, const char* doc = nullptr, int pos = 0) {
  FeedbackEvent e{id, session, imp, kind, std::nullopt, std::nullopt, at};
  if (doc) e.doc = DocId(doc);
  if (pos) e.position = pos;
  return e;
}

std::vector<LogRecord> load_jsonl(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::vector<LogRecord> out;
  std::string line;
  while (std::getline(in, line)) out.push_back(nlohmann::json::parse(line).get<LogRecord>());
  return out;
}

SystemRecord reg(const char* id, Task task) { return {SystemId(id), SystemKind::run_backed, task, std::nullopt, id}; }

}  // namespace

TEST(Ctr, Arithmetic) {
  std::vector<LogRecord> log;
  for (int i = 0; i < 50; ++i) {
    const std::string s = "s" + std::to_string(i);
    log.push_back(rec_impression(s + ":1", s, "sys", i));
    if (i % 10 == 0) log.push_back(ev(s + "-c", s, s + ":1", EventKind::click, i + 1, "a", 1));
  }
  EXPECT_DOUBLE_EQ(*compute_ctr(log, SystemId("sys")), 0.1);
  EXPECT_FALSE(compute_ctr(log, SystemId("other")));
}

TEST(Ctr, FixtureMatchesHandCount) {
  const auto log = load_jsonl(kFixtures / "events_small.jsonl");
  ASSERT_EQ(log.size(), 200u);
  std::ifstream in(kFixtures / "events_small.expected.json");
  const auto expected = nlohmann::json::parse(in);
  const std::vector<SystemRecord> registry{reg("recA", Task::recommendation), reg("recB", Task::recommendation)};
  const auto cards = build_scorecards(log, {}, registry);
  for (const auto& c : cards) {
    const auto& e = expected["systems"][c.system_id.str()];
    EXPECT_EQ(c.impressions, e["impressions"].get<std::uint64_t>());
    EXPECT_EQ(c.clicks, e["clicks"].get<std::uint64_t>());
    EXPECT_EQ(c.click_events, e["click_events"].get<std::uint64_t>());
    EXPECT_EQ(c.bounces, e["bounces"].get<std::uint64_t>());
    EXPECT_EQ(c.votes_up, e["votes_up"].get<std::uint64_t>());
    EXPECT_EQ(c.votes_down, e["votes_down"].get<std::uint64_t>());
    EXPECT_DOUBLE_EQ(*compute_ctr(log, c.system_id),
                     e["clicks"].get<double>() / e["impressions"].get<double>());
  }
}

TEST(Bounce, SingleBounceAndEngagedVisit) {
  std::vector<LogRecord> bounce{rec_impression("i1", "s1", "sys", 0), ev("e1", "s1", "i1", EventKind::click, 1000, "a", 1),
                                ev("e2", "s1", "i1", EventKind::page_leave, 3000)};
  EXPECT_DOUBLE_EQ(*compute_bounce_rate(bounce, SystemId("sys"), 10000), 1.0);

  std::vector<LogRecord> engaged{rec_impression("i1", "s1", "sys", 0), ev("e1", "s1", "i1", EventKind::click, 1000, "a", 1),
                                 ev("e2", "s1", "i1", EventKind::vote_up, 61000, "a")};
  EXPECT_DOUBLE_EQ(*compute_bounce_rate(engaged, SystemId("sys"), 10000), 0.0);

  std::vector<LogRecord> last{rec_impression("i1", "s1", "sys", 0), ev("e1", "s1", "i1", EventKind::click, 1000, "a", 1)};
  EXPECT_DOUBLE_EQ(*compute_bounce_rate(last, SystemId("sys"), 10000), 1.0);
  EXPECT_FALSE(compute_bounce_rate({}, SystemId("sys"), 10000));
}

TEST(Bounce, MixedFixtureFourOfTen) {
  // Ten clicked visits in five sessions; visits 1, 4, 6 and 9 bounce.
  std::vector<LogRecord> log;
  const std::vector<std::pair<TimestampMs, bool>> visits{{2000, true}, {60000, false}, {15000, false}, {9000, true},
                                                         {10001, false}, {10000, true}, {40000, false}, {11000, false},
                                                         {500, true}, {30000, false}};
  for (int s = 0; s < 5; ++s) {
    const std::string sid = "s" + std::to_string(s);
    const std::string imp = sid + ":1";
    TimestampMs t = 100000 * s;
    log.push_back(rec_impression(imp, sid, "sys", t));
    for (int v = 0; v < 2; ++v) {
      const auto [dwell, bounced] = visits[static_cast<std::size_t>(2 * s + v)];
      const std::string eid = sid + "-" + std::to_string(v);
      t += 100;
      log.push_back(ev(eid + "c", sid, imp, EventKind::click, t, "a", 1));
      t += dwell;
      if (bounced || v == 0) {
        log.push_back(ev(eid + "l", sid, imp, EventKind::page_leave, t));
      } else {
        log.push_back(ev(eid + "u", sid, imp, EventKind::vote_up, t, "b"));
      }
    }
  }
  EXPECT_DOUBLE_EQ(*compute_bounce_rate(log, SystemId("sys"), 10000), 0.4);
  const auto counts = oracle::replay_counts(log, 10000);
  EXPECT_EQ(counts.at("sys").bounces, 4u);
}

TEST(Votes, TallyAndLastWriteWins) {
  std::vector<LogRecord> log{rec_impression("i1", "s1", "sys", 0), ev("v1", "s1", "i1", EventKind::vote_up, 1, "a"),
                             ev("v2", "s1", "i1", EventKind::vote_up, 2, "b"),
                             ev("v3", "s1", "i1", EventKind::vote_down, 3, "c")};
  EXPECT_EQ(tally_votes(log, SystemId("sys")), (VoteTally{2, 1, 1}));
  EXPECT_EQ(tally_votes({}, SystemId("sys")), (VoteTally{0, 0, 0}));

  log.push_back(ev("v4", "s1", "i1", EventKind::vote_down, 4, "a"));
  EXPECT_EQ(tally_votes(log, SystemId("sys")), (VoteTally{1, 2, -1}));
}

TEST(Scorecards, EmptyLog) {
  const std::vector<SystemRecord> registry{reg("b", Task::adhoc), reg("a", Task::recommendation)};
  const auto cards = build_scorecards({}, {}, registry);
  ASSERT_EQ(cards.size(), 2u);
  EXPECT_EQ(cards[0].system_id.str(), "a");
  for (const auto& c : cards) {
    EXPECT_EQ(c.impressions, 0u);
    EXPECT_FALSE(c.ctr);
    EXPECT_DOUBLE_EQ(c.preference_score, 0.5);
  }
}

TEST(Scorecards, OutcomeTallies) {
  std::vector<OutcomeRecord> outcomes;
  for (int i = 0; i < 10; ++i) {
    outcomes.push_back({"i" + std::to_string(i), SystemId("exp"), SystemId("base"),
                        i < 6 ? Outcome::win_experimental : Outcome::win_baseline});
  }
  const std::vector<SystemRecord> registry{reg("exp", Task::adhoc), reg("base", Task::adhoc)};
  const auto cards = build_scorecards({}, outcomes, registry);
  EXPECT_DOUBLE_EQ(cards[1].preference_score, 0.6);
  EXPECT_EQ(cards[1].wins, 6u);
  EXPECT_EQ(cards[0].wins, 4u);
  EXPECT_EQ(cards[0].losses, 6u);
  EXPECT_LT(cards[1].preference_ci_low, 0.6);
  EXPECT_GT(cards[1].preference_ci_high, 0.6);
}

TEST(Scorecards, DeriveOutcomesSkipsFallbacks) {
  ImpressionRecord inter;
  inter.impression_id = "i1";
  inter.session_id = "s1";
  inter.context = ContextId("q");
  inter.items = {DocId("a"), DocId("b")};
  inter.teams = {TeamLabel::baseline, TeamLabel::experimental};
  inter.system = SystemId("exp");
  inter.baseline = SystemId("base");
  ImpressionRecord fb = inter;
  fb.impression_id = "i2";
  fb.teams.clear();
  fb.baseline.reset();
  fb.system = SystemId("base");
  fb.fallback_from = SystemId("exp");
  const std::vector<LogRecord> log{inter, fb, ev("c1", "s1", "i1", EventKind::click, 5, "b", 2),
                                   ev("c2", "s1", "i2", EventKind::click, 6, "a", 1)};
  const auto outcomes = derive_outcomes(log);
  ASSERT_EQ(outcomes.size(), 1u);
  EXPECT_EQ(outcomes[0].outcome, Outcome::win_experimental);
  const std::vector<SystemRecord> registry{reg("base", Task::adhoc), reg("exp", Task::adhoc)};
  const auto cards = build_scorecards(log, outcomes, registry);
  EXPECT_EQ(cards[1].fallbacks, 1u);
  EXPECT_EQ(cards[0].impressions, 1u);
}

TEST(Scorecards, IdempotentAndAdditive) {
  const auto log = load_jsonl(kFixtures / "events_small.jsonl");
  const std::vector<SystemRecord> registry{reg("recA", Task::recommendation), reg("recB", Task::recommendation)};
  const auto once = build_scorecards(log, {}, registry);
  EXPECT_EQ(build_scorecards(log, {}, registry), once);

  std::vector<LogRecord> odd, even;
  for (const auto& r : log) {
    const auto& s = session_of(r);
    (std::stoi(s.substr(1)) % 2 ? odd : even).push_back(r);
  }
  const auto a = build_scorecards(odd, {}, registry);
  const auto b = build_scorecards(even, {}, registry);
  EXPECT_EQ(merge_scorecards(a, b), once);
}

TEST(Scorecards, JsonShape) {
  SystemScorecard c;
  c.system_id = SystemId("x");
  c.impressions = 4;
  c.clicks = 1;
  c.votes_up = 3;
  c.votes_down = 1;
  c.finalize();
  const auto j = nlohmann::json(c);
  EXPECT_DOUBLE_EQ(j["ctr"].get<double>(), 0.25);
  EXPECT_TRUE(j["bounce_rate"].is_null());
  EXPECT_EQ(j["votes_net"], 2);
  EXPECT_EQ(j.get<SystemScorecard>(), c);
}
