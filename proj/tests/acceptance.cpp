// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "stella/assignment.hpp"
#include "stella/central_server.hpp"
#include "stella/interleave.hpp"
#include "stella/metrics.hpp"
#include "stella/run_ingest.hpp"
#include "stella/user_sim.hpp"

using namespace stella;
using Clock = std::chrono::steady_clock;

namespace {

const std::filesystem::path kFixtures = STELLA_FIXTURES;
const std::filesystem::path kSourceDir = STELLA_SOURCE_DIR;

struct Verdict {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

sim::StubSpec stub(const char* id, Task task, sim::Strategy s, SystemKind kind = SystemKind::endpoint_backed,
                   double timeout_rate = 0.0) {
  return {SystemId(id), task, kind, s, {timeout_rate, 17}};
}

std::optional<metrics::SystemScorecard> card_of(const nlohmann::json& report, const std::string& id) {
  for (const auto* task : {"adhoc", "recommendation"}) {
    for (const auto& c : report["tasks"][task]) {
      if (c["system_id"] == id) return c.get<metrics::SystemScorecard>();
    }
  }
  return std::nullopt;
}

// 1. Identical arms, clicks that depend on position only.
Verdict tdi_fairness() {
  const auto t0 = Clock::now();
  sim::CampaignConfig cfg;
  cfg.seed = 101;
  cfg.adhoc_share = 1.0;
  cfg.click_model.kind = sim::ClickModelKind::position_based;
  cfg.click_model.attractiveness = {0.5, 0.5, 0.5};
  cfg.systems = {stub("twin", Task::adhoc, sim::Strategy::candidate_order)};
  sim::Harness h(cfg);

  std::size_t sessions = 0;
  metrics::SystemScorecard c;
  while (c.wins + c.losses < 10000 && sessions < 200000) {
    for (std::size_t i = 0; i < 2000; ++i) h.run_session(sessions++);
    h.ship();
    c = *card_of(h.report(), "twin");
  }
  const double secs = seconds_since(t0);
  const auto n = c.wins + c.losses;
  const bool pass = n >= 10000 && std::abs(c.preference_score - 0.5) <= 0.03 && secs < 60.0;
  return {pass, fmt("score=%.4f informative=%llu sessions=%zu time=%.1fs (need |score-0.5|<=0.03, <60s)",
                    c.preference_score, static_cast<unsigned long long>(n), sessions, secs)};
}

// 2. An arm that puts every relevant doc first, against candidate order,
// under the cascade model. The expectation is exact: all coin sequences of
// the five draft rounds, cascade outcome by dynamic programming.
Verdict tdi_sensitivity() {
  sim::CampaignConfig cfg;
  cfg.seed = 202;
  cfg.adhoc_share = 1.0;
  cfg.click_model.kind = sim::ClickModelKind::cascade;
  cfg.systems = {stub("ideal", Task::adhoc, sim::Strategy::ideal)};
  sim::Harness h(cfg);
  const std::size_t n_sessions = 10000;
  for (std::size_t i = 0; i < n_sessions; ++i) h.run_session(i);
  h.ship();
  const auto c = *card_of(h.report(), "ideal");

  const auto& world = h.world();
  const auto& model = cfg.click_model;
  std::map<ContextId, oracle::WinLoss> per_context;
  for (const auto& ctx : world.contexts) {
    oracle::Docs base;
    for (const auto& d : world.candidates.at(ctx).candidates) base.push_back(d.str());
    oracle::Docs ideal = base;
    std::stable_sort(ideal.begin(), ideal.end(), [&](const auto& x, const auto& y) {
      return world.grades.at(ctx).at(DocId(x)) > world.grades.at(ctx).at(DocId(y));
    });
    oracle::WinLoss sum;
    const int rounds = 5;
    for (int mask = 0; mask < (1 << rounds); ++mask) {
      std::vector<bool> coins;
      for (int r = 0; r < rounds; ++r) coins.push_back((mask >> r) & 1);
      const auto d = oracle::tdi(base, ideal, cfg.page_size, coins);
      std::vector<double> rel;
      for (const auto& doc : d.docs) rel.push_back(model.attractiveness[world.grades.at(ctx).at(DocId(doc))]);
      const auto wl = oracle::cascade_outcome(rel, d.team, model.continuation);
      sum.win += wl.win / (1 << rounds);
      sum.loss += wl.loss / (1 << rounds);
    }
    per_context[ctx] = sum;
  }
  double win = 0, loss = 0;
  for (std::size_t i = 0; i < n_sessions; ++i) {
    const auto& wl = per_context.at(h.plan_session(i).context);
    win += wl.win;
    loss += wl.loss;
  }
  const double expected = win / (win + loss);
  const double n = static_cast<double>(c.wins + c.losses);
  const double sigma = std::sqrt(expected * (1 - expected) / n);
  const bool pass = c.impressions == n_sessions && c.preference_score > 0.55 &&
                    std::abs(c.preference_score - expected) <= 3 * sigma;
  return {pass, fmt("score=%.4f expected=%.4f sigma=%.4f impressions=%llu (need >0.55 and within 3 sigma)",
                    c.preference_score, expected, sigma, static_cast<unsigned long long>(c.impressions))};
}

// 3. Every ranking of at most three docs against every other, every coin
// sequence, every target length.
Verdict tdi_structure() {
  const auto t0 = Clock::now();
  const std::vector<std::string> universe{"d1", "d2", "d3"};
  std::vector<oracle::Docs> rankings;
  std::vector<std::string> perm = universe;
  std::set<oracle::Docs> seen;
  do {
    for (std::size_t len = 1; len <= 3; ++len) {
      oracle::Docs r(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(len));
      if (seen.insert(r).second) rankings.push_back(r);
    }
  } while (std::next_permutation(perm.begin(), perm.end()));

  auto to_ranking = [](const oracle::Docs& docs, const char* sys) {
    Ranking r{ContextId("q"), {}, SystemId(sys)};
    for (const auto& d : docs) r.items.emplace_back(d);
    return r;
  };

  std::size_t cases = 0, failures = 0;
  std::string first_failure;
  for (const auto& a : rankings) {
    for (const auto& b : rankings) {
      const auto ra = to_ranking(a, "base");
      const auto rb = to_ranking(b, "exp");
      std::set<std::string> unique(a.begin(), a.end());
      unique.insert(b.begin(), b.end());
      for (int mask = 0; mask < 8; ++mask) {
        std::vector<bool> coins{bool(mask & 1), bool(mask & 2), bool(mask & 4)};
        for (std::size_t target = 1; target <= 6; ++target) {
          ++cases;
          const auto out = interleave::team_draft_interleave(ra, rb, target, interleave::fixed_coins(coins));
          const auto again = interleave::team_draft_interleave(ra, rb, target, interleave::fixed_coins(coins));
          std::vector<std::string> docs;
          std::vector<int> teams;
          for (const auto& it : out.items) {
            docs.push_back(it.doc.str());
            teams.push_back(it.team == TeamLabel::experimental ? 1 : 0);
          }
          bool ok = out == again;
          ok = ok && std::set<std::string>(docs.begin(), docs.end()).size() == docs.size();
          ok = ok && docs.size() <= target && docs.size() == std::min(target, unique.size());
          ok = ok && std::equal(out.coin_trace.begin(), out.coin_trace.end(), coins.begin());

          // Prefix property: some top-i of a and top-j of b give exactly the doc set.
          const std::set<std::string> got(docs.begin(), docs.end());
          bool prefix = false;
          for (std::size_t i = 0; i <= a.size() && !prefix; ++i) {
            for (std::size_t j = 0; j <= b.size() && !prefix; ++j) {
              std::set<std::string> u(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(i));
              u.insert(b.begin(), b.begin() + static_cast<std::ptrdiff_t>(j));
              prefix = u == got;
            }
          }
          ok = ok && prefix;

          // Team balance while both lists still have an unshown doc.
          int diff = 0;
          for (std::size_t k = 0; k < docs.size(); ++k) {
            diff += teams[k] ? 1 : -1;
            const std::set<std::string> shown(docs.begin(), docs.begin() + static_cast<std::ptrdiff_t>(k + 1));
            auto open = [&](const oracle::Docs& l) {
              return std::any_of(l.begin(), l.end(), [&](const auto& d) { return !shown.count(d); });
            };
            if (open(a) && open(b) && std::abs(diff) > 1) ok = false;
          }

          const auto ref = oracle::tdi(a, b, target, coins);
          ok = ok && ref.docs == docs && ref.team == teams;
          if (!ok && failures++ == 0) first_failure = fmt("target=%zu mask=%d", target, mask);
        }
      }
    }
  }
  const double secs = seconds_since(t0);
  return {failures == 0 && secs < 5.0,
          fmt("cases=%zu failures=%zu time=%.2fs%s", cases, failures, secs,
              failures ? (" first: " + first_failure).c_str() : "")};
}

// 4. Run files.
Verdict run_parsing() {
  std::size_t problems = 0;
  std::string note;
  for (const char* name : {"canonical_small.run", "canonical_ties.run"}) {
    std::ifstream in(kFixtures / "runs" / name);
    std::stringstream ss;
    ss << in.rdbuf();
    if (ingest::serialize_run(ingest::parse_run_text(ss.str())) != ss.str()) {
      ++problems;
      note += std::string(" roundtrip:") + name;
    }
  }

  std::mt19937_64 rng(404);
  std::size_t idempotent = 0;
  for (int f = 0; f < 1000; ++f) {
    std::vector<std::string> lines;
    const auto n_q = 1 + rng() % 5;
    const std::string tag = "tag" + std::to_string(rng() % 3);
    for (std::size_t q = 0; q < n_q; ++q) {
      const auto n_d = 1 + rng() % 12;
      std::vector<int> ranks(n_d);
      std::iota(ranks.begin(), ranks.end(), 1);
      std::shuffle(ranks.begin(), ranks.end(), rng);
      for (std::size_t d = 0; d < n_d; ++d) {
        const double score = (rng() % 4 == 0) ? 1.5 : static_cast<double>(rng() % 1000) / 8.0 - 20.0;
        lines.push_back("q" + std::to_string(rng() % 50) + "x" + std::to_string(q) + " Q0 doc" + std::to_string(d) +
                        " " + std::to_string(ranks[d]) + " " + std::to_string(score) + " " + tag);
      }
    }
    std::shuffle(lines.begin(), lines.end(), rng);
    std::string text;
    for (const auto& l : lines) text += l + (rng() % 2 ? "\n" : "\t\n");
    const auto once = ingest::serialize_run(ingest::parse_run_text(text));
    const auto parsed = ingest::parse_run_text(once);
    if (ingest::serialize_run(parsed) == once && ingest::normalize(parsed) == parsed) ++idempotent;
  }
  if (idempotent != 1000) ++problems;

  const std::vector<std::pair<const char*, ErrorCode>> malformed{
      {"bad_field_count.run", ErrorCode::FieldCount}, {"bad_q0.run", ErrorCode::BadQ0},
      {"bad_rank_zero.run", ErrorCode::BadRank},      {"bad_rank_text.run", ErrorCode::BadRank},
      {"bad_score_nan.run", ErrorCode::BadScore},     {"bad_score_text.run", ErrorCode::BadScore},
      {"duplicate_doc.run", ErrorCode::DuplicateDocForQuery}, {"mixed_tags.run", ErrorCode::MixedTags}};
  std::size_t rejected = 0;
  for (const auto& [name, code] : malformed) {
    try {
      ingest::load_run_file(kFixtures / "runs" / name);
      note += std::string(" accepted:") + name;
    } catch (const Error& e) {
      if (e.code() == code && e.line() > 0) {
        ++rejected;
      } else {
        note += std::string(" wrong-error:") + name;
      }
    }
  }
  if (rejected != malformed.size()) ++problems;
  return {problems == 0, fmt("canonical=2 idempotent=%zu/1000 rejected=%zu/%zu%s", idempotent, rejected,
                             malformed.size(), note.c_str())};
}

// 5. Sticky, balanced session assignment.
Verdict assignment_balance() {
  assignment::ExperimentConfig cfg;
  cfg.experiment_id = "acc";
  cfg.salt = "acceptance";
  cfg.arms = {SystemId("arm0"), SystemId("arm1"), SystemId("arm2"), SystemId("arm3")};
  const auto copy = cfg;
  std::map<SystemId, int> counts;
  std::size_t stable = 0;
  for (int i = 0; i < 10000; ++i) {
    const std::string sid = "session-" + std::to_string(i);
    const auto& arm = assignment::assign_session(sid, cfg);
    if (arm == assignment::assign_session(sid, copy) && arm == assignment::assign_session(sid, cfg)) ++stable;
    ++counts[arm];
  }
  bool balanced = counts.size() == 4;
  std::string spread;
  for (const auto& [arm, n] : counts) {
    balanced = balanced && std::abs(n - 2500) <= 150;
    spread += " " + arm.str() + "=" + std::to_string(n);
  }

  // Same bound over random session tokens.
  std::mt19937_64 rng(505);
  const std::string alphabet = "abcdefghijklmnopqrstuvwxyz0123456789-_";
  std::set<std::string> tokens;
  while (tokens.size() < 10000) {
    std::string t(12, ' ');
    for (auto& ch : t) ch = alphabet[rng() % alphabet.size()];
    tokens.insert(t);
  }
  std::map<SystemId, int> random_counts;
  for (const auto& t : tokens) ++random_counts[assignment::assign_session(t, cfg)];
  spread += " | random:";
  for (const auto& [arm, n] : random_counts) {
    balanced = balanced && std::abs(n - 2500) <= 150;
    spread += " " + std::to_string(n);
  }
  return {stable == 10000 && balanced, fmt("deterministic=%zu/10000%s (need 2500+-150)", stable, spread.c_str())};
}

// 6. k bounds.
Verdict k_clamp() {
  assignment::ExperimentConfig cfg;
  std::size_t bad = 0;
  for (int req = 0; req <= 100; ++req) {
    for (int avail = 0; avail <= 100; ++avail) {
      const auto k = assignment::clamp_k(req, avail, cfg);
      if (avail < 3) {
        bad += k.has_value();
        continue;
      }
      // Closest allowed value to the request.
      int best = 3;
      for (int cand = 3; cand <= std::min(10, avail); ++cand) {
        if (std::abs(cand - req) < std::abs(best - req)) best = cand;
      }
      bad += !(k && *k >= 3 && *k <= 10 && *k == best);
    }
  }
  const bool examples = assignment::clamp_k(15, 50, cfg) == 10 && assignment::clamp_k(1, 50, cfg) == 3 &&
                        !assignment::clamp_k(5, 2, cfg);
  return {bad == 0 && examples, fmt("pairs=10201 violations=%zu examples=%s", bad, examples ? "ok" : "wrong")};
}

// 7. Scorecards against a single-pass recomputation over the raw log.
Verdict metrics_exact() {
  sim::CampaignConfig cfg;
  cfg.seed = 707;
  cfg.sessions = 10000;
  cfg.ship_every = 1000;
  cfg.systems = {stub("ideal", Task::adhoc, sim::Strategy::ideal, SystemKind::endpoint_backed, 0.1),
                 stub("rev", Task::adhoc, sim::Strategy::reverse, SystemKind::run_backed),
                 stub("rec-ideal", Task::recommendation, sim::Strategy::ideal),
                 stub("rec-shuffle", Task::recommendation, sim::Strategy::shuffle, SystemKind::endpoint_backed, 0.1)};
  sim::Harness h(cfg);
  for (std::size_t i = 0; i < cfg.sessions; ++i) {
    h.run_session(i);
    if ((i + 1) % cfg.ship_every == 0) h.ship();
  }
  h.ship();
  const auto report = h.report();
  const auto log = h.server().applied_records();
  const auto counts = oracle::replay_counts(log, cfg.bounce_threshold_ms);
  const auto tallies = oracle::replay_outcomes(log);

  std::size_t mismatches = 0, systems = 0;
  std::string note;
  auto ratio_ok = [](std::optional<double> got, double num, double den) {
    if (den == 0) return !got;
    return got && std::abs(*got - num / den) <= 1e-12;
  };
  for (const auto& e : h.server().systems()) {
    ++systems;
    const auto id = e.record.system_id.str();
    const auto c = card_of(report, id);
    const auto oc = counts.count(id) ? counts.at(id) : oracle::Counts{};
    const auto ot = tallies.count(id) ? tallies.at(id) : oracle::Tally{};
    const double pref = ot.wins + ot.losses ? double(ot.wins) / double(ot.wins + ot.losses) : 0.5;
    const bool ok = c && c->impressions == oc.impressions && c->clicks == oc.clicks &&
                    c->click_events == oc.click_events && c->bounces == oc.bounces && c->votes_up == oc.votes_up &&
                    c->votes_down == oc.votes_down && c->fallbacks == oc.fallbacks && c->wins == ot.wins &&
                    c->losses == ot.losses && c->ties == ot.ties &&
                    ratio_ok(c->ctr, double(oc.clicks), double(oc.impressions)) &&
                    ratio_ok(c->bounce_rate, double(oc.bounces), double(oc.click_events)) &&
                    std::abs(c->preference_score - pref) <= 1e-12;
    if (!ok) {
      ++mismatches;
      note += " " + id;
    }
  }

  // Session-disjoint split by session number parity.
  std::vector<SystemRecord> registry;
  for (const auto& e : h.server().systems()) registry.push_back(e.record);
  std::map<std::string, bool> imp_half;
  std::vector<LogRecord> halves[2];
  for (const auto& r : log) {
    const auto& sid = session_of(r);
    const bool odd = (sid.back() - '0') % 2 == 1;
    halves[odd].push_back(r);
    if (const auto* imp = std::get_if<ImpressionRecord>(&r)) imp_half[imp->impression_id] = odd;
  }
  std::vector<OutcomeRecord> outcome_halves[2];
  const auto outcomes = h.server().applied_outcomes();
  for (const auto& o : outcomes) outcome_halves[imp_half.at(o.impression_id)].push_back(o);
  const metrics::MetricsOptions opts{cfg.bounce_threshold_ms};
  const auto whole = metrics::build_scorecards(log, outcomes, registry, opts);
  const auto merged = metrics::merge_scorecards(metrics::build_scorecards(halves[0], outcome_halves[0], registry, opts),
                                                metrics::build_scorecards(halves[1], outcome_halves[1], registry, opts));
  const bool additive = whole == merged;

  std::uint64_t impressions = 0;
  for (const auto& [_, oc] : counts) impressions += oc.impressions;
  return {mismatches == 0 && additive && systems == 6,
          fmt("systems=%zu mismatched=%zu additive=%s records=%zu impressions=%llu%s", systems, mismatches,
              additive ? "yes" : "no", log.size(), static_cast<unsigned long long>(impressions), note.c_str())};
}

// 8. An endpoint that times out on 30% of calls.
Verdict availability() {
  std::size_t requests = 0, served = 0, baseline_ok = 0, fallbacks = 0;
  std::size_t leaked = 0;
  double timeout_share = 0;
  for (const auto mode : {sim::Mode::inproc, sim::Mode::wire}) {
    sim::CampaignConfig cfg;
    cfg.seed = 808;
    cfg.mode = mode;
    cfg.adhoc_share = 1.0;
    cfg.systems = {stub("flaky", Task::adhoc, sim::Strategy::ideal, SystemKind::endpoint_backed, 0.3)};
    sim::Harness h(cfg);
    const std::size_t n = mode == sim::Mode::inproc ? 3000 : 20;
    std::set<std::string> fallback_ids;
    for (std::size_t i = 0; i < n; ++i) {
      const auto trace = h.run_session(i);
      ++requests;
      if (!trace.served || trace.served->items.empty()) continue;
      ++served;
      const auto rec = h.app().impression(trace.served->impression_id);
      if (!rec || !rec->fallback()) {
        ++baseline_ok;
        continue;
      }
      ++fallbacks;
      fallback_ids.insert(rec->impression_id);
      const auto& base = h.world().candidates.at(trace.plan.context).candidates;
      if (std::equal(trace.served->items.begin(), trace.served->items.end(), base.begin()) &&
          trace.served->items.size() == std::min(cfg.page_size, base.size())) {
        ++baseline_ok;
      }
    }
    h.ship();
    for (const auto& o : h.server().applied_outcomes()) leaked += fallback_ids.count(o.impression_id);
    const auto c = card_of(h.report(), "flaky");
    if (c) leaked += (c->wins + c->losses + c->ties) != (c->impressions);
    if (mode == sim::Mode::inproc) {
      timeout_share = static_cast<double>(h.transport()->injected_timeouts()) /
                      static_cast<double>(std::max<std::uint64_t>(1, h.transport()->calls()));
    }
  }
  const bool pass = requests == served && served == baseline_ok && leaked == 0 && fallbacks > 0 &&
                    std::abs(timeout_share - 0.3) < 0.05;
  return {pass, fmt("requests=%zu served=%zu baseline-quality=%zu fallbacks=%zu injected=%.3f leaked-outcomes=%zu",
                    requests, served, baseline_ok, fallbacks, timeout_share, leaked)};
}

// 9. Exactly-once aggregation under hostile delivery.
Verdict exactly_once() {
  sim::CampaignConfig cfg;
  cfg.seed = 909;
  cfg.systems = {stub("ideal", Task::adhoc, sim::Strategy::ideal), stub("rec", Task::recommendation, sim::Strategy::ideal)};
  sim::Harness h(cfg);
  std::vector<Snapshot> segments;
  h.app().set_sink([&](const Snapshot& s) {
    segments.push_back(s);
    return true;
  });
  for (std::size_t i = 0; segments.size() < 100; ++i) {
    h.run_session(i);
    h.app().ship();
  }

  auto fresh = [&] {
    server::ServerConfig scfg;
    scfg.baselines = {{sim::kBaselineAdhoc, SystemKind::baseline, Task::adhoc, std::nullopt, std::nullopt},
                      {sim::kBaselineRecommendation, SystemKind::baseline, Task::recommendation, std::nullopt,
                       std::nullopt}};
    scfg.participant_tokens["p"] = "team";
    auto s = std::make_unique<server::CentralServer>(scfg, h.world().candidates, nullptr, [] { return TimestampMs{0}; });
    s->register_system({SystemId("ideal"), SystemKind::endpoint_backed, Task::adhoc, "stub://ideal", std::nullopt}, "p");
    s->register_system({SystemId("rec"), SystemKind::endpoint_backed, Task::recommendation, "stub://rec", std::nullopt},
                       "p");
    return s;
  };
  auto in_order = fresh();
  for (const auto& s : segments) in_order->ingest_app_snapshot(s);
  const auto expected = in_order->build_dashboard_report();

  std::size_t identical = 0, gap_held = 0;
  const int trials = 20;
  for (int t = 0; t < trials; ++t) {
    std::mt19937_64 rng(9000 + t);
    std::vector<std::size_t> order(segments.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::size_t> missing(order.begin(), order.begin() + 10);
    std::vector<std::size_t> first(order.begin() + 10, order.end());
    for (int d = 0; d < 40; ++d) first.push_back(first[rng() % first.size()]);
    std::shuffle(first.begin(), first.end(), rng);

    auto s = fresh();
    for (auto i : first) s->ingest_app_snapshot(segments[i]);
    const auto lowest_missing = *std::min_element(missing.begin(), missing.end()) + 1;
    const auto probe = s->ingest_app_snapshot(segments[first.front()]);
    gap_held += probe.next_expected == lowest_missing;
    for (int d = 0; d < 10; ++d) missing.push_back(order[rng() % order.size()]);
    std::shuffle(missing.begin(), missing.end(), rng);
    for (auto i : missing) s->ingest_app_snapshot(segments[i]);
    identical += s->build_dashboard_report().dump() == expected.dump();
  }
  return {identical == trials && gap_held == trials,
          fmt("segments=%zu trials=%d identical=%zu gap-held=%zu records=%s", segments.size(), trials, identical,
              gap_held, expected["totals"]["records"].dump().c_str())};
}

// 10. Full wire campaign, twice.
Verdict reproducible() {
  const auto t0 = Clock::now();
  const auto cfg = sim::load_campaign_config(kSourceDir / "tools" / "config" / "campaign.json");
  const auto first = sim::run_campaign(cfg)["report"].dump();
  const auto second = sim::run_campaign(cfg)["report"].dump();
  const double secs = seconds_since(t0);
  const bool pass = cfg.mode == sim::Mode::wire && cfg.systems.size() == 3 && first == second && secs < 300.0;
  return {pass, fmt("sessions=%zu bytes=%zu identical=%s time=%.1fs (need <300s)", cfg.sessions, first.size(),
                    first == second ? "yes" : "no", secs)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
      {"tdi-fairness", tdi_fairness},     {"tdi-sensitivity", tdi_sensitivity}, {"tdi-structure", tdi_structure},
      {"run-parsing", run_parsing},       {"assignment", assignment_balance},   {"k-clamp", k_clamp},
      {"metrics-exact", metrics_exact},   {"availability", availability},       {"exactly-once", exactly_once},
      {"reproducible-wire", reproducible}};
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failed += !v.pass;
    std::printf("%s %2zu %-18s %s\n", v.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, v.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed ? 1 : 0;
}
