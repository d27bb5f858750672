#include "stella/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <tuple>
#include <unordered_map>
#include <unordered_set>

#include "stella/interleave.hpp"

namespace stella::metrics {

namespace {

struct Counts {
  std::uint64_t impressions = 0;
  std::uint64_t click_events = 0;
  std::uint64_t bounces = 0;
  std::uint64_t fallbacks = 0;
  std::unordered_set<std::string> clicked_impressions;
  std::uint64_t votes_up = 0;
  std::uint64_t votes_down = 0;
};

using ImpressionIndex = std::unordered_map<std::string_view, const ImpressionRecord*>;

ImpressionIndex index_impressions(std::span<const LogRecord> log) {
  ImpressionIndex idx;
  for (const auto& r : log) {
    if (const auto* imp = std::get_if<ImpressionRecord>(&r)) idx.emplace(imp->impression_id, imp);
  }
  return idx;
}

/// Records of each session in time order; equal timestamps keep log order.
std::vector<std::vector<const LogRecord*>> by_session(std::span<const LogRecord> log) {
  std::unordered_map<std::string_view, std::size_t> slot;
  std::vector<std::vector<const LogRecord*>> sessions;
  for (const auto& r : log) {
    auto [it, inserted] = slot.emplace(session_of(r), sessions.size());
    if (inserted) sessions.emplace_back();
    sessions[it->second].push_back(&r);
  }
  for (auto& s : sessions) {
    std::stable_sort(s.begin(), s.end(), [](const LogRecord* a, const LogRecord* b) { return time_of(*a) < time_of(*b); });
  }
  return sessions;
}

std::map<SystemId, Counts> accumulate(std::span<const LogRecord> log, TimestampMs threshold) {
  const ImpressionIndex impressions = index_impressions(log);
  std::map<SystemId, Counts> counts;

  for (const auto& session : by_session(log)) {
    // (system, doc) -> last vote in this session
    std::map<std::pair<SystemId, DocId>, EventKind> votes;

    for (std::size_t i = 0; i < session.size(); ++i) {
      const LogRecord& rec = *session[i];
      if (const auto* imp = std::get_if<ImpressionRecord>(&rec)) {
        ++counts[imp->system].impressions;
        if (imp->fallback_from) ++counts[*imp->fallback_from].fallbacks;
        continue;
      }
      const auto& ev = std::get<FeedbackEvent>(rec);
      auto it = impressions.find(ev.impression_id);
      if (it == impressions.end()) continue;
      const ImpressionRecord& imp = *it->second;

      switch (ev.kind) {
        case EventKind::click: {
          Counts& c = counts[imp.system];
          ++c.click_events;
          c.clicked_impressions.insert(imp.impression_id);
          bool bounced = true;
          if (i + 1 < session.size()) {
            const LogRecord& next = *session[i + 1];
            const auto* next_ev = std::get_if<FeedbackEvent>(&next);
            bounced = next_ev && next_ev->kind == EventKind::page_leave && next_ev->at - ev.at <= threshold;
          }
          if (bounced) ++c.bounces;
          break;
        }
        case EventKind::vote_up:
        case EventKind::vote_down:
          if (ev.doc) votes[{imp.system, *ev.doc}] = ev.kind;
          break;
        case EventKind::impression:
        case EventKind::page_leave:
          break;
      }
    }
    for (const auto& [key, kind] : votes) {
      Counts& c = counts[key.first];
      (kind == EventKind::vote_up ? c.votes_up : c.votes_down) += 1;
    }
  }
  return counts;
}

void wilson(std::uint64_t wins, std::uint64_t losses, double& lo, double& hi) {
  const double n = static_cast<double>(wins + losses);
  if (n == 0) {
    lo = 0.0;
    hi = 1.0;
    return;
  }
  constexpr double z = 1.959963984540054;
  const double p = static_cast<double>(wins) / n;
  const double denom = 1.0 + z * z / n;
  const double centre = (p + z * z / (2 * n)) / denom;
  const double half = z * std::sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom;
  lo = std::max(0.0, centre - half);
  hi = std::min(1.0, centre + half);
}

}  // namespace

void SystemScorecard::finalize() {
  ctr = impressions ? std::optional(static_cast<double>(clicks) / static_cast<double>(impressions)) : std::nullopt;
  bounce_rate =
      click_events ? std::optional(static_cast<double>(bounces) / static_cast<double>(click_events)) : std::nullopt;
  preference_score = interleave::preference_score(wins, losses);
  wilson(wins, losses, preference_ci_low, preference_ci_high);
}

std::optional<double> compute_ctr(std::span<const LogRecord> log, const SystemId& system) {
  const auto counts = accumulate(log, kDefaultBounceThresholdMs);
  auto it = counts.find(system);
  if (it == counts.end() || it->second.impressions == 0) return std::nullopt;
  return static_cast<double>(it->second.clicked_impressions.size()) / static_cast<double>(it->second.impressions);
}

std::optional<double> compute_bounce_rate(std::span<const LogRecord> log, const SystemId& system,
                                          TimestampMs dwell_threshold_ms) {
  const auto counts = accumulate(log, dwell_threshold_ms);
  auto it = counts.find(system);
  if (it == counts.end() || it->second.click_events == 0) return std::nullopt;
  return static_cast<double>(it->second.bounces) / static_cast<double>(it->second.click_events);
}

VoteTally tally_votes(std::span<const LogRecord> log, const SystemId& system) {
  const auto counts = accumulate(log, kDefaultBounceThresholdMs);
  auto it = counts.find(system);
  if (it == counts.end()) return {};
  return {it->second.votes_up, it->second.votes_down,
          static_cast<std::int64_t>(it->second.votes_up) - static_cast<std::int64_t>(it->second.votes_down)};
}

std::vector<OutcomeRecord> derive_outcomes(std::span<const LogRecord> log) {
  std::unordered_map<std::string_view, std::vector<DocId>> clicks;
  for (const auto& r : log) {
    const auto* ev = std::get_if<FeedbackEvent>(&r);
    if (ev && ev->kind == EventKind::click && ev->doc) clicks[ev->impression_id].push_back(*ev->doc);
  }
  std::vector<OutcomeRecord> out;
  for (const auto& r : log) {
    const auto* imp = std::get_if<ImpressionRecord>(&r);
    if (!imp || !imp->interleaved() || imp->fallback() || !imp->baseline) continue;
    auto it = clicks.find(imp->impression_id);
    const std::span<const DocId> clicked = it == clicks.end() ? std::span<const DocId>{} : std::span(it->second);
    out.push_back({imp->impression_id, imp->system, *imp->baseline, interleave::credit(imp->items, imp->teams, clicked)});
  }
  return out;
}

std::vector<SystemScorecard> build_scorecards(std::span<const LogRecord> log, std::span<const OutcomeRecord> outcomes,
                                              std::span<const SystemRecord> registry, const MetricsOptions& opts) {
  auto counts = accumulate(log, opts.bounce_threshold_ms);

  std::map<SystemId, SystemScorecard> cards;
  for (const auto& sys : registry) {
    SystemScorecard card;
    card.system_id = sys.system_id;
    card.task = sys.task;
    if (auto it = counts.find(sys.system_id); it != counts.end()) {
      const Counts& c = it->second;
      card.impressions = c.impressions;
      card.clicks = c.clicked_impressions.size();
      card.click_events = c.click_events;
      card.bounces = c.bounces;
      card.votes_up = c.votes_up;
      card.votes_down = c.votes_down;
      card.fallbacks = c.fallbacks;
    }
    cards[sys.system_id] = std::move(card);
  }

  for (const auto& o : outcomes) {
    auto exp = cards.find(o.experimental);
    auto base = cards.find(o.baseline);
    switch (o.outcome) {
      case Outcome::win_experimental:
        if (exp != cards.end()) ++exp->second.wins;
        if (base != cards.end()) ++base->second.losses;
        break;
      case Outcome::win_baseline:
        if (exp != cards.end()) ++exp->second.losses;
        if (base != cards.end()) ++base->second.wins;
        break;
      case Outcome::tie:
        if (exp != cards.end()) ++exp->second.ties;
        if (base != cards.end()) ++base->second.ties;
        break;
    }
  }

  std::vector<SystemScorecard> out;
  out.reserve(cards.size());
  for (auto& [_, card] : cards) {
    card.finalize();
    out.push_back(std::move(card));
  }
  return out;
}

std::vector<SystemScorecard> merge_scorecards(std::span<const SystemScorecard> a, std::span<const SystemScorecard> b) {
  std::map<SystemId, SystemScorecard> merged;
  for (auto part : {a, b}) {
    for (const auto& s : part) {
      auto [it, inserted] = merged.try_emplace(s.system_id, s);
      if (inserted) continue;
      SystemScorecard& m = it->second;
      m.impressions += s.impressions;
      m.clicks += s.clicks;
      m.click_events += s.click_events;
      m.bounces += s.bounces;
      m.votes_up += s.votes_up;
      m.votes_down += s.votes_down;
      m.wins += s.wins;
      m.losses += s.losses;
      m.ties += s.ties;
      m.fallbacks += s.fallbacks;
    }
  }
  std::vector<SystemScorecard> out;
  for (auto& [_, card] : merged) {
    card.finalize();
    out.push_back(std::move(card));
  }
  return out;
}

void to_json(nlohmann::json& j, const SystemScorecard& s) {
  j = {{"system_id", s.system_id},
       {"task", s.task},
       {"impressions", s.impressions},
       {"clicks", s.clicks},
       {"click_events", s.click_events},
       {"bounces", s.bounces},
       {"votes_up", s.votes_up},
       {"votes_down", s.votes_down},
       {"votes_net", static_cast<std::int64_t>(s.votes_up) - static_cast<std::int64_t>(s.votes_down)},
       {"wins", s.wins},
       {"losses", s.losses},
       {"ties", s.ties},
       {"fallbacks", s.fallbacks},
       {"ctr", s.ctr ? nlohmann::json(*s.ctr) : nlohmann::json(nullptr)},
       {"bounce_rate", s.bounce_rate ? nlohmann::json(*s.bounce_rate) : nlohmann::json(nullptr)},
       {"preference_score", s.preference_score},
       {"preference_ci", {s.preference_ci_low, s.preference_ci_high}}};
}

void from_json(const nlohmann::json& j, SystemScorecard& s) {
  j.at("system_id").get_to(s.system_id);
  j.at("task").get_to(s.task);
  j.at("impressions").get_to(s.impressions);
  j.at("clicks").get_to(s.clicks);
  j.at("click_events").get_to(s.click_events);
  j.at("bounces").get_to(s.bounces);
  j.at("votes_up").get_to(s.votes_up);
  j.at("votes_down").get_to(s.votes_down);
  j.at("wins").get_to(s.wins);
  j.at("losses").get_to(s.losses);
  j.at("ties").get_to(s.ties);
  j.at("fallbacks").get_to(s.fallbacks);
  s.finalize();
}

}  // namespace stella::metrics
