#pragma once

// Reference implementations written independently of src/, used as test
// oracles. Plain strings and ints only; no library types beyond the log.

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "stella/event_log.hpp"

namespace oracle {

using Docs = std::vector<std::string>;

struct Drafted {
  Docs docs;
  std::vector<int> team;  // 0 baseline, 1 experimental
};

/// Team draft over two lists; coin[r] true means list `a` (baseline) picks
/// first in round r.
inline Drafted tdi(const Docs& a, const Docs& b, std::size_t target, const std::vector<bool>& coins) {
  Drafted out;
  std::set<std::string> used;
  std::size_t ia = 0, ib = 0, round = 0;
  auto pick = [&](const Docs& list, std::size_t& i, int team) {
    while (i < list.size() && used.count(list[i])) ++i;
    if (i == list.size() || out.docs.size() == target) return;
    used.insert(list[i]);
    out.docs.push_back(list[i]);
    out.team.push_back(team);
  };
  while (out.docs.size() < target) {
    auto skip = [&](const Docs& l, std::size_t& i) {
      while (i < l.size() && used.count(l[i])) ++i;
      return i == l.size();
    };
    if (skip(a, ia) && skip(b, ib)) break;
    const bool a_first = coins.at(round++);
    if (a_first) {
      pick(a, ia, 0);
      pick(b, ib, 1);
    } else {
      pick(b, ib, 1);
      pick(a, ia, 0);
    }
  }
  return out;
}

/// Exact win/loss probabilities of one interleaved list under a cascade
/// user: scan top-down, click with prob rel[i], continue after a click
/// with prob `cont`. Dynamic programme over the click difference.
struct WinLoss {
  double win = 0.0;   // experimental more clicks
  double loss = 0.0;  // baseline more clicks
};

inline WinLoss cascade_outcome(const std::vector<double>& rel, const std::vector<int>& team, double cont) {
  const int n = static_cast<int>(rel.size());
  // state: diff (exp - base) + n -> probability, for users still scanning
  std::vector<double> scanning(2 * n + 1, 0.0), stopped(2 * n + 1, 0.0);
  scanning[n] = 1.0;
  for (int i = 0; i < n; ++i) {
    std::vector<double> next(2 * n + 1, 0.0);
    const int step = team[i] == 1 ? 1 : -1;
    for (int d = 0; d <= 2 * n; ++d) {
      const double p = scanning[d];
      if (p == 0.0) continue;
      next[d] += p * (1.0 - rel[i]);
      const double clicked = p * rel[i];
      next[d + step] += clicked * cont;
      stopped[d + step] += clicked * (1.0 - cont);
    }
    scanning = std::move(next);
  }
  WinLoss wl;
  for (int d = 0; d <= 2 * n; ++d) {
    const double p = scanning[d] + stopped[d];
    if (d > n) wl.win += p;
    if (d < n) wl.loss += p;
  }
  return wl;
}

/// Scorecard counts by a single pass over a time-sorted copy of the log.
struct Counts {
  std::uint64_t impressions = 0, clicks = 0, click_events = 0, bounces = 0, votes_up = 0, votes_down = 0,
                fallbacks = 0;
};

inline std::map<std::string, Counts> replay_counts(const std::vector<stella::LogRecord>& log, std::int64_t threshold) {
  std::map<std::string, std::string> owner;
  std::map<std::string, std::vector<std::pair<std::int64_t, std::size_t>>> sessions;
  for (std::size_t i = 0; i < log.size(); ++i) {
    sessions[stella::session_of(log[i])].push_back({stella::time_of(log[i]), i});
  }
  std::map<std::string, Counts> out;
  std::set<std::string> clicked;
  std::map<std::pair<std::string, std::string>, std::map<std::string, stella::EventKind>> votes;  // (system, session)
  for (const auto& r : log) {
    if (const auto* imp = std::get_if<stella::ImpressionRecord>(&r)) {
      owner[imp->impression_id] = imp->system.str();
      ++out[imp->system.str()].impressions;
      if (imp->fallback_from) ++out[imp->fallback_from->str()].fallbacks;
    }
  }
  for (auto& [sid, idx] : sessions) {
    std::stable_sort(idx.begin(), idx.end(), [](auto& x, auto& y) { return x.first < y.first; });
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const auto* ev = std::get_if<stella::FeedbackEvent>(&log[idx[k].second]);
      if (!ev) continue;
      const std::string sys = owner.at(ev->impression_id);
      Counts& c = out[sys];
      if (ev->kind == stella::EventKind::click) {
        ++c.click_events;
        if (clicked.insert(ev->impression_id).second) ++c.clicks;
        bool bounce = true;
        if (k + 1 < idx.size()) {
          const auto* nx = std::get_if<stella::FeedbackEvent>(&log[idx[k + 1].second]);
          bounce = nx && nx->kind == stella::EventKind::page_leave && nx->at - ev->at <= threshold;
        }
        if (bounce) ++c.bounces;
      } else if (ev->kind == stella::EventKind::vote_up || ev->kind == stella::EventKind::vote_down) {
        votes[{sys, sid}][ev->doc->str()] = ev->kind;
      }
    }
  }
  for (const auto& [key, docs] : votes) {
    for (const auto& [_, kind] : docs) {
      (kind == stella::EventKind::vote_up ? out[key.first].votes_up : out[key.first].votes_down) += 1;
    }
  }
  return out;
}

/// Outcome tallies from raw clicks: per interleaved, non-fallback
/// impression compare distinct clicked docs per team.
struct Tally {
  std::uint64_t wins = 0, losses = 0, ties = 0;
};

inline std::map<std::string, Tally> replay_outcomes(const std::vector<stella::LogRecord>& log) {
  std::map<std::string, std::set<std::string>> clicks;
  for (const auto& r : log) {
    const auto* ev = std::get_if<stella::FeedbackEvent>(&r);
    if (ev && ev->kind == stella::EventKind::click) clicks[ev->impression_id].insert(ev->doc->str());
  }
  std::map<std::string, Tally> out;
  for (const auto& r : log) {
    const auto* imp = std::get_if<stella::ImpressionRecord>(&r);
    if (!imp || imp->teams.empty() || imp->fallback_from) continue;
    int e = 0, b = 0;
    for (std::size_t i = 0; i < imp->items.size(); ++i) {
      if (!clicks[imp->impression_id].count(imp->items[i].str())) continue;
      (imp->teams[i] == stella::TeamLabel::experimental ? e : b) += 1;
    }
    Tally& t = out[imp->system.str()];
    Tally& base = out[imp->baseline->str()];
    if (e > b) {
      ++t.wins;
      ++base.losses;
    } else if (b > e) {
      ++t.losses;
      ++base.wins;
    } else {
      ++t.ties;
      ++base.ties;
    }
  }
  return out;
}

}  // namespace oracle
