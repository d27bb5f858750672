#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "stella/core.hpp"
#include "stella/event_log.hpp"

namespace stella::metrics {

inline constexpr TimestampMs kDefaultBounceThresholdMs = 10'000;

struct VoteTally {
  std::uint64_t up = 0;
  std::uint64_t down = 0;
  std::int64_t net = 0;

  friend bool operator==(const VoteTally&, const VoteTally&) = default;
};

struct SystemScorecard {
  SystemId system_id;
  Task task = Task::adhoc;
  std::uint64_t impressions = 0;
  std::uint64_t clicks = 0;        // impressions with at least one click
  std::uint64_t click_events = 0;  // clicked visits, the bounce denominator
  std::uint64_t bounces = 0;
  std::uint64_t votes_up = 0;
  std::uint64_t votes_down = 0;
  std::uint64_t wins = 0;
  std::uint64_t losses = 0;
  std::uint64_t ties = 0;
  std::uint64_t fallbacks = 0;  // impressions where this system was replaced by the baseline

  std::optional<double> ctr;          // clicks / impressions
  std::optional<double> bounce_rate;  // bounces / click_events
  double preference_score = 0.5;
  double preference_ci_low = 0.0;     // Wilson 95% interval, informational
  double preference_ci_high = 1.0;

  /// Recomputes every ratio from the counts.
  void finalize();

  friend bool operator==(const SystemScorecard&, const SystemScorecard&) = default;
};

struct MetricsOptions {
  TimestampMs bounce_threshold_ms = kDefaultBounceThresholdMs;
};

std::optional<double> compute_ctr(std::span<const LogRecord> log, const SystemId& system);
std::optional<double> compute_bounce_rate(std::span<const LogRecord> log, const SystemId& system,
                                          TimestampMs dwell_threshold_ms = kDefaultBounceThresholdMs);
VoteTally tally_votes(std::span<const LogRecord> log, const SystemId& system);

/// Click credit of every non-fallback interleaved impression in the log.
std::vector<OutcomeRecord> derive_outcomes(std::span<const LogRecord> log);

/// One scorecard per registered system, ordered by system id.
std::vector<SystemScorecard> build_scorecards(std::span<const LogRecord> log, std::span<const OutcomeRecord> outcomes,
                                              std::span<const SystemRecord> registry, const MetricsOptions& opts = {});

/// Element-wise sum of two scorecard sets over session-disjoint logs.
std::vector<SystemScorecard> merge_scorecards(std::span<const SystemScorecard> a, std::span<const SystemScorecard> b);

void to_json(nlohmann::json& j, const SystemScorecard& s);
void from_json(const nlohmann::json& j, SystemScorecard& s);

}  // namespace stella::metrics
