#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "stella/assignment.hpp"
#include "stella/event_log.hpp"
#include "stella/interleave.hpp"
#include "stella/run_ingest.hpp"
#include "stella/snapshot.hpp"
#include "stella/system_client.hpp"

namespace stella::app {

struct AppConfig {
  std::string app_id = "app";
  std::string host = "127.0.0.1";
  int port = 8080;

  /// Central server to pull the registry from and push snapshots to.
  std::optional<std::string> server_url;
  std::string server_token;

  std::filesystem::path candidates_path;
  std::filesystem::path queries_path;

  /// Production systems; kind must be `baseline`. Without an endpoint the
  /// baseline serves the candidate-list order.
  SystemRecord baseline_adhoc;
  SystemRecord baseline_recommendation;

  std::chrono::milliseconds deadline = kDefaultDeadline;
  std::size_t default_page_size = interleave::kDefaultTargetLength;

  /// Recommendation A/B experiment. Empty arms mean "baseline plus every
  /// live recommendation system", in system id order.
  assignment::ExperimentConfig experiment;

  /// Static registry used when no server is configured.
  std::vector<SystemRecord> systems;
  std::map<std::string, std::filesystem::path> runs;  // run_ref -> run file

  std::optional<std::filesystem::path> log_path;
  std::chrono::milliseconds ship_interval{1000};
  /// How often `app serve` pulls the live registry again; 0 disables.
  std::chrono::milliseconds reload_interval{10000};
};

AppConfig load_app_config(const std::filesystem::path& path);
void from_json(const nlohmann::json& j, AppConfig& cfg);

struct ServingData {
  ingest::CandidateMap candidates;
  ingest::QueryMap queries;
};

struct RankingRequest {
  std::optional<QueryId> query_id;
  std::optional<std::string> query_text;
  std::string session_id;
  std::size_t page_size = interleave::kDefaultTargetLength;
  std::optional<TimestampMs> at;  // client event time; the app clock otherwise
};

struct RecommendationRequest {
  SeedId seed_id;
  std::string session_id;
  int requested_k = 0;
  std::optional<TimestampMs> at;
};

/// Public payload. Carries no team labels and no system identity.
struct ServedList {
  std::string impression_id;
  std::vector<DocId> items;

  friend bool operator==(const ServedList&, const ServedList&) = default;
};

void to_json(nlohmann::json& j, const ServedList& s);
void from_json(const nlohmann::json& j, ServedList& s);

struct FeedbackAck {
  bool duplicate = false;
};

struct AppStats {
  std::uint64_t impressions = 0;
  std::uint64_t fallbacks = 0;
  std::uint64_t skips = 0;
  std::map<SystemId, std::uint64_t> adhoc_selections;  // round-robin picks per arm
  std::size_t log_records = 0;
  std::uint64_t shipped_seq = 0;
  std::size_t pending_snapshots = 0;
};

/// Delivers one snapshot; returns false to keep it queued for retry.
using SnapshotSink = std::function<bool(const Snapshot&)>;

/// The on-premise mediator between the host portal, the production
/// baselines and the experimental systems.
class SiteApp {
 public:
  using Clock = std::function<TimestampMs()>;

  SiteApp(AppConfig cfg, ServingData data, std::shared_ptr<SystemTransport> transport, Clock clock = {});
  ~SiteApp();

  SiteApp(const SiteApp&) = delete;
  SiteApp& operator=(const SiteApp&) = delete;

  /// Installs a new set of live experimental systems and their runs.
  void update_registry(std::vector<SystemRecord> systems, std::map<std::string, ingest::RunSet> runs);

  ServedList handle_ranking(const RankingRequest& req);
  /// nullopt means the panel is skipped.
  std::optional<ServedList> handle_recommendation(const RecommendationRequest& req);
  FeedbackAck record_feedback(const FeedbackEvent& event);

  /// Cuts the records written since the last cut into a new snapshot and
  /// queues it for delivery. nullopt when nothing changed.
  std::optional<Snapshot> cut_snapshot();
  void set_sink(SnapshotSink sink);
  /// Cuts a snapshot and pushes every queued snapshot, oldest first.
  /// Returns how many were delivered.
  std::size_t ship();

  AppStats stats() const;
  const EventLog& log() const noexcept { return *log_; }
  const AppConfig& config() const noexcept { return cfg_; }
  assignment::ExperimentConfig experiment() const;

  /// Interleaved impression as stored, including team labels.
  std::optional<ImpressionRecord> impression(const std::string& impression_id) const;

 private:
  struct ServingState;
  struct StoredImpression {
    ImpressionRecord record;
    std::unordered_set<DocId> clicked;
    std::optional<Outcome> outcome;
    std::uint64_t order = 0;
  };

  std::shared_ptr<const ServingState> state() const;
  const SystemRecord* find_system(const ServingState& st, const SystemId& id) const;
  ContextId resolve_context(const RankingRequest& req, std::optional<std::string>& text) const;
  std::string next_impression_id(const std::string& session_id);
  TimestampMs now(const std::optional<TimestampMs>& at) const;
  Ranking baseline_ranking(const ServingState& st, const SystemRecord& baseline, const SystemQuery& q) const;
  Ranking system_ranking(const ServingState& st, const SystemRecord& sys, const SystemQuery& q) const;
  void log_impression(const ImpressionRecord& rec);
  void restore_from_log();
  void persist_ship_state();

  AppConfig cfg_;
  const ServingData data_;
  std::unordered_map<std::string, QueryId> query_by_text_;
  std::shared_ptr<SystemTransport> transport_;
  Clock clock_;

  mutable std::mutex state_mu_;
  std::shared_ptr<const ServingState> state_;

  std::atomic<std::uint64_t> round_robin_{0};

  // Everything below is guarded by log_mu_: the single serialized appender.
  mutable std::mutex log_mu_;
  std::unique_ptr<EventLog> log_;
  std::unordered_map<std::string, StoredImpression> impressions_;
  std::unordered_set<std::string> event_ids_;
  std::unordered_map<std::string, std::uint64_t> session_counters_;
  std::map<std::uint64_t, std::string> dirty_outcomes_;  // impression order -> id
  std::uint64_t impression_order_ = 0;
  AppStats stats_;
  std::size_t cut_offset_ = 0;
  std::uint64_t next_seq_ = 1;

  struct Pending {
    Snapshot snapshot;
    std::size_t end_offset;
  };
  mutable std::mutex ship_mu_;
  std::deque<Pending> pending_;
  SnapshotSink sink_;
};

}  // namespace stella::app
