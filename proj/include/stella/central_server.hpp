#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "stella/assignment.hpp"
#include "stella/metrics.hpp"
#include "stella/run_ingest.hpp"
#include "stella/snapshot.hpp"
#include "stella/system_client.hpp"

namespace stella::server {

enum class Status { submitted, validated, live, retired };

std::string_view to_string(Status s) noexcept;
Status parse_status(std::string_view s);

struct RegistryEntry {
  SystemRecord record;
  std::string participant;
  Status status = Status::submitted;
  TimestampMs submitted_at = 0;
  std::optional<nlohmann::json> validation;  // last run-ingest report

  friend bool operator==(const RegistryEntry&, const RegistryEntry&) = default;
};

void to_json(nlohmann::json& j, const RegistryEntry& e);
void from_json(const nlohmann::json& j, RegistryEntry& e);

struct ServerConfig {
  std::string host = "127.0.0.1";
  int port = 8090;
  std::optional<std::filesystem::path> data_dir;
  std::filesystem::path candidates_path;

  std::map<std::string, std::string> participant_tokens;  // token -> participant
  std::string admin_token;
  /// app id -> token. Empty means snapshots are accepted from any app.
  std::map<std::string, std::string> app_tokens;

  /// Production systems, registered as live at startup.
  std::vector<SystemRecord> baselines;
  /// Reported as metadata only.
  std::vector<assignment::ExperimentConfig> experiments;
  TimestampMs bounce_threshold_ms = metrics::kDefaultBounceThresholdMs;
};

ServerConfig load_server_config(const std::filesystem::path& path);
void from_json(const nlohmann::json& j, ServerConfig& cfg);

enum class IngestStatus { applied, parked, duplicate };

struct IngestResult {
  IngestStatus status = IngestStatus::applied;
  std::uint64_t next_expected = 1;
};

/// Registry, run uploads, snapshot aggregation and the dashboard report.
class CentralServer {
 public:
  using Clock = std::function<TimestampMs()>;

  CentralServer(ServerConfig cfg, ingest::CandidateMap candidates,
                std::shared_ptr<app::SystemTransport> liveness = nullptr, Clock clock = {});

  RegistryEntry register_system(SystemRecord record, const std::string& token,
                                std::optional<std::string> run_text = std::nullopt);
  /// Parses and validates a run file against the candidate lists. An
  /// accepted run moves the system to `validated`; a rejected one stays
  /// `submitted` with the report attached.
  RegistryEntry upload_run(const SystemId& id, std::string_view run_text, const std::string& token);
  /// Advances one step along submitted -> validated -> live -> retired.
  /// Endpoint-backed systems are validated by a liveness probe.
  RegistryEntry transition(const SystemId& id, Status to, const std::string& token);

  std::vector<RegistryEntry> systems() const;
  std::optional<RegistryEntry> system(const SystemId& id) const;
  std::optional<std::string> run_text(const SystemId& id) const;
  /// Participant name for a token, "admin", an app id, or nullopt.
  std::optional<std::string> authenticate(const std::string& token) const;

  /// Applies segments exactly once per (app, seq). Early segments are
  /// parked until the gap before them is filled.
  IngestResult ingest_app_snapshot(const Snapshot& snapshot, const std::string& token = {});

  nlohmann::json build_dashboard_report() const;
  std::string build_text_report() const;

  /// Applied records in aggregation order (app id, then sequence).
  std::vector<LogRecord> applied_records() const;
  /// Latest outcome per impression, in order of first appearance.
  std::vector<OutcomeRecord> applied_outcomes() const;

 private:
  struct AppStream {
    std::uint64_t next_expected = 1;
    std::map<std::uint64_t, Snapshot> applied;
    std::map<std::uint64_t, Snapshot> parked;
    std::mutex commit_mu;  // single writer per app stream
  };

  RegistryEntry& owned_entry(const SystemId& id, const std::string& token);
  void persist_registry() const;
  void persist_segment(const Snapshot& s) const;
  void load_state();
  AppStream& stream(const std::string& app_id);

  ServerConfig cfg_;
  ingest::CandidateMap candidates_;
  std::shared_ptr<app::SystemTransport> liveness_;
  Clock clock_;
  std::unique_ptr<ingest::RunStore> runs_;

  mutable std::shared_mutex registry_mu_;
  std::map<SystemId, RegistryEntry> registry_;

  mutable std::shared_mutex streams_mu_;
  std::map<std::string, std::unique_ptr<AppStream>> streams_;

  mutable std::mutex report_mu_;
  mutable std::optional<nlohmann::json> report_cache_;
};

}  // namespace stella::server
