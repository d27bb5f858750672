#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "stella/core.hpp"

namespace stella {

/// One served result panel, as stored server-side. Team labels never leave
/// the app in public payloads; they live here.
struct ImpressionRecord {
  std::string impression_id;
  std::string session_id;
  Task task = Task::adhoc;
  ContextId context;
  std::vector<DocId> items;
  std::vector<TeamLabel> teams;  // parallel to items; interleaved impressions only
  SystemId system;               // system credited with the impression
  std::optional<SystemId> baseline;       // interleaving partner
  std::optional<SystemId> fallback_from;  // selected system that failed
  TimestampMs at = 0;

  bool interleaved() const noexcept { return !teams.empty(); }
  bool fallback() const noexcept { return fallback_from.has_value(); }

  friend bool operator==(const ImpressionRecord&, const ImpressionRecord&) = default;
};

using LogRecord = std::variant<ImpressionRecord, FeedbackEvent>;

/// Latest click credit of an interleaved impression.
struct OutcomeRecord {
  std::string impression_id;
  SystemId experimental;
  SystemId baseline;
  Outcome outcome = Outcome::tie;

  friend bool operator==(const OutcomeRecord&, const OutcomeRecord&) = default;
};

const std::string& session_of(const LogRecord& r) noexcept;
TimestampMs time_of(const LogRecord& r) noexcept;

void to_json(nlohmann::json& j, const ImpressionRecord& r);
void from_json(const nlohmann::json& j, ImpressionRecord& r);
void to_json(nlohmann::json& j, const LogRecord& r);
void from_json(const nlohmann::json& j, LogRecord& r);
void to_json(nlohmann::json& j, const OutcomeRecord& r);
void from_json(const nlohmann::json& j, OutcomeRecord& r);

/// Append-only record log. On disk every record is a 4-byte little-endian
/// length followed by that many bytes of JSON. Opening an existing file
/// replays it; a torn final record is truncated away.
class EventLog {
 public:
  EventLog() = default;  // memory only
  explicit EventLog(std::filesystem::path path);

  EventLog(const EventLog&) = delete;
  EventLog& operator=(const EventLog&) = delete;

  /// Returns the 0-based offset of the appended record.
  std::size_t append(const LogRecord& record);
  std::size_t size() const;
  std::vector<LogRecord> read_from(std::size_t offset) const;
  std::vector<LogRecord> read_all() const { return read_from(0); }
  const std::filesystem::path& path() const noexcept { return path_; }

  static std::vector<LogRecord> replay(const std::filesystem::path& path);

 private:
  std::filesystem::path path_;
  mutable std::mutex mu_;
  std::ofstream out_;
  std::vector<LogRecord> records_;
};

}  // namespace stella
