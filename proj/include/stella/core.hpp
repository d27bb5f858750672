#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "stella/error.hpp"

namespace stella {

/// True iff `s` is non-empty and free of whitespace and control characters.
bool is_token(std::string_view s) noexcept;

/// Opaque identifier. The tag only separates identifier domains at compile
/// time; no syntax beyond the token rule is imposed.
template <class Tag>
class Id {
 public:
  Id() = default;
  explicit Id(std::string value) : value_(std::move(value)) {
    if (!is_token(value_)) {
      throw Error(ErrorCode::InvalidToken, "invalid identifier '" + value_ + "'");
    }
  }

  const std::string& str() const noexcept { return value_; }
  bool empty() const noexcept { return value_.empty(); }

  friend auto operator<=>(const Id&, const Id&) = default;
  friend bool operator==(const Id&, const Id&) = default;

 private:
  std::string value_;
};

struct DocTag {};
struct ContextTag {};
struct SystemTag {};

using DocId = Id<DocTag>;
/// Query identifier (ad-hoc search) or seed-document identifier
/// (recommendation). Both index candidate lists and run files alike.
using ContextId = Id<ContextTag>;
using QueryId = ContextId;
using SeedId = ContextId;
using SystemId = Id<SystemTag>;

/// UTC milliseconds since the Unix epoch.
using TimestampMs = std::int64_t;

enum class Task { adhoc, recommendation };
enum class SystemKind { run_backed, endpoint_backed, baseline };
enum class EventKind { impression, click, vote_up, vote_down, page_leave };
enum class Outcome { win_experimental, win_baseline, tie };
enum class TeamLabel { baseline, experimental };

std::string_view to_string(Task t) noexcept;
std::string_view to_string(SystemKind k) noexcept;
std::string_view to_string(EventKind k) noexcept;
std::string_view to_string(Outcome o) noexcept;
std::string_view to_string(TeamLabel t) noexcept;

Task parse_task(std::string_view s);
SystemKind parse_system_kind(std::string_view s);
EventKind parse_event_kind(std::string_view s);
Outcome parse_outcome(std::string_view s);
TeamLabel parse_team_label(std::string_view s);

struct Ranking {
  ContextId context;
  std::vector<DocId> items;
  SystemId source;

  friend bool operator==(const Ranking&, const Ranking&) = default;
};

struct SystemRecord {
  SystemId system_id;
  SystemKind kind = SystemKind::baseline;
  Task task = Task::adhoc;
  std::optional<std::string> endpoint;  // base URL, endpoint_backed only
  std::optional<std::string> run_ref;   // run store key, run_backed only

  friend bool operator==(const SystemRecord&, const SystemRecord&) = default;
};

struct FeedbackEvent {
  std::string event_id;
  std::string session_id;
  std::string impression_id;
  EventKind kind = EventKind::click;
  std::optional<int> position;  // 1-based
  std::optional<DocId> doc;
  TimestampMs at = 0;

  friend bool operator==(const FeedbackEvent&, const FeedbackEvent&) = default;
};

struct Session {
  std::string session_id;
  TimestampMs started_at = 0;
  std::vector<FeedbackEvent> events;

  friend bool operator==(const Session&, const Session&) = default;
};

std::optional<Error> validate_ranking(const Ranking& r);
std::optional<Error> validate_system_record(const SystemRecord& s);
std::optional<Error> validate_session(const Session& s);
/// Structural checks only; position bounds against the served list are
/// checked where the impression is known. `list_length` enables that check.
std::optional<Error> validate_feedback_event(const FeedbackEvent& e,
                                             std::optional<std::size_t> list_length = {});

// JSON encoding. Optional fields are omitted when absent.
template <class Tag>
void to_json(nlohmann::json& j, const Id<Tag>& id) {
  j = id.str();
}
template <class Tag>
void from_json(const nlohmann::json& j, Id<Tag>& id) {
  id = Id<Tag>(j.get<std::string>());
}

void to_json(nlohmann::json& j, Task t);
void from_json(const nlohmann::json& j, Task& t);
void to_json(nlohmann::json& j, SystemKind k);
void from_json(const nlohmann::json& j, SystemKind& k);
void to_json(nlohmann::json& j, EventKind k);
void from_json(const nlohmann::json& j, EventKind& k);
void to_json(nlohmann::json& j, Outcome o);
void from_json(const nlohmann::json& j, Outcome& o);
void to_json(nlohmann::json& j, TeamLabel t);
void from_json(const nlohmann::json& j, TeamLabel& t);

void to_json(nlohmann::json& j, const Ranking& r);
void from_json(const nlohmann::json& j, Ranking& r);
void to_json(nlohmann::json& j, const SystemRecord& s);
void from_json(const nlohmann::json& j, SystemRecord& s);
void to_json(nlohmann::json& j, const FeedbackEvent& e);
void from_json(const nlohmann::json& j, FeedbackEvent& e);
void to_json(nlohmann::json& j, const Session& s);
void from_json(const nlohmann::json& j, Session& s);

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL) noexcept;

}  // namespace stella

template <class Tag>
struct std::hash<stella::Id<Tag>> {
  std::size_t operator()(const stella::Id<Tag>& id) const noexcept {
    return std::hash<std::string>{}(id.str());
  }
};
