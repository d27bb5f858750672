#include "stella/core.hpp"

#include <array>
#include <unordered_set>
#include <utility>

namespace stella {

namespace {

template <class Enum, std::size_t N>
Enum parse_enum(std::string_view s, const std::array<std::pair<std::string_view, Enum>, N>& table,
                std::string_view what) {
  for (const auto& [name, value] : table) {
    if (name == s) return value;
  }
  throw Error(ErrorCode::InvalidRecord, "unknown " + std::string(what) + " '" + std::string(s) + "'");
}

constexpr std::array<std::pair<std::string_view, Task>, 2> kTasks{{
    {"adhoc", Task::adhoc},
    {"recommendation", Task::recommendation},
}};
constexpr std::array<std::pair<std::string_view, SystemKind>, 3> kKinds{{
    {"run_backed", SystemKind::run_backed},
    {"endpoint_backed", SystemKind::endpoint_backed},
    {"baseline", SystemKind::baseline},
}};
constexpr std::array<std::pair<std::string_view, EventKind>, 5> kEvents{{
    {"impression", EventKind::impression},
    {"click", EventKind::click},
    {"vote_up", EventKind::vote_up},
    {"vote_down", EventKind::vote_down},
    {"page_leave", EventKind::page_leave},
}};
constexpr std::array<std::pair<std::string_view, Outcome>, 3> kOutcomes{{
    {"win_experimental", Outcome::win_experimental},
    {"win_baseline", Outcome::win_baseline},
    {"tie", Outcome::tie},
}};
constexpr std::array<std::pair<std::string_view, TeamLabel>, 2> kTeams{{
    {"baseline", TeamLabel::baseline},
    {"experimental", TeamLabel::experimental},
}};

template <class Enum, std::size_t N>
std::string_view name_of(Enum v, const std::array<std::pair<std::string_view, Enum>, N>& table) noexcept {
  for (const auto& [name, value] : table) {
    if (value == v) return name;
  }
  return "?";
}

}  // namespace

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidToken: return "InvalidToken";
    case ErrorCode::DuplicateDoc: return "DuplicateDoc";
    case ErrorCode::EmptyRanking: return "EmptyRanking";
    case ErrorCode::InvalidRecord: return "InvalidRecord";
    case ErrorCode::FieldCount: return "FieldCount";
    case ErrorCode::BadQ0: return "BadQ0";
    case ErrorCode::BadRank: return "BadRank";
    case ErrorCode::BadScore: return "BadScore";
    case ErrorCode::DuplicateDocForQuery: return "DuplicateDocForQuery";
    case ErrorCode::MixedTags: return "MixedTags";
    case ErrorCode::DepthExceeded: return "DepthExceeded";
    case ErrorCode::DuplicateContext: return "DuplicateContext";
    case ErrorCode::EmptyCandidates: return "EmptyCandidates";
    case ErrorCode::BadFormat: return "BadFormat";
    case ErrorCode::ContextMismatch: return "ContextMismatch";
    case ErrorCode::UnknownClickedDoc: return "UnknownClickedDoc";
    case ErrorCode::NoBaseline: return "NoBaseline";
    case ErrorCode::UnknownImpression: return "UnknownImpression";
    case ErrorCode::DuplicateEvent: return "DuplicateEvent";
    case ErrorCode::BadRequest: return "BadRequest";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::MalformedResponse: return "MalformedResponse";
    case ErrorCode::OutOfCandidates: return "OutOfCandidates";
    case ErrorCode::Transport: return "Transport";
    case ErrorCode::DuplicateSystemId: return "DuplicateSystemId";
    case ErrorCode::AuthFailure: return "AuthFailure";
    case ErrorCode::UnknownSystem: return "UnknownSystem";
    case ErrorCode::BadTransition: return "BadTransition";
    case ErrorCode::GapDetected: return "GapDetected";
    case ErrorCode::DuplicateSegment: return "DuplicateSegment";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& detail, std::size_t line)
    : std::runtime_error(std::string(to_string(code)) + (line ? " (line " + std::to_string(line) + ")" : "") +
                         ": " + detail),
      code_(code),
      detail_(detail),
      line_(line) {}

bool is_token(std::string_view s) noexcept {
  if (s.empty()) return false;
  for (unsigned char c : s) {
    if (c <= 0x20 || c == 0x7f) return false;
  }
  return true;
}

std::string_view to_string(Task t) noexcept { return name_of(t, kTasks); }
std::string_view to_string(SystemKind k) noexcept { return name_of(k, kKinds); }
std::string_view to_string(EventKind k) noexcept { return name_of(k, kEvents); }
std::string_view to_string(Outcome o) noexcept { return name_of(o, kOutcomes); }
std::string_view to_string(TeamLabel t) noexcept { return name_of(t, kTeams); }

Task parse_task(std::string_view s) { return parse_enum(s, kTasks, "task"); }
SystemKind parse_system_kind(std::string_view s) { return parse_enum(s, kKinds, "system kind"); }
EventKind parse_event_kind(std::string_view s) { return parse_enum(s, kEvents, "event kind"); }
Outcome parse_outcome(std::string_view s) { return parse_enum(s, kOutcomes, "outcome"); }
TeamLabel parse_team_label(std::string_view s) { return parse_enum(s, kTeams, "team label"); }

std::optional<Error> validate_ranking(const Ranking& r) {
  if (r.items.empty()) return Error(ErrorCode::EmptyRanking, "ranking for '" + r.context.str() + "' is empty");
  std::unordered_set<std::string_view> seen;
  seen.reserve(r.items.size());
  for (const auto& d : r.items) {
    if (!is_token(d.str())) return Error(ErrorCode::InvalidToken, "invalid doc id '" + d.str() + "'");
    if (!seen.insert(d.str()).second) return Error(ErrorCode::DuplicateDoc, d.str());
  }
  return std::nullopt;
}

std::optional<Error> validate_system_record(const SystemRecord& s) {
  if (!is_token(s.system_id.str())) return Error(ErrorCode::InvalidToken, "invalid system id");
  switch (s.kind) {
    case SystemKind::endpoint_backed:
      if (!s.endpoint || s.run_ref) {
        return Error(ErrorCode::InvalidRecord, s.system_id.str() + ": endpoint_backed needs endpoint and no run_ref");
      }
      break;
    case SystemKind::run_backed:
      if (!s.run_ref || s.endpoint) {
        return Error(ErrorCode::InvalidRecord, s.system_id.str() + ": run_backed needs run_ref and no endpoint");
      }
      break;
    case SystemKind::baseline:
      if (s.endpoint && s.run_ref) {
        return Error(ErrorCode::InvalidRecord, s.system_id.str() + ": baseline has both endpoint and run_ref");
      }
      break;
  }
  return std::nullopt;
}

std::optional<Error> validate_feedback_event(const FeedbackEvent& e, std::optional<std::size_t> list_length) {
  if (!is_token(e.event_id) || !is_token(e.session_id) || !is_token(e.impression_id)) {
    return Error(ErrorCode::InvalidToken, "event, session and impression ids must be tokens");
  }
  if (e.kind == EventKind::click && !e.position) {
    return Error(ErrorCode::InvalidRecord, "click without position");
  }
  const bool needs_doc = e.kind == EventKind::click || e.kind == EventKind::vote_up || e.kind == EventKind::vote_down;
  if (needs_doc && !e.doc) return Error(ErrorCode::InvalidRecord, std::string(to_string(e.kind)) + " without doc");
  if (e.position) {
    if (*e.position < 1) return Error(ErrorCode::InvalidRecord, "position must be >= 1");
    if (list_length && static_cast<std::size_t>(*e.position) > *list_length) {
      return Error(ErrorCode::InvalidRecord, "position " + std::to_string(*e.position) + " beyond list length");
    }
  }
  return std::nullopt;
}

std::optional<Error> validate_session(const Session& s) {
  if (!is_token(s.session_id)) return Error(ErrorCode::InvalidToken, "session id must be a token");
  TimestampMs last = s.started_at;
  for (const auto& e : s.events) {
    if (e.session_id != s.session_id) return Error(ErrorCode::InvalidRecord, "event " + e.event_id + " from another session");
    if (e.at < last) return Error(ErrorCode::InvalidRecord, "event " + e.event_id + " out of order");
    last = e.at;
    if (auto err = validate_feedback_event(e)) return err;
  }
  return std::nullopt;
}

#define STELLA_ENUM_JSON(Type, parse)                                           \
  void to_json(nlohmann::json& j, Type v) { j = std::string(to_string(v)); }   \
  void from_json(const nlohmann::json& j, Type& v) { v = parse(j.get<std::string>()); }

STELLA_ENUM_JSON(Task, parse_task)
STELLA_ENUM_JSON(SystemKind, parse_system_kind)
STELLA_ENUM_JSON(EventKind, parse_event_kind)
STELLA_ENUM_JSON(Outcome, parse_outcome)
STELLA_ENUM_JSON(TeamLabel, parse_team_label)

#undef STELLA_ENUM_JSON

void to_json(nlohmann::json& j, const Ranking& r) {
  j = {{"context", r.context}, {"items", r.items}, {"source", r.source}};
}
void from_json(const nlohmann::json& j, Ranking& r) {
  j.at("context").get_to(r.context);
  j.at("items").get_to(r.items);
  j.at("source").get_to(r.source);
}

void to_json(nlohmann::json& j, const SystemRecord& s) {
  j = {{"system_id", s.system_id}, {"kind", s.kind}, {"task", s.task}};
  if (s.endpoint) j["endpoint"] = *s.endpoint;
  if (s.run_ref) j["run_ref"] = *s.run_ref;
}
void from_json(const nlohmann::json& j, SystemRecord& s) {
  j.at("system_id").get_to(s.system_id);
  j.at("kind").get_to(s.kind);
  j.at("task").get_to(s.task);
  s.endpoint = j.contains("endpoint") ? std::optional(j["endpoint"].get<std::string>()) : std::nullopt;
  s.run_ref = j.contains("run_ref") ? std::optional(j["run_ref"].get<std::string>()) : std::nullopt;
}

void to_json(nlohmann::json& j, const FeedbackEvent& e) {
  j = {{"event_id", e.event_id},
       {"session_id", e.session_id},
       {"impression_id", e.impression_id},
       {"kind", e.kind},
       {"at", e.at}};
  if (e.position) j["position"] = *e.position;
  if (e.doc) j["doc"] = *e.doc;
}
void from_json(const nlohmann::json& j, FeedbackEvent& e) {
  j.at("event_id").get_to(e.event_id);
  j.at("session_id").get_to(e.session_id);
  j.at("impression_id").get_to(e.impression_id);
  j.at("kind").get_to(e.kind);
  j.at("at").get_to(e.at);
  e.position = j.contains("position") ? std::optional(j["position"].get<int>()) : std::nullopt;
  e.doc = j.contains("doc") ? std::optional(j["doc"].get<DocId>()) : std::nullopt;
}

void to_json(nlohmann::json& j, const Session& s) {
  j = {{"session_id", s.session_id}, {"started_at", s.started_at}, {"events", s.events}};
}
void from_json(const nlohmann::json& j, Session& s) {
  j.at("session_id").get_to(s.session_id);
  j.at("started_at").get_to(s.started_at);
  j.at("events").get_to(s.events);
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed) noexcept {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace stella
