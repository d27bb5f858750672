#pragma once

#include <chrono>
#include <optional>
#include <string>

#include "stella/core.hpp"
#include "stella/run_ingest.hpp"

namespace stella::app {

inline constexpr std::chrono::milliseconds kDefaultDeadline{800};

/// What an experimental system is asked for. Ad-hoc requests carry the
/// query id and, when known, the query text; recommendation requests carry
/// the seed document id.
struct SystemQuery {
  Task task = Task::adhoc;
  ContextId context;
  std::optional<std::string> query_text;
};

/// Transport to Type B systems. Implementations return the raw item list
/// and throw Error{Timeout|Transport|MalformedResponse} on failure.
class SystemTransport {
 public:
  virtual ~SystemTransport() = default;
  virtual std::vector<std::string> fetch(const std::string& endpoint, const SystemQuery& q,
                                         std::chrono::milliseconds deadline) = 0;
  virtual bool alive(const std::string& endpoint, std::chrono::milliseconds deadline) = 0;
};

/// Speaks the system-endpoint wire protocol over HTTP.
class HttpTransport final : public SystemTransport {
 public:
  std::vector<std::string> fetch(const std::string& endpoint, const SystemQuery& q,
                                 std::chrono::milliseconds deadline) override;
  bool alive(const std::string& endpoint, std::chrono::milliseconds deadline) override;
};

/// Parses a `{"itemlist": [...]}` body into raw ids.
std::vector<std::string> parse_itemlist(const std::string& body);

/// Calls an endpoint-backed system and validates what it returns: a
/// non-empty duplicate-free token list, inside the candidate list when one
/// is given. Responses slower than `deadline` are discarded as Timeout.
Ranking query_endpoint_system(const SystemRecord& sys, const SystemQuery& q, SystemTransport& transport,
                              const ingest::CandidateList* candidates,
                              std::chrono::milliseconds deadline = kDefaultDeadline);

}  // namespace stella::app
