#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stella/event_log.hpp"

namespace stella {

/// A sequence-numbered slice of one app's event log plus the outcome
/// updates produced while that slice was written. Sequence numbers start
/// at 1 and increase by one per app.
struct Snapshot {
  std::string app_id;
  std::uint64_t seq = 0;
  std::vector<LogRecord> records;
  std::vector<OutcomeRecord> outcomes;

  friend bool operator==(const Snapshot&, const Snapshot&) = default;
};

void to_json(nlohmann::json& j, const Snapshot& s);
void from_json(const nlohmann::json& j, Snapshot& s);

}  // namespace stella
