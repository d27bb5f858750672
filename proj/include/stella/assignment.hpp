#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "stella/core.hpp"

namespace stella::assignment {

struct ExperimentConfig {
  std::string experiment_id;
  Task task = Task::recommendation;
  std::vector<SystemId> arms;
  std::string salt;
  int k_min = 3;
  int k_max = 10;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

std::optional<Error> validate_config(const ExperimentConfig& cfg);

/// FNV-1a 64 over salt, a single 0x00 byte, then the session id.
std::uint64_t session_hash(std::string_view salt, std::string_view session_id) noexcept;

/// Sticky arm for a session: arms[hash mod |arms|].
const SystemId& assign_session(std::string_view session_id, const ExperimentConfig& cfg);

/// Number of recommendations to show, or nullopt when fewer than k_min
/// candidates are available and the panel is suppressed.
std::optional<int> clamp_k(int requested, int available, const ExperimentConfig& cfg);

void to_json(nlohmann::json& j, const ExperimentConfig& cfg);
void from_json(const nlohmann::json& j, ExperimentConfig& cfg);

}  // namespace stella::assignment
