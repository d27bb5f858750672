#include "stella/assignment.hpp"

#include <algorithm>
#include <set>

namespace stella::assignment {

std::optional<Error> validate_config(const ExperimentConfig& cfg) {
  if (cfg.arms.empty()) return Error(ErrorCode::InvalidConfig, cfg.experiment_id + ": no arms");
  std::set<SystemId> seen(cfg.arms.begin(), cfg.arms.end());
  if (seen.size() != cfg.arms.size()) return Error(ErrorCode::InvalidConfig, cfg.experiment_id + ": duplicate arm");
  if (cfg.k_min < 1 || cfg.k_min > cfg.k_max) {
    return Error(ErrorCode::InvalidConfig, cfg.experiment_id + ": need 1 <= k_min <= k_max");
  }
  return std::nullopt;
}

std::uint64_t session_hash(std::string_view salt, std::string_view session_id) noexcept {
  std::uint64_t h = fnv1a64(salt);
  h = fnv1a64(std::string_view("\0", 1), h);
  return fnv1a64(session_id, h);
}

const SystemId& assign_session(std::string_view session_id, const ExperimentConfig& cfg) {
  if (cfg.arms.empty()) throw Error(ErrorCode::InvalidConfig, cfg.experiment_id + ": no arms");
  return cfg.arms[session_hash(cfg.salt, session_id) % cfg.arms.size()];
}

std::optional<int> clamp_k(int requested, int available, const ExperimentConfig& cfg) {
  if (available < cfg.k_min) return std::nullopt;
  return std::min({std::max(requested, cfg.k_min), cfg.k_max, available});
}

void to_json(nlohmann::json& j, const ExperimentConfig& cfg) {
  j = {{"experiment_id", cfg.experiment_id},
       {"task", cfg.task},
       {"arms", cfg.arms},
       {"salt", cfg.salt},
       {"k_min", cfg.k_min},
       {"k_max", cfg.k_max}};
}

void from_json(const nlohmann::json& j, ExperimentConfig& cfg) {
  j.at("experiment_id").get_to(cfg.experiment_id);
  cfg.task = j.value("task", Task::recommendation);
  j.at("arms").get_to(cfg.arms);
  j.at("salt").get_to(cfg.salt);
  cfg.k_min = j.value("k_min", 3);
  cfg.k_max = j.value("k_max", 10);
}

}  // namespace stella::assignment
