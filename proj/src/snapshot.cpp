#include "stella/snapshot.hpp"

namespace stella {

void to_json(nlohmann::json& j, const Snapshot& s) {
  j = {{"app_id", s.app_id}, {"seq", s.seq}, {"records", s.records}, {"outcomes", s.outcomes}};
}

void from_json(const nlohmann::json& j, Snapshot& s) {
  j.at("app_id").get_to(s.app_id);
  j.at("seq").get_to(s.seq);
  j.at("records").get_to(s.records);
  s.outcomes = j.value("outcomes", std::vector<OutcomeRecord>{});
}

}  // namespace stella
