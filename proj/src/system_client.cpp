#include "stella/system_client.hpp"

#include <httplib.h>

#include <unordered_set>

namespace stella::app {

namespace {

using Clock = std::chrono::steady_clock;

void apply_deadline(httplib::Client& cli, std::chrono::milliseconds deadline) {
  cli.set_connection_timeout(deadline);
  cli.set_read_timeout(deadline);
  cli.set_write_timeout(deadline);
  cli.set_keep_alive(false);
}

}  // namespace

std::vector<std::string> parse_itemlist(const std::string& body) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::MalformedResponse, std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("itemlist") || !j["itemlist"].is_array()) {
    throw Error(ErrorCode::MalformedResponse, "missing itemlist array");
  }
  std::vector<std::string> out;
  for (const auto& item : j["itemlist"]) {
    if (!item.is_string()) throw Error(ErrorCode::MalformedResponse, "itemlist entry is not a string");
    out.push_back(item.get<std::string>());
  }
  return out;
}

std::vector<std::string> HttpTransport::fetch(const std::string& endpoint, const SystemQuery& q,
                                              std::chrono::milliseconds deadline) {
  httplib::Client cli(endpoint);
  apply_deadline(cli, deadline);

  httplib::Params params;
  std::string path;
  if (q.task == Task::adhoc) {
    path = "/ranking";
    params.emplace("qid", q.context.str());
    params.emplace("query", q.query_text.value_or(""));
  } else {
    path = "/recommendation/datasets";
    params.emplace("item_id", q.context.str());
  }

  const auto start = Clock::now();
  auto res = cli.Get(path, params, httplib::Headers{});
  const auto elapsed = Clock::now() - start;
  if (!res) {
    if (elapsed >= deadline || res.error() == httplib::Error::Read) {
      throw Error(ErrorCode::Timeout, endpoint + path);
    }
    throw Error(ErrorCode::Transport, endpoint + path + ": " + httplib::to_string(res.error()));
  }
  if (elapsed > deadline) throw Error(ErrorCode::Timeout, endpoint + path);
  if (res->status != 200) {
    throw Error(ErrorCode::MalformedResponse, endpoint + path + " answered " + std::to_string(res->status));
  }
  return parse_itemlist(res->body);
}

bool HttpTransport::alive(const std::string& endpoint, std::chrono::milliseconds deadline) {
  httplib::Client cli(endpoint);
  apply_deadline(cli, deadline);
  auto res = cli.Get("/test");
  return res && res->status == 200;
}

Ranking query_endpoint_system(const SystemRecord& sys, const SystemQuery& q, SystemTransport& transport,
                              const ingest::CandidateList* candidates, std::chrono::milliseconds deadline) {
  if (sys.kind == SystemKind::run_backed || !sys.endpoint) {
    throw Error(ErrorCode::BadRequest, sys.system_id.str() + " is not endpoint-backed");
  }
  const auto raw = transport.fetch(*sys.endpoint, q, deadline);

  Ranking r{q.context, {}, sys.system_id};
  r.items.reserve(raw.size());
  std::unordered_set<std::string> seen;
  for (const auto& id : raw) {
    if (!is_token(id)) throw Error(ErrorCode::MalformedResponse, sys.system_id.str() + ": bad doc id '" + id + "'");
    if (!seen.insert(id).second) throw Error(ErrorCode::MalformedResponse, sys.system_id.str() + ": duplicate " + id);
    r.items.emplace_back(id);
  }
  if (r.items.empty()) throw Error(ErrorCode::MalformedResponse, sys.system_id.str() + ": empty itemlist");
  if (candidates) {
    for (const auto& d : r.items) {
      if (!candidates->contains(d)) throw Error(ErrorCode::OutOfCandidates, sys.system_id.str() + ": " + d.str());
    }
  }
  return r;
}

}  // namespace stella::app
