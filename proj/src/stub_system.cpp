#include "stella/stub_system.hpp"

#include <httplib.h>

#include <algorithm>

namespace stella::sim {

double unit_draw(std::mt19937_64& rng) noexcept { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::string_view to_string(Strategy s) noexcept {
  switch (s) {
    case Strategy::ideal: return "ideal";
    case Strategy::candidate_order: return "candidate_order";
    case Strategy::reverse: return "reverse";
    case Strategy::shuffle: return "shuffle";
  }
  return "?";
}

Strategy parse_strategy(std::string_view s) {
  for (Strategy st : {Strategy::ideal, Strategy::candidate_order, Strategy::reverse, Strategy::shuffle}) {
    if (to_string(st) == s) return st;
  }
  throw Error(ErrorCode::InvalidConfig, "unknown strategy '" + std::string(s) + "'");
}

StubSystem::StubSystem(const ingest::CandidateMap& candidates, const GradeMap& grades, Strategy strategy,
                       std::uint64_t seed)
    : strategy_(strategy) {
  for (const auto& [ctx, list] : candidates) {
    std::vector<DocId> docs = list.candidates;
    switch (strategy) {
      case Strategy::ideal: {
        const auto git = grades.find(ctx);
        auto grade = [&](const DocId& d) {
          if (git == grades.end()) return 0;
          auto it = git->second.find(d);
          return it == git->second.end() ? 0 : it->second;
        };
        std::stable_sort(docs.begin(), docs.end(), [&](const DocId& a, const DocId& b) { return grade(a) > grade(b); });
        break;
      }
      case Strategy::candidate_order: break;
      case Strategy::reverse: std::reverse(docs.begin(), docs.end()); break;
      case Strategy::shuffle: {
        std::mt19937_64 rng(fnv1a64(ctx.str(), seed ^ 0xcbf29ce484222325ULL));
        for (std::size_t i = docs.size(); i > 1; --i) std::swap(docs[i - 1], docs[rng() % i]);
        break;
      }
    }
    rankings_.emplace(ctx, std::move(docs));
  }
}

std::vector<DocId> StubSystem::rank(const ContextId& context) const {
  auto it = rankings_.find(context);
  return it == rankings_.end() ? std::vector<DocId>{} : it->second;
}

ingest::RunSet StubSystem::as_run(const std::string& tag) const {
  ingest::RunSet rs;
  rs.tag = tag;
  for (const auto& [ctx, docs] : rankings_) {
    auto& entries = rs.rankings[ctx];
    for (std::size_t i = 0; i < docs.size(); ++i) {
      entries.push_back({docs[i], static_cast<double>(docs.size() - i)});
    }
    rs.line_count += docs.size();
  }
  return rs;
}

void InProcessTransport::add(const std::string& endpoint, std::shared_ptr<const StubSystem> stub, FaultPlan faults) {
  std::lock_guard lock(mu_);
  slots_.insert_or_assign(endpoint, Slot{std::move(stub), faults, std::mt19937_64(faults.seed)});
}

std::vector<std::string> InProcessTransport::fetch(const std::string& endpoint, const app::SystemQuery& q,
                                                   std::chrono::milliseconds) {
  std::shared_ptr<const StubSystem> stub;
  {
    std::lock_guard lock(mu_);
    auto it = slots_.find(endpoint);
    if (it == slots_.end()) throw Error(ErrorCode::Transport, "no stub at " + endpoint);
    ++calls_;
    if (it->second.faults.timeout_rate > 0 && unit_draw(it->second.rng) < it->second.faults.timeout_rate) {
      ++timeouts_;
      throw Error(ErrorCode::Timeout, endpoint + " (injected)");
    }
    stub = it->second.stub;
  }
  std::vector<std::string> out;
  for (const auto& d : stub->rank(q.context)) out.push_back(d.str());
  return out;
}

bool InProcessTransport::alive(const std::string& endpoint, std::chrono::milliseconds) {
  std::lock_guard lock(mu_);
  return slots_.contains(endpoint);
}

std::uint64_t InProcessTransport::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

std::uint64_t InProcessTransport::injected_timeouts() const {
  std::lock_guard lock(mu_);
  return timeouts_;
}

StubServer::StubServer(std::shared_ptr<const StubSystem> stub, FaultPlan faults, std::chrono::milliseconds fault_delay)
    : stub_(std::move(stub)),
      faults_(faults),
      fault_delay_(fault_delay),
      rng_(faults.seed),
      http_(std::make_unique<httplib::Server>()) {
  auto answer = [this](const std::string& context, httplib::Response& res) {
    if (faulty()) std::this_thread::sleep_for(fault_delay_);
    nlohmann::json items = nlohmann::json::array();
    for (const auto& d : stub_->rank(ContextId(context))) items.push_back(d.str());
    res.set_content(nlohmann::json{{"itemlist", items}}.dump(), "application/json");
  };
  http_->Get("/ranking", [answer](const httplib::Request& req, httplib::Response& res) {
    answer(req.get_param_value("qid"), res);
  });
  http_->Get("/recommendation/datasets", [answer](const httplib::Request& req, httplib::Response& res) {
    answer(req.get_param_value("item_id"), res);
  });
  http_->Get("/test", [](const httplib::Request&, httplib::Response& res) { res.set_content("ok", "text/plain"); });
}

StubServer::~StubServer() { stop(); }

bool StubServer::faulty() {
  if (faults_.timeout_rate <= 0) return false;
  std::lock_guard lock(rng_mu_);
  return unit_draw(rng_) < faults_.timeout_rate;
}

int StubServer::bind(const std::string& host, int port) {
  host_ = host;
  if (port == 0) {
    port_ = http_->bind_to_any_port(host);
  } else if (http_->bind_to_port(host, port)) {
    port_ = port;
  } else {
    port_ = -1;
  }
  if (port_ <= 0) throw Error(ErrorCode::Io, "cannot bind " + host + ":" + std::to_string(port));
  return port_;
}

void StubServer::start() {
  thread_ = std::thread([this] { http_->listen_after_bind(); });
  http_->wait_until_ready();
}

void StubServer::run() { http_->listen_after_bind(); }

void StubServer::stop() {
  http_->stop();
  if (thread_.joinable()) thread_.join();
}

std::string StubServer::url() const { return "http://" + host_ + ":" + std::to_string(port_); }

}  // namespace stella::sim
