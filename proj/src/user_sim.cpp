#include "stella/user_sim.hpp"

#include <httplib.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "stella/app_http.hpp"
#include "stella/server_http.hpp"

namespace stella::sim {

namespace {

constexpr const char* kParticipantToken = "participant-token";
constexpr const char* kAdminToken = "admin-token";
constexpr const char* kAppToken = "app-token";
constexpr const char* kAppId = "sim-app";

std::string padded(const char* prefix, std::size_t n, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%0*zu", prefix, width, n);
  return buf;
}

std::string inproc_endpoint(const SystemId& id) { return "stub://" + id.str(); }

httplib::Headers bearer(const std::string& token) { return {{"Authorization", "Bearer " + token}}; }

nlohmann::json checked_json(const httplib::Result& res, const std::string& what, std::initializer_list<int> ok) {
  if (!res) throw Error(ErrorCode::Transport, what + ": " + httplib::to_string(res.error()));
  if (std::find(ok.begin(), ok.end(), res->status) == ok.end()) {
    throw Error(ErrorCode::Transport, what + " answered " + std::to_string(res->status) + ": " + res->body);
  }
  return res->body.empty() ? nlohmann::json() : nlohmann::json::parse(res->body);
}

}  // namespace

int SyntheticWorld::grade(const ContextId& context, const DocId& doc) const {
  auto cit = grades.find(context);
  if (cit == grades.end()) return 0;
  auto it = cit->second.find(doc);
  return it == cit->second.end() ? 0 : it->second;
}

SyntheticWorld generate_world(std::size_t n_queries, std::size_t n_docs_per_query, std::uint64_t seed,
                              const GradeDistribution& dist) {
  if (n_queries < 1 || n_docs_per_query < 1) throw Error(ErrorCode::InvalidConfig, "world sizes must be >= 1");
  const double total = dist[0] + dist[1] + dist[2];
  if (!(total > 0) || dist[0] < 0 || dist[1] < 0 || dist[2] < 0) {
    throw Error(ErrorCode::InvalidConfig, "grade distribution must be non-negative and non-zero");
  }

  SyntheticWorld w;
  w.seed = seed;
  std::mt19937_64 rng(seed);
  for (std::size_t q = 1; q <= n_queries; ++q) {
    const ContextId ctx(padded("q", q, 4));
    w.queries.emplace(ctx, "synthetic query " + std::to_string(q));
    std::vector<DocId> docs;
    auto& g = w.grades[ctx];
    for (std::size_t d = 1; d <= n_docs_per_query; ++d) {
      DocId doc(ctx.str() + padded("-d", d, 3));
      const double u = unit_draw(rng) * total;
      g[doc] = u < dist[0] ? 0 : u < dist[0] + dist[1] ? 1 : 2;
      docs.push_back(std::move(doc));
    }
    w.candidates.emplace(ctx, ingest::make_candidate_list(ctx, std::move(docs)));
    w.contexts.push_back(ctx);
  }
  return w;
}

std::string_view to_string(ClickModelKind k) noexcept {
  switch (k) {
    case ClickModelKind::position_based: return "position_based";
    case ClickModelKind::cascade: return "cascade";
    case ClickModelKind::random_uniform: return "random_uniform";
  }
  return "?";
}

ClickModelKind parse_click_model_kind(std::string_view s) {
  for (auto k : {ClickModelKind::position_based, ClickModelKind::cascade, ClickModelKind::random_uniform}) {
    if (to_string(k) == s) return k;
  }
  throw Error(ErrorCode::InvalidConfig, "unknown click model '" + std::string(s) + "'");
}

double ClickModel::relevance_of(const SyntheticWorld& world, const ContextId& context, const DocId& doc) const {
  if (relevance) return relevance(context, doc);
  return attractiveness[static_cast<std::size_t>(std::clamp(world.grade(context, doc), 0, 2))];
}

void from_json(const nlohmann::json& j, ClickModel& m) {
  m.kind = parse_click_model_kind(j.value("kind", std::string(to_string(m.kind))));
  m.attractiveness = j.value("attractiveness", m.attractiveness);
  m.continuation = j.value("continuation", m.continuation);
  m.click_probability = j.value("click_probability", m.click_probability);
  if (j.contains("examination")) {
    // Explicit per-rank probabilities; ranks past the end reuse the last one.
    auto curve = j["examination"].get<std::vector<double>>();
    if (curve.empty()) throw Error(ErrorCode::InvalidConfig, "examination curve is empty");
    m.examination = [curve](std::size_t r) { return curve[std::min(r, curve.size()) - 1]; };
  }
  auto in_unit = [](double p) { return p >= 0.0 && p <= 1.0; };
  bool ok = in_unit(m.continuation) && in_unit(m.click_probability);
  for (double p : m.attractiveness) ok = ok && in_unit(p);
  if (!ok) throw Error(ErrorCode::InvalidConfig, "click model probabilities must lie in [0, 1]");
}

void to_json(nlohmann::json& j, const ClickModel& m) {
  j = {{"kind", std::string(to_string(m.kind))},
       {"attractiveness", m.attractiveness},
       {"continuation", m.continuation},
       {"click_probability", m.click_probability}};
}

std::vector<std::size_t> sample_clicks(const ClickModel& model, const SyntheticWorld& world, const ContextId& context,
                                       std::span<const DocId> shown, std::mt19937_64& rng) {
  std::vector<std::size_t> clicks;
  switch (model.kind) {
    case ClickModelKind::random_uniform:
      for (std::size_t i = 0; i < shown.size(); ++i) {
        if (unit_draw(rng) < model.click_probability) clicks.push_back(i);
      }
      break;
    case ClickModelKind::position_based:
      for (std::size_t i = 0; i < shown.size(); ++i) {
        const double p = model.examination(i + 1) * model.relevance_of(world, context, shown[i]);
        if (unit_draw(rng) < p) clicks.push_back(i);
      }
      break;
    case ClickModelKind::cascade:
      for (std::size_t i = 0; i < shown.size(); ++i) {
        if (unit_draw(rng) >= model.relevance_of(world, context, shown[i])) continue;
        clicks.push_back(i);
        if (unit_draw(rng) >= model.continuation) break;
      }
      break;
  }
  return clicks;
}

struct HttpAppClient::Impl {
  explicit Impl(const std::string& url) : cli(url) {
    cli.set_keep_alive(true);
    cli.set_connection_timeout(std::chrono::seconds(5));
    cli.set_read_timeout(std::chrono::seconds(30));
  }
  httplib::Client cli;
};

HttpAppClient::HttpAppClient(std::string base_url) : impl_(std::make_unique<Impl>(base_url)) {}
HttpAppClient::~HttpAppClient() = default;

app::ServedList HttpAppClient::ranking(const app::RankingRequest& req) {
  httplib::Params p{{"session_id", req.session_id}, {"page_size", std::to_string(req.page_size)}};
  if (req.query_id) p.emplace("query_id", req.query_id->str());
  if (req.query_text) p.emplace("query", *req.query_text);
  if (req.at) p.emplace("at", std::to_string(*req.at));
  return checked_json(impl_->cli.Get("/ranking", p, httplib::Headers{}), "/ranking", {200}).get<app::ServedList>();
}

std::optional<app::ServedList> HttpAppClient::recommendation(const app::RecommendationRequest& req) {
  httplib::Params p{{"item_id", req.seed_id.str()}, {"session_id", req.session_id}, {"k", std::to_string(req.requested_k)}};
  if (req.at) p.emplace("at", std::to_string(*req.at));
  const auto j = checked_json(impl_->cli.Get("/recommendation/datasets", p, httplib::Headers{}),
                              "/recommendation/datasets", {200});
  if (j.value("skip", false)) return std::nullopt;
  return j.get<app::ServedList>();
}

void HttpAppClient::feedback(const FeedbackEvent& event) {
  checked_json(impl_->cli.Post("/feedback", nlohmann::json(event).dump(), "application/json"), "/feedback", {200});
}

SessionTrace simulate_session(const SyntheticWorld& world, const ClickModel& model, AppClient& client,
                              const SessionPlan& plan, std::mt19937_64& rng) {
  SessionTrace trace{plan, std::nullopt, {}};
  if (plan.task == Task::adhoc) {
    app::RankingRequest req;
    req.query_id = plan.context;
    req.session_id = plan.session_id;
    req.page_size = plan.page_size;
    req.at = plan.start;
    trace.served = client.ranking(req);
  } else {
    trace.served = client.recommendation({plan.context, plan.session_id, plan.requested_k, plan.start});
  }
  if (!trace.served) return trace;

  const auto& items = trace.served->items;
  TimestampMs t = plan.start;
  auto emit = [&](EventKind kind, std::optional<std::size_t> pos, TimestampMs at) {
    FeedbackEvent ev;
    ev.event_id = plan.session_id + "-e" + std::to_string(trace.events.size() + 1);
    ev.session_id = plan.session_id;
    ev.impression_id = trace.served->impression_id;
    ev.kind = kind;
    if (pos) {
      ev.doc = items[*pos];
      if (kind == EventKind::click) ev.position = static_cast<int>(*pos + 1);
    }
    ev.at = at;
    client.feedback(ev);
    trace.events.push_back(std::move(ev));
  };

  for (std::size_t pos : sample_clicks(model, world, plan.context, items, rng)) {
    t += 2000 + static_cast<TimestampMs>(unit_draw(rng) * 3000);
    emit(EventKind::click, pos, t);
    const int grade = world.grade(plan.context, items[pos]);
    const double u = unit_draw(rng);
    const TimestampMs dwell = grade > 0 ? 20000 + static_cast<TimestampMs>(u * 40000)
                                        : 1000 + static_cast<TimestampMs>(u * 8000);
    t += dwell;
    emit(EventKind::page_leave, pos, t);
    if (plan.task == Task::recommendation) {
      const double v = unit_draw(rng);
      if (grade == 2 && v < 0.3) {
        emit(EventKind::vote_up, pos, ++t);
      } else if (grade == 0 && v < 0.2) {
        emit(EventKind::vote_down, pos, ++t);
      }
    }
  }
  return trace;
}

void from_json(const nlohmann::json& j, StubSpec& s) {
  s.system_id = j.at("system_id").get<SystemId>();
  s.task = j.at("task").get<Task>();
  s.kind = j.value("kind", SystemKind::endpoint_backed);
  if (s.kind == SystemKind::baseline) throw Error(ErrorCode::InvalidConfig, "stub systems cannot be baselines");
  s.strategy = parse_strategy(j.value("strategy", std::string("ideal")));
  s.faults.timeout_rate = j.value("timeout_rate", 0.0);
  s.faults.seed = j.value("fault_seed", std::uint64_t{0});
}

void from_json(const nlohmann::json& j, CampaignConfig& c) {
  c.seed = j.value("seed", c.seed);
  c.sessions = j.value("sessions", c.sessions);
  if (j.contains("mode")) c.mode = j["mode"].get<std::string>() == "wire" ? Mode::wire : Mode::inproc;
  if (j.contains("world")) {
    const auto& w = j["world"];
    c.n_queries = w.value("queries", c.n_queries);
    c.docs_per_query = w.value("docs_per_query", c.docs_per_query);
    c.grades = w.value("grades", c.grades);
  }
  c.adhoc_share = j.value("adhoc_share", c.adhoc_share);
  c.page_size = j.value("page_size", c.page_size);
  c.requested_k = j.value("k", c.requested_k);
  if (j.contains("click_model")) c.click_model = j["click_model"].get<ClickModel>();
  c.systems = j.value("systems", c.systems);
  c.ship_every = j.value("ship_every", c.ship_every);
  c.deadline = std::chrono::milliseconds(j.value("deadline_ms", c.deadline.count()));
  c.start_at = j.value("start_at", c.start_at);
  c.session_gap_ms = j.value("session_gap_ms", c.session_gap_ms);
  c.bounce_threshold_ms = j.value("bounce_threshold_ms", c.bounce_threshold_ms);
}

CampaignConfig load_campaign_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  try {
    return nlohmann::json::parse(in).get<CampaignConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, path.string() + ": " + e.what());
  }
}

struct Harness::Wire {
  std::unique_ptr<server::ServerHttp> server_http;
  std::unique_ptr<app::AppHttpServer> app_http;
  std::vector<std::unique_ptr<StubServer>> stubs;
  std::map<SystemId, std::string> endpoints;
  std::string server_url;
  std::string app_url;

  ~Wire() {
    if (app_http) app_http->stop();
    for (auto& s : stubs) s->stop();
    if (server_http) server_http->stop();
  }
};

Harness::Harness(CampaignConfig cfg)
    : cfg_(std::move(cfg)), world_(generate_world(cfg_.n_queries, cfg_.docs_per_query, cfg_.seed, cfg_.grades)) {
  for (const auto& s : cfg_.systems) {
    if (stubs_.contains(s.system_id)) throw Error(ErrorCode::DuplicateSystemId, s.system_id.str());
    stubs_.emplace(s.system_id, std::make_shared<const StubSystem>(world_.candidates, world_.grades, s.strategy,
                                                                   fnv1a64(s.system_id.str(), cfg_.seed)));
  }

  server::ServerConfig scfg;
  scfg.participant_tokens[kParticipantToken] = "sim-participant";
  scfg.admin_token = kAdminToken;
  scfg.app_tokens[kAppId] = kAppToken;
  scfg.baselines = {SystemRecord{kBaselineAdhoc, SystemKind::baseline, Task::adhoc, std::nullopt, std::nullopt},
                    SystemRecord{kBaselineRecommendation, SystemKind::baseline, Task::recommendation, std::nullopt,
                                 std::nullopt}};
  assignment::ExperimentConfig exp;
  exp.experiment_id = "recommendation-ab";
  exp.task = Task::recommendation;
  exp.salt = "sim-" + std::to_string(cfg_.seed);
  scfg.bounce_threshold_ms = cfg_.bounce_threshold_ms;

  app::AppConfig acfg;
  acfg.app_id = kAppId;
  acfg.server_token = kAppToken;
  acfg.baseline_adhoc = scfg.baselines[0];
  acfg.baseline_recommendation = scfg.baselines[1];
  acfg.deadline = cfg_.deadline;
  acfg.default_page_size = cfg_.page_size;
  acfg.experiment = exp;

  std::shared_ptr<app::SystemTransport> transport;
  if (cfg_.mode == Mode::inproc) {
    inproc_ = std::make_shared<InProcessTransport>();
    for (const auto& s : cfg_.systems) {
      if (s.kind == SystemKind::endpoint_backed) inproc_->add(inproc_endpoint(s.system_id), stubs_.at(s.system_id), s.faults);
    }
    transport = inproc_;
  } else {
    wire_ = std::make_unique<Wire>();
    for (const auto& s : cfg_.systems) {
      if (s.kind != SystemKind::endpoint_backed) continue;
      auto stub = std::make_unique<StubServer>(stubs_.at(s.system_id), s.faults);
      stub->bind("127.0.0.1", 0);
      stub->start();
      wire_->endpoints[s.system_id] = stub->url();
      wire_->stubs.push_back(std::move(stub));
    }
    transport = std::make_shared<app::HttpTransport>();
  }

  scfg.experiments = {exp};
  server_ = std::make_unique<server::CentralServer>(scfg, world_.candidates, transport);

  if (wire_) {
    wire_->server_http = std::make_unique<server::ServerHttp>(*server_);
    const int port = wire_->server_http->bind("127.0.0.1", 0);
    wire_->server_http->start();
    wire_->server_url = "http://127.0.0.1:" + std::to_string(port);
    acfg.server_url = wire_->server_url;
  }

  app_ = std::make_unique<app::SiteApp>(acfg, app::ServingData{world_.candidates, world_.queries}, transport,
                                        [] { return TimestampMs{0}; });
  register_systems();

  if (wire_) {
    app::reload_from_server(*app_);
    app_->set_sink(app::http_snapshot_sink(wire_->server_url, kAppToken));
    wire_->app_http = std::make_unique<app::AppHttpServer>(*app_);
    const int port = wire_->app_http->bind("127.0.0.1", 0);
    wire_->app_http->start();
    wire_->app_url = "http://127.0.0.1:" + std::to_string(port);
    client_ = std::make_unique<HttpAppClient>(wire_->app_url);
  } else {
    std::vector<SystemRecord> live;
    std::map<std::string, ingest::RunSet> runs;
    for (const auto& e : server_->systems()) {
      if (e.status != server::Status::live) continue;
      if (e.record.kind == SystemKind::run_backed) {
        runs.emplace(*e.record.run_ref, ingest::parse_run_text(*server_->run_text(e.record.system_id)));
      }
      live.push_back(e.record);
    }
    app_->update_registry(std::move(live), std::move(runs));
    app_->set_sink([this](const Snapshot& s) {
      server_->ingest_app_snapshot(s, kAppToken);
      return true;
    });
    client_ = std::make_unique<InProcessClient>(*app_);
  }
}

Harness::~Harness() {
  client_.reset();
  wire_.reset();
}

void Harness::register_systems() {
  for (const auto& s : cfg_.systems) {
    SystemRecord rec{s.system_id, s.kind, s.task, std::nullopt, std::nullopt};
    std::optional<std::string> run;
    if (s.kind == SystemKind::endpoint_backed) {
      rec.endpoint = wire_ ? wire_->endpoints.at(s.system_id) : inproc_endpoint(s.system_id);
    } else {
      run = ingest::serialize_run(stubs_.at(s.system_id)->as_run(s.system_id.str()));
    }

    if (!wire_) {
      auto entry = server_->register_system(rec, kParticipantToken, run);
      if (entry.status == server::Status::submitted) {
        entry = server_->transition(s.system_id, server::Status::validated, kParticipantToken);
      }
      server_->transition(s.system_id, server::Status::live, kParticipantToken);
      continue;
    }

    httplib::Client cli(wire_->server_url);
    cli.set_read_timeout(std::chrono::seconds(30));
    nlohmann::json body{{"record", rec}};
    if (run) body["run"] = *run;
    const auto entry = checked_json(
        cli.Post("/api/systems", bearer(kParticipantToken), body.dump(), "application/json"), "register", {201});
    const std::string base = "/api/systems/" + s.system_id.str() + "/status";
    if (entry.at("status") == "submitted") {
      checked_json(cli.Post(base, bearer(kParticipantToken), R"({"status":"validated"})", "application/json"),
                   "validate", {200});
    }
    checked_json(cli.Post(base, bearer(kParticipantToken), R"({"status":"live"})", "application/json"), "live",
                 {200});
  }
}

SessionPlan Harness::plan_session(std::size_t index) const {
  SessionPlan plan;
  plan.session_id = padded("sess-", index, 6);
  std::mt19937_64 rng(fnv1a64(plan.session_id + "/plan", cfg_.seed));
  plan.task = unit_draw(rng) < cfg_.adhoc_share ? Task::adhoc : Task::recommendation;
  plan.context = world_.contexts[rng() % world_.contexts.size()];
  plan.start = cfg_.start_at + static_cast<TimestampMs>(index) * cfg_.session_gap_ms;
  plan.page_size = cfg_.page_size;
  plan.requested_k = cfg_.requested_k;
  return plan;
}

SessionTrace Harness::run_session(std::size_t index) {
  const auto plan = plan_session(index);
  std::mt19937_64 rng(fnv1a64(plan.session_id + "/clicks", cfg_.seed));
  return simulate_session(world_, cfg_.click_model, *client_, plan, rng);
}

std::size_t Harness::ship() {
  if (!wire_) return app_->ship();
  httplib::Client cli(wire_->app_url);
  cli.set_read_timeout(std::chrono::seconds(60));
  return checked_json(cli.Post("/admin/ship"), "/admin/ship", {200}).at("delivered").get<std::size_t>();
}

nlohmann::json Harness::report() {
  if (!wire_) return server_->build_dashboard_report();
  httplib::Client cli(wire_->server_url);
  cli.set_read_timeout(std::chrono::seconds(60));
  return checked_json(cli.Get("/api/report", bearer(kAdminToken)), "/api/report", {200});
}

std::string Harness::report_text() {
  if (!wire_) return server_->build_text_report();
  httplib::Client cli(wire_->server_url);
  auto res = cli.Get("/report.txt");
  if (!res || res->status != 200) throw Error(ErrorCode::Transport, "/report.txt");
  return res->body;
}

std::shared_ptr<const StubSystem> Harness::stub(const SystemId& id) const {
  auto it = stubs_.find(id);
  return it == stubs_.end() ? nullptr : it->second;
}

double ndcg_at(std::span<const DocId> ranking, const std::map<DocId, int>& grades, std::size_t k) {
  auto gain = [&](const DocId& d) {
    auto it = grades.find(d);
    return it == grades.end() ? 0.0 : std::exp2(it->second) - 1.0;
  };
  double dcg = 0.0;
  for (std::size_t i = 0; i < std::min(k, ranking.size()); ++i) dcg += gain(ranking[i]) / std::log2(i + 2.0);
  std::vector<int> ideal;
  for (const auto& [_, g] : grades) ideal.push_back(g);
  std::sort(ideal.rbegin(), ideal.rend());
  double idcg = 0.0;
  for (std::size_t i = 0; i < std::min(k, ideal.size()); ++i) idcg += (std::exp2(ideal[i]) - 1.0) / std::log2(i + 2.0);
  return idcg > 0 ? dcg / idcg : 0.0;
}

std::vector<GroundTruth> ground_truth(const Harness& h) {
  const auto& w = h.world();
  std::vector<GroundTruth> out;
  for (const auto& s : h.config().systems) {
    const auto stub = h.stub(s.system_id);
    const std::size_t k = s.task == Task::adhoc ? h.config().page_size
                                                : static_cast<std::size_t>(std::clamp(h.config().requested_k, 3, 10));
    GroundTruth gt{s.system_id, s.task, 0.0, 0.0};
    for (const auto& ctx : w.contexts) {
      const auto& g = w.grades.at(ctx);
      gt.ndcg += ndcg_at(stub->rank(ctx), g, k);
      gt.baseline_ndcg += ndcg_at(w.candidates.at(ctx).candidates, g, k);
    }
    gt.ndcg /= static_cast<double>(w.contexts.size());
    gt.baseline_ndcg /= static_cast<double>(w.contexts.size());
    out.push_back(gt);
  }
  return out;
}

nlohmann::json run_campaign(const CampaignConfig& cfg) {
  Harness h(cfg);
  std::size_t skipped = 0;
  for (std::size_t i = 0; i < cfg.sessions; ++i) {
    if (!h.run_session(i).served) ++skipped;
    if (cfg.ship_every > 0 && (i + 1) % cfg.ship_every == 0) h.ship();
  }
  h.ship();
  auto report = h.report();

  std::map<std::string, nlohmann::json> cards;
  for (const auto* task : {"adhoc", "recommendation"}) {
    for (const auto& c : report["tasks"][task]) cards[c["system_id"].get<std::string>()] = c;
  }
  auto ctr_of = [&](const SystemId& id) {
    auto it = cards.find(id.str());
    return it == cards.end() || it->second["ctr"].is_null() ? -1.0 : it->second["ctr"].get<double>();
  };

  nlohmann::json verdicts = nlohmann::json::array();
  for (const auto& gt : ground_truth(h)) {
    const auto& card = cards[gt.system_id.str()];
    bool platform_better = false;
    if (gt.task == Task::adhoc) {
      platform_better = card.value("preference_score", 0.5) > 0.5;
    } else {
      platform_better = ctr_of(gt.system_id) > ctr_of(kBaselineRecommendation);
    }
    verdicts.push_back({{"system_id", gt.system_id},
                        {"task", gt.task},
                        {"ndcg", gt.ndcg},
                        {"baseline_ndcg", gt.baseline_ndcg},
                        {"truly_better", gt.truly_better()},
                        {"platform_says_better", platform_better},
                        {"agree", gt.truly_better() == platform_better}});
  }

  return {{"seed", cfg.seed},
          {"sessions", cfg.sessions},
          {"skipped_panels", skipped},
          {"mode", cfg.mode == Mode::wire ? "wire" : "inproc"},
          {"click_model", cfg.click_model},
          {"verdicts", verdicts},
          {"report", report}};
}

}  // namespace stella::sim
