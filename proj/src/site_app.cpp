#include "stella/site_app.hpp"

#include <algorithm>
#include <fstream>

namespace stella::app {

struct SiteApp::ServingState {
  std::map<SystemId, SystemRecord> systems;  // live experimental systems
  std::vector<SystemId> adhoc_arms;
  assignment::ExperimentConfig experiment;
  std::map<std::string, std::shared_ptr<const ingest::RunSet>> runs;
};

namespace {

TimestampMs wall_clock() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

SystemRecord parse_baseline(const nlohmann::json& j) {
  SystemRecord r;
  r.system_id = j.at("system_id").get<SystemId>();
  r.kind = SystemKind::baseline;
  if (j.contains("endpoint")) r.endpoint = j["endpoint"].get<std::string>();
  if (j.contains("run_ref")) r.run_ref = j["run_ref"].get<std::string>();
  return r;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::filesystem::path& p) {
  return p.empty() || p.is_absolute() ? p : base / p;
}

std::string text_context(const std::string& text) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(text)));
  return std::string("text-") + buf;
}

}  // namespace

void to_json(nlohmann::json& j, const ServedList& s) { j = {{"impression_id", s.impression_id}, {"items", s.items}}; }
void from_json(const nlohmann::json& j, ServedList& s) {
  j.at("impression_id").get_to(s.impression_id);
  j.at("items").get_to(s.items);
}

void from_json(const nlohmann::json& j, AppConfig& cfg) {
  cfg.app_id = j.value("app_id", cfg.app_id);
  cfg.host = j.value("host", cfg.host);
  cfg.port = j.value("port", cfg.port);
  if (j.contains("server_url")) cfg.server_url = j["server_url"].get<std::string>();
  cfg.server_token = j.value("server_token", std::string{});
  cfg.candidates_path = j.value("candidates", std::string{});
  cfg.queries_path = j.value("queries", std::string{});
  const auto& baselines = j.at("baselines");
  cfg.baseline_adhoc = parse_baseline(baselines.at("adhoc"));
  cfg.baseline_adhoc.task = Task::adhoc;
  cfg.baseline_recommendation = parse_baseline(baselines.at("recommendation"));
  cfg.baseline_recommendation.task = Task::recommendation;
  cfg.deadline = std::chrono::milliseconds(j.value("deadline_ms", kDefaultDeadline.count()));
  cfg.default_page_size = j.value("page_size", cfg.default_page_size);

  const auto exp = j.value("experiment", nlohmann::json::object());
  cfg.experiment.experiment_id = exp.value("experiment_id", std::string("recommendation"));
  cfg.experiment.task = Task::recommendation;
  cfg.experiment.salt = exp.value("salt", std::string("stella"));
  cfg.experiment.arms = exp.value("arms", std::vector<SystemId>{});
  cfg.experiment.k_min = exp.value("k_min", 3);
  cfg.experiment.k_max = exp.value("k_max", 10);

  cfg.systems = j.value("systems", std::vector<SystemRecord>{});
  for (const auto& [ref, path] : j.value("runs", std::map<std::string, std::string>{})) cfg.runs[ref] = path;
  if (j.contains("log_path")) cfg.log_path = j["log_path"].get<std::string>();
  cfg.ship_interval = std::chrono::milliseconds(j.value("ship_interval_ms", 1000));
  cfg.reload_interval = std::chrono::milliseconds(j.value("reload_interval_ms", 10000));
}

AppConfig load_app_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  AppConfig cfg;
  try {
    cfg = nlohmann::json::parse(in).get<AppConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, path.string() + ": " + e.what());
  }
  const auto base = path.parent_path();
  cfg.candidates_path = resolve(base, cfg.candidates_path);
  cfg.queries_path = resolve(base, cfg.queries_path);
  for (auto& [_, p] : cfg.runs) p = resolve(base, p);
  if (cfg.log_path) cfg.log_path = resolve(base, *cfg.log_path);
  return cfg;
}

SiteApp::SiteApp(AppConfig cfg, ServingData data, std::shared_ptr<SystemTransport> transport, Clock clock)
    : cfg_(std::move(cfg)),
      data_(std::move(data)),
      transport_(transport ? std::move(transport) : std::make_shared<HttpTransport>()),
      clock_(clock ? std::move(clock) : Clock(wall_clock)),
      log_(cfg_.log_path ? std::make_unique<EventLog>(*cfg_.log_path) : std::make_unique<EventLog>()) {
  if (auto err = validate_system_record(cfg_.baseline_adhoc)) throw *err;
  if (auto err = validate_system_record(cfg_.baseline_recommendation)) throw *err;
  for (const auto& [qid, text] : data_.queries) query_by_text_.emplace(text, qid);

  std::map<std::string, ingest::RunSet> runs;
  for (const auto& [ref, path] : cfg_.runs) runs.emplace(ref, ingest::load_run_file(path));
  update_registry(cfg_.systems, std::move(runs));
  restore_from_log();
}

SiteApp::~SiteApp() = default;

void SiteApp::update_registry(std::vector<SystemRecord> systems, std::map<std::string, ingest::RunSet> runs) {
  auto next = std::make_shared<ServingState>();
  for (auto& s : systems) {
    if (auto err = validate_system_record(s)) throw *err;
    if (s.kind == SystemKind::baseline) continue;
    next->systems.emplace(s.system_id, std::move(s));
  }
  for (const auto& [id, s] : next->systems) {
    if (s.task == Task::adhoc) next->adhoc_arms.push_back(id);
  }
  for (auto& [ref, rs] : runs) next->runs.emplace(ref, std::make_shared<const ingest::RunSet>(std::move(rs)));

  next->experiment = cfg_.experiment;
  if (next->experiment.arms.empty()) {
    next->experiment.arms.push_back(cfg_.baseline_recommendation.system_id);
    for (const auto& [id, s] : next->systems) {
      if (s.task == Task::recommendation) next->experiment.arms.push_back(id);
    }
  }
  if (auto err = assignment::validate_config(next->experiment)) throw *err;

  std::lock_guard lock(state_mu_);
  state_ = std::move(next);
}

std::shared_ptr<const SiteApp::ServingState> SiteApp::state() const {
  std::lock_guard lock(state_mu_);
  return state_;
}

assignment::ExperimentConfig SiteApp::experiment() const { return state()->experiment; }

const SystemRecord* SiteApp::find_system(const ServingState& st, const SystemId& id) const {
  if (id == cfg_.baseline_recommendation.system_id) return &cfg_.baseline_recommendation;
  if (id == cfg_.baseline_adhoc.system_id) return &cfg_.baseline_adhoc;
  auto it = st.systems.find(id);
  return it == st.systems.end() ? nullptr : &it->second;
}

TimestampMs SiteApp::now(const std::optional<TimestampMs>& at) const { return at ? *at : clock_(); }

std::string SiteApp::next_impression_id(const std::string& session_id) {
  std::lock_guard lock(log_mu_);
  const auto n = ++session_counters_[session_id];
  return cfg_.app_id + ":" + session_id + ":" + std::to_string(n);
}

ContextId SiteApp::resolve_context(const RankingRequest& req, std::optional<std::string>& text) const {
  if (req.query_id) {
    if (!text) {
      if (auto it = data_.queries.find(*req.query_id); it != data_.queries.end()) text = it->second;
    }
    return *req.query_id;
  }
  if (auto it = query_by_text_.find(*text); it != query_by_text_.end()) return it->second;
  return ContextId(text_context(*text));
}

Ranking SiteApp::baseline_ranking(const ServingState& st, const SystemRecord& baseline, const SystemQuery& q) const {
  const auto cit = data_.candidates.find(q.context);
  const ingest::CandidateList* cands = cit == data_.candidates.end() ? nullptr : &cit->second;
  try {
    if (baseline.endpoint) return query_endpoint_system(baseline, q, *transport_, cands, cfg_.deadline);
    if (baseline.run_ref) {
      auto rit = st.runs.find(*baseline.run_ref);
      if (rit != st.runs.end() && rit->second->covers(q.context)) return rit->second->ranking(q.context, baseline.system_id);
    }
  } catch (const Error& e) {
    throw Error(ErrorCode::NoBaseline, baseline.system_id.str() + ": " + e.what());
  }
  if (!cands) throw Error(ErrorCode::NoBaseline, "no baseline ranking for " + q.context.str());
  return Ranking{q.context, cands->candidates, baseline.system_id};
}

Ranking SiteApp::system_ranking(const ServingState& st, const SystemRecord& sys, const SystemQuery& q) const {
  switch (sys.kind) {
    case SystemKind::baseline:
      return baseline_ranking(st, sys, q);
    case SystemKind::run_backed: {
      auto it = st.runs.find(*sys.run_ref);
      if (it == st.runs.end()) throw Error(ErrorCode::UnknownSystem, "no run '" + *sys.run_ref + "'");
      return it->second->ranking(q.context, sys.system_id);
    }
    case SystemKind::endpoint_backed: {
      const auto cit = data_.candidates.find(q.context);
      return query_endpoint_system(sys, q, *transport_, cit == data_.candidates.end() ? nullptr : &cit->second,
                                   cfg_.deadline);
    }
  }
  throw Error(ErrorCode::UnknownSystem, sys.system_id.str());
}

void SiteApp::log_impression(const ImpressionRecord& rec) {
  std::lock_guard lock(log_mu_);
  log_->append(rec);
  StoredImpression stored{rec, {}, std::nullopt, ++impression_order_};
  if (rec.interleaved() && !rec.fallback()) {
    stored.outcome = Outcome::tie;
    dirty_outcomes_[stored.order] = rec.impression_id;
  }
  ++stats_.impressions;
  if (rec.fallback()) ++stats_.fallbacks;
  impressions_.insert_or_assign(rec.impression_id, std::move(stored));
}

ServedList SiteApp::handle_ranking(const RankingRequest& req) {
  if (!is_token(req.session_id)) throw Error(ErrorCode::BadRequest, "session_id must be a token");
  if (req.page_size < 1) throw Error(ErrorCode::BadRequest, "page_size must be >= 1");
  if (!req.query_id && !req.query_text) throw Error(ErrorCode::BadRequest, "query_id or query required");

  const auto st = state();
  std::optional<std::string> text = req.query_text;
  SystemQuery q{Task::adhoc, resolve_context(req, text), text};
  const Ranking base = baseline_ranking(*st, cfg_.baseline_adhoc, q);

  ImpressionRecord rec;
  rec.impression_id = next_impression_id(req.session_id);
  rec.session_id = req.session_id;
  rec.task = Task::adhoc;
  rec.context = q.context;
  rec.at = now(req.at);

  auto serve_baseline = [&](std::optional<SystemId> failed) {
    const auto n = std::min(req.page_size, base.items.size());
    rec.items.assign(base.items.begin(), base.items.begin() + static_cast<std::ptrdiff_t>(n));
    rec.system = cfg_.baseline_adhoc.system_id;
    rec.fallback_from = std::move(failed);
  };

  if (st->adhoc_arms.empty()) {
    serve_baseline(std::nullopt);
  } else {
    const SystemId& arm = st->adhoc_arms[round_robin_.fetch_add(1) % st->adhoc_arms.size()];
    {
      std::lock_guard lock(log_mu_);
      ++stats_.adhoc_selections[arm];
    }
    try {
      const Ranking exp = system_ranking(*st, st->systems.at(arm), q);
      const auto inter = interleave::team_draft_interleave(base, exp, req.page_size,
                                                           interleave::SeededCoins(rec.impression_id), rec.impression_id);
      for (const auto& item : inter.items) {
        rec.items.push_back(item.doc);
        rec.teams.push_back(item.team);
      }
      rec.system = arm;
      rec.baseline = cfg_.baseline_adhoc.system_id;
    } catch (const Error&) {
      rec.items.clear();
      rec.teams.clear();
      serve_baseline(arm);
    }
  }

  log_impression(rec);
  return {rec.impression_id, rec.items};
}

std::optional<ServedList> SiteApp::handle_recommendation(const RecommendationRequest& req) {
  if (!is_token(req.session_id)) throw Error(ErrorCode::BadRequest, "session_id must be a token");
  if (req.requested_k < 0) throw Error(ErrorCode::BadRequest, "k must be >= 0");

  const auto st = state();
  const auto& exp = st->experiment;
  const SystemId& arm = assignment::assign_session(req.session_id, exp);
  const auto cit = data_.candidates.find(req.seed_id);

  auto skip = [&]() -> std::optional<ServedList> {
    std::lock_guard lock(log_mu_);
    ++stats_.skips;
    return std::nullopt;
  };

  std::optional<int> k;
  if (cit != data_.candidates.end()) {
    k = assignment::clamp_k(req.requested_k, static_cast<int>(cit->second.candidates.size()), exp);
    if (!k) return skip();
  }

  const SystemQuery q{Task::recommendation, req.seed_id, std::nullopt};
  std::optional<Ranking> ranking;
  std::optional<SystemId> fallback_from;
  try {
    const SystemRecord* sys = find_system(*st, arm);
    if (!sys) throw Error(ErrorCode::UnknownSystem, arm.str());
    ranking = system_ranking(*st, *sys, q);
  } catch (const Error&) {
    if (arm == cfg_.baseline_recommendation.system_id) return skip();
    fallback_from = arm;
    try {
      ranking = baseline_ranking(*st, cfg_.baseline_recommendation, q);
    } catch (const Error&) {
      return skip();
    }
  }

  if (!k) {
    k = assignment::clamp_k(req.requested_k, static_cast<int>(ranking->items.size()), exp);
    if (!k) return skip();
  }

  ImpressionRecord rec;
  rec.impression_id = next_impression_id(req.session_id);
  rec.session_id = req.session_id;
  rec.task = Task::recommendation;
  rec.context = req.seed_id;
  rec.system = fallback_from ? cfg_.baseline_recommendation.system_id : arm;
  rec.fallback_from = fallback_from;
  rec.at = now(req.at);
  const auto n = std::min(static_cast<std::size_t>(*k), ranking->items.size());
  rec.items.assign(ranking->items.begin(), ranking->items.begin() + static_cast<std::ptrdiff_t>(n));

  log_impression(rec);
  return ServedList{rec.impression_id, rec.items};
}

FeedbackAck SiteApp::record_feedback(const FeedbackEvent& event) {
  if (event.kind == EventKind::impression) {
    throw Error(ErrorCode::BadRequest, "impression events are written by the app");
  }
  if (auto err = validate_feedback_event(event)) throw Error(ErrorCode::BadRequest, err->what());

  std::lock_guard lock(log_mu_);
  if (event_ids_.contains(event.event_id)) return {true};

  auto it = impressions_.find(event.impression_id);
  if (it == impressions_.end()) throw Error(ErrorCode::UnknownImpression, event.impression_id);
  StoredImpression& imp = it->second;
  const auto& items = imp.record.items;
  if (event.session_id != imp.record.session_id) {
    throw Error(ErrorCode::BadRequest, "event session does not match impression session");
  }
  if (auto err = validate_feedback_event(event, items.size())) throw Error(ErrorCode::BadRequest, err->what());
  if (event.doc) {
    if (std::find(items.begin(), items.end(), *event.doc) == items.end()) {
      throw Error(ErrorCode::UnknownClickedDoc, event.doc->str() + " not in " + event.impression_id);
    }
    if (event.position && items[static_cast<std::size_t>(*event.position - 1)] != *event.doc) {
      throw Error(ErrorCode::BadRequest, "position does not hold " + event.doc->str());
    }
  }

  log_->append(event);
  event_ids_.insert(event.event_id);

  if (event.kind == EventKind::click && imp.outcome && imp.clicked.insert(*event.doc).second) {
    const std::vector<DocId> clicked(imp.clicked.begin(), imp.clicked.end());
    const Outcome updated = interleave::credit(imp.record.items, imp.record.teams, clicked);
    if (updated != *imp.outcome) {
      imp.outcome = updated;
      dirty_outcomes_[imp.order] = imp.record.impression_id;
    }
  }
  return {false};
}

std::optional<ImpressionRecord> SiteApp::impression(const std::string& impression_id) const {
  std::lock_guard lock(log_mu_);
  auto it = impressions_.find(impression_id);
  if (it == impressions_.end()) return std::nullopt;
  return it->second.record;
}

std::optional<Snapshot> SiteApp::cut_snapshot() {
  std::lock_guard ship_lock(ship_mu_);
  Pending p;
  {
    std::lock_guard lock(log_mu_);
    if (cut_offset_ == log_->size() && dirty_outcomes_.empty()) return std::nullopt;
    p.snapshot.app_id = cfg_.app_id;
    p.snapshot.seq = next_seq_++;
    p.snapshot.records = log_->read_from(cut_offset_);
    for (const auto& [_, id] : dirty_outcomes_) {
      const StoredImpression& imp = impressions_.at(id);
      p.snapshot.outcomes.push_back({id, imp.record.system, *imp.record.baseline, *imp.outcome});
    }
    dirty_outcomes_.clear();
    cut_offset_ = log_->size();
    p.end_offset = cut_offset_;
  }
  pending_.push_back(p);
  return p.snapshot;
}

void SiteApp::set_sink(SnapshotSink sink) {
  std::lock_guard lock(ship_mu_);
  sink_ = std::move(sink);
}

std::size_t SiteApp::ship() {
  cut_snapshot();
  std::lock_guard lock(ship_mu_);
  std::size_t delivered = 0;
  while (sink_ && !pending_.empty()) {
    bool ok = false;
    try {
      ok = sink_(pending_.front().snapshot);
    } catch (const std::exception&) {
      ok = false;
    }
    if (!ok) break;
    {
      std::lock_guard log_lock(log_mu_);
      stats_.shipped_seq = pending_.front().snapshot.seq;
    }
    persist_ship_state();
    pending_.pop_front();
    ++delivered;
  }
  return delivered;
}

void SiteApp::persist_ship_state() {
  if (!cfg_.log_path) return;
  const nlohmann::json j = {{"seq", pending_.front().snapshot.seq}, {"offset", pending_.front().end_offset}};
  const auto path = std::filesystem::path(cfg_.log_path->string() + ".ship");
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << j.dump() << '\n';
  }
  std::filesystem::rename(tmp, path);
}

void SiteApp::restore_from_log() {
  std::size_t shipped_offset = 0;
  if (cfg_.log_path) {
    std::ifstream in(cfg_.log_path->string() + ".ship");
    if (in) {
      const auto j = nlohmann::json::parse(in);
      next_seq_ = j.at("seq").get<std::uint64_t>() + 1;
      shipped_offset = j.at("offset").get<std::size_t>();
      stats_.shipped_seq = next_seq_ - 1;
    }
  }

  const auto records = log_->read_all();
  for (std::size_t i = 0; i < records.size(); ++i) {
    const bool unshipped = i >= shipped_offset;
    if (const auto* imp = std::get_if<ImpressionRecord>(&records[i])) {
      StoredImpression stored{*imp, {}, std::nullopt, ++impression_order_};
      if (imp->interleaved() && !imp->fallback()) {
        stored.outcome = Outcome::tie;
        if (unshipped) dirty_outcomes_[stored.order] = imp->impression_id;
      }
      ++session_counters_[imp->session_id];
      ++stats_.impressions;
      if (imp->fallback()) ++stats_.fallbacks;
      impressions_.insert_or_assign(imp->impression_id, std::move(stored));
      continue;
    }
    const auto& ev = std::get<FeedbackEvent>(records[i]);
    event_ids_.insert(ev.event_id);
    auto it = impressions_.find(ev.impression_id);
    if (ev.kind != EventKind::click || it == impressions_.end() || !it->second.outcome) continue;
    StoredImpression& imp = it->second;
    if (!imp.clicked.insert(*ev.doc).second) continue;
    const std::vector<DocId> clicked(imp.clicked.begin(), imp.clicked.end());
    imp.outcome = interleave::credit(imp.record.items, imp.record.teams, clicked);
    if (unshipped) dirty_outcomes_[imp.order] = imp.record.impression_id;
  }
  cut_offset_ = std::min(shipped_offset, records.size());
}

AppStats SiteApp::stats() const {
  AppStats out;
  {
    std::lock_guard lock(log_mu_);
    out = stats_;
    out.log_records = log_->size();
  }
  std::lock_guard lock(ship_mu_);
  out.pending_snapshots = pending_.size();
  return out;
}

}  // namespace stella::app
