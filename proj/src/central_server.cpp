#include "stella/central_server.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace stella::server {

namespace {

constexpr std::string_view kAdmin = "admin";
constexpr std::string_view kSite = "site";

TimestampMs wall_clock() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

void write_atomically(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << content;
    if (!out) throw Error(ErrorCode::Io, "cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::filesystem::path& p) {
  return p.empty() || p.is_absolute() ? p : base / p;
}

std::string fmt_ratio(const std::optional<double>& v) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", *v);
  return buf;
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

std::string_view to_string(Status s) noexcept {
  switch (s) {
    case Status::submitted: return "submitted";
    case Status::validated: return "validated";
    case Status::live: return "live";
    case Status::retired: return "retired";
  }
  return "?";
}

Status parse_status(std::string_view s) {
  for (Status st : {Status::submitted, Status::validated, Status::live, Status::retired}) {
    if (to_string(st) == s) return st;
  }
  throw Error(ErrorCode::BadRequest, "unknown status '" + std::string(s) + "'");
}

void to_json(nlohmann::json& j, const RegistryEntry& e) {
  j = {{"record", e.record},
       {"participant", e.participant},
       {"status", std::string(to_string(e.status))},
       {"submitted_at", e.submitted_at}};
  if (e.validation) j["validation"] = *e.validation;
}

void from_json(const nlohmann::json& j, RegistryEntry& e) {
  j.at("record").get_to(e.record);
  j.at("participant").get_to(e.participant);
  e.status = parse_status(j.at("status").get<std::string>());
  j.at("submitted_at").get_to(e.submitted_at);
  e.validation = j.contains("validation") ? std::optional(j["validation"]) : std::nullopt;
}

void from_json(const nlohmann::json& j, ServerConfig& cfg) {
  cfg.host = j.value("host", cfg.host);
  cfg.port = j.value("port", cfg.port);
  if (j.contains("data_dir")) cfg.data_dir = j["data_dir"].get<std::string>();
  cfg.candidates_path = j.value("candidates", std::string{});
  for (const auto& [participant, token] : j.value("participants", std::map<std::string, std::string>{})) {
    cfg.participant_tokens[token] = participant;
  }
  cfg.admin_token = j.value("admin_token", std::string{});
  cfg.app_tokens = j.value("apps", std::map<std::string, std::string>{});
  for (const auto& b : j.value("baselines", nlohmann::json::array())) {
    SystemRecord r;
    r.system_id = b.at("system_id").get<SystemId>();
    r.kind = SystemKind::baseline;
    r.task = b.at("task").get<Task>();
    cfg.baselines.push_back(std::move(r));
  }
  cfg.experiments = j.value("experiments", std::vector<assignment::ExperimentConfig>{});
  cfg.bounce_threshold_ms = j.value("bounce_threshold_ms", cfg.bounce_threshold_ms);
}

ServerConfig load_server_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  ServerConfig cfg;
  try {
    cfg = nlohmann::json::parse(in).get<ServerConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, path.string() + ": " + e.what());
  }
  const auto base = path.parent_path();
  cfg.candidates_path = resolve(base, cfg.candidates_path);
  if (cfg.data_dir) cfg.data_dir = resolve(base, *cfg.data_dir);
  return cfg;
}

CentralServer::CentralServer(ServerConfig cfg, ingest::CandidateMap candidates,
                             std::shared_ptr<app::SystemTransport> liveness, Clock clock)
    : cfg_(std::move(cfg)),
      candidates_(std::move(candidates)),
      liveness_(liveness ? std::move(liveness) : std::make_shared<app::HttpTransport>()),
      clock_(clock ? std::move(clock) : Clock(wall_clock)),
      runs_(cfg_.data_dir ? std::make_unique<ingest::RunStore>(*cfg_.data_dir / "runs")
                          : std::make_unique<ingest::RunStore>()) {
  load_state();
  for (const auto& b : cfg_.baselines) {
    if (registry_.contains(b.system_id)) continue;
    registry_.emplace(b.system_id, RegistryEntry{b, std::string(kSite), Status::live, 0, std::nullopt});
  }
}

std::optional<std::string> CentralServer::authenticate(const std::string& token) const {
  if (token.empty()) return std::nullopt;
  if (!cfg_.admin_token.empty() && token == cfg_.admin_token) return std::string(kAdmin);
  if (auto it = cfg_.participant_tokens.find(token); it != cfg_.participant_tokens.end()) return it->second;
  for (const auto& [app_id, app_token] : cfg_.app_tokens) {
    if (app_token == token) return app_id;
  }
  return std::nullopt;
}

RegistryEntry CentralServer::register_system(SystemRecord record, const std::string& token,
                                             std::optional<std::string> run_text) {
  const auto who = authenticate(token);
  if (!who || (who != kAdmin && !cfg_.participant_tokens.contains(token))) {
    throw Error(ErrorCode::AuthFailure, "participant token required");
  }
  if (record.kind == SystemKind::baseline) throw Error(ErrorCode::BadRequest, "baselines are configured, not registered");
  if (record.kind == SystemKind::run_backed && !record.run_ref) record.run_ref = record.system_id.str();
  if (auto err = validate_system_record(record)) throw *err;

  {
    std::unique_lock lock(registry_mu_);
    if (registry_.contains(record.system_id)) throw Error(ErrorCode::DuplicateSystemId, record.system_id.str());
    registry_.emplace(record.system_id, RegistryEntry{record, *who, Status::submitted, clock_(), std::nullopt});
    persist_registry();
  }
  if (run_text && record.kind == SystemKind::run_backed) return upload_run(record.system_id, *run_text, token);
  return *system(record.system_id);
}

RegistryEntry& CentralServer::owned_entry(const SystemId& id, const std::string& token) {
  const auto who = authenticate(token);
  if (!who) throw Error(ErrorCode::AuthFailure, "unknown token");
  auto it = registry_.find(id);
  if (it == registry_.end()) throw Error(ErrorCode::UnknownSystem, id.str());
  if (*who != kAdmin && it->second.participant != *who) throw Error(ErrorCode::AuthFailure, "not the owner of " + id.str());
  return it->second;
}

RegistryEntry CentralServer::upload_run(const SystemId& id, std::string_view run_text, const std::string& token) {
  std::unique_lock lock(registry_mu_);
  RegistryEntry& entry = owned_entry(id, token);
  if (entry.record.kind != SystemKind::run_backed) throw Error(ErrorCode::BadRequest, id.str() + " is not run-backed");
  if (entry.status != Status::submitted) {
    throw Error(ErrorCode::BadTransition, id.str() + " is " + std::string(to_string(entry.status)));
  }

  try {
    auto rs = ingest::parse_run_text(run_text);
    const auto report = ingest::validate_against_candidates(rs, candidates_);
    entry.validation = nlohmann::json(report);
    if (report.accepted) {
      runs_->put(*entry.record.run_ref, std::move(rs));
      entry.status = Status::validated;
    }
  } catch (const Error& e) {
    entry.validation = nlohmann::json{{"accepted", false},
                                      {"error", std::string(stella::to_string(e.code()))},
                                      {"line", e.line()},
                                      {"detail", e.detail()}};
  }
  persist_registry();
  return entry;
}

RegistryEntry CentralServer::transition(const SystemId& id, Status to, const std::string& token) {
  std::unique_lock lock(registry_mu_);
  RegistryEntry& entry = owned_entry(id, token);
  if (entry.record.kind == SystemKind::baseline) throw Error(ErrorCode::BadTransition, "baselines are fixed");
  if (static_cast<int>(to) != static_cast<int>(entry.status) + 1) {
    throw Error(ErrorCode::BadTransition,
                id.str() + ": " + std::string(to_string(entry.status)) + " -> " + std::string(to_string(to)));
  }
  if (to == Status::validated) {
    if (entry.record.kind == SystemKind::run_backed) {
      throw Error(ErrorCode::BadTransition, id.str() + ": run-backed systems are validated by uploading a run");
    }
    if (!liveness_->alive(*entry.record.endpoint, std::chrono::seconds(2))) {
      throw Error(ErrorCode::BadTransition, id.str() + ": endpoint does not answer /test");
    }
  }
  entry.status = to;
  persist_registry();
  return entry;
}

std::vector<RegistryEntry> CentralServer::systems() const {
  std::shared_lock lock(registry_mu_);
  std::vector<RegistryEntry> out;
  for (const auto& [_, e] : registry_) out.push_back(e);
  return out;
}

std::optional<RegistryEntry> CentralServer::system(const SystemId& id) const {
  std::shared_lock lock(registry_mu_);
  auto it = registry_.find(id);
  if (it == registry_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::string> CentralServer::run_text(const SystemId& id) const {
  const auto entry = system(id);
  if (!entry || !entry->record.run_ref) return std::nullopt;
  auto rs = runs_->get(*entry->record.run_ref);
  if (!rs) return std::nullopt;
  return ingest::serialize_run(*rs);
}

CentralServer::AppStream& CentralServer::stream(const std::string& app_id) {
  {
    std::shared_lock lock(streams_mu_);
    if (auto it = streams_.find(app_id); it != streams_.end()) return *it->second;
  }
  std::unique_lock lock(streams_mu_);
  auto& slot = streams_[app_id];
  if (!slot) slot = std::make_unique<AppStream>();
  return *slot;
}

IngestResult CentralServer::ingest_app_snapshot(const Snapshot& snapshot, const std::string& token) {
  if (!is_token(snapshot.app_id) || snapshot.app_id.find('/') != std::string::npos) {
    throw Error(ErrorCode::BadRequest, "invalid app id");
  }
  if (snapshot.seq < 1) throw Error(ErrorCode::BadRequest, "sequence numbers start at 1");
  if (!cfg_.app_tokens.empty()) {
    auto it = cfg_.app_tokens.find(snapshot.app_id);
    if (it == cfg_.app_tokens.end() || it->second != token) throw Error(ErrorCode::AuthFailure, snapshot.app_id);
  }

  AppStream& s = stream(snapshot.app_id);
  std::lock_guard commit(s.commit_mu);

  if (snapshot.seq < s.next_expected || s.parked.contains(snapshot.seq)) {
    return {IngestStatus::duplicate, s.next_expected};
  }
  if (snapshot.seq > s.next_expected) {
    std::unique_lock lock(streams_mu_);
    s.parked.emplace(snapshot.seq, snapshot);
    return {IngestStatus::parked, s.next_expected};
  }

  // Persist, then publish.
  std::vector<Snapshot> ready{snapshot};
  for (auto it = s.parked.find(snapshot.seq + 1); it != s.parked.end() && it->first == ready.back().seq + 1;
       it = s.parked.find(ready.back().seq + 1)) {
    ready.push_back(it->second);
  }
  for (const auto& seg : ready) persist_segment(seg);
  {
    std::unique_lock lock(streams_mu_);
    for (auto& seg : ready) {
      s.parked.erase(seg.seq);
      s.applied.emplace(seg.seq, std::move(seg));
    }
    s.next_expected = s.applied.rbegin()->first + 1;
  }
  {
    std::lock_guard lock(report_mu_);
    report_cache_.reset();
  }
  return {IngestStatus::applied, s.next_expected};
}

std::vector<LogRecord> CentralServer::applied_records() const {
  std::shared_lock lock(streams_mu_);
  std::vector<LogRecord> out;
  for (const auto& [_, s] : streams_) {
    for (const auto& [__, seg] : s->applied) out.insert(out.end(), seg.records.begin(), seg.records.end());
  }
  return out;
}

std::vector<OutcomeRecord> CentralServer::applied_outcomes() const {
  std::shared_lock lock(streams_mu_);
  std::vector<OutcomeRecord> out;
  std::unordered_map<std::string, std::size_t> slot;
  for (const auto& [_, s] : streams_) {
    for (const auto& [__, seg] : s->applied) {
      for (const auto& o : seg.outcomes) {
        auto [it, inserted] = slot.emplace(o.impression_id, out.size());
        if (inserted) {
          out.push_back(o);
        } else {
          out[it->second] = o;
        }
      }
    }
  }
  return out;
}

nlohmann::json CentralServer::build_dashboard_report() const {
  {
    std::lock_guard lock(report_mu_);
    if (report_cache_) return *report_cache_;
  }

  std::vector<LogRecord> records;
  std::vector<OutcomeRecord> outcomes;
  nlohmann::json segments = nlohmann::json::object();
  {
    // One shared lock for a consistent view of every stream.
    std::shared_lock lock(streams_mu_);
    std::unordered_map<std::string, std::size_t> slot;
    for (const auto& [app_id, s] : streams_) {
      if (s->applied.empty()) continue;
      segments[app_id] = s->applied.rbegin()->first;
      for (const auto& [_, seg] : s->applied) {
        records.insert(records.end(), seg.records.begin(), seg.records.end());
        for (const auto& o : seg.outcomes) {
          auto [it, inserted] = slot.emplace(o.impression_id, outcomes.size());
          if (inserted) {
            outcomes.push_back(o);
          } else {
            outcomes[it->second] = o;
          }
        }
      }
    }
  }

  const auto entries = systems();
  std::vector<SystemRecord> registry;
  nlohmann::json systems_json = nlohmann::json::array();
  for (const auto& e : entries) {
    registry.push_back(e.record);
    systems_json.push_back({{"system_id", e.record.system_id},
                            {"participant", e.participant},
                            {"kind", e.record.kind},
                            {"task", e.record.task},
                            {"status", std::string(to_string(e.status))}});
  }

  auto cards = metrics::build_scorecards(records, outcomes, registry, {cfg_.bounce_threshold_ms});
  std::vector<metrics::SystemScorecard> adhoc, rec;
  for (auto& c : cards) (c.task == Task::adhoc ? adhoc : rec).push_back(std::move(c));
  std::stable_sort(adhoc.begin(), adhoc.end(), [](const auto& a, const auto& b) {
    return a.preference_score > b.preference_score;
  });
  std::stable_sort(rec.begin(), rec.end(), [](const auto& a, const auto& b) {
    const double ca = a.ctr.value_or(-1.0);
    const double cb = b.ctr.value_or(-1.0);
    return ca > cb;
  });

  std::optional<TimestampMs> freshness;
  std::uint64_t impressions = 0;
  for (const auto& r : records) {
    freshness = std::max(freshness.value_or(time_of(r)), time_of(r));
    if (std::holds_alternative<ImpressionRecord>(r)) ++impressions;
  }

  nlohmann::json report = {
      {"report_version", 1},
      {"data_freshness_ms", freshness ? nlohmann::json(*freshness) : nlohmann::json(nullptr)},
      {"segments", segments},
      {"experiments", cfg_.experiments},
      {"systems", systems_json},
      {"tasks", {{"adhoc", adhoc}, {"recommendation", rec}}},
      {"totals",
       {{"records", records.size()},
        {"impressions", impressions},
        {"feedback_events", records.size() - impressions},
        {"outcomes", outcomes.size()}}},
  };

  std::lock_guard lock(report_mu_);
  report_cache_ = report;
  return report;
}

std::string CentralServer::build_text_report() const {
  const auto report = build_dashboard_report();
  std::ostringstream out;
  out << "STELLA dashboard\n";
  out << "data freshness (ms): "
      << (report["data_freshness_ms"].is_null() ? std::string("-") : report["data_freshness_ms"].dump()) << '\n';
  out << "records " << report["totals"]["records"] << ", impressions " << report["totals"]["impressions"]
      << ", outcomes " << report["totals"]["outcomes"] << "\n\n";

  char line[256];
  out << "Ad-hoc search (team-draft interleaving vs baseline), by preference score\n";
  std::snprintf(line, sizeof line, "%-24s %11s %8s %8s %6s %6s %6s %8s %17s\n", "system", "impressions", "clicks",
                "ctr", "wins", "losses", "ties", "pref", "95% interval");
  out << line;
  for (const auto& j : report["tasks"]["adhoc"]) {
    const auto c = j.get<metrics::SystemScorecard>();
    std::snprintf(line, sizeof line, "%-24s %11llu %8llu %8s %6llu %6llu %6llu %8s [%s, %s]\n",
                  c.system_id.str().c_str(), static_cast<unsigned long long>(c.impressions),
                  static_cast<unsigned long long>(c.clicks), fmt_ratio(c.ctr).c_str(),
                  static_cast<unsigned long long>(c.wins), static_cast<unsigned long long>(c.losses),
                  static_cast<unsigned long long>(c.ties), fmt_double(c.preference_score).c_str(),
                  fmt_double(c.preference_ci_low).c_str(), fmt_double(c.preference_ci_high).c_str());
    out << line;
  }

  out << "\nDataset recommendation (session A/B), by CTR\n";
  std::snprintf(line, sizeof line, "%-24s %11s %8s %8s %8s %6s %6s %6s\n", "system", "impressions", "clicks", "ctr",
                "bounce", "up", "down", "net");
  out << line;
  for (const auto& j : report["tasks"]["recommendation"]) {
    const auto c = j.get<metrics::SystemScorecard>();
    std::snprintf(line, sizeof line, "%-24s %11llu %8llu %8s %8s %6llu %6llu %6lld\n", c.system_id.str().c_str(),
                  static_cast<unsigned long long>(c.impressions), static_cast<unsigned long long>(c.clicks),
                  fmt_ratio(c.ctr).c_str(), fmt_ratio(c.bounce_rate).c_str(),
                  static_cast<unsigned long long>(c.votes_up), static_cast<unsigned long long>(c.votes_down),
                  static_cast<long long>(c.votes_up) - static_cast<long long>(c.votes_down));
    out << line;
  }
  return out.str();
}

void CentralServer::persist_registry() const {
  {
    std::lock_guard lock(report_mu_);
    report_cache_.reset();
  }
  if (!cfg_.data_dir) return;
  nlohmann::json j = nlohmann::json::array();
  for (const auto& [_, e] : registry_) j.push_back(e);
  write_atomically(*cfg_.data_dir / "registry.json", j.dump(2));
}

void CentralServer::persist_segment(const Snapshot& s) const {
  if (!cfg_.data_dir) return;
  char name[32];
  std::snprintf(name, sizeof name, "%010llu.json", static_cast<unsigned long long>(s.seq));
  write_atomically(*cfg_.data_dir / "segments" / s.app_id / name, nlohmann::json(s).dump());
}

void CentralServer::load_state() {
  if (!cfg_.data_dir) return;
  const auto& dir = *cfg_.data_dir;
  if (std::ifstream in(dir / "registry.json"); in) {
    for (auto& e : nlohmann::json::parse(in).get<std::vector<RegistryEntry>>()) {
      registry_.emplace(e.record.system_id, std::move(e));
    }
  }
  const auto seg_dir = dir / "segments";
  if (!std::filesystem::exists(seg_dir)) return;
  for (const auto& app_dir : std::filesystem::directory_iterator(seg_dir)) {
    if (!app_dir.is_directory()) continue;
    auto s = std::make_unique<AppStream>();
    for (const auto& f : std::filesystem::directory_iterator(app_dir.path())) {
      if (f.path().extension() != ".json") continue;
      std::ifstream in(f.path());
      auto snap = nlohmann::json::parse(in).get<Snapshot>();
      s->applied.emplace(snap.seq, std::move(snap));
    }
    // Only a contiguous prefix counts as applied.
    std::uint64_t next = 1;
    while (s->applied.contains(next)) ++next;
    s->applied.erase(s->applied.lower_bound(next), s->applied.end());
    s->next_expected = next;
    streams_.emplace(app_dir.path().filename().string(), std::move(s));
  }
}

}  // namespace stella::server
