#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "stella/central_server.hpp"
#include "stella/site_app.hpp"
#include "stella/stub_system.hpp"

namespace stella::sim {

/// Probabilities of grades 0, 1, 2.
using GradeDistribution = std::array<double, 3>;
inline constexpr GradeDistribution kDefaultGrades{0.6, 0.3, 0.1};

struct SyntheticWorld {
  std::uint64_t seed = 0;
  ingest::QueryMap queries;
  ingest::CandidateMap candidates;
  GradeMap grades;
  std::vector<ContextId> contexts;  // sorted

  int grade(const ContextId& context, const DocId& doc) const;
};

/// Contexts are q0001.., docs q0001-d001..; grades are drawn independently
/// of candidate order.
SyntheticWorld generate_world(std::size_t n_queries, std::size_t n_docs_per_query, std::uint64_t seed,
                              const GradeDistribution& dist = kDefaultGrades);

enum class ClickModelKind { position_based, cascade, random_uniform };

std::string_view to_string(ClickModelKind k) noexcept;
ClickModelKind parse_click_model_kind(std::string_view s);

struct ClickModel {
  ClickModelKind kind = ClickModelKind::cascade;
  /// Probability that rank r (1-based) is looked at; position_based only.
  std::function<double(std::size_t)> examination = [](std::size_t r) { return 1.0 / static_cast<double>(r); };
  /// Click probability of an examined doc, by grade.
  std::array<double, 3> attractiveness{0.05, 0.5, 0.95};
  /// Overrides `attractiveness` when set.
  std::function<double(const ContextId&, const DocId&)> relevance;
  /// Cascade: probability of scanning on after a click.
  double continuation = 0.5;
  /// random_uniform: click probability of every shown doc.
  double click_probability = 0.1;

  double relevance_of(const SyntheticWorld& world, const ContextId& context, const DocId& doc) const;
};

void from_json(const nlohmann::json& j, ClickModel& m);
void to_json(nlohmann::json& j, const ClickModel& m);

/// 0-based positions of the clicked docs, in scan order.
std::vector<std::size_t> sample_clicks(const ClickModel& model, const SyntheticWorld& world, const ContextId& context,
                                       std::span<const DocId> shown, std::mt19937_64& rng);

/// What a simulated user talks to.
class AppClient {
 public:
  virtual ~AppClient() = default;
  virtual app::ServedList ranking(const app::RankingRequest& req) = 0;
  virtual std::optional<app::ServedList> recommendation(const app::RecommendationRequest& req) = 0;
  virtual void feedback(const FeedbackEvent& event) = 0;
};

class InProcessClient final : public AppClient {
 public:
  explicit InProcessClient(app::SiteApp& app) : app_(app) {}
  app::ServedList ranking(const app::RankingRequest& req) override { return app_.handle_ranking(req); }
  std::optional<app::ServedList> recommendation(const app::RecommendationRequest& req) override {
    return app_.handle_recommendation(req);
  }
  void feedback(const FeedbackEvent& event) override { app_.record_feedback(event); }

 private:
  app::SiteApp& app_;
};

/// Talks to a site app over its public HTTP API.
class HttpAppClient final : public AppClient {
 public:
  explicit HttpAppClient(std::string base_url);
  ~HttpAppClient() override;
  app::ServedList ranking(const app::RankingRequest& req) override;
  std::optional<app::ServedList> recommendation(const app::RecommendationRequest& req) override;
  void feedback(const FeedbackEvent& event) override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct SessionPlan {
  std::string session_id;
  Task task = Task::adhoc;
  ContextId context;
  TimestampMs start = 0;
  std::size_t page_size = 10;
  int requested_k = 6;
};

struct SessionTrace {
  SessionPlan plan;
  std::optional<app::ServedList> served;  // nullopt when the panel was skipped
  std::vector<FeedbackEvent> events;
};

/// Requests one panel and posts the sampled clicks. Each click is followed
/// by a page_leave after a dwell that is long for relevant docs and short
/// (a bounce) otherwise; recommendation clicks may add a vote.
SessionTrace simulate_session(const SyntheticWorld& world, const ClickModel& model, AppClient& client,
                              const SessionPlan& plan, std::mt19937_64& rng);

enum class Mode { inproc, wire };

struct StubSpec {
  SystemId system_id;
  Task task = Task::adhoc;
  SystemKind kind = SystemKind::endpoint_backed;
  Strategy strategy = Strategy::ideal;
  FaultPlan faults;
};

void from_json(const nlohmann::json& j, StubSpec& s);

struct CampaignConfig {
  std::uint64_t seed = 42;
  std::size_t sessions = 1000;
  Mode mode = Mode::inproc;
  std::size_t n_queries = 50;
  std::size_t docs_per_query = 20;
  GradeDistribution grades = kDefaultGrades;
  double adhoc_share = 0.5;
  std::size_t page_size = 10;
  int requested_k = 6;
  ClickModel click_model;
  std::vector<StubSpec> systems;
  /// Ship a snapshot every this many sessions; 0 ships once at the end.
  std::size_t ship_every = 0;
  std::chrono::milliseconds deadline{800};
  TimestampMs start_at = 1'700'000'000'000;
  TimestampMs session_gap_ms = 600'000;
  TimestampMs bounce_threshold_ms = metrics::kDefaultBounceThresholdMs;
};

void from_json(const nlohmann::json& j, CampaignConfig& c);
CampaignConfig load_campaign_config(const std::filesystem::path& path);

inline const SystemId kBaselineAdhoc{"baseline-adhoc"};
inline const SystemId kBaselineRecommendation{"baseline-rec"};

/// A whole platform wired together: central server, one site app, stub
/// systems and the simulated users. In wire mode every part talks HTTP on
/// localhost; in-process mode makes direct calls.
class Harness {
 public:
  explicit Harness(CampaignConfig cfg);
  ~Harness();

  Harness(const Harness&) = delete;
  Harness& operator=(const Harness&) = delete;

  SessionPlan plan_session(std::size_t index) const;
  /// Session `index` always gets the same plan and random stream.
  SessionTrace run_session(std::size_t index);
  std::size_t ship();

  nlohmann::json report();
  std::string report_text();

  const CampaignConfig& config() const noexcept { return cfg_; }
  const SyntheticWorld& world() const noexcept { return world_; }
  app::SiteApp& app() noexcept { return *app_; }
  server::CentralServer& server() noexcept { return *server_; }
  /// Null in wire mode.
  InProcessTransport* transport() noexcept { return inproc_.get(); }
  std::shared_ptr<const StubSystem> stub(const SystemId& id) const;

 private:
  struct Wire;
  void register_systems();

  CampaignConfig cfg_;
  SyntheticWorld world_;
  std::map<SystemId, std::shared_ptr<const StubSystem>> stubs_;
  std::shared_ptr<InProcessTransport> inproc_;
  std::unique_ptr<server::CentralServer> server_;
  std::unique_ptr<app::SiteApp> app_;
  std::unique_ptr<AppClient> client_;
  std::unique_ptr<Wire> wire_;
};

/// Offline quality of each system against its baseline on the hidden grades.
struct GroundTruth {
  SystemId system_id;
  Task task = Task::adhoc;
  double ndcg = 0.0;
  double baseline_ndcg = 0.0;
  bool truly_better() const noexcept { return ndcg > baseline_ndcg; }
};

double ndcg_at(std::span<const DocId> ranking, const std::map<DocId, int>& grades, std::size_t k);
std::vector<GroundTruth> ground_truth(const Harness& h);

/// Drives cfg.sessions sessions, ships, and joins the dashboard verdicts
/// with the ground truth.
nlohmann::json run_campaign(const CampaignConfig& cfg);

}  // namespace stella::sim
