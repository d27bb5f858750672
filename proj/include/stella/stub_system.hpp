#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "stella/run_ingest.hpp"
#include "stella/system_client.hpp"

namespace httplib {
class Server;
}

namespace stella::sim {

/// Hidden relevance grades per context; missing docs count as grade 0.
using GradeMap = std::map<ContextId, std::map<DocId, int>>;

enum class Strategy {
  ideal,            // grade descending, ties in candidate order
  candidate_order,  // same as the default baseline
  reverse,          // candidate order reversed
  shuffle,          // fixed per-context permutation from the seed
};

std::string_view to_string(Strategy s) noexcept;
Strategy parse_strategy(std::string_view s);

/// A synthetic experimental system ranking the candidate lists of a world.
class StubSystem {
 public:
  StubSystem(const ingest::CandidateMap& candidates, const GradeMap& grades, Strategy strategy,
             std::uint64_t seed = 0);

  /// Full ranking of the context's candidates; empty for unknown contexts.
  std::vector<DocId> rank(const ContextId& context) const;
  /// The same rankings as a run file, scored by descending rank.
  ingest::RunSet as_run(const std::string& tag) const;
  Strategy strategy() const noexcept { return strategy_; }

 private:
  std::map<ContextId, std::vector<DocId>> rankings_;
  Strategy strategy_;
};

/// Deterministic fault injection: each call draws once from a seeded
/// generator and fails with probability `timeout_rate`.
struct FaultPlan {
  double timeout_rate = 0.0;
  std::uint64_t seed = 0;
};

/// Dispatches endpoint URLs to in-process stubs, no sockets involved.
class InProcessTransport final : public app::SystemTransport {
 public:
  void add(const std::string& endpoint, std::shared_ptr<const StubSystem> stub, FaultPlan faults = {});

  std::vector<std::string> fetch(const std::string& endpoint, const app::SystemQuery& q,
                                 std::chrono::milliseconds deadline) override;
  bool alive(const std::string& endpoint, std::chrono::milliseconds deadline) override;

  std::uint64_t calls() const;
  std::uint64_t injected_timeouts() const;

 private:
  struct Slot {
    std::shared_ptr<const StubSystem> stub;
    FaultPlan faults;
    std::mt19937_64 rng;
  };
  mutable std::mutex mu_;
  std::map<std::string, Slot> slots_;
  std::uint64_t calls_ = 0;
  std::uint64_t timeouts_ = 0;
};

/// Serves a stub over the system-endpoint wire protocol:
///   GET /ranking?qid=&query=   GET /recommendation/datasets?item_id=   GET /test
/// Faulty calls sleep for `fault_delay` before answering.
class StubServer {
 public:
  StubServer(std::shared_ptr<const StubSystem> stub, FaultPlan faults = {},
             std::chrono::milliseconds fault_delay = std::chrono::milliseconds(1500));
  ~StubServer();

  StubServer(const StubServer&) = delete;
  StubServer& operator=(const StubServer&) = delete;

  int bind(const std::string& host, int port);
  void start();
  void run();
  void stop();
  int port() const noexcept { return port_; }
  std::string url() const;

 private:
  bool faulty();

  std::shared_ptr<const StubSystem> stub_;
  FaultPlan faults_;
  std::chrono::milliseconds fault_delay_;
  std::mutex rng_mu_;
  std::mt19937_64 rng_;
  std::unique_ptr<httplib::Server> http_;
  std::thread thread_;
  std::string host_ = "127.0.0.1";
  int port_ = 0;
};

/// Uniform double in [0, 1) from the top 53 bits of one draw. Unlike
/// std::uniform_real_distribution, identical on every standard library.
double unit_draw(std::mt19937_64& rng) noexcept;

}  // namespace stella::sim
