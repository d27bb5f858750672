#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "stella/core.hpp"

namespace stella::interleave {

inline constexpr std::size_t kDefaultTargetLength = 10;

struct TeamItem {
  DocId doc;
  TeamLabel team = TeamLabel::baseline;

  friend bool operator==(const TeamItem&, const TeamItem&) = default;
};

struct InterleavedImpression {
  std::string impression_id;
  ContextId context;
  std::vector<TeamItem> items;
  std::vector<bool> coin_trace;  // true: baseline picked first in that round
  SystemId source_baseline;
  SystemId source_experimental;
  std::size_t target_length = kDefaultTargetLength;

  std::vector<DocId> docs() const;

  friend bool operator==(const InterleavedImpression&, const InterleavedImpression&) = default;
};

/// Supplies one coin per draft round. true means the baseline team picks
/// first in that round.
using CoinSource = std::function<bool()>;

/// Deterministic coin stream keyed by impression id, so any impression can
/// be replayed from its id alone.
class SeededCoins {
 public:
  explicit SeededCoins(std::string_view impression_id);
  bool operator()() { return (engine_() >> 63) != 0; }

 private:
  std::mt19937_64 engine_;
};

/// Coins taken from a fixed sequence; throws BadRequest when exhausted.
CoinSource fixed_coins(std::vector<bool> coins);

/// Team-draft interleaving of a baseline and an experimental ranking.
///
/// Each round draws one coin. The team that wins the coin appends its
/// highest-ranked document not yet shown, then the other team does the
/// same. A team whose list is exhausted skips its pick. Drafting stops as
/// soon as `target_length` documents are placed or both lists are used up.
InterleavedImpression team_draft_interleave(const Ranking& baseline, const Ranking& experimental,
                                            std::size_t target_length, const CoinSource& coins,
                                            std::string impression_id = {});

/// Click credit for one impression. Repeated clicks on a document count
/// once; equal counts (including none) are a tie.
Outcome credit(const InterleavedImpression& impression, std::span<const DocId> clicks);

/// Same as `credit` over the stored team labels of a served list.
Outcome credit(std::span<const DocId> docs, std::span<const TeamLabel> teams, std::span<const DocId> clicks);

struct Preference {
  std::uint64_t wins = 0;    // experimental preferred
  std::uint64_t losses = 0;  // baseline preferred
  std::uint64_t ties = 0;
  double preference_score = 0.5;

  friend bool operator==(const Preference&, const Preference&) = default;
};

double preference_score(std::uint64_t wins, std::uint64_t losses) noexcept;
Preference aggregate_preference(std::span<const Outcome> outcomes);

void to_json(nlohmann::json& j, const TeamItem& t);
void from_json(const nlohmann::json& j, TeamItem& t);
void to_json(nlohmann::json& j, const InterleavedImpression& imp);
void from_json(const nlohmann::json& j, InterleavedImpression& imp);

}  // namespace stella::interleave
