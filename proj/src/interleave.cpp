#include "stella/interleave.hpp"

#include <memory>

namespace stella::interleave {

std::vector<DocId> InterleavedImpression::docs() const {
  std::vector<DocId> out;
  out.reserve(items.size());
  for (const auto& it : items) out.push_back(it.doc);
  return out;
}

SeededCoins::SeededCoins(std::string_view impression_id) : engine_(fnv1a64(impression_id)) {}

CoinSource fixed_coins(std::vector<bool> coins) {
  auto state = std::make_shared<std::pair<std::vector<bool>, std::size_t>>(std::move(coins), 0);
  return [state] {
    auto& [seq, pos] = *state;
    if (pos >= seq.size()) throw Error(ErrorCode::BadRequest, "coin sequence exhausted");
    return static_cast<bool>(seq[pos++]);
  };
}

namespace {

class Drafter {
 public:
  Drafter(const Ranking& r, TeamLabel team) : ranking_(r), team_(team) {}

  /// Appends this team's best unplaced document. Returns false if none left.
  bool pick(std::vector<TeamItem>& out, std::unordered_set<DocId>& placed) {
    while (next_ < ranking_.items.size() && placed.contains(ranking_.items[next_])) ++next_;
    if (next_ == ranking_.items.size()) return false;
    placed.insert(ranking_.items[next_]);
    out.push_back({ranking_.items[next_], team_});
    ++next_;
    return true;
  }

  bool exhausted(const std::unordered_set<DocId>& placed) {
    while (next_ < ranking_.items.size() && placed.contains(ranking_.items[next_])) ++next_;
    return next_ == ranking_.items.size();
  }

 private:
  const Ranking& ranking_;
  TeamLabel team_;
  std::size_t next_ = 0;
};

}  // namespace

InterleavedImpression team_draft_interleave(const Ranking& baseline, const Ranking& experimental,
                                            std::size_t target_length, const CoinSource& coins,
                                            std::string impression_id) {
  if (baseline.context != experimental.context) {
    throw Error(ErrorCode::ContextMismatch, baseline.context.str() + " vs " + experimental.context.str());
  }
  if (target_length < 1) throw Error(ErrorCode::BadRequest, "target_length must be >= 1");
  if (auto err = validate_ranking(baseline)) throw *err;
  if (auto err = validate_ranking(experimental)) throw *err;

  InterleavedImpression imp;
  imp.impression_id = std::move(impression_id);
  imp.context = baseline.context;
  imp.source_baseline = baseline.source;
  imp.source_experimental = experimental.source;
  imp.target_length = target_length;

  std::unordered_set<DocId> placed;
  Drafter base(baseline, TeamLabel::baseline);
  Drafter exp(experimental, TeamLabel::experimental);

  while (imp.items.size() < target_length && !(base.exhausted(placed) && exp.exhausted(placed))) {
    const bool baseline_first = coins();
    imp.coin_trace.push_back(baseline_first);
    Drafter& first = baseline_first ? base : exp;
    Drafter& second = baseline_first ? exp : base;
    first.pick(imp.items, placed);
    if (imp.items.size() < target_length) second.pick(imp.items, placed);
  }
  return imp;
}

Outcome credit(std::span<const DocId> docs, std::span<const TeamLabel> teams, std::span<const DocId> clicks) {
  if (docs.size() != teams.size()) throw Error(ErrorCode::InvalidRecord, "docs and team labels differ in length");
  std::unordered_set<DocId> counted;
  long experimental = 0;
  long base = 0;
  for (const auto& c : clicks) {
    std::size_t i = 0;
    while (i < docs.size() && docs[i] != c) ++i;
    if (i == docs.size()) throw Error(ErrorCode::UnknownClickedDoc, c.str());
    if (!counted.insert(c).second) continue;
    (teams[i] == TeamLabel::experimental ? experimental : base) += 1;
  }
  if (experimental > base) return Outcome::win_experimental;
  if (base > experimental) return Outcome::win_baseline;
  return Outcome::tie;
}

Outcome credit(const InterleavedImpression& impression, std::span<const DocId> clicks) {
  std::vector<DocId> docs;
  std::vector<TeamLabel> teams;
  for (const auto& it : impression.items) {
    docs.push_back(it.doc);
    teams.push_back(it.team);
  }
  return credit(docs, teams, clicks);
}

double preference_score(std::uint64_t wins, std::uint64_t losses) noexcept {
  if (wins + losses == 0) return 0.5;
  return static_cast<double>(wins) / static_cast<double>(wins + losses);
}

Preference aggregate_preference(std::span<const Outcome> outcomes) {
  Preference p;
  for (Outcome o : outcomes) {
    switch (o) {
      case Outcome::win_experimental: ++p.wins; break;
      case Outcome::win_baseline: ++p.losses; break;
      case Outcome::tie: ++p.ties; break;
    }
  }
  p.preference_score = preference_score(p.wins, p.losses);
  return p;
}

void to_json(nlohmann::json& j, const TeamItem& t) { j = {{"doc", t.doc}, {"team", t.team}}; }
void from_json(const nlohmann::json& j, TeamItem& t) {
  j.at("doc").get_to(t.doc);
  j.at("team").get_to(t.team);
}

void to_json(nlohmann::json& j, const InterleavedImpression& imp) {
  j = {{"impression_id", imp.impression_id},
       {"context", imp.context},
       {"items", imp.items},
       {"coin_trace", imp.coin_trace},
       {"source_baseline", imp.source_baseline},
       {"source_experimental", imp.source_experimental},
       {"target_length", imp.target_length}};
}
void from_json(const nlohmann::json& j, InterleavedImpression& imp) {
  j.at("impression_id").get_to(imp.impression_id);
  j.at("context").get_to(imp.context);
  j.at("items").get_to(imp.items);
  j.at("coin_trace").get_to(imp.coin_trace);
  j.at("source_baseline").get_to(imp.source_baseline);
  j.at("source_experimental").get_to(imp.source_experimental);
  j.at("target_length").get_to(imp.target_length);
}

}  // namespace stella::interleave
