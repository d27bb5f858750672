#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "stella/core.hpp"

namespace stella::ingest {

/// Maximum number of run lines accepted for a single query.
inline constexpr std::size_t kMaxDepthPerQuery = 1000;

struct RunLine {
  ContextId qid;
  DocId doc;
  long rank = 0;
  double score = 0.0;
  std::string tag;

  friend bool operator==(const RunLine&, const RunLine&) = default;
};

struct RunEntry {
  DocId doc;
  double score = 0.0;

  friend bool operator==(const RunEntry&, const RunEntry&) = default;
};

/// A normalized Type A submission. Entries for each query are in rank order,
/// so entry i carries rank i + 1.
struct RunSet {
  std::string tag;
  std::map<ContextId, std::vector<RunEntry>> rankings;
  std::size_t line_count = 0;

  bool covers(const ContextId& qid) const { return rankings.contains(qid); }
  /// Ranking for `qid` attributed to `source`. Throws BadRequest when the
  /// query is not covered.
  Ranking ranking(const ContextId& qid, const SystemId& source) const;

  friend bool operator==(const RunSet&, const RunSet&) = default;
};

struct CandidateList {
  ContextId context;
  std::vector<DocId> candidates;  // file order; the baseline serves this order
  std::unordered_set<DocId> members;

  bool contains(const DocId& d) const { return members.contains(d); }
};

using CandidateMap = std::map<ContextId, CandidateList>;
using QueryMap = std::map<QueryId, std::string>;

CandidateList make_candidate_list(ContextId context, std::vector<DocId> docs);

/// Splits one run line into its six positional fields.
RunLine parse_run_line(std::string_view line);

/// Parses a whole run file. Blank lines and lines starting with '#' are
/// skipped. Lines are reordered per query by descending score (ties by the
/// original rank field, then file order) and renumbered from 1.
RunSet parse_run_file(std::istream& in);
RunSet parse_run_text(std::string_view text);
RunSet load_run_file(const std::filesystem::path& path);

/// Canonical form: queries in identifier order, one space between fields,
/// shortest round-trip score representation, trailing newline.
std::string serialize_run(const RunSet& rs);

/// Re-sorts and renumbers an arbitrary RunSet. Identity on parsed sets.
RunSet normalize(RunSet rs);

struct QueryReport {
  ContextId qid;
  bool has_candidates = false;
  std::vector<DocId> out_of_candidates;
  std::size_t covered = 0;          // ranked docs that are candidates
  std::size_t candidate_count = 0;
  double coverage = 0.0;            // covered / candidate_count

  friend bool operator==(const QueryReport&, const QueryReport&) = default;
};

struct ValidationReport {
  std::string tag;
  bool accepted = true;
  bool partial = false;  // some query has no registered candidate list
  std::vector<QueryReport> queries;

  std::string to_text() const;
};

ValidationReport validate_against_candidates(const RunSet& rs, const CandidateMap& candidates);

void to_json(nlohmann::json& j, const ValidationReport& r);

CandidateMap load_candidates(std::istream& in);
CandidateMap load_candidates(const std::filesystem::path& path);
QueryMap load_queries(std::istream& in);
QueryMap load_queries(const std::filesystem::path& path);

std::string serialize_candidates(const CandidateMap& candidates);
std::string serialize_queries(const QueryMap& queries);

/// Persisted runs keyed by run reference. Single writer (upload path),
/// many readers (serving path). Readers get immutable snapshots.
class RunStore {
 public:
  RunStore() = default;
  /// Backed by `dir`; existing `*.run` files are loaded.
  explicit RunStore(std::filesystem::path dir);

  void put(const std::string& key, RunSet rs);
  std::shared_ptr<const RunSet> get(const std::string& key) const;
  std::vector<std::string> keys() const;

 private:
  std::filesystem::path dir_;
  mutable std::shared_mutex mu_;
  std::map<std::string, std::shared_ptr<const RunSet>> runs_;
};

}  // namespace stella::ingest
