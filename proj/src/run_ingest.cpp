#include "stella/run_ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>

namespace stella::ingest {

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    if (i == line.size()) break;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    out.push_back(line.substr(start, i - start));
  }
  return out;
}

std::string_view strip_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

bool is_skippable(std::string_view line) {
  const auto first = line.find_first_not_of(" \t");
  return first == std::string_view::npos || line[first] == '#';
}

std::string format_score(double score) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, score);
  return std::string(buf, ptr);
}

template <class F>
auto at_line(std::size_t line_no, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    throw Error(e.code(), e.detail(), line_no);
  }
}

struct PendingLine {
  RunLine line;
  std::size_t order;
};

}  // namespace

Ranking RunSet::ranking(const ContextId& qid, const SystemId& source) const {
  auto it = rankings.find(qid);
  if (it == rankings.end()) throw Error(ErrorCode::BadRequest, "run " + tag + " does not cover " + qid.str());
  Ranking r{qid, {}, source};
  r.items.reserve(it->second.size());
  for (const auto& e : it->second) r.items.push_back(e.doc);
  return r;
}

CandidateList make_candidate_list(ContextId context, std::vector<DocId> docs) {
  if (docs.empty()) throw Error(ErrorCode::EmptyCandidates, context.str());
  CandidateList cl{std::move(context), std::move(docs), {}};
  cl.members.reserve(cl.candidates.size());
  for (const auto& d : cl.candidates) {
    if (!cl.members.insert(d).second) throw Error(ErrorCode::DuplicateDoc, cl.context.str() + ": " + d.str());
  }
  return cl;
}

RunLine parse_run_line(std::string_view line) {
  const auto fields = split_ws(strip_cr(line));
  if (fields.size() != 6) {
    throw Error(ErrorCode::FieldCount, "expected 6 fields, got " + std::to_string(fields.size()));
  }
  if (fields[1] != "Q0") throw Error(ErrorCode::BadQ0, "second field is '" + std::string(fields[1]) + "'");

  RunLine out;
  out.qid = ContextId(std::string(fields[0]));
  out.doc = DocId(std::string(fields[2]));

  const auto rank_field = fields[3];
  auto [rp, rec] = std::from_chars(rank_field.data(), rank_field.data() + rank_field.size(), out.rank);
  if (rec != std::errc{} || rp != rank_field.data() + rank_field.size() || out.rank < 1) {
    throw Error(ErrorCode::BadRank, "rank '" + std::string(rank_field) + "'");
  }

  const auto score_field = fields[4];
  auto [sp, sec] = std::from_chars(score_field.data(), score_field.data() + score_field.size(), out.score);
  if (sec != std::errc{} || sp != score_field.data() + score_field.size() || !std::isfinite(out.score)) {
    throw Error(ErrorCode::BadScore, "score '" + std::string(score_field) + "'");
  }

  out.tag = std::string(fields[5]);
  return out;
}

RunSet normalize(RunSet rs) {
  for (auto& [qid, entries] : rs.rankings) {
    // Current position stands in for the original rank field.
    std::stable_sort(entries.begin(), entries.end(),
                     [](const RunEntry& a, const RunEntry& b) { return a.score > b.score; });
  }
  return rs;
}

RunSet parse_run_file(std::istream& in) {
  std::map<ContextId, std::vector<PendingLine>> by_query;
  std::map<ContextId, std::set<DocId>> seen;
  std::optional<std::string> tag;
  std::size_t line_no = 0;
  std::size_t count = 0;
  std::string raw;

  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = strip_cr(raw);
    if (is_skippable(line)) continue;

    RunLine rl = at_line(line_no, [&] { return parse_run_line(line); });
    if (!tag) {
      tag = rl.tag;
    } else if (*tag != rl.tag) {
      throw Error(ErrorCode::MixedTags, "'" + *tag + "' and '" + rl.tag + "'", line_no);
    }
    if (!seen[rl.qid].insert(rl.doc).second) {
      throw Error(ErrorCode::DuplicateDocForQuery, rl.qid.str() + " " + rl.doc.str(), line_no);
    }
    auto& bucket = by_query[rl.qid];
    if (bucket.size() == kMaxDepthPerQuery) {
      throw Error(ErrorCode::DepthExceeded,
                  rl.qid.str() + " has more than " + std::to_string(kMaxDepthPerQuery) + " lines", line_no);
    }
    bucket.push_back({std::move(rl), count++});
  }

  RunSet rs;
  rs.tag = tag.value_or("");
  rs.line_count = count;
  for (auto& [qid, lines] : by_query) {
    std::sort(lines.begin(), lines.end(), [](const PendingLine& a, const PendingLine& b) {
      if (a.line.score != b.line.score) return a.line.score > b.line.score;
      if (a.line.rank != b.line.rank) return a.line.rank < b.line.rank;
      return a.order < b.order;
    });
    auto& entries = rs.rankings[qid];
    entries.reserve(lines.size());
    for (auto& p : lines) entries.push_back({std::move(p.line.doc), p.line.score});
  }
  return rs;
}

RunSet parse_run_text(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_run_file(in);
}

RunSet load_run_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return parse_run_file(in);
}

std::string serialize_run(const RunSet& rs) {
  std::string out;
  for (const auto& [qid, entries] : rs.rankings) {
    for (std::size_t i = 0; i < entries.size(); ++i) {
      out += qid.str();
      out += " Q0 ";
      out += entries[i].doc.str();
      out += ' ';
      out += std::to_string(i + 1);
      out += ' ';
      out += format_score(entries[i].score);
      out += ' ';
      out += rs.tag;
      out += '\n';
    }
  }
  return out;
}

ValidationReport validate_against_candidates(const RunSet& rs, const CandidateMap& candidates) {
  ValidationReport report;
  report.tag = rs.tag;
  for (const auto& [qid, entries] : rs.rankings) {
    QueryReport q;
    q.qid = qid;
    auto it = candidates.find(qid);
    if (it == candidates.end()) {
      report.partial = true;
      report.queries.push_back(std::move(q));
      continue;
    }
    const CandidateList& cl = it->second;
    q.has_candidates = true;
    q.candidate_count = cl.candidates.size();
    for (const auto& e : entries) {
      if (cl.contains(e.doc)) {
        ++q.covered;
      } else {
        q.out_of_candidates.push_back(e.doc);
      }
    }
    q.coverage = static_cast<double>(q.covered) / static_cast<double>(q.candidate_count);
    if (!q.out_of_candidates.empty()) report.accepted = false;
    report.queries.push_back(std::move(q));
  }
  return report;
}

std::string ValidationReport::to_text() const {
  std::ostringstream out;
  out << "run " << tag << ' ' << (accepted ? "accepted" : "rejected") << '\n';
  out << "queries " << queries.size() << " partial " << (partial ? "yes" : "no") << '\n';
  for (const auto& q : queries) {
    out << q.qid.str() << ' ';
    if (!q.has_candidates) {
      out << "no-candidates\n";
      continue;
    }
    out << "coverage " << q.covered << '/' << q.candidate_count << ' ' << std::fixed << std::setprecision(6)
        << q.coverage << " out_of_candidates " << q.out_of_candidates.size();
    for (const auto& d : q.out_of_candidates) out << ' ' << d.str();
    out << '\n';
  }
  return out.str();
}

void to_json(nlohmann::json& j, const ValidationReport& r) {
  j = {{"tag", r.tag}, {"accepted", r.accepted}, {"partial", r.partial}, {"queries", nlohmann::json::array()}};
  for (const auto& q : r.queries) {
    nlohmann::json jq = {{"qid", q.qid}, {"has_candidates", q.has_candidates}};
    if (q.has_candidates) {
      jq["covered"] = q.covered;
      jq["candidate_count"] = q.candidate_count;
      jq["coverage"] = q.coverage;
      jq["out_of_candidates"] = q.out_of_candidates;
    }
    j["queries"].push_back(std::move(jq));
  }
}

CandidateMap load_candidates(std::istream& in) {
  CandidateMap out;
  std::size_t line_no = 0;
  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = strip_cr(raw);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos) throw Error(ErrorCode::BadFormat, "missing tab separator", line_no);

    at_line(line_no, [&] {
      ContextId ctx{std::string(line.substr(0, tab))};
      if (out.contains(ctx)) throw Error(ErrorCode::DuplicateContext, ctx.str());
      std::vector<DocId> docs;
      for (auto f : split_ws(line.substr(tab + 1))) docs.emplace_back(std::string(f));
      out.emplace(ctx, make_candidate_list(ctx, std::move(docs)));
      return 0;
    });
  }
  return out;
}

CandidateMap load_candidates(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return load_candidates(in);
}

QueryMap load_queries(std::istream& in) {
  QueryMap out;
  std::size_t line_no = 0;
  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = strip_cr(raw);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos) throw Error(ErrorCode::BadFormat, "missing tab separator", line_no);
    at_line(line_no, [&] {
      QueryId qid{std::string(line.substr(0, tab))};
      if (!out.emplace(qid, std::string(line.substr(tab + 1))).second) {
        throw Error(ErrorCode::DuplicateContext, qid.str());
      }
      return 0;
    });
  }
  return out;
}

QueryMap load_queries(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return load_queries(in);
}

std::string serialize_candidates(const CandidateMap& candidates) {
  std::string out;
  for (const auto& [ctx, cl] : candidates) {
    out += ctx.str();
    out += '\t';
    for (std::size_t i = 0; i < cl.candidates.size(); ++i) {
      if (i) out += ' ';
      out += cl.candidates[i].str();
    }
    out += '\n';
  }
  return out;
}

std::string serialize_queries(const QueryMap& queries) {
  std::string out;
  for (const auto& [qid, text] : queries) {
    out += qid.str();
    out += '\t';
    out += text;
    out += '\n';
  }
  return out;
}

RunStore::RunStore(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
  for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
    if (entry.path().extension() != ".run") continue;
    runs_[entry.path().stem().string()] = std::make_shared<const RunSet>(load_run_file(entry.path()));
  }
}

void RunStore::put(const std::string& key, RunSet rs) {
  if (!is_token(key) || key.find('/') != std::string::npos) throw Error(ErrorCode::InvalidToken, "run key '" + key + "'");
  if (!dir_.empty()) {
    const auto tmp = dir_ / (key + ".run.tmp");
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      out << serialize_run(rs);
      if (!out) throw Error(ErrorCode::Io, "cannot write " + tmp.string());
    }
    std::filesystem::rename(tmp, dir_ / (key + ".run"));
  }
  auto snapshot = std::make_shared<const RunSet>(std::move(rs));
  std::unique_lock lock(mu_);
  runs_[key] = std::move(snapshot);
}

std::shared_ptr<const RunSet> RunStore::get(const std::string& key) const {
  std::shared_lock lock(mu_);
  auto it = runs_.find(key);
  return it == runs_.end() ? nullptr : it->second;
}

std::vector<std::string> RunStore::keys() const {
  std::shared_lock lock(mu_);
  std::vector<std::string> out;
  for (const auto& [k, _] : runs_) out.push_back(k);
  return out;
}

}  // namespace stella::ingest
