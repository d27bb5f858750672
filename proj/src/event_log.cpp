#include "stella/event_log.hpp"

#include <array>

namespace stella {

const std::string& session_of(const LogRecord& r) noexcept {
  return std::visit([](const auto& rec) -> const std::string& { return rec.session_id; }, r);
}

TimestampMs time_of(const LogRecord& r) noexcept {
  return std::visit([](const auto& rec) { return rec.at; }, r);
}

void to_json(nlohmann::json& j, const ImpressionRecord& r) {
  j = {{"impression_id", r.impression_id},
       {"session_id", r.session_id},
       {"task", r.task},
       {"context", r.context},
       {"items", r.items},
       {"system", r.system},
       {"at", r.at}};
  if (!r.teams.empty()) j["teams"] = r.teams;
  if (r.baseline) j["baseline"] = *r.baseline;
  if (r.fallback_from) j["fallback_from"] = *r.fallback_from;
}

void from_json(const nlohmann::json& j, ImpressionRecord& r) {
  j.at("impression_id").get_to(r.impression_id);
  j.at("session_id").get_to(r.session_id);
  j.at("task").get_to(r.task);
  j.at("context").get_to(r.context);
  j.at("items").get_to(r.items);
  j.at("system").get_to(r.system);
  j.at("at").get_to(r.at);
  r.teams = j.contains("teams") ? j["teams"].get<std::vector<TeamLabel>>() : std::vector<TeamLabel>{};
  r.baseline = j.contains("baseline") ? std::optional(j["baseline"].get<SystemId>()) : std::nullopt;
  r.fallback_from = j.contains("fallback_from") ? std::optional(j["fallback_from"].get<SystemId>()) : std::nullopt;
}

void to_json(nlohmann::json& j, const LogRecord& r) {
  if (const auto* imp = std::get_if<ImpressionRecord>(&r)) {
    j = {{"type", "impression"}, {"record", *imp}};
  } else {
    j = {{"type", "feedback"}, {"record", std::get<FeedbackEvent>(r)}};
  }
}

void from_json(const nlohmann::json& j, LogRecord& r) {
  const auto type = j.at("type").get<std::string>();
  if (type == "impression") {
    r = j.at("record").get<ImpressionRecord>();
  } else if (type == "feedback") {
    r = j.at("record").get<FeedbackEvent>();
  } else {
    throw Error(ErrorCode::InvalidRecord, "unknown log record type '" + type + "'");
  }
}

void to_json(nlohmann::json& j, const OutcomeRecord& r) {
  j = {{"impression_id", r.impression_id},
       {"experimental", r.experimental},
       {"baseline", r.baseline},
       {"outcome", r.outcome}};
}

void from_json(const nlohmann::json& j, OutcomeRecord& r) {
  j.at("impression_id").get_to(r.impression_id);
  j.at("experimental").get_to(r.experimental);
  j.at("baseline").get_to(r.baseline);
  j.at("outcome").get_to(r.outcome);
}

namespace {

/// Reads complete records; returns the byte offset just past the last one.
std::streamoff read_records(std::istream& in, std::vector<LogRecord>& out) {
  std::streamoff good = 0;
  std::array<unsigned char, 4> len_bytes{};
  std::string payload;
  while (in.read(reinterpret_cast<char*>(len_bytes.data()), 4)) {
    const std::uint32_t len = std::uint32_t{len_bytes[0]} | (std::uint32_t{len_bytes[1]} << 8) |
                              (std::uint32_t{len_bytes[2]} << 16) | (std::uint32_t{len_bytes[3]} << 24);
    payload.resize(len);
    if (!in.read(payload.data(), len)) break;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(payload);
    } catch (const nlohmann::json::parse_error&) {
      break;
    }
    out.push_back(j.get<LogRecord>());
    good += 4 + static_cast<std::streamoff>(len);
  }
  return good;
}

}  // namespace

EventLog::EventLog(std::filesystem::path path) : path_(std::move(path)) {
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  if (std::filesystem::exists(path_)) {
    std::streamoff good = 0;
    {
      std::ifstream in(path_, std::ios::binary);
      good = read_records(in, records_);
    }
    if (static_cast<std::uintmax_t>(good) != std::filesystem::file_size(path_)) {
      std::filesystem::resize_file(path_, static_cast<std::uintmax_t>(good));
    }
  }
  out_.open(path_, std::ios::binary | std::ios::app);
  if (!out_) throw Error(ErrorCode::Io, "cannot open event log " + path_.string());
}

std::size_t EventLog::append(const LogRecord& record) {
  const std::string payload = nlohmann::json(record).dump();
  const auto len = static_cast<std::uint32_t>(payload.size());
  const std::array<char, 4> len_bytes{static_cast<char>(len & 0xff), static_cast<char>((len >> 8) & 0xff),
                                      static_cast<char>((len >> 16) & 0xff), static_cast<char>((len >> 24) & 0xff)};
  std::lock_guard lock(mu_);
  if (out_.is_open()) {
    out_.write(len_bytes.data(), 4);
    out_.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    out_.flush();
    if (!out_) throw Error(ErrorCode::Io, "write to event log failed");
  }
  records_.push_back(record);
  return records_.size() - 1;
}

std::size_t EventLog::size() const {
  std::lock_guard lock(mu_);
  return records_.size();
}

std::vector<LogRecord> EventLog::read_from(std::size_t offset) const {
  std::lock_guard lock(mu_);
  if (offset >= records_.size()) return {};
  return {records_.begin() + static_cast<std::ptrdiff_t>(offset), records_.end()};
}

std::vector<LogRecord> EventLog::replay(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open event log " + path.string());
  std::vector<LogRecord> out;
  read_records(in, out);
  return out;
}

}  // namespace stella
