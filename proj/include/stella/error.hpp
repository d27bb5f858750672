#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace stella {

enum class ErrorCode {
  // core model
  InvalidToken,
  DuplicateDoc,
  EmptyRanking,
  InvalidRecord,
  // run ingest
  FieldCount,
  BadQ0,
  BadRank,
  BadScore,
  DuplicateDocForQuery,
  MixedTags,
  DepthExceeded,
  DuplicateContext,
  EmptyCandidates,
  BadFormat,
  // interleaving
  ContextMismatch,
  UnknownClickedDoc,
  // site app
  NoBaseline,
  UnknownImpression,
  DuplicateEvent,
  BadRequest,
  Timeout,
  MalformedResponse,
  OutOfCandidates,
  Transport,
  // central server
  DuplicateSystemId,
  AuthFailure,
  UnknownSystem,
  BadTransition,
  GapDetected,
  DuplicateSegment,
  InvalidConfig,
  Io,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Error carried by every fallible operation in the platform. Parse errors
/// attach the 1-based line number of the offending input line.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail, std::size_t line = 0);

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }
  std::size_t line() const noexcept { return line_; }

 private:
  ErrorCode code_;
  std::string detail_;
  std::size_t line_;
};

}  // namespace stella
