#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace dialectrag {

enum class ErrorCode {
  InvalidEncoding,
  FileNotFound,
  FormatError,
  IoError,
  VersionMismatch,
  ChecksumMismatch,
  EmptyCorpus,
  EmptyInput,
  EmptyReference,
  LengthMismatch,
  DimensionMismatch,
  TokenizationMismatch,
  InvalidK,
  UnknownDialect,
  DuplicateId,
  ProviderUnavailable,
  AuthError,
  RateLimited,
  ServerError,
  Timeout,
  MalformedResponse,
  ContentFiltered,
  RequestRejected,
  FixtureMiss,
  InvalidArgument,
};

std::string_view to_string(ErrorCode code) noexcept;

/// True for failures caused by a remote service or the network.
bool is_network_error(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Malformed input line; carries the 1-based line number.
class FormatError : public Error {
 public:
  FormatError(std::size_t line_no, const std::string& reason)
      : Error(ErrorCode::FormatError, "line " + std::to_string(line_no) + ": " + reason),
        line_no_(line_no),
        reason_(reason) {}

  std::size_t line_no() const noexcept { return line_no_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::size_t line_no_;
  std::string reason_;
};

}  // namespace dialectrag
