#include "dialectrag/error.hpp"

namespace dialectrag {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidEncoding: return "InvalidEncoding";
    case ErrorCode::FileNotFound: return "FileNotFound";
    case ErrorCode::FormatError: return "FormatError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::ChecksumMismatch: return "ChecksumMismatch";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::EmptyReference: return "EmptyReference";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::TokenizationMismatch: return "TokenizationMismatch";
    case ErrorCode::InvalidK: return "InvalidK";
    case ErrorCode::UnknownDialect: return "UnknownDialect";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::ProviderUnavailable: return "ProviderUnavailable";
    case ErrorCode::AuthError: return "AuthError";
    case ErrorCode::RateLimited: return "RateLimited";
    case ErrorCode::ServerError: return "ServerError";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::MalformedResponse: return "MalformedResponse";
    case ErrorCode::ContentFiltered: return "ContentFiltered";
    case ErrorCode::RequestRejected: return "RequestRejected";
    case ErrorCode::FixtureMiss: return "FixtureMiss";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

bool is_network_error(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::ProviderUnavailable:
    case ErrorCode::AuthError:
    case ErrorCode::RateLimited:
    case ErrorCode::ServerError:
    case ErrorCode::Timeout:
    case ErrorCode::MalformedResponse:
    case ErrorCode::ContentFiltered:
    case ErrorCode::RequestRejected:
    case ErrorCode::FixtureMiss:
      return true;
    default:
      return false;
  }
}

}  // namespace dialectrag
