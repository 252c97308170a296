#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace assert_rag {

enum class ErrorCode {
  Io,
  LineCountMismatch,
  EmptySample,
  MalformedRecord,
  DuplicateId,
  TooSmall,
  BothEmpty,
  EmptyCorpus,
  DimMismatch,
  ZeroNorm,
  EmptyText,
  Transport,
  Protocol,
  DimViolation,
  EmptyCodebase,
  BudgetTooSmall,
  EchoWithoutRetrieval,
  NoCandidates,
  BadWeights,
  EmptyReference,
  IdSetMismatch,
  Config,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::Io: return "IoError";
    case ErrorCode::LineCountMismatch: return "LineCountMismatch";
    case ErrorCode::EmptySample: return "EmptySample";
    case ErrorCode::MalformedRecord: return "MalformedRecord";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::TooSmall: return "TooSmall";
    case ErrorCode::BothEmpty: return "BothEmpty";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::ZeroNorm: return "ZeroNorm";
    case ErrorCode::EmptyText: return "EmptyText";
    case ErrorCode::Transport: return "Transport";
    case ErrorCode::Protocol: return "ProtocolError";
    case ErrorCode::DimViolation: return "DimViolation";
    case ErrorCode::EmptyCodebase: return "EmptyCodebase";
    case ErrorCode::BudgetTooSmall: return "BudgetTooSmall";
    case ErrorCode::EchoWithoutRetrieval: return "EchoWithoutRetrieval";
    case ErrorCode::NoCandidates: return "NoCandidates";
    case ErrorCode::BadWeights: return "BadWeights";
    case ErrorCode::EmptyReference: return "EmptyReference";
    case ErrorCode::IdSetMismatch: return "IdSetMismatch";
    case ErrorCode::Config: return "ConfigError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above; the
/// message is prefixed with the code name so CLI output stays greppable.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace assert_rag
