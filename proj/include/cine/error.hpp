#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cine {

enum class ErrorCode {
  EmptyInput,
  MalformedCue,
  EmptyAfterNormalization,
  UnknownCharacter,
  InvalidTaggedScript,
  OutOfWindow,
  EmptyCorpus,
  NotFound,
  TransportError,
  RateLimited,
  ProviderError,
  EmptyCompletion,
  OverBudget,
  EmptyEvidence,
  InvariantViolation,
  CountMismatch,
  MissingReflections,
  Unparseable,
  DegenerateSample,
  ZeroVariance,
  InsufficientCells,
  ConfigError,
  IoError,
  Interrupted,
};

std::string_view to_string(ErrorCode code);

/// Base exception for every failure the library reports. The code lets
/// callers branch on the failure class without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Raised by providers and transports when the server asks the caller to back off.
class RateLimitedError : public Error {
 public:
  RateLimitedError(const std::string& message, double retry_after_seconds)
      : Error(ErrorCode::RateLimited, message), retry_after_(retry_after_seconds) {}

  double retry_after_seconds() const noexcept { return retry_after_; }

 private:
  double retry_after_;
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::MalformedCue: return "MalformedCue";
    case ErrorCode::EmptyAfterNormalization: return "EmptyAfterNormalization";
    case ErrorCode::UnknownCharacter: return "UnknownCharacter";
    case ErrorCode::InvalidTaggedScript: return "InvalidTaggedScript";
    case ErrorCode::OutOfWindow: return "OutOfWindow";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::TransportError: return "TransportError";
    case ErrorCode::RateLimited: return "RateLimited";
    case ErrorCode::ProviderError: return "ProviderError";
    case ErrorCode::EmptyCompletion: return "EmptyCompletion";
    case ErrorCode::OverBudget: return "OverBudget";
    case ErrorCode::EmptyEvidence: return "EmptyEvidence";
    case ErrorCode::InvariantViolation: return "InvariantViolation";
    case ErrorCode::CountMismatch: return "CountMismatch";
    case ErrorCode::MissingReflections: return "MissingReflections";
    case ErrorCode::Unparseable: return "Unparseable";
    case ErrorCode::DegenerateSample: return "DegenerateSample";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::InsufficientCells: return "InsufficientCells";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::Interrupted: return "Interrupted";
  }
  return "Unknown";
}

}  // namespace cine
