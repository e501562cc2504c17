#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lensdff {

enum class ErrorCode {
  DegenerateInput,
  TooFewPoints,
  DegenerateCloud,
  ZeroLanguageFeature,
  DimensionMismatch,
  EmptyInput,
  EmptyCloud,
  MalformedFile,
  CacheMismatch,
  NoDemoForPrimitive,
  NonFiniteEnergy,
  AllSeedsFailed,
  IoError,
  InvalidConfig,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::TooFewPoints: return "TooFewPoints";
    case ErrorCode::DegenerateCloud: return "DegenerateCloud";
    case ErrorCode::ZeroLanguageFeature: return "ZeroLanguageFeature";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::EmptyCloud: return "EmptyCloud";
    case ErrorCode::MalformedFile: return "MalformedFile";
    case ErrorCode::CacheMismatch: return "CacheMismatch";
    case ErrorCode::NoDemoForPrimitive: return "NoDemoForPrimitive";
    case ErrorCode::NonFiniteEnergy: return "NonFiniteEnergy";
    case ErrorCode::AllSeedsFailed: return "AllSeedsFailed";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

/// Single exception type for the library; `code()` distinguishes failure kinds.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace lensdff
