#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace camlpad {

enum class ErrorCode {
  InvalidArgument,
  MalformedLine,
  MissingTimestamp,
  HeaderMissing,
  DiscriminatorMissing,
  StoreUnreachable,
  IndexNotFound,
  PageFailure,
  EmptyCurrent,
  EmptyHistory,
  TooFewRows,
  DimensionMismatch,
  MisalignedRows,
  MisalignedScores,
  EmptyWindow,
  AllSinksFailed,
  LengthMismatch,
  TooFewItems,
  InvalidConfig,
  Io,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::MalformedLine: return "MalformedLine";
    case ErrorCode::MissingTimestamp: return "MissingTimestamp";
    case ErrorCode::HeaderMissing: return "HeaderMissing";
    case ErrorCode::DiscriminatorMissing: return "DiscriminatorMissing";
    case ErrorCode::StoreUnreachable: return "StoreUnreachable";
    case ErrorCode::IndexNotFound: return "IndexNotFound";
    case ErrorCode::PageFailure: return "PageFailure";
    case ErrorCode::EmptyCurrent: return "EmptyCurrent";
    case ErrorCode::EmptyHistory: return "EmptyHistory";
    case ErrorCode::TooFewRows: return "TooFewRows";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::MisalignedRows: return "MisalignedRows";
    case ErrorCode::MisalignedScores: return "MisalignedScores";
    case ErrorCode::EmptyWindow: return "EmptyWindow";
    case ErrorCode::AllSinksFailed: return "AllSinksFailed";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::TooFewItems: return "TooFewItems";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

// Every failure in the library surfaces as this exception. `position()` holds
// the 1-based line/row number for parse errors and the record count reached
// for PageFailure.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        std::optional<std::size_t> position = std::nullopt)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        message_(message),
        position_(position) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& message() const noexcept { return message_; }
  std::optional<std::size_t> position() const noexcept { return position_; }

 private:
  ErrorCode code_;
  std::string message_;
  std::optional<std::size_t> position_;
};

}  // namespace camlpad
