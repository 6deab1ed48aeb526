#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ventronav {

enum class ErrorCode {
  InvalidArgument,
  BehindCamera,
  NonPositiveDepth,
  IncompleteCorrespondence,
  DegenerateConfiguration,
  ScaleOutOfBounds,
  TooFewPoints,
  UnknownLandmark,
  NotVisible,
  NoSurfaceHit,
  NotRegistered,
  MeshNotWatertight,
  ParseError,
  EmptyMesh,
  IoError,
  WrongPhase,
  RejectedEvent,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::BehindCamera: return "BehindCamera";
    case ErrorCode::NonPositiveDepth: return "NonPositiveDepth";
    case ErrorCode::IncompleteCorrespondence: return "IncompleteCorrespondence";
    case ErrorCode::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::ScaleOutOfBounds: return "ScaleOutOfBounds";
    case ErrorCode::TooFewPoints: return "TooFewPoints";
    case ErrorCode::UnknownLandmark: return "UnknownLandmark";
    case ErrorCode::NotVisible: return "NotVisible";
    case ErrorCode::NoSurfaceHit: return "NoSurfaceHit";
    case ErrorCode::NotRegistered: return "NotRegistered";
    case ErrorCode::MeshNotWatertight: return "MeshNotWatertight";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::EmptyMesh: return "EmptyMesh";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::WrongPhase: return "WrongPhase";
    case ErrorCode::RejectedEvent: return "RejectedEvent";
  }
  return "Unknown";
}

/// Base exception for every failure raised by the library. The code is the
/// stable, machine-checkable part; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Mesh / JSON parse failure. `offset` is the byte offset into the input
/// where parsing stopped.
class ParseError : public Error {
 public:
  ParseError(std::size_t offset, const std::string& message)
      : Error(ErrorCode::ParseError, message + " (at byte " + std::to_string(offset) + ")"),
        offset_(offset),
        detail_(message) {}

  std::size_t offset() const noexcept { return offset_; }
  /// Message without the offset suffix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  std::size_t offset_;
  std::string detail_;
};

}  // namespace ventronav
