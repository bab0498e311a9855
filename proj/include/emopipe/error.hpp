#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace emopipe {

enum class ErrorKind {
  // wire
  UnknownTag,
  LengthMismatch,
  MalformedBody,
  BindFailure,
  ConnectFailure,
  ProtocolViolation,
  // features / nn
  EmptyPart,
  DimensionMismatch,
  IndexOutOfRange,
  ShapeMismatch,
  EmptyDataset,
  BadMagic,
  UnsupportedVersion,
  TruncatedFile,
  ChecksumMismatch,
  // data
  ParseError,
  DuplicateImageId,
  InsufficientClassCount,
  // pipeline
  SourceReadError,
  NoExtractorConfigured,
  ChildStartFailure,
  NonzeroChildExit,
  // eval
  InsufficientSamples,
  // generic I/O
  IoError,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Every failure raised by the library carries one of the ErrorKind codes so
/// callers and tests can branch on the kind rather than on message text.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace emopipe
