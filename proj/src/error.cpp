#include "emopipe/error.hpp"

namespace emopipe {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::UnknownTag: return "UnknownTag";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::MalformedBody: return "MalformedBody";
    case ErrorKind::BindFailure: return "BindFailure";
    case ErrorKind::ConnectFailure: return "ConnectFailure";
    case ErrorKind::ProtocolViolation: return "ProtocolViolation";
    case ErrorKind::EmptyPart: return "EmptyPart";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::EmptyDataset: return "EmptyDataset";
    case ErrorKind::BadMagic: return "BadMagic";
    case ErrorKind::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorKind::TruncatedFile: return "TruncatedFile";
    case ErrorKind::ChecksumMismatch: return "ChecksumMismatch";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::DuplicateImageId: return "DuplicateImageId";
    case ErrorKind::InsufficientClassCount: return "InsufficientClassCount";
    case ErrorKind::SourceReadError: return "SourceReadError";
    case ErrorKind::NoExtractorConfigured: return "NoExtractorConfigured";
    case ErrorKind::ChildStartFailure: return "ChildStartFailure";
    case ErrorKind::NonzeroChildExit: return "NonzeroChildExit";
    case ErrorKind::InsufficientSamples: return "InsufficientSamples";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& what)
    : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

}  // namespace emopipe
