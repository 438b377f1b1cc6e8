#include "tcdc/error.hpp"

namespace tcdc {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ZeroDim: return "ZeroDim";
    case ErrorCode::RankOutOfRange: return "RankOutOfRange";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::BadVersion: return "BadVersion";
    case ErrorCode::TruncatedPayload: return "TruncatedPayload";
    case ErrorCode::EmptyOutput: return "EmptyOutput";
    case ErrorCode::ThetaOutOfRange: return "ThetaOutOfRange";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::LabelOutOfRange: return "LabelOutOfRange";
    case ErrorCode::EmptySequence: return "EmptySequence";
    case ErrorCode::WindowTooLarge: return "WindowTooLarge";
    case ErrorCode::NonContiguousIndices: return "NonContiguousIndices";
    case ErrorCode::UnsupportedPixelFormat: return "UnsupportedPixelFormat";
    case ErrorCode::CropTooLarge: return "CropTooLarge";
    case ErrorCode::ClipTooLong: return "ClipTooLong";
    case ErrorCode::ShapeComposeError: return "ShapeComposeError";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::OrderMismatch: return "OrderMismatch";
    case ErrorCode::NumericFailure: return "NumericFailure";
    case ErrorCode::UnknownSubcommand: return "UnknownSubcommand";
    case ErrorCode::UsageError: return "UsageError";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownSubcommand:
    case ErrorCode::UsageError:
    case ErrorCode::ConfigError:
      return 1;
    case ErrorCode::NumericFailure:
      return 3;
    default:
      return 2;
  }
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace tcdc
