#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tcdc {

enum class ErrorCode {
  // tensor
  ZeroDim,
  RankOutOfRange,
  ShapeMismatch,
  IoError,
  BadMagic,
  BadVersion,
  TruncatedPayload,
  // conv / layers
  EmptyOutput,
  ThetaOutOfRange,
  InvalidSpec,
  LabelOutOfRange,
  // rank pooling / flow
  EmptySequence,
  WindowTooLarge,
  // data pipeline
  NonContiguousIndices,
  UnsupportedPixelFormat,
  CropTooLarge,
  ClipTooLong,
  // network / training
  ShapeComposeError,
  EmptyDataset,
  OrderMismatch,
  NumericFailure,
  // cli
  UnknownSubcommand,
  UsageError,
  ConfigError,
};

std::string_view to_string(ErrorCode code);

/// Process exit code the CLI reports for an error: 1 usage, 2 data, 3 numeric.
int exit_code_for(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& what);

}  // namespace tcdc
