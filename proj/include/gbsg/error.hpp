#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gbsg {

enum class ErrorCode {
  // volio
  MagicMismatch,
  TruncatedFile,
  NonFiniteData,
  InvalidDims,
  IoFailure,
  LabelOverflow,
  DimsMismatch,
  SpacingMismatch,
  HeaderMismatch,
  UnknownGroup,
  DuplicateId,
  UnparsableAge,
  MissingFile,
  // grading
  OutOfBounds,
  RadiusMismatch,
  EmptyCandidateSet,
  EmptyNeighborhood,
  InvalidParams,
  // brain_graph
  StructureTooSmall,
  NotNormalized,
  TooFewStructures,
  CanonicalOrderMismatch,
  // featsel
  ConstantAges,
  TooFewSubjects,
  NoFeatureSelected,
  EmptyMask,
  // classify
  SingleClass,
  DimensionMismatch,
  LengthMismatch,
  // pipeline
  OverlappingStructures,
  LeakedTestRow,
  ConfigError,
  ModelFormat,
};

std::string_view to_string(ErrorCode code);

/// Which CLI exit code an error maps to.
enum class ErrorKind { Usage, Data, Numerical };

ErrorKind kind_of(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), detail_(what) {}

  ErrorCode code() const noexcept { return code_; }
  /// Message without the code prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace gbsg
