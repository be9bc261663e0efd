#include "gbsg/error.hpp"

namespace gbsg {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MagicMismatch: return "MagicMismatch";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::NonFiniteData: return "NonFiniteData";
    case ErrorCode::InvalidDims: return "InvalidDims";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::LabelOverflow: return "LabelOverflow";
    case ErrorCode::DimsMismatch: return "DimsMismatch";
    case ErrorCode::SpacingMismatch: return "SpacingMismatch";
    case ErrorCode::HeaderMismatch: return "HeaderMismatch";
    case ErrorCode::UnknownGroup: return "UnknownGroup";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::UnparsableAge: return "UnparsableAge";
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::RadiusMismatch: return "RadiusMismatch";
    case ErrorCode::EmptyCandidateSet: return "EmptyCandidateSet";
    case ErrorCode::EmptyNeighborhood: return "EmptyNeighborhood";
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::StructureTooSmall: return "StructureTooSmall";
    case ErrorCode::NotNormalized: return "NotNormalized";
    case ErrorCode::TooFewStructures: return "TooFewStructures";
    case ErrorCode::CanonicalOrderMismatch: return "CanonicalOrderMismatch";
    case ErrorCode::ConstantAges: return "ConstantAges";
    case ErrorCode::TooFewSubjects: return "TooFewSubjects";
    case ErrorCode::NoFeatureSelected: return "NoFeatureSelected";
    case ErrorCode::EmptyMask: return "EmptyMask";
    case ErrorCode::SingleClass: return "SingleClass";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::OverlappingStructures: return "OverlappingStructures";
    case ErrorCode::LeakedTestRow: return "LeakedTestRow";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::ModelFormat: return "ModelFormat";
  }
  return "Unknown";
}

ErrorKind kind_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::ConfigError:
    case ErrorCode::InvalidParams:
      return ErrorKind::Usage;
    case ErrorCode::ConstantAges:
    case ErrorCode::NoFeatureSelected:
    case ErrorCode::NotNormalized:
    case ErrorCode::EmptyNeighborhood:
      return ErrorKind::Numerical;
    default:
      return ErrorKind::Data;
  }
}

}  // namespace gbsg
