#include "ctqa/error.hpp"

namespace ctqa {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnparseableDicom: return "UnparseableDicom";
    case ErrorCode::UnsupportedTransferSyntax: return "UnsupportedTransferSyntax";
    case ErrorCode::MissingRequiredTag: return "MissingRequiredTag";
    case ErrorCode::PixelLengthMismatch: return "PixelLengthMismatch";
    case ErrorCode::EmptySeries: return "EmptySeries";
    case ErrorCode::MixedSeries: return "MixedSeries";
    case ErrorCode::NoGeometry: return "NoGeometry";
    case ErrorCode::TooFewSlices: return "TooFewSlices";
    case ErrorCode::InconsistentPixelSpacing: return "InconsistentPixelSpacing";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::UnsupportedDatatype: return "UnsupportedDatatype";
    case ErrorCode::HeaderDimMismatch: return "HeaderDimMismatch";
    case ErrorCode::ObliqueAffine: return "ObliqueAffine";
    case ErrorCode::EmptyMask: return "EmptyMask";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DegenerateDim: return "DegenerateDim";
    case ErrorCode::DuplicateScanId: return "DuplicateScanId";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::InvalidGeometry: return "InvalidGeometry";
    case ErrorCode::IncompatibleDefect: return "IncompatibleDefect";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
  }
  return "Unknown";
}

}  // namespace ctqa
