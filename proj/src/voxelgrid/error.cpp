#include "isbench/error.hpp"

namespace isbench {

std::string_view errc_name(Errc code) noexcept {
    switch (code) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::UnsupportedDtype: return "UnsupportedDtype";
    case Errc::MalformedHeader: return "MalformedHeader";
    case Errc::TruncatedData: return "TruncatedData";
    case Errc::IoFailure: return "IoFailure";
    case Errc::RunSumMismatch: return "RunSumMismatch";
    case Errc::MalformedRle: return "MalformedRle";
    case Errc::DimMismatch: return "DimMismatch";
    case Errc::EmptyMask: return "EmptyMask";
    case Errc::EmptySlice: return "EmptySlice";
    case Errc::NoFalsePositives: return "NoFalsePositives";
    case Errc::NTooSmall: return "NTooSmall";
    case Errc::FullSlice: return "FullSlice";
    case Errc::SegmenterFailure: return "SegmenterFailure";
    case Errc::AlreadyPerfect: return "AlreadyPerfect";
    case Errc::CapabilityMissing: return "CapabilityMissing";
    case Errc::NothingToRefine: return "NothingToRefine";
    case Errc::UnknownInstance: return "UnknownInstance";
    case Errc::PlacementFailure: return "PlacementFailure";
    case Errc::EmptyGroundTruth: return "EmptyGroundTruth";
    case Errc::ConfigInvalid: return "ConfigInvalid";
    case Errc::SegmenterCrash: return "SegmenterCrash";
    case Errc::EmptyResults: return "EmptyResults";
    case Errc::ProtocolError: return "ProtocolError";
    }
    return "Unknown";
}

Error::Error(Errc code, const std::string& message)
    : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

}  // namespace isbench
