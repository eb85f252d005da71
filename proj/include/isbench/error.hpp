#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace isbench {

/// Error codes shared by every module. Names follow the error vocabulary of
/// the benchmark contract so that transcripts and reports can carry them.
enum class Errc {
    InvalidArgument,
    // voxelgrid
    UnsupportedDtype,
    MalformedHeader,
    TruncatedData,
    IoFailure,
    RunSumMismatch,
    MalformedRle,
    DimMismatch,
    // morphology
    EmptyMask,
    EmptySlice,
    NoFalsePositives,
    // promptgen
    NTooSmall,
    FullSlice,
    // session
    SegmenterFailure,
    AlreadyPerfect,
    CapabilityMissing,
    NothingToRefine,
    // oracles
    UnknownInstance,
    PlacementFailure,
    // metrics
    EmptyGroundTruth,
    // bench
    ConfigInvalid,
    SegmenterCrash,
    EmptyResults,
    ProtocolError,
};

std::string_view errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message);

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

}  // namespace isbench
