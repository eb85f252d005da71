#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "isbench/voxelgrid.hpp"

namespace isbench {

/// Run-length coded binary mask. Runs alternate background/foreground and
/// always start with a background run, which is the only run allowed to be 0.
struct RleMask {
    Dims dims;
    std::vector<std::uint64_t> runs;

    bool operator==(const RleMask&) const = default;
};

RleMask rle_encode(const BinaryMask& mask);
RleMask rle_encode(const SliceMask& slice);

/// Throws RunSumMismatch when the runs do not cover dims exactly and
/// MalformedRle when an interior run is zero.
BinaryMask rle_decode(const RleMask& rle);

/// Empty string when `rle` is well formed, else a description of the defect.
std::string rle_defect(const RleMask& rle);

/// Stable 64-bit FNV-1a digest over dims and runs, rendered as 16 hex digits.
std::string rle_digest(const RleMask& rle);

}  // namespace isbench
