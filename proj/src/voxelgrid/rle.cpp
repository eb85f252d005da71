#include "isbench/rle.hpp"

#include <cstdio>
#include <span>

namespace isbench {

namespace {

RleMask encode_bits(const Dims& dims, std::span<const std::uint8_t> bits) {
    RleMask out{dims, {}};
    std::uint8_t current = 0;
    std::uint64_t run = 0;
    for (const auto b : bits) {
        if (b == current) {
            ++run;
            continue;
        }
        out.runs.push_back(run);
        current = b;
        run = 1;
    }
    out.runs.push_back(run);
    return out;
}

std::uint64_t fnv1a(std::uint64_t h, std::uint64_t value) {
    for (int i = 0; i < 8; ++i) {
        h ^= (value >> (8 * i)) & 0xffu;
        h *= 0x100000001b3ull;
    }
    return h;
}

}  // namespace

RleMask rle_encode(const BinaryMask& mask) { return encode_bits(mask.dims(), mask.bits()); }

RleMask rle_encode(const SliceMask& slice) {
    return encode_bits(Dims{slice.width(), slice.height(), 1}, slice.bits());
}

std::string rle_defect(const RleMask& rle) {
    if (!rle.dims.valid()) return "dims must be positive";
    if (rle.runs.empty()) return "no runs";
    std::uint64_t sum = 0;
    for (std::size_t i = 0; i < rle.runs.size(); ++i) {
        if (i > 0 && rle.runs[i] == 0) return "zero-length run at position " + std::to_string(i);
        sum += rle.runs[i];
    }
    if (sum != rle.dims.voxel_count())
        return "runs sum to " + std::to_string(sum) + ", expected " +
               std::to_string(rle.dims.voxel_count());
    return {};
}

BinaryMask rle_decode(const RleMask& rle) {
    if (!rle.dims.valid()) throw Error(Errc::MalformedRle, "dims must be positive");
    std::uint64_t sum = 0;
    for (std::size_t i = 0; i < rle.runs.size(); ++i) {
        if (i > 0 && rle.runs[i] == 0)
            throw Error(Errc::MalformedRle, "zero-length run at position " + std::to_string(i));
        sum += rle.runs[i];
    }
    if (sum != rle.dims.voxel_count())
        throw Error(Errc::RunSumMismatch, "runs sum to " + std::to_string(sum) + ", expected " +
                                              std::to_string(rle.dims.voxel_count()));
    std::vector<std::uint8_t> bits;
    bits.reserve(rle.dims.voxel_count());
    std::uint8_t value = 0;
    for (const auto run : rle.runs) {
        bits.insert(bits.end(), run, value);
        value ^= 1u;
    }
    return BinaryMask(rle.dims, std::move(bits));
}

std::string rle_digest(const RleMask& rle) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    h = fnv1a(h, static_cast<std::uint64_t>(rle.dims.nx));
    h = fnv1a(h, static_cast<std::uint64_t>(rle.dims.ny));
    h = fnv1a(h, static_cast<std::uint64_t>(rle.dims.nz));
    for (const auto r : rle.runs) h = fnv1a(h, r);
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace isbench
