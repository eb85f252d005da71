#include "isbench/voxelgrid.hpp"

#include <cmath>
#include <string>

namespace isbench {

std::string_view axis_name(Axis axis) noexcept {
    switch (axis) {
    case Axis::X: return "x";
    case Axis::Y: return "y";
    case Axis::Z: return "z";
    }
    return "?";
}

Axis parse_axis(std::string_view name) {
    if (name == "x") return Axis::X;
    if (name == "y") return Axis::Y;
    if (name == "z") return Axis::Z;
    throw Error(Errc::InvalidArgument, "unknown axis '" + std::string(name) + "'");
}

std::string_view dtype_name(DType dtype) noexcept {
    switch (dtype) {
    case DType::UInt8: return "uint8";
    case DType::Int16: return "int16";
    case DType::Float32: return "float32";
    }
    return "?";
}

DType parse_dtype(std::string_view name) {
    if (name == "uint8") return DType::UInt8;
    if (name == "int16") return DType::Int16;
    if (name == "float32") return DType::Float32;
    throw Error(Errc::UnsupportedDtype, "dtype '" + std::string(name) + "'");
}

std::size_t dtype_size(DType dtype) noexcept {
    switch (dtype) {
    case DType::UInt8: return 1;
    case DType::Int16: return 2;
    case DType::Float32: return 4;
    }
    return 0;
}

Volume::Volume(Dims dims, Spacing spacing, DType dtype, std::vector<float> data,
               NiftiOrientation orientation)
    : dims_(dims), spacing_(spacing), dtype_(dtype), data_(std::move(data)),
      orientation_(orientation) {
    if (!dims_.valid()) throw Error(Errc::InvalidArgument, "volume dims must be positive");
    if (!(spacing_.sx > 0.0 && spacing_.sy > 0.0 && spacing_.sz > 0.0))
        throw Error(Errc::InvalidArgument, "volume spacing must be positive");
    if (data_.size() != dims_.voxel_count())
        throw Error(Errc::InvalidArgument, "volume data length does not match dims");
    if (dtype_ == DType::Float32) return;
    const float lo = dtype_ == DType::UInt8 ? 0.0f : -32768.0f;
    const float hi = dtype_ == DType::UInt8 ? 255.0f : 32767.0f;
    for (float v : data_) {
        if (!(v >= lo && v <= hi) || std::trunc(v) != v)
            throw Error(Errc::InvalidArgument,
                        "value not representable as " + std::string(dtype_name(dtype_)));
    }
}

SliceMask::SliceMask(int width, int height)
    : width_(width), height_(height),
      bits_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 0) {
    if (width <= 0 || height <= 0)
        throw Error(Errc::InvalidArgument, "slice dims must be positive");
}

SliceMask::SliceMask(int width, int height, std::vector<std::uint8_t> bits)
    : width_(width), height_(height), bits_(std::move(bits)) {
    if (width <= 0 || height <= 0)
        throw Error(Errc::InvalidArgument, "slice dims must be positive");
    if (bits_.size() != pixel_count())
        throw Error(Errc::DimMismatch, "slice bit count does not match dims");
    for (auto& b : bits_) {
        b = b != 0 ? 1 : 0;
        count_ += b;
    }
}

void SliceMask::set(std::size_t idx, bool value) {
    const std::uint8_t v = value ? 1 : 0;
    if (bits_[idx] == v) return;
    bits_[idx] = v;
    if (value)
        ++count_;
    else
        --count_;
}

BinaryMask::BinaryMask(Dims dims) : dims_(dims), bits_(dims.voxel_count(), 0) {
    if (!dims.valid()) throw Error(Errc::InvalidArgument, "mask dims must be positive");
}

BinaryMask::BinaryMask(Dims dims, std::vector<std::uint8_t> bits)
    : dims_(dims), bits_(std::move(bits)) {
    if (!dims.valid()) throw Error(Errc::InvalidArgument, "mask dims must be positive");
    if (bits_.size() != dims_.voxel_count())
        throw Error(Errc::DimMismatch, "mask bit count does not match dims");
    for (auto& b : bits_) {
        b = b != 0 ? 1 : 0;
        count_ += b;
    }
}

void BinaryMask::set(std::size_t idx, bool value) {
    const std::uint8_t v = value ? 1 : 0;
    if (bits_[idx] == v) return;
    bits_[idx] = v;
    if (value)
        ++count_;
    else
        --count_;
}

std::pair<int, int> slice_shape(const Dims& dims, Axis axis) {
    switch (axis) {
    case Axis::X: return {dims.ny, dims.nz};
    case Axis::Y: return {dims.nx, dims.nz};
    case Axis::Z: return {dims.nx, dims.ny};
    }
    return {0, 0};
}

int axis_length(const Dims& dims, Axis axis) {
    switch (axis) {
    case Axis::X: return dims.nx;
    case Axis::Y: return dims.ny;
    case Axis::Z: return dims.nz;
    }
    return 0;
}

Index3 slice_to_volume(Axis axis, int index, const Pixel& p) {
    switch (axis) {
    case Axis::X: return {index, p.x, p.y};
    case Axis::Y: return {p.x, index, p.y};
    case Axis::Z: return {p.x, p.y, index};
    }
    return {};
}

Pixel volume_to_slice(Axis axis, const Index3& p) {
    switch (axis) {
    case Axis::X: return {p.y, p.z};
    case Axis::Y: return {p.x, p.z};
    case Axis::Z: return {p.x, p.y};
    }
    return {};
}

SliceMask extract_slice(const BinaryMask& mask, Axis axis, int index) {
    const auto& d = mask.dims();
    if (index < 0 || index >= axis_length(d, axis))
        throw Error(Errc::InvalidArgument, "slice index out of range");
    const auto [w, h] = slice_shape(d, axis);
    SliceMask out(w, h);
    if (axis == Axis::Z) {
        const std::size_t base = static_cast<std::size_t>(index) * out.pixel_count();
        for (std::size_t i = 0; i < out.pixel_count(); ++i)
            if (mask.test(base + i)) out.set(i);
        return out;
    }
    for (int v = 0; v < h; ++v)
        for (int u = 0; u < w; ++u)
            if (mask.test(slice_to_volume(axis, index, {u, v}))) out.set(Pixel{u, v});
    return out;
}

void insert_slice(BinaryMask& mask, Axis axis, int index, const SliceMask& slice) {
    const auto& d = mask.dims();
    if (index < 0 || index >= axis_length(d, axis))
        throw Error(Errc::InvalidArgument, "slice index out of range");
    const auto [w, h] = slice_shape(d, axis);
    if (slice.width() != w || slice.height() != h)
        throw Error(Errc::DimMismatch, "slice shape does not match volume");
    for (int v = 0; v < h; ++v)
        for (int u = 0; u < w; ++u)
            mask.set(slice_to_volume(axis, index, {u, v}), slice.test(Pixel{u, v}));
}

BinaryMask as_volume(const SliceMask& slice) {
    return BinaryMask(Dims{slice.width(), slice.height(), 1},
                      std::vector<std::uint8_t>(slice.bits().begin(), slice.bits().end()));
}

SliceMask as_slice(const BinaryMask& mask) {
    if (mask.dims().nz != 1) throw Error(Errc::DimMismatch, "mask is not one voxel deep");
    return SliceMask(mask.dims().nx, mask.dims().ny,
                     std::vector<std::uint8_t>(mask.bits().begin(), mask.bits().end()));
}

BinaryMask label_mask(const Volume& labels, float label) {
    BinaryMask out(labels.dims());
    const auto data = labels.data();
    for (std::size_t i = 0; i < data.size(); ++i)
        if (data[i] == label) out.set(i);
    return out;
}

}  // namespace isbench
