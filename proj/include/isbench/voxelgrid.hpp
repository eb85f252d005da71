#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "isbench/error.hpp"

namespace isbench {

/// Voxel coordinate. z is always the axial (through-plane) axis.
struct Index3 {
    int x = 0;
    int y = 0;
    int z = 0;

    auto operator<=>(const Index3&) const = default;
};

/// In-slice pixel. For an axial slice (x, y) are the volume's x and y; for a
/// fixed-x slice they are (y, z); for a fixed-y slice they are (x, z).
struct Pixel {
    int x = 0;
    int y = 0;

    bool operator==(const Pixel&) const = default;
};

/// Raster order: row (y) first, then column (x).
inline bool raster_less(const Pixel& a, const Pixel& b) {
    return a.y != b.y ? a.y < b.y : a.x < b.x;
}

enum class Axis : std::uint8_t { X, Y, Z };

std::string_view axis_name(Axis axis) noexcept;
Axis parse_axis(std::string_view name);

struct Dims {
    int nx = 0;
    int ny = 0;
    int nz = 0;

    bool operator==(const Dims&) const = default;

    std::size_t voxel_count() const {
        return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) *
               static_cast<std::size_t>(nz);
    }
    bool valid() const { return nx > 0 && ny > 0 && nz > 0; }
    bool contains(const Index3& p) const {
        return p.x >= 0 && p.y >= 0 && p.z >= 0 && p.x < nx && p.y < ny && p.z < nz;
    }
    /// x-fastest linear index.
    std::size_t linear(const Index3& p) const {
        return (static_cast<std::size_t>(p.z) * static_cast<std::size_t>(ny) +
                static_cast<std::size_t>(p.y)) *
                   static_cast<std::size_t>(nx) +
               static_cast<std::size_t>(p.x);
    }
    Index3 coords(std::size_t idx) const {
        const auto sx = static_cast<std::size_t>(nx);
        const auto sy = static_cast<std::size_t>(ny);
        return {static_cast<int>(idx % sx), static_cast<int>((idx / sx) % sy),
                static_cast<int>(idx / (sx * sy))};
    }
};

struct Spacing {
    double sx = 1.0;
    double sy = 1.0;
    double sz = 1.0;

    bool operator==(const Spacing&) const = default;
};

enum class DType : std::uint8_t { UInt8, Int16, Float32 };

std::string_view dtype_name(DType dtype) noexcept;
DType parse_dtype(std::string_view name);
std::size_t dtype_size(DType dtype) noexcept;

/// NIfTI orientation fields. Carried through read/write unchanged; the
/// engine itself works in voxel space only.
struct NiftiOrientation {
    std::int16_t qform_code = 0;
    std::int16_t sform_code = 0;
    float qfac = 1.0f;
    std::array<float, 3> quatern{0.0f, 0.0f, 0.0f};
    std::array<float, 3> qoffset{0.0f, 0.0f, 0.0f};
    std::array<float, 4> srow_x{1.0f, 0.0f, 0.0f, 0.0f};
    std::array<float, 4> srow_y{0.0f, 1.0f, 0.0f, 0.0f};
    std::array<float, 4> srow_z{0.0f, 0.0f, 1.0f, 0.0f};
    std::uint8_t xyzt_units = 2;  // millimetres

    bool operator==(const NiftiOrientation&) const = default;
};

/// Scalar 3D image. Values are held as float regardless of dtype; every
/// uint8 and int16 value is exactly representable so no precision is lost.
class Volume {
public:
    Volume() = default;
    Volume(Dims dims, Spacing spacing, DType dtype, std::vector<float> data,
           NiftiOrientation orientation = {});

    const Dims& dims() const { return dims_; }
    const Spacing& spacing() const { return spacing_; }
    DType dtype() const { return dtype_; }
    std::span<const float> data() const { return data_; }
    const NiftiOrientation& orientation() const { return orientation_; }

    float at(const Index3& p) const { return data_[dims_.linear(p)]; }
    float at(std::size_t idx) const { return data_[idx]; }

private:
    Dims dims_;
    Spacing spacing_;
    DType dtype_ = DType::Float32;
    std::vector<float> data_;
    NiftiOrientation orientation_;
};

/// Axial-or-other 2D binary image, one byte per pixel, x-fastest.
class SliceMask {
public:
    SliceMask() = default;
    SliceMask(int width, int height);
    SliceMask(int width, int height, std::vector<std::uint8_t> bits);

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t pixel_count() const {
        return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
    }
    bool in_bounds(const Pixel& p) const {
        return p.x >= 0 && p.y >= 0 && p.x < width_ && p.y < height_;
    }
    std::size_t linear(const Pixel& p) const {
        return static_cast<std::size_t>(p.y) * static_cast<std::size_t>(width_) +
               static_cast<std::size_t>(p.x);
    }
    Pixel coords(std::size_t idx) const {
        return {static_cast<int>(idx % static_cast<std::size_t>(width_)),
                static_cast<int>(idx / static_cast<std::size_t>(width_))};
    }

    bool test(const Pixel& p) const { return bits_[linear(p)] != 0; }
    bool test(std::size_t idx) const { return bits_[idx] != 0; }
    void set(const Pixel& p, bool value = true) { set(linear(p), value); }
    void set(std::size_t idx, bool value = true);

    std::size_t count() const { return count_; }
    bool empty() const { return count_ == 0; }
    std::span<const std::uint8_t> bits() const { return bits_; }

    bool operator==(const SliceMask& other) const {
        return width_ == other.width_ && height_ == other.height_ && bits_ == other.bits_;
    }

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> bits_;
    std::size_t count_ = 0;
};

/// Binary instance mask on a 3D grid, one byte per voxel, x-fastest. The set
/// voxel count is maintained on every mutation.
class BinaryMask {
public:
    BinaryMask() = default;
    explicit BinaryMask(Dims dims);
    BinaryMask(Dims dims, std::vector<std::uint8_t> bits);

    const Dims& dims() const { return dims_; }

    bool test(const Index3& p) const { return bits_[dims_.linear(p)] != 0; }
    bool test(std::size_t idx) const { return bits_[idx] != 0; }
    void set(const Index3& p, bool value = true) { set(dims_.linear(p), value); }
    void set(std::size_t idx, bool value = true);

    std::size_t voxel_count() const { return count_; }
    bool empty() const { return count_ == 0; }
    std::span<const std::uint8_t> bits() const { return bits_; }

    bool operator==(const BinaryMask& other) const {
        return dims_ == other.dims_ && bits_ == other.bits_;
    }

private:
    Dims dims_;
    std::vector<std::uint8_t> bits_;
    std::size_t count_ = 0;
};

/// Width and height of the slice perpendicular to `axis`.
std::pair<int, int> slice_shape(const Dims& dims, Axis axis);
int axis_length(const Dims& dims, Axis axis);
Index3 slice_to_volume(Axis axis, int index, const Pixel& p);
Pixel volume_to_slice(Axis axis, const Index3& p);

SliceMask extract_slice(const BinaryMask& mask, Axis axis, int index);
void insert_slice(BinaryMask& mask, Axis axis, int index, const SliceMask& slice);

/// A slice mask viewed as a one-deep volume (nz == 1), used on the wire.
BinaryMask as_volume(const SliceMask& slice);
SliceMask as_slice(const BinaryMask& mask);

/// Voxels where the volume equals `label`.
BinaryMask label_mask(const Volume& labels, float label);

}  // namespace isbench
