#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "isbench/voxelgrid.hpp"

namespace isbench {

enum class Conn3D { Six = 6, TwentySix = 26 };
enum class Conn2D { Four = 4, Eight = 8 };

/// Component labelling. 2D labellings use dims (width, height, 1).
/// Ids are 1..count in raster order of each component's first voxel.
struct ComponentLabels {
    Dims dims;
    std::vector<std::int32_t> labels;  // 0 = background
    int count = 0;
    std::vector<std::size_t> sizes;  // indexed by id, sizes[0] == 0
};

ComponentLabels connected_components(const BinaryMask& mask, Conn3D conn = Conn3D::TwentySix);
ComponentLabels connected_components(const SliceMask& slice, Conn2D conn = Conn2D::Eight);

/// Id of the largest component; ties go to the smallest id. Throws EmptyMask.
int largest_component_id(const ComponentLabels& components);
BinaryMask component_mask(const ComponentLabels& components, int id);
BinaryMask largest_component(const ComponentLabels& components);

BinaryMask largest_component(const BinaryMask& mask, Conn3D conn = Conn3D::TwentySix);
SliceMask largest_component(const SliceMask& slice, Conn2D conn = Conn2D::Eight);

/// Rounded centre of mass. If that pixel is background, the foreground pixel
/// nearest (Euclidean) to the continuous centroid is returned instead, ties
/// in raster order. Throws EmptySlice.
Pixel centroid_point(const SliceMask& slice);

struct Box2 {
    Pixel min;
    Pixel max;

    bool operator==(const Box2&) const = default;
};

struct Box3 {
    Index3 min;
    Index3 max;

    bool operator==(const Box3&) const = default;
};

/// Tight inclusive boxes. Throw EmptySlice / EmptyMask.
Box2 bounding_box_2d(const SliceMask& slice);
Box3 bounding_box_3d(const BinaryMask& mask);

/// In-bounds pixels whose Chebyshev distance to the nearest foreground pixel
/// is exactly `radius`, in raster order. Throws EmptySlice.
std::vector<Pixel> chebyshev_ring(const SliceMask& slice, int radius);

struct ContourCurve {
    Axis slice_axis = Axis::X;
    int slice_idx = 0;
    std::vector<Pixel> points;
    bool closed = false;
};

/// Greedy nearest-neighbour chaining (squared Euclidean step length) from the
/// raster-first pixel; ties go to the raster-first candidate. The curve is
/// closed when its last point is within Chebyshev distance 2 of the first and
/// it has more than one point.
ContourCurve order_into_curve(const std::vector<Pixel>& pixels, Axis axis = Axis::X,
                              int slice_idx = 0);

/// Chebyshev-ball dilation and erosion, clipped to the grid. Erosion only
/// considers in-bounds neighbours, so it is the exact dual of the clipped
/// dilation. Radius 0 is the identity.
BinaryMask dilate(const BinaryMask& mask, int radius);
BinaryMask erode(const BinaryMask& mask, int radius);
SliceMask dilate(const SliceMask& slice, int radius);
SliceMask erode(const SliceMask& slice, int radius);

struct FpSlice {
    Axis axis = Axis::X;
    int index = 0;
    std::size_t fp_count = 0;
};

/// Fixed-x or fixed-y slice with the most voxels in pred and not in gt.
/// Ties: x before y, then lowest index. Throws NoFalsePositives.
FpSlice non_axial_slice_with_most_fp(const BinaryMask& pred, const BinaryMask& gt);

/// Axial structure of an instance: the sorted set of z indices that hold
/// foreground, its extremes and its lower median.
struct ForegroundExtent {
    std::vector<int> slices;
    int min_idx = 0;
    int max_idx = 0;
    int median_idx = 0;

    bool contains(int z) const;
};

ForegroundExtent foreground_extent(const BinaryMask& mask);

}  // namespace isbench
