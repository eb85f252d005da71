#include "isbench/morphology.hpp"

#include <algorithm>
#include <array>
#include <cstdlib>
#include <limits>

namespace isbench {

namespace {

struct Offset {
    int dx, dy, dz;
};

std::vector<Offset> neighbour_offsets(int connectivity, bool planar) {
    std::vector<Offset> out;
    for (int dz = -1; dz <= 1; ++dz) {
        if (planar && dz != 0) continue;
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
                const int manhattan = std::abs(dx) + std::abs(dy) + std::abs(dz);
                if (manhattan == 0) continue;
                if ((connectivity == 6 || connectivity == 4) && manhattan != 1) continue;
                out.push_back({dx, dy, dz});
            }
    }
    return out;
}

ComponentLabels label_grid(const Dims& dims, std::span<const std::uint8_t> bits,
                           const std::vector<Offset>& offsets) {
    ComponentLabels out;
    out.dims = dims;
    out.labels.assign(bits.size(), 0);
    out.sizes.assign(1, 0);
    std::vector<std::size_t> stack;
    for (std::size_t start = 0; start < bits.size(); ++start) {
        if (bits[start] == 0 || out.labels[start] != 0) continue;
        const auto id = ++out.count;
        std::size_t size = 0;
        out.labels[start] = id;
        stack.push_back(start);
        while (!stack.empty()) {
            const auto cur = stack.back();
            stack.pop_back();
            ++size;
            const Index3 p = dims.coords(cur);
            for (const auto& o : offsets) {
                const Index3 q{p.x + o.dx, p.y + o.dy, p.z + o.dz};
                if (!dims.contains(q)) continue;
                const auto qi = dims.linear(q);
                if (bits[qi] == 0 || out.labels[qi] != 0) continue;
                out.labels[qi] = id;
                stack.push_back(qi);
            }
        }
        out.sizes.push_back(size);
    }
    return out;
}

// Clipped 1D box filter along one axis of a (nx, ny, nz) byte grid. With
// `all` set the output is 1 only when every in-bounds sample of the window is
// set (erosion), otherwise when any is (dilation).
void box_filter_axis(std::vector<std::uint8_t>& grid, const Dims& d, int axis, int radius, bool all) {
    const int len = axis == 0 ? d.nx : axis == 1 ? d.ny : d.nz;
    if (len == 1 || radius == 0) return;
    const std::size_t stride = axis == 0 ? 1
                               : axis == 1 ? static_cast<std::size_t>(d.nx)
                                           : static_cast<std::size_t>(d.nx) * static_cast<std::size_t>(d.ny);
    std::vector<int> prefix(static_cast<std::size_t>(len) + 1);
    std::vector<std::uint8_t> line(static_cast<std::size_t>(len));
    const int outer_a = axis == 0 ? d.ny : d.nx;
    const int outer_b = axis == 2 ? d.ny : d.nz;
    for (int b = 0; b < outer_b; ++b)
        for (int a = 0; a < outer_a; ++a) {
            Index3 start{};
            if (axis == 0) start = {0, a, b};
            if (axis == 1) start = {a, 0, b};
            if (axis == 2) start = {a, b, 0};
            const std::size_t base = d.linear(start);
            prefix[0] = 0;
            for (int i = 0; i < len; ++i) {
                line[static_cast<std::size_t>(i)] = grid[base + static_cast<std::size_t>(i) * stride];
                prefix[static_cast<std::size_t>(i) + 1] = prefix[static_cast<std::size_t>(i)] + line[static_cast<std::size_t>(i)];
            }
            for (int i = 0; i < len; ++i) {
                const int lo = std::max(0, i - radius);
                const int hi = std::min(len - 1, i + radius);
                const int n = prefix[static_cast<std::size_t>(hi) + 1] - prefix[static_cast<std::size_t>(lo)];
                const bool v = all ? n == hi - lo + 1 : n > 0;
                grid[base + static_cast<std::size_t>(i) * stride] = v ? 1 : 0;
            }
        }
}

std::vector<std::uint8_t> morph(const Dims& d, std::span<const std::uint8_t> bits, int radius, bool erode) {
    if (radius < 0) throw Error(Errc::InvalidArgument, "morphology radius must be >= 0");
    std::vector<std::uint8_t> grid(bits.begin(), bits.end());
    for (int axis = 0; axis < 3; ++axis) box_filter_axis(grid, d, axis, radius, erode);
    return grid;
}

}  // namespace

ComponentLabels connected_components(const BinaryMask& mask, Conn3D conn) {
    return label_grid(mask.dims(), mask.bits(), neighbour_offsets(static_cast<int>(conn), false));
}

ComponentLabels connected_components(const SliceMask& slice, Conn2D conn) {
    return label_grid(Dims{slice.width(), slice.height(), 1}, slice.bits(),
                      neighbour_offsets(static_cast<int>(conn), true));
}

int largest_component_id(const ComponentLabels& c) {
    if (c.count == 0) throw Error(Errc::EmptyMask, "no components");
    int best = 1;
    for (int id = 2; id <= c.count; ++id)
        if (c.sizes[static_cast<std::size_t>(id)] > c.sizes[static_cast<std::size_t>(best)]) best = id;
    return best;
}

BinaryMask component_mask(const ComponentLabels& c, int id) {
    BinaryMask out(c.dims);
    for (std::size_t i = 0; i < c.labels.size(); ++i)
        if (c.labels[i] == id) out.set(i);
    return out;
}

BinaryMask largest_component(const ComponentLabels& c) {
    return component_mask(c, largest_component_id(c));
}

BinaryMask largest_component(const BinaryMask& mask, Conn3D conn) {
    return largest_component(connected_components(mask, conn));
}

SliceMask largest_component(const SliceMask& slice, Conn2D conn) {
    if (slice.empty()) throw Error(Errc::EmptySlice, "no foreground in slice");
    return as_slice(largest_component(connected_components(slice, conn)));
}

Pixel centroid_point(const SliceMask& slice) {
    if (slice.empty()) throw Error(Errc::EmptySlice, "centroid of an empty slice");
    // Integer arithmetic throughout: sums scaled by n keep ties exact.
    std::int64_t n = 0, sx = 0, sy = 0;
    for (std::size_t i = 0; i < slice.pixel_count(); ++i) {
        if (!slice.test(i)) continue;
        const Pixel p = slice.coords(i);
        ++n;
        sx += p.x;
        sy += p.y;
    }
    const auto round_half_up = [n](std::int64_t s) {
        return static_cast<int>((2 * s + n) / (2 * n));
    };
    const Pixel rounded{round_half_up(sx), round_half_up(sy)};
    if (slice.test(rounded)) return rounded;

    Pixel best{};
    auto best_d = std::numeric_limits<std::int64_t>::max();
    for (std::size_t i = 0; i < slice.pixel_count(); ++i) {
        if (!slice.test(i)) continue;
        const Pixel p = slice.coords(i);
        const std::int64_t dx = n * p.x - sx;
        const std::int64_t dy = n * p.y - sy;
        const std::int64_t dist = dx * dx + dy * dy;
        if (dist < best_d) {
            best_d = dist;
            best = p;
        }
    }
    return best;
}

Box2 bounding_box_2d(const SliceMask& slice) {
    if (slice.empty()) throw Error(Errc::EmptySlice, "bounding box of an empty slice");
    Box2 box{{slice.width(), slice.height()}, {-1, -1}};
    for (std::size_t i = 0; i < slice.pixel_count(); ++i) {
        if (!slice.test(i)) continue;
        const Pixel p = slice.coords(i);
        box.min.x = std::min(box.min.x, p.x);
        box.min.y = std::min(box.min.y, p.y);
        box.max.x = std::max(box.max.x, p.x);
        box.max.y = std::max(box.max.y, p.y);
    }
    return box;
}

Box3 bounding_box_3d(const BinaryMask& mask) {
    if (mask.empty()) throw Error(Errc::EmptyMask, "bounding box of an empty mask");
    const auto& d = mask.dims();
    Box3 box{{d.nx, d.ny, d.nz}, {-1, -1, -1}};
    for (std::size_t i = 0; i < d.voxel_count(); ++i) {
        if (!mask.test(i)) continue;
        const Index3 p = d.coords(i);
        box.min = {std::min(box.min.x, p.x), std::min(box.min.y, p.y), std::min(box.min.z, p.z)};
        box.max = {std::max(box.max.x, p.x), std::max(box.max.y, p.y), std::max(box.max.z, p.z)};
    }
    return box;
}

std::vector<Pixel> chebyshev_ring(const SliceMask& slice, int radius) {
    if (slice.empty()) throw Error(Errc::EmptySlice, "ring around an empty slice");
    if (radius < 0) throw Error(Errc::InvalidArgument, "ring radius must be >= 0");
    const SliceMask outer = radius == 0 ? slice : dilate(slice, radius);
    const SliceMask inner = radius == 0 ? SliceMask(slice.width(), slice.height()) : dilate(slice, radius - 1);
    std::vector<Pixel> out;
    for (std::size_t i = 0; i < outer.pixel_count(); ++i)
        if (outer.test(i) && !inner.test(i)) out.push_back(outer.coords(i));
    return out;
}

ContourCurve order_into_curve(const std::vector<Pixel>& pixels, Axis axis, int slice_idx) {
    ContourCurve curve;
    curve.slice_axis = axis;
    curve.slice_idx = slice_idx;
    if (pixels.empty()) return curve;

    std::vector<Pixel> remaining = pixels;
    std::sort(remaining.begin(), remaining.end(), raster_less);
    remaining.erase(std::unique(remaining.begin(), remaining.end()), remaining.end());

    std::vector<bool> used(remaining.size(), false);
    std::size_t cur = 0;
    used[0] = true;
    curve.points.push_back(remaining[0]);
    for (std::size_t step = 1; step < remaining.size(); ++step) {
        std::size_t best = remaining.size();
        std::int64_t best_d = std::numeric_limits<std::int64_t>::max();
        for (std::size_t j = 0; j < remaining.size(); ++j) {
            if (used[j]) continue;
            const std::int64_t dx = remaining[j].x - remaining[cur].x;
            const std::int64_t dy = remaining[j].y - remaining[cur].y;
            const std::int64_t d = dx * dx + dy * dy;
            if (d < best_d) {  // strict: raster-first wins ties
                best_d = d;
                best = j;
            }
        }
        used[best] = true;
        cur = best;
        curve.points.push_back(remaining[cur]);
    }
    if (curve.points.size() > 1) {
        const auto& a = curve.points.front();
        const auto& b = curve.points.back();
        curve.closed = std::max(std::abs(a.x - b.x), std::abs(a.y - b.y)) <= 2;
    }
    return curve;
}

BinaryMask dilate(const BinaryMask& mask, int radius) {
    return BinaryMask(mask.dims(), morph(mask.dims(), mask.bits(), radius, false));
}

BinaryMask erode(const BinaryMask& mask, int radius) {
    return BinaryMask(mask.dims(), morph(mask.dims(), mask.bits(), radius, true));
}

SliceMask dilate(const SliceMask& slice, int radius) {
    return SliceMask(slice.width(), slice.height(),
                     morph(Dims{slice.width(), slice.height(), 1}, slice.bits(), radius, false));
}

SliceMask erode(const SliceMask& slice, int radius) {
    return SliceMask(slice.width(), slice.height(),
                     morph(Dims{slice.width(), slice.height(), 1}, slice.bits(), radius, true));
}

FpSlice non_axial_slice_with_most_fp(const BinaryMask& pred, const BinaryMask& gt) {
    if (!(pred.dims() == gt.dims())) throw Error(Errc::DimMismatch, "pred and gt dims differ");
    const auto& d = pred.dims();
    std::vector<std::size_t> per_x(static_cast<std::size_t>(d.nx), 0);
    std::vector<std::size_t> per_y(static_cast<std::size_t>(d.ny), 0);
    for (std::size_t i = 0; i < d.voxel_count(); ++i) {
        if (!pred.test(i) || gt.test(i)) continue;
        const Index3 p = d.coords(i);
        ++per_x[static_cast<std::size_t>(p.x)];
        ++per_y[static_cast<std::size_t>(p.y)];
    }
    FpSlice best;
    for (int x = 0; x < d.nx; ++x)
        if (per_x[static_cast<std::size_t>(x)] > best.fp_count) best = {Axis::X, x, per_x[static_cast<std::size_t>(x)]};
    for (int y = 0; y < d.ny; ++y)
        if (per_y[static_cast<std::size_t>(y)] > best.fp_count) best = {Axis::Y, y, per_y[static_cast<std::size_t>(y)]};
    if (best.fp_count == 0) throw Error(Errc::NoFalsePositives, "prediction has no false positives");
    return best;
}

bool ForegroundExtent::contains(int z) const {
    return std::binary_search(slices.begin(), slices.end(), z);
}

ForegroundExtent foreground_extent(const BinaryMask& mask) {
    if (mask.empty()) throw Error(Errc::EmptyMask, "extent of an empty mask");
    const auto& d = mask.dims();
    const std::size_t plane = static_cast<std::size_t>(d.nx) * static_cast<std::size_t>(d.ny);
    ForegroundExtent e;
    for (int z = 0; z < d.nz; ++z) {
        const auto bits = mask.bits().subspan(static_cast<std::size_t>(z) * plane, plane);
        if (std::any_of(bits.begin(), bits.end(), [](std::uint8_t b) { return b != 0; }))
            e.slices.push_back(z);
    }
    e.min_idx = e.slices.front();
    e.max_idx = e.slices.back();
    e.median_idx = e.slices[(e.slices.size() - 1) / 2];
    return e;
}

}  // namespace isbench
