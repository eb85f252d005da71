#include "isbench/promptgen.hpp"

#include <algorithm>

#include "isbench/error.hpp"

namespace isbench {

namespace {

void require_foreground(const BinaryMask& gt) {
    if (gt.empty()) throw Error(Errc::EmptyMask, "ground-truth instance is empty");
}

std::vector<Pixel> foreground_pixels(const SliceMask& s) {
    std::vector<Pixel> out;
    out.reserve(s.count());
    for (std::size_t i = 0; i < s.pixel_count(); ++i)
        if (s.test(i)) out.push_back(s.coords(i));
    return out;
}

/// k distinct picks via partial Fisher-Yates; tops up with replacement when
/// the pool is smaller than k. Second of each pair marks a duplicate.
template <typename T>
std::vector<std::pair<T, bool>> sample(std::vector<T> pool, int k, SeededRng& rng) {
    std::vector<std::pair<T, bool>> out;
    const auto n = static_cast<std::int64_t>(pool.size());
    const auto distinct = std::min<std::int64_t>(k, n);
    for (std::int64_t i = 0; i < distinct; ++i) {
        const auto j = rng.uniform_int(i, n - 1);
        std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
        out.emplace_back(pool[static_cast<std::size_t>(i)], false);
    }
    for (std::int64_t i = distinct; i < k; ++i)
        out.emplace_back(pool[static_cast<std::size_t>(rng.uniform_int(0, n - 1))], true);
    return out;
}

// floor(num / den) and ceil(num / den) for den > 0.
std::int64_t floor_div(std::int64_t num, std::int64_t den) {
    return num >= 0 ? num / den : -((-num + den - 1) / den);
}
std::int64_t ceil_div(std::int64_t num, std::int64_t den) { return -floor_div(-num, den); }
std::int64_t round_half_up(std::int64_t num, std::int64_t den) { return floor_div(2 * num + den, 2 * den); }

/// Linear interpolation of integer coordinates a (at za) and b (at zb) at z,
/// returned as numerator over (zb - za).
std::int64_t lerp_num(int a, int b, int za, int zb, int z) {
    return static_cast<std::int64_t>(a) * (zb - za) + static_cast<std::int64_t>(z - za) * (b - a);
}

PromptPlan plan_for(std::string id, bool volumetric) {
    PromptPlan plan;
    plan.scheme_id = std::move(id);
    plan.volumetric = volumetric;
    return plan;
}

void finish(PromptPlan& plan) { plan.interaction_cost = plan.summed_cost(); }

/// Bracketing anchors (lo, hi) for z; lo == hi when z is an anchor.
std::pair<int, int> bracket(const std::vector<int>& anchors, int z) {
    const auto it = std::lower_bound(anchors.begin(), anchors.end(), z);
    if (it != anchors.end() && *it == z) return {z, z};
    return {*(it - 1), *it};
}

int clampi(int v, int lo, int hi) { return std::max(lo, std::min(hi, v)); }

}  // namespace

std::vector<int> equally_spaced_indices(const ForegroundExtent& extent, int n) {
    if (n < 2) throw Error(Errc::NTooSmall, "equally spaced indices need n >= 2");
    const auto& I = extent.slices;
    if (static_cast<std::size_t>(n) >= I.size()) return I;
    std::vector<int> out;
    const std::int64_t span = extent.max_idx - extent.min_idx;
    for (int j = 0; j < n; ++j) {
        const int raw = extent.min_idx + static_cast<int>(round_half_up(j * span, n - 1));
        auto it = std::lower_bound(I.begin(), I.end(), raw);
        int snapped;
        if (it == I.end())
            snapped = I.back();
        else if (*it == raw || it == I.begin())
            snapped = *it;
        else
            snapped = (raw - *(it - 1) <= *it - raw) ? *(it - 1) : *it;
        if (out.empty() || out.back() != snapped) out.push_back(snapped);
    }
    return out;
}

PromptPlan n_pps(const BinaryMask& gt, int n, SeededRng& rng) {
    require_foreground(gt);
    if (n < 1) throw Error(Errc::NTooSmall, "N PPS needs N >= 1");
    auto plan = plan_for(InitialScheme{InitialKind::NPPS, n}.id(), false);
    plan.seed_path = rng.seed_path();
    for (const int z : foreground_extent(gt).slices) {
        auto& list = plan.per_slice[z];
        for (const auto& [p, dup] : sample(foreground_pixels(extract_slice(gt, Axis::Z, z)), n, rng)) {
            auto prompt = Prompt::pos({p.x, p.y, z});
            prompt.duplicate = dup;
            list.push_back(prompt);
        }
    }
    finish(plan);
    return plan;
}

PromptPlan n_pm_pps(const BinaryMask& gt, int n, SeededRng& rng, int restrict_radius) {
    require_foreground(gt);
    if (n < 2) throw Error(Errc::NTooSmall, "N+-PPS needs N >= 2");
    auto plan = plan_for(InitialScheme{InitialKind::NPmPPS, n}.id(), false);
    plan.seed_path = rng.seed_path();
    const int n_pos = (n + 1) / 2;
    const int n_neg = n / 2;
    for (const int z : foreground_extent(gt).slices) {
        const auto slice = extract_slice(gt, Axis::Z, z);
        const auto region = restrict_radius >= 0 ? dilate(slice, restrict_radius)
                                                 : SliceMask(slice.width(), slice.height(),
                                                             std::vector<std::uint8_t>(slice.pixel_count(), 1));
        std::vector<Pixel> background;
        for (std::size_t i = 0; i < slice.pixel_count(); ++i)
            if (region.test(i) && !slice.test(i)) background.push_back(slice.coords(i));
        if (background.empty())
            throw Error(Errc::FullSlice, "slice " + std::to_string(z) + " has no background to sample");
        const auto pos = sample(foreground_pixels(slice), n_pos, rng);
        const auto neg = sample(std::move(background), n_neg, rng);
        auto& list = plan.per_slice[z];
        for (int i = 0; i < n_pos; ++i) {
            auto p = Prompt::pos({pos[static_cast<std::size_t>(i)].first.x, pos[static_cast<std::size_t>(i)].first.y, z});
            p.duplicate = pos[static_cast<std::size_t>(i)].second;
            list.push_back(p);
            if (i < n_neg) {
                auto q = Prompt::neg({neg[static_cast<std::size_t>(i)].first.x, neg[static_cast<std::size_t>(i)].first.y, z});
                q.duplicate = neg[static_cast<std::size_t>(i)].second;
                list.push_back(q);
            }
        }
    }
    finish(plan);
    return plan;
}

PromptPlan box_ps(const BinaryMask& gt) {
    require_foreground(gt);
    auto plan = plan_for("Box_PS", false);
    for (const int z : foreground_extent(gt).slices)
        plan.per_slice[z].push_back(Prompt::box2d(z, bounding_box_2d(extract_slice(gt, Axis::Z, z))));
    finish(plan);
    return plan;
}

std::map<int, Index3> interpolation_polyline(const BinaryMask& gt, int n, std::vector<int>* anchors_out) {
    require_foreground(gt);
    const auto extent = foreground_extent(gt);
    const auto anchors = equally_spaced_indices(extent, n);
    std::map<int, Pixel> at;
    for (const int z : anchors)
        at[z] = centroid_point(largest_component(extract_slice(gt, Axis::Z, z), Conn2D::Eight));
    std::map<int, Index3> line;
    for (int z = extent.min_idx; z <= extent.max_idx; ++z) {
        const auto [lo, hi] = bracket(anchors, z);
        if (lo == hi) {
            line[z] = {at[z].x, at[z].y, z};
            continue;
        }
        const auto& a = at[lo];
        const auto& b = at[hi];
        line[z] = {static_cast<int>(round_half_up(lerp_num(a.x, b.x, lo, hi, z), hi - lo)),
                   static_cast<int>(round_half_up(lerp_num(a.y, b.y, lo, hi, z), hi - lo)), z};
    }
    if (anchors_out) *anchors_out = anchors;
    return line;
}

PromptPlan point_interpolation(const BinaryMask& gt, int n) {
    if (n < 3) throw Error(Errc::NTooSmall, "point interpolation needs at least 3 points");
    require_foreground(gt);
    std::vector<int> anchors;
    const auto line = interpolation_polyline(gt, n, &anchors);
    auto plan = plan_for(InitialScheme{InitialKind::PointInter, n}.id(), false);
    for (const auto& [z, p] : line) {
        const bool anchor = std::binary_search(anchors.begin(), anchors.end(), z);
        auto prompt = Prompt::pos(p, anchor ? EffortSchedule::point : 0);
        prompt.interpolated = !anchor;
        plan.per_slice[z].push_back(prompt);
    }
    finish(plan);
    return plan;
}

PromptPlan box_interpolation(const BinaryMask& gt, int n) {
    if (n < 3) throw Error(Errc::NTooSmall, "box interpolation needs at least 3 boxes");
    require_foreground(gt);
    const auto extent = foreground_extent(gt);
    const auto anchors = equally_spaced_indices(extent, n);
    std::map<int, Box2> at;
    for (const int z : anchors) at[z] = bounding_box_2d(extract_slice(gt, Axis::Z, z));
    auto plan = plan_for(InitialScheme{InitialKind::BoxInter, n}.id(), false);
    for (int z = extent.min_idx; z <= extent.max_idx; ++z) {
        const auto [lo, hi] = bracket(anchors, z);
        if (lo == hi) {
            plan.per_slice[z].push_back(Prompt::box2d(z, at[z]));
            continue;
        }
        const auto& a = at[lo];
        const auto& b = at[hi];
        const int den = hi - lo;
        const Box2 box{{static_cast<int>(floor_div(lerp_num(a.min.x, b.min.x, lo, hi, z), den)),
                        static_cast<int>(floor_div(lerp_num(a.min.y, b.min.y, lo, hi, z), den))},
                       {static_cast<int>(ceil_div(lerp_num(a.max.x, b.max.x, lo, hi, z), den)),
                        static_cast<int>(ceil_div(lerp_num(a.max.y, b.max.y, lo, hi, z), den))}};
        auto prompt = Prompt::box2d(z, box, 0);
        prompt.interpolated = true;
        plan.per_slice[z].push_back(prompt);
    }
    finish(plan);
    return plan;
}

PromptPlan n_ppv(const BinaryMask& gt, int n, SeededRng& rng) {
    require_foreground(gt);
    if (n < 1) throw Error(Errc::NTooSmall, "N PPV needs N >= 1");
    auto plan = plan_for(InitialScheme{InitialKind::NPPV, n}.id(), true);
    plan.seed_path = rng.seed_path();
    std::vector<std::size_t> voxels;
    voxels.reserve(gt.voxel_count());
    for (std::size_t i = 0; i < gt.dims().voxel_count(); ++i)
        if (gt.test(i)) voxels.push_back(i);
    for (const auto& [i, dup] : sample(std::move(voxels), n, rng)) {
        auto prompt = Prompt::pos(gt.dims().coords(i));
        prompt.duplicate = dup;
        plan.volume_prompts.push_back(prompt);
    }
    finish(plan);
    return plan;
}

PromptPlan n_center_ppv(const BinaryMask& gt, int n) {
    require_foreground(gt);
    if (n < 1) throw Error(Errc::NTooSmall, "N center PPV needs N >= 1");
    std::vector<int> anchors;
    const auto line = interpolation_polyline(gt, 5, &anchors);
    const auto extent = foreground_extent(gt);
    const auto picks = n == 1 ? std::vector<int>{extent.median_idx} : equally_spaced_indices(extent, n);
    auto plan = plan_for(InitialScheme{InitialKind::NCenterPPV, n}.id(), true);
    for (const int z : picks) {
        auto prompt = Prompt::pos(line.at(z));
        prompt.interpolated = !std::binary_search(anchors.begin(), anchors.end(), z);
        plan.volume_prompts.push_back(prompt);
    }
    finish(plan);
    return plan;
}

PromptPlan box_3d(const BinaryMask& gt) {
    require_foreground(gt);
    auto plan = plan_for("3D_Box", true);
    plan.volume_prompts.push_back(Prompt::box3d(bounding_box_3d(gt)));
    finish(plan);
    return plan;
}

PromptPlan perturb_boxes(const PromptPlan& plan, int k, const Dims& dims, SeededRng& rng) {
    if (k < 0) throw Error(Errc::InvalidArgument, "perturbation k must be >= 0");
    PromptPlan out = plan;
    auto shift = [&](int v, int len) { return clampi(v + static_cast<int>(rng.uniform_int(-k, k)), 0, len - 1); };
    auto order = [](int& a, int& b) {
        if (a > b) std::swap(a, b);
    };
    auto apply = [&](Prompt& p) {
        if (p.kind == PromptKind::Box2D) {
            p.box2.min.x = shift(p.box2.min.x, dims.nx);
            p.box2.min.y = shift(p.box2.min.y, dims.ny);
            p.box2.max.x = shift(p.box2.max.x, dims.nx);
            p.box2.max.y = shift(p.box2.max.y, dims.ny);
            order(p.box2.min.x, p.box2.max.x);
            order(p.box2.min.y, p.box2.max.y);
        } else if (p.kind == PromptKind::Box3D) {
            p.box3.min = {shift(p.box3.min.x, dims.nx), shift(p.box3.min.y, dims.ny), shift(p.box3.min.z, dims.nz)};
            p.box3.max = {shift(p.box3.max.x, dims.nx), shift(p.box3.max.y, dims.ny), shift(p.box3.max.z, dims.nz)};
            order(p.box3.min.x, p.box3.max.x);
            order(p.box3.min.y, p.box3.max.y);
            order(p.box3.min.z, p.box3.max.z);
        }
    };
    for (auto& [z, list] : out.per_slice)
        for (auto& p : list) apply(p);
    for (auto& p : out.volume_prompts) apply(p);
    return out;
}

PromptPlan generate_plan(const InitialScheme& scheme, const BinaryMask& gt, SeededRng& rng) {
    PromptPlan plan;
    switch (scheme.kind) {
        case InitialKind::NPPS: plan = n_pps(gt, scheme.n, rng); break;
        case InitialKind::NPmPPS: plan = n_pm_pps(gt, scheme.n, rng); break;
        case InitialKind::BoxPS: plan = box_ps(gt); break;
        case InitialKind::PointInter: plan = point_interpolation(gt, scheme.n); break;
        case InitialKind::BoxInter: plan = box_interpolation(gt, scheme.n); break;
        case InitialKind::NPPV: plan = n_ppv(gt, scheme.n, rng); break;
        case InitialKind::NCenterPPV: plan = n_center_ppv(gt, scheme.n); break;
        case InitialKind::Box3D: plan = box_3d(gt); break;
        case InitialKind::PointProp:
        case InitialKind::BoxProp:
            throw Error(Errc::InvalidArgument, scheme.id() + " needs a segmenter in the loop");
    }
    plan.seed_path = rng.seed_path();
    return plan;
}

}  // namespace isbench
