#pragma once

#include <map>
#include <vector>

#include "isbench/morphology.hpp"
#include "isbench/prompt.hpp"
#include "isbench/rng.hpp"
#include "isbench/scheme.hpp"

namespace isbench {

/// Anchor slices i_j = min + round((j-1)(max-min)/(n-1)), each snapped to the
/// nearest member of I (ties toward the lower index), duplicates dropped.
/// Returns all of I when n >= |I|. Always starts at min(I) and ends at max(I).
std::vector<int> equally_spaced_indices(const ForegroundExtent& extent, int n);

/// N random foreground pixels on every slice of I. Sampling is without
/// replacement; a slice with fewer than N pixels yields every pixel once and
/// is topped up with replacement draws flagged `duplicate`.
PromptPlan n_pps(const BinaryMask& gt, int n, SeededRng& rng);

/// ceil(N/2) positives and floor(N/2) negatives per slice, interleaved
/// pos, neg, pos, ... Negatives come from the slice background, or from the
/// background within Chebyshev `restrict_radius` of the slice foreground when
/// that is >= 0. Throws FullSlice when a slice has no eligible background.
PromptPlan n_pm_pps(const BinaryMask& gt, int n, SeededRng& rng, int restrict_radius = -1);

PromptPlan box_ps(const BinaryMask& gt);

/// Centre points of the largest 8-connected component on the anchor slices,
/// linearly interpolated (round half up) onto every z in [min(I), max(I)].
std::map<int, Index3> interpolation_polyline(const BinaryMask& gt, int n, std::vector<int>* anchors = nullptr);

PromptPlan point_interpolation(const BinaryMask& gt, int n);
PromptPlan box_interpolation(const BinaryMask& gt, int n);
PromptPlan n_ppv(const BinaryMask& gt, int n, SeededRng& rng);
PromptPlan n_center_ppv(const BinaryMask& gt, int n);
PromptPlan box_3d(const BinaryMask& gt);

/// Every box coordinate (x and y for 2D boxes, x, y and z for 3D boxes) moves
/// by an independent uniform integer in [-k, k], is clipped to `dims` and the
/// pair is swapped when min > max. Other prompts and the cost are untouched.
PromptPlan perturb_boxes(const PromptPlan& plan, int k, const Dims& dims, SeededRng& rng);

/// Dispatch for the static (model-free) schemes. Propagation schemes need a
/// segmenter and are rejected here with InvalidArgument.
PromptPlan generate_plan(const InitialScheme& scheme, const BinaryMask& gt, SeededRng& rng);

}  // namespace isbench
