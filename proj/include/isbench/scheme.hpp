#pragma once

#include <string>
#include <string_view>

namespace isbench {

/// Initial prompting schemes of the catalog. `n` is the count in ids such
/// as "3P_Inter" or "10PPV"; it is unused by Box_PS, B_Prop and 3D_Box.
enum class InitialKind { NPPS, NPmPPS, BoxPS, PointInter, BoxInter, PointProp, BoxProp, NPPV, NCenterPPV, Box3D };

struct InitialScheme {
    InitialKind kind = InitialKind::NPPS;
    int n = 1;

    /// Canonical id, e.g. "2+-PPS", "3B_Inter", "5P_Prop", "1_center_PPV".
    std::string id() const;
    bool volumetric() const noexcept;
    bool propagation() const noexcept;
    bool uses_boxes() const noexcept;
    bool uses_points() const noexcept;
    bool uses_neg_points() const noexcept;

    bool operator==(const InitialScheme&) const = default;
};

enum class RefineKind { None, RandomPoint, Scribble };

/// Accepts canonical ids and loose spellings ("3P Inter", "2±PPS", "1 center PPV").
/// Throws InvalidArgument on anything outside the catalog.
InitialScheme parse_initial_scheme(std::string_view id);

/// "none", "1PPS_Refine", "1PPV_Refine" or "Scribble_Refine". A trailing "*"
/// (the prompt-reuse variants) is stripped and reported through `reuse`.
RefineKind parse_refine_scheme(std::string_view id, bool* reuse = nullptr);
std::string refine_id(RefineKind kind, bool volumetric);

}  // namespace isbench
