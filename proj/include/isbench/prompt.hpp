#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "isbench/morphology.hpp"
#include "isbench/voxelgrid.hpp"

namespace isbench {

enum class PromptKind { PosPoint, NegPoint, Box2D, Box3D, Scribble, PrevMask };

std::string_view prompt_kind_name(PromptKind kind) noexcept;
PromptKind parse_prompt_kind(std::string_view name);

/// One simulated interaction. Coordinates are always volume coordinates; a
/// 2D box lives on the axial slice `z`. A prev_mask prompt carries no
/// geometry, the mask itself travels next to the prompt list.
struct Prompt {
    PromptKind kind = PromptKind::PosPoint;
    Index3 point{};
    int z = 0;
    Box2 box2{};
    Box3 box3{};
    std::vector<Index3> scribble;
    bool interpolated = false;
    bool duplicate = false;
    int cost = 0;

    static Prompt pos(Index3 p, int cost = 1);
    static Prompt neg(Index3 p, int cost = 1);
    static Prompt box2d(int z, Box2 box, int cost = 2);
    static Prompt box3d(Box3 box, int cost = 3);

    bool is_point() const noexcept { return kind == PromptKind::PosPoint || kind == PromptKind::NegPoint; }
    bool is_box() const noexcept { return kind == PromptKind::Box2D || kind == PromptKind::Box3D; }
    bool operator==(const Prompt&) const = default;
};

/// Costs of the human-effort proxy, in clicks.
struct EffortSchedule {
    static constexpr int point = 1;
    static constexpr int box2d = 2;
    static constexpr int box3d = 3;
    static constexpr int boundary_pick = 1;
    static constexpr int scribble = 3;

    static int of(PromptKind kind) noexcept;
};

/// Output of a static scheme. 2D plans fill `per_slice`, 3D plans fill
/// `volume_prompts`. `interaction_cost` is the sum of the prompt costs.
struct PromptPlan {
    std::string scheme_id;
    std::string seed_path;
    bool volumetric = false;
    int interaction_cost = 0;
    std::map<int, std::vector<Prompt>> per_slice;
    std::vector<Prompt> volume_prompts;

    int summed_cost() const;
    bool operator==(const PromptPlan&) const = default;
};

nlohmann::json prompt_to_json(const Prompt& prompt);
Prompt prompt_from_json(const nlohmann::json& j);

/// {scheme_id, seed_path, mode, interaction_cost, prompts:[...]}; 2D prompts
/// are keyed by their own z.
nlohmann::json plan_to_json(const PromptPlan& plan);
PromptPlan plan_from_json(const nlohmann::json& j);

}  // namespace isbench
