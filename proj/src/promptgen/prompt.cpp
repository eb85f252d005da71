#include "isbench/prompt.hpp"

#include "isbench/error.hpp"

namespace isbench {

using nlohmann::json;

namespace {

json xyz(const Index3& p) { return json::array({p.x, p.y, p.z}); }
json xy(const Pixel& p) { return json::array({p.x, p.y}); }

Index3 read_xyz(const json& j) {
    if (!j.is_array() || j.size() != 3) throw Error(Errc::InvalidArgument, "expected [x, y, z]");
    return {j[0].get<int>(), j[1].get<int>(), j[2].get<int>()};
}

Pixel read_xy(const json& j) {
    if (!j.is_array() || j.size() != 2) throw Error(Errc::InvalidArgument, "expected [x, y]");
    return {j[0].get<int>(), j[1].get<int>()};
}

int prompt_slice(const Prompt& p) {
    switch (p.kind) {
        case PromptKind::PosPoint:
        case PromptKind::NegPoint: return p.point.z;
        case PromptKind::Box2D: return p.z;
        default: throw Error(Errc::InvalidArgument, "prompt kind has no axial slice");
    }
}

}  // namespace

std::string_view prompt_kind_name(PromptKind kind) noexcept {
    switch (kind) {
        case PromptKind::PosPoint: return "pos_point";
        case PromptKind::NegPoint: return "neg_point";
        case PromptKind::Box2D: return "box2d";
        case PromptKind::Box3D: return "box3d";
        case PromptKind::Scribble: return "scribble";
        case PromptKind::PrevMask: return "prev_mask";
    }
    return "?";
}

PromptKind parse_prompt_kind(std::string_view name) {
    for (const auto k : {PromptKind::PosPoint, PromptKind::NegPoint, PromptKind::Box2D, PromptKind::Box3D,
                         PromptKind::Scribble, PromptKind::PrevMask})
        if (prompt_kind_name(k) == name) return k;
    throw Error(Errc::InvalidArgument, "unknown prompt kind '" + std::string(name) + "'");
}

Prompt Prompt::pos(Index3 p, int cost) {
    Prompt out;
    out.kind = PromptKind::PosPoint;
    out.point = p;
    out.cost = cost;
    return out;
}

Prompt Prompt::neg(Index3 p, int cost) {
    Prompt out = pos(p, cost);
    out.kind = PromptKind::NegPoint;
    return out;
}

Prompt Prompt::box2d(int z, Box2 box, int cost) {
    Prompt out;
    out.kind = PromptKind::Box2D;
    out.z = z;
    out.box2 = box;
    out.cost = cost;
    return out;
}

Prompt Prompt::box3d(Box3 box, int cost) {
    Prompt out;
    out.kind = PromptKind::Box3D;
    out.box3 = box;
    out.cost = cost;
    return out;
}

int EffortSchedule::of(PromptKind kind) noexcept {
    switch (kind) {
        case PromptKind::PosPoint:
        case PromptKind::NegPoint: return point;
        case PromptKind::Box2D: return box2d;
        case PromptKind::Box3D: return box3d;
        case PromptKind::Scribble: return scribble;
        case PromptKind::PrevMask: return 0;
    }
    return 0;
}

int PromptPlan::summed_cost() const {
    int total = 0;
    for (const auto& [z, prompts] : per_slice)
        for (const auto& p : prompts) total += p.cost;
    for (const auto& p : volume_prompts) total += p.cost;
    return total;
}

json prompt_to_json(const Prompt& p) {
    json j;
    j["kind"] = prompt_kind_name(p.kind);
    switch (p.kind) {
        case PromptKind::PosPoint:
        case PromptKind::NegPoint: j["point"] = xyz(p.point); break;
        case PromptKind::Box2D:
            j["z"] = p.z;
            j["min"] = xy(p.box2.min);
            j["max"] = xy(p.box2.max);
            break;
        case PromptKind::Box3D:
            j["min"] = xyz(p.box3.min);
            j["max"] = xyz(p.box3.max);
            break;
        case PromptKind::Scribble: {
            json pts = json::array();
            for (const auto& q : p.scribble) pts.push_back(xyz(q));
            j["points"] = std::move(pts);
            break;
        }
        case PromptKind::PrevMask: break;
    }
    j["interpolated"] = p.interpolated;
    if (p.duplicate) j["duplicate"] = true;
    j["cost"] = p.cost;
    return j;
}

Prompt prompt_from_json(const json& j) {
    try {
        Prompt p;
        p.kind = parse_prompt_kind(j.at("kind").get<std::string>());
        switch (p.kind) {
            case PromptKind::PosPoint:
            case PromptKind::NegPoint: p.point = read_xyz(j.at("point")); break;
            case PromptKind::Box2D:
                p.z = j.at("z").get<int>();
                p.box2 = {read_xy(j.at("min")), read_xy(j.at("max"))};
                break;
            case PromptKind::Box3D: p.box3 = {read_xyz(j.at("min")), read_xyz(j.at("max"))}; break;
            case PromptKind::Scribble:
                for (const auto& q : j.at("points")) p.scribble.push_back(read_xyz(q));
                break;
            case PromptKind::PrevMask: break;
        }
        p.interpolated = j.value("interpolated", false);
        p.duplicate = j.value("duplicate", false);
        p.cost = j.value("cost", 0);
        return p;
    } catch (const json::exception& e) {
        throw Error(Errc::InvalidArgument, std::string("bad prompt: ") + e.what());
    }
}

json plan_to_json(const PromptPlan& plan) {
    json prompts = json::array();
    if (plan.volumetric) {
        for (const auto& p : plan.volume_prompts) prompts.push_back(prompt_to_json(p));
    } else {
        for (const auto& [z, list] : plan.per_slice)
            for (const auto& p : list) prompts.push_back(prompt_to_json(p));
    }
    return json{{"scheme_id", plan.scheme_id},
                {"seed_path", plan.seed_path},
                {"mode", plan.volumetric ? "3d" : "2d"},
                {"interaction_cost", plan.interaction_cost},
                {"prompts", std::move(prompts)}};
}

PromptPlan plan_from_json(const json& j) {
    try {
        PromptPlan plan;
        plan.scheme_id = j.at("scheme_id").get<std::string>();
        plan.seed_path = j.value("seed_path", "");
        plan.volumetric = j.at("mode").get<std::string>() == "3d";
        plan.interaction_cost = j.at("interaction_cost").get<int>();
        for (const auto& pj : j.at("prompts")) {
            auto p = prompt_from_json(pj);
            if (plan.volumetric)
                plan.volume_prompts.push_back(std::move(p));
            else
                plan.per_slice[prompt_slice(p)].push_back(std::move(p));
        }
        return plan;
    } catch (const json::exception& e) {
        throw Error(Errc::InvalidArgument, std::string("bad plan: ") + e.what());
    }
}

}  // namespace isbench
