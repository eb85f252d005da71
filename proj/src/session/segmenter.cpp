#include "isbench/segmenter.hpp"

#include "isbench/error.hpp"

namespace isbench {

using nlohmann::json;

json capabilities_to_json(const Capabilities& c) {
    return json{{"supports_2d", c.supports_2d},           {"supports_3d", c.supports_3d},
                {"accepts_boxes", c.accepts_boxes},       {"accepts_points", c.accepts_points},
                {"accepts_neg_points", c.accepts_neg_points}, {"accepts_mask_prompt", c.accepts_mask_prompt}};
}

Capabilities capabilities_from_json(const json& j) {
    Capabilities c;
    c.supports_2d = j.value("supports_2d", false);
    c.supports_3d = j.value("supports_3d", false);
    c.accepts_boxes = j.value("accepts_boxes", false);
    c.accepts_points = j.value("accepts_points", false);
    c.accepts_neg_points = j.value("accepts_neg_points", false);
    c.accepts_mask_prompt = j.value("accepts_mask_prompt", false);
    return c;
}

Dims Scope::mask_dims(const Dims& v) const {
    if (volume) return v;
    const auto [w, h] = slice_shape(v, axis);
    return Dims{w, h, 1};
}

json scope_to_json(const Scope& s) {
    if (s.volume) return json{{"kind", "volume"}};
    return json{{"kind", "slice"}, {"axis", axis_name(s.axis)}, {"index", s.index}};
}

Scope scope_from_json(const json& j) {
    try {
        const auto kind = j.at("kind").get<std::string>();
        if (kind == "volume") return Scope::whole();
        if (kind != "slice") throw Error(Errc::InvalidArgument, "unknown scope kind '" + kind + "'");
        return Scope::slice(j.at("index").get<int>(), parse_axis(j.value("axis", "z")));
    } catch (const json::exception& e) {
        throw Error(Errc::InvalidArgument, std::string("bad scope: ") + e.what());
    }
}

std::string capability_violation(const Capabilities& caps, const PredictRequest& r) {
    if (r.scope.volume && !caps.supports_3d) return "volume scope";
    if (!r.scope.volume && !caps.supports_2d) return "slice scope";
    if (r.prev_mask && !caps.accepts_mask_prompt) return "mask prompt";
    for (const auto& p : r.prompts) {
        switch (p.kind) {
            case PromptKind::PosPoint:
                if (!caps.accepts_points) return "point prompt";
                break;
            case PromptKind::NegPoint:
                if (!caps.accepts_points || !caps.accepts_neg_points) return "negative point prompt";
                break;
            case PromptKind::Box2D:
            case PromptKind::Box3D:
                if (!caps.accepts_boxes) return "box prompt";
                break;
            case PromptKind::Scribble: return "scribble prompt";
            case PromptKind::PrevMask:
                if (!caps.accepts_mask_prompt) return "mask prompt";
                break;
        }
    }
    return {};
}

}  // namespace isbench
