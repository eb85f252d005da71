#include "isbench/scheme.hpp"

#include <cctype>
#include <regex>

#include "isbench/error.hpp"

namespace isbench {

namespace {

// Lower case, no spaces or underscores, "±" spelled "+-".
std::string canonical_key(std::string_view id) {
    std::string out;
    for (std::size_t i = 0; i < id.size(); ++i) {
        const unsigned char c = static_cast<unsigned char>(id[i]);
        if (c == 0xC2 && i + 1 < id.size() && static_cast<unsigned char>(id[i + 1]) == 0xB1) {
            out += "+-";
            ++i;
            continue;
        }
        if (c == ' ' || c == '_') continue;
        out += static_cast<char>(std::tolower(c));
    }
    return out;
}

[[noreturn]] void unknown(std::string_view id) {
    throw Error(Errc::InvalidArgument, "unknown scheme '" + std::string(id) + "'");
}

}  // namespace

std::string InitialScheme::id() const {
    const std::string num = std::to_string(n);
    switch (kind) {
        case InitialKind::NPPS: return num + "PPS";
        case InitialKind::NPmPPS: return num + "+-PPS";
        case InitialKind::BoxPS: return "Box_PS";
        case InitialKind::PointInter: return num + "P_Inter";
        case InitialKind::BoxInter: return num + "B_Inter";
        case InitialKind::PointProp: return n == 1 ? "P_Prop" : num + "P_Prop";
        case InitialKind::BoxProp: return "B_Prop";
        case InitialKind::NPPV: return num + "PPV";
        case InitialKind::NCenterPPV: return num + "_center_PPV";
        case InitialKind::Box3D: return "3D_Box";
    }
    return "?";
}

bool InitialScheme::volumetric() const noexcept {
    return kind == InitialKind::NPPV || kind == InitialKind::NCenterPPV || kind == InitialKind::Box3D;
}

bool InitialScheme::propagation() const noexcept {
    return kind == InitialKind::PointProp || kind == InitialKind::BoxProp;
}

bool InitialScheme::uses_boxes() const noexcept {
    return kind == InitialKind::BoxPS || kind == InitialKind::BoxInter || kind == InitialKind::BoxProp ||
           kind == InitialKind::Box3D;
}

bool InitialScheme::uses_points() const noexcept { return !uses_boxes(); }

bool InitialScheme::uses_neg_points() const noexcept { return kind == InitialKind::NPmPPS; }

InitialScheme parse_initial_scheme(std::string_view id) {
    const std::string key = canonical_key(id);
    static const std::regex counted(R"(^(\d+)(pps|\+-pps|pinter|binter|pprop|ppv|centerppv)$)");
    std::smatch m;
    if (key == "boxps") return {InitialKind::BoxPS, 1};
    if (key == "bprop") return {InitialKind::BoxProp, 1};
    if (key == "3dbox") return {InitialKind::Box3D, 1};
    if (key == "pprop") return {InitialKind::PointProp, 1};
    if (!std::regex_match(key, m, counted)) unknown(id);
    const int n = std::stoi(m[1].str());
    const std::string tail = m[2].str();
    InitialScheme s{InitialKind::NPPS, n};
    if (tail == "+-pps") s.kind = InitialKind::NPmPPS;
    if (tail == "pinter") s.kind = InitialKind::PointInter;
    if (tail == "binter") s.kind = InitialKind::BoxInter;
    if (tail == "pprop") s.kind = InitialKind::PointProp;
    if (tail == "ppv") s.kind = InitialKind::NPPV;
    if (tail == "centerppv") s.kind = InitialKind::NCenterPPV;
    if (n < 1) unknown(id);
    if (s.kind == InitialKind::NPmPPS && n < 2)
        throw Error(Errc::NTooSmall, "N+-PPS needs N >= 2");
    if ((s.kind == InitialKind::PointInter || s.kind == InitialKind::BoxInter) && n < 3)
        throw Error(Errc::NTooSmall, "interpolation needs at least 3 anchors");
    return s;
}

RefineKind parse_refine_scheme(std::string_view id, bool* reuse) {
    std::string_view body = id;
    const bool star = !body.empty() && body.back() == '*';
    if (star) body.remove_suffix(1);
    if (reuse) *reuse = star;
    const std::string key = canonical_key(body);
    if (key.empty() || key == "none") return RefineKind::None;
    if (key == "1ppsrefine" || key == "1ppvrefine") return RefineKind::RandomPoint;
    if (key == "scribblerefine") return RefineKind::Scribble;
    unknown(id);
}

std::string refine_id(RefineKind kind, bool volumetric) {
    switch (kind) {
        case RefineKind::None: return "none";
        case RefineKind::RandomPoint: return volumetric ? "1PPV_Refine" : "1PPS_Refine";
        case RefineKind::Scribble: return "Scribble_Refine";
    }
    return "?";
}

}  // namespace isbench
