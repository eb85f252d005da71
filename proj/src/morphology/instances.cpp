#include "isbench/instances.hpp"

#include <cmath>
#include <set>

#include "isbench/error.hpp"

namespace isbench {

std::string_view instance_policy_name(InstancePolicy policy) noexcept {
    return policy == InstancePolicy::ExplicitLabels ? "explicit_labels" : "connected_components";
}

InstancePolicy parse_instance_policy(std::string_view name) {
    if (name == "connected_components" || name == "connected_components(26)") return InstancePolicy::ConnectedComponents;
    if (name == "explicit_labels") return InstancePolicy::ExplicitLabels;
    throw Error(Errc::InvalidArgument, "unknown instance policy '" + std::string(name) + "'");
}

std::vector<Instance> extract_instances(const Volume& labels, InstancePolicy policy,
                                        const std::map<int, std::string>& class_map) {
    std::set<int> values;
    for (const float v : labels.data()) {
        if (v == 0.0f) continue;
        if (v != std::nearbyint(v)) throw Error(Errc::InvalidArgument, "label volume holds a non-integer value");
        values.insert(static_cast<int>(v));
    }
    std::vector<Instance> out;
    for (const int value : values) {
        std::string cls;
        if (class_map.empty()) {
            cls = std::to_string(value);
        } else if (const auto it = class_map.find(value); it != class_map.end()) {
            cls = it->second;
        } else {
            continue;
        }
        auto mask = label_mask(labels, static_cast<float>(value));
        if (policy == InstancePolicy::ExplicitLabels) {
            out.push_back({static_cast<int>(out.size()) + 1, value, cls, std::move(mask)});
            continue;
        }
        const auto cc = connected_components(mask, Conn3D::TwentySix);
        for (int c = 1; c <= cc.count; ++c)
            out.push_back({static_cast<int>(out.size()) + 1, value, cls, component_mask(cc, c)});
    }
    return out;
}

std::vector<int> instance_map(const Dims& dims, const std::vector<Instance>& instances) {
    std::vector<int> out(dims.voxel_count(), 0);
    for (const auto& inst : instances) {
        if (!(inst.mask.dims() == dims)) throw Error(Errc::DimMismatch, "instance mask dims differ");
        const auto bits = inst.mask.bits();
        for (std::size_t i = 0; i < bits.size(); ++i)
            if (bits[i]) out[i] = inst.id;
    }
    return out;
}

}  // namespace isbench
