#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "isbench/morphology.hpp"
#include "isbench/voxelgrid.hpp"

namespace isbench {

/// How a label volume splits into evaluation targets.
enum class InstancePolicy {
    ConnectedComponents,  // each 26-connected component of each label value
    ExplicitLabels,       // each label value is one instance
};

std::string_view instance_policy_name(InstancePolicy policy) noexcept;
/// Accepts "connected_components", "connected_components(26)" and
/// "explicit_labels".
InstancePolicy parse_instance_policy(std::string_view name);

struct Instance {
    int id = 0;     // 1-based, in label order then component order
    int label = 0;  // label value in the source volume
    std::string class_name;
    BinaryMask mask;
};

/// Non-zero label values in ascending order. With a non-empty `class_map`
/// only mapped values are used; otherwise the class name is the value.
std::vector<Instance> extract_instances(const Volume& labels, InstancePolicy policy,
                                        const std::map<int, std::string>& class_map = {});

/// Per-voxel instance id (0 = none).
std::vector<int> instance_map(const Dims& dims, const std::vector<Instance>& instances);

}  // namespace isbench
