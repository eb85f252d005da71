#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "isbench/prompt.hpp"
#include "isbench/voxelgrid.hpp"

namespace isbench {

/// What a segmenter accepts. The engine never sends anything outside this.
struct Capabilities {
    bool supports_2d = false;
    bool supports_3d = false;
    bool accepts_boxes = false;
    bool accepts_points = false;
    bool accepts_neg_points = false;
    bool accepts_mask_prompt = false;

    bool operator==(const Capabilities&) const = default;
};

nlohmann::json capabilities_to_json(const Capabilities& caps);
Capabilities capabilities_from_json(const nlohmann::json& j);

/// A single slice (`axis`, `index`) or the whole volume.
struct Scope {
    bool volume = false;
    Axis axis = Axis::Z;
    int index = 0;

    static Scope slice(int z, Axis axis = Axis::Z) { return {false, axis, z}; }
    static Scope whole() { return {true, Axis::Z, 0}; }

    /// Dims of the mask that answers this scope: the volume dims, or
    /// (width, height, 1) of the slice.
    Dims mask_dims(const Dims& volume) const;
    bool operator==(const Scope&) const = default;
};

nlohmann::json scope_to_json(const Scope& scope);
Scope scope_from_json(const nlohmann::json& j);

/// Everything a segmenter may need to open a case. Either the paths or the
/// in-memory volumes are set. Labels are only consumed by white-box oracles.
struct CaseRef {
    std::string case_id;
    std::filesystem::path image_path;
    std::optional<Volume> image;
    std::filesystem::path label_path;
    std::optional<Volume> labels;
    std::string instance_policy = "connected_components";
};

struct PredictRequest {
    Scope scope;
    std::vector<Prompt> prompts;
    std::optional<BinaryMask> prev_mask;  // dims == scope.mask_dims(volume)
};

/// In-process view of a segmenter. Remote models are wrapped by a protocol
/// client with the same interface.
class Segmenter {
public:
    virtual ~Segmenter() = default;

    virtual Capabilities capabilities() = 0;
    virtual std::string open_case(const CaseRef& ref) = 0;
    virtual BinaryMask predict(const std::string& session_id, const PredictRequest& request) = 0;
    virtual void close(const std::string& session_id) = 0;
};

/// Empty string when `request` only uses advertised features, otherwise the
/// first offending feature.
std::string capability_violation(const Capabilities& caps, const PredictRequest& request);

}  // namespace isbench
