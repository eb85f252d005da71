#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "isbench/instances.hpp"
#include "isbench/segmenter.hpp"

namespace isbench {

enum class OracleKind { Perfect, Dilated, Eroded, Correctable, FloodFill, ConstantEmpty };

/// White-box synthetic segmenter. `volumetric` selects 3D mode (volume
/// scope, 3D morphology) over 2D mode (slice scope, in-plane morphology).
struct OracleSpec {
    OracleKind kind = OracleKind::Perfect;
    int k = 1;               // dilated / eroded
    int radius = 2;          // correctable
    double threshold = 0.0;  // flood_fill
    bool volumetric = false;
    std::uint64_t seed = 0;

    bool operator==(const OracleSpec&) const = default;
};

std::string oracle_kind_name(OracleKind kind);
OracleKind parse_oracle_kind(std::string_view name);
/// {"kind", "mode": "2d"|"3d", "k", "radius", "threshold", "seed"}
nlohmann::json oracle_spec_to_json(const OracleSpec& spec);
OracleSpec oracle_spec_from_json(const nlohmann::json& j);
Capabilities oracle_capabilities(const OracleSpec& spec);

/// Sessions are independent; the target instance is taken from the first
/// positive point on an instance, else the instance most covered by a box,
/// else by the previous mask, else the last target of the session. No
/// target means an empty mask.
class OracleSegmenter : public Segmenter {
public:
    explicit OracleSegmenter(OracleSpec spec);

    Capabilities capabilities() override;
    std::string open_case(const CaseRef& ref) override;
    BinaryMask predict(const std::string& session_id, const PredictRequest& request) override;
    void close(const std::string& session_id) override;

    const OracleSpec& spec() const noexcept { return spec_; }

private:
    struct Session {
        Dims dims;
        std::vector<Instance> instances;
        std::vector<int> ids;  // per voxel
        std::optional<Volume> image;
        std::map<int, BinaryMask> beliefs;  // correctable state per instance
        int last_target = 0;
    };

    int identify(Session& s, const PredictRequest& request) const;
    BinaryMask flood(const Session& s, const PredictRequest& request) const;
    BinaryMask& belief(Session& s, int target) const;

    OracleSpec spec_;
    std::map<std::string, Session> sessions_;
    std::uint64_t next_session_ = 0;
};

struct SyntheticCaseSpec {
    Dims dims{32, 32, 32};
    int instances = 2;
    int radius_min = 3;
    int radius_max = 6;
    double background = 0.0;
    double contrast = 100.0;
    double noise_sigma = 10.0;
    std::uint64_t seed = 42;
    std::string case_id = "case000";
};

struct SyntheticCase {
    Volume image;   // float32
    Volume labels;  // uint8, instances labeled 1..n
    std::vector<BinaryMask> instances;
    std::vector<Index3> centres;
    std::vector<Index3> radii;
};

/// Ellipsoids with pairwise disjoint, non-touching bounding boxes on a
/// Gaussian-noise background. Deterministic per (seed, case_id).
SyntheticCase generate_synthetic_case(const SyntheticCaseSpec& spec);

struct SyntheticDatasetSpec {
    std::string dataset_id = "synthetic";
    int cases = 10;
    int dim_min = 32;
    int dim_max = 64;
    SyntheticCaseSpec base;  // dims and case_id are drawn per case
};

SyntheticDatasetSpec synthetic_dataset_spec_from_json(const nlohmann::json& j);

/// Writes `<case>_image.nii.gz` and `<case>_labels.nii.gz` per case plus
/// `manifest.json` into `dir`; returns the manifest.
nlohmann::json write_synthetic_dataset(const SyntheticDatasetSpec& spec, const std::filesystem::path& dir);

}  // namespace isbench
