#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "isbench/instances.hpp"
#include "isbench/metrics.hpp"
#include "isbench/oracles.hpp"
#include "isbench/scheme.hpp"
#include "isbench/segmenter.hpp"

namespace isbench {

struct CaseEntry {
    std::string case_id;
    std::filesystem::path image_path;  // resolved against the manifest directory
    std::filesystem::path label_path;
    std::map<int, std::string> class_map;
    InstancePolicy instance_policy = InstancePolicy::ConnectedComponents;
};

struct DatasetManifest {
    std::string dataset_id;
    std::vector<CaseEntry> cases;
};

/// Throws ConfigInvalid. Case ids must be unique; class names must be unique
/// under the connected-components policy (explicit labels may share one).
DatasetManifest parse_manifest(const nlohmann::json& j, const std::filesystem::path& base_dir);
DatasetManifest load_manifest(const std::filesystem::path& path);

struct SchemeRun {
    InitialScheme initial;
    RefineKind refine = RefineKind::None;
    int iterations = 0;
    std::optional<bool> reuse_initial;  // default: on for 2D, off for 3D
    int box_perturb_k = 0;

    bool reuse() const { return reuse_initial.value_or(!initial.volumetric()); }
    /// e.g. "3B_Inter", "1PPS+1PPS_Refine*", "3D_Box~5".
    std::string label() const;
};

struct SegmenterConfig {
    std::optional<OracleSpec> builtin;
    std::string command;  // child process over stdio
    std::string address;  // host:port
};

struct RunConfig {
    std::uint64_t seed = 42;
    std::vector<std::filesystem::path> manifests;
    std::vector<SchemeRun> schemes;
    SegmenterConfig segmenter;
    std::filesystem::path output_dir = "results";
    int parallelism = 1;
    double max_failure_fraction = 0.0;
    AggregationOrder order = AggregationOrder::ClassFirst;
    bool transcripts = true;
    nlohmann::json source;  // normalized form, hashed into the run manifest
};

/// Relative paths resolve against `base_dir`. Throws ConfigInvalid.
RunConfig parse_run_config(const nlohmann::json& j, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

std::unique_ptr<Segmenter> connect_segmenter(const SegmenterConfig& config);

struct RunSummary {
    std::vector<EvaluationRecord> records;  // canonical order
    std::vector<AggregateRow> aggregate;
    std::size_t sessions = 0;
    std::size_t failed_sessions = 0;  // crashes and protocol failures
    std::size_t skipped_sessions = 0;  // capability mismatch
    bool threshold_exceeded = false;
};

/// Writes results.csv, results.json, aggregate.csv, aggregate.json,
/// run_manifest.json and transcripts/ into config.output_dir.
RunSummary run_benchmark(const RunConfig& config);

/// Seed path shared by the runner and simulate-prompts.
std::string session_seed_path(const std::string& dataset, const std::string& case_id, const std::string& instance,
                              const std::string& scheme_label);

std::string instance_label(const Instance& instance);

}  // namespace isbench
