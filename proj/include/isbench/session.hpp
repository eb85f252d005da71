#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "isbench/morphology.hpp"
#include "isbench/prompt.hpp"
#include "isbench/rng.hpp"
#include "isbench/scheme.hpp"
#include "isbench/segmenter.hpp"

namespace isbench {

struct LedgerEntry {
    int step = 0;
    std::string scheme_id;
    int cost = 0;
    std::string note;
};

/// Running count of simulated interactions.
class InteractionLedger {
public:
    void add(int step, std::string scheme_id, int cost, std::string note = {});
    int total() const noexcept { return total_; }
    const std::vector<LedgerEntry>& entries() const noexcept { return entries_; }

private:
    std::vector<LedgerEntry> entries_;
    int total_ = 0;
};

/// One JSON object per prediction request; no clocks, so identical runs
/// produce identical transcripts.
class Transcript {
public:
    void add(nlohmann::json record) { lines_.push_back(record.dump()); }
    const std::vector<std::string>& lines() const noexcept { return lines_; }
    void write(const std::filesystem::path& path) const;

private:
    std::vector<std::string> lines_;
};

/// Segmenter plus the per-instance context every request is sent with.
/// `send` enforces capabilities before the request leaves the engine and
/// checks the returned mask dims.
struct SegmenterHandle {
    Segmenter& segmenter;
    std::string session_id;
    Capabilities caps;
    Transcript* transcript = nullptr;

    SegmenterHandle(Segmenter& seg, std::string session, Capabilities capabilities, Transcript* log = nullptr)
        : segmenter(seg), session_id(std::move(session)), caps(capabilities), transcript(log) {}

    BinaryMask send(const PredictRequest& request, const Dims& volume, int step, const std::string& scheme_id);
};

struct SessionOptions {
    bool reuse_initial = true;
    int ring_radius = 2;
    double arc_fraction = 0.6;
    int box_perturb_k = 0;
};

struct SessionState {
    BinaryMask gt;
    BinaryMask pred;
    bool volumetric = false;
    std::map<int, std::vector<Prompt>> per_slice_prompts;  // initial 2D prompts
    std::vector<Prompt> volume_prompts;                    // initial 3D prompts
    std::set<int> predicted_slices;                        // 2D scope so far
    InteractionLedger ledger;
    int iteration = 0;
    bool reuse_initial = true;
    std::vector<std::string> events;

    SessionState(BinaryMask ground_truth, bool volumetric_mode);
};

struct RefinementStats {
    std::size_t n_fn = 0;
    std::size_t n_fp = 0;

    /// n_fn / (n_fn + n_fp); throws NothingToRefine when both are 0.
    double p() const;
};

RefinementStats refinement_stats(const BinaryMask& pred, const BinaryMask& gt);

/// Sends a static plan: one request per slice in the plan (2D) or a single
/// volume request (3D). Ledger step 0 carries the plan cost.
SessionState predict_plan(SegmenterHandle& seg, const BinaryMask& gt, const PromptPlan& plan, bool reuse_initial);

/// "P Prop" / "NP Prop". The user supplies min(I), max(I) and a centre click
/// on the median slice; with `user_points` > 1 the extra clicks sit on the
/// equally spaced anchor slices other than the one closest to the median.
/// Cost user_points + 2. Each slice of [min(I), max(I)] is predicted once:
/// the median first, then downward, then upward from median + 1.
SessionState point_propagation(SegmenterHandle& seg, const BinaryMask& gt, int user_points = 1,
                               bool reuse_initial = true);

/// "B Prop": median-slice box plus min(I), max(I); cost 4.
SessionState box_propagation(SegmenterHandle& seg, const BinaryMask& gt, bool reuse_initial = true);

/// "1PPS Refine" (2D: one misclassified pixel per erroneous slice of I) or
/// "1PPV Refine" (3D: one misclassified voxel).
void refine_step_random(SegmenterHandle& seg, SessionState& st, SeededRng& rng);

struct Scribble {
    bool positive = true;
    std::vector<Index3> points;  // positive: bottom to top; negative: D in arc order
    double p = 0;
    bool fallback = false;       // negative arc held no false positive
    FpSlice fp_slice{};
    std::size_t curve_length = 0;
    std::size_t arc_length = 0;
};

/// Draws Bernoulli(p) first (one RNG value), then builds the positive
/// centre-line scribble or the negative contour arc.
Scribble build_scribble(const BinaryMask& pred, const BinaryMask& gt, SeededRng& rng, int ring_radius = 2,
                        double arc_fraction = 0.6);

void refine_step_scribble(SegmenterHandle& seg, SessionState& st, SeededRng& rng,
                          const SessionOptions& options = {});

struct ProtocolSpec {
    InitialScheme initial;
    RefineKind refine = RefineKind::None;
    int iterations = 0;
    SessionOptions options;
};

struct IterationResult {
    int iteration = 0;
    BinaryMask pred;
    int cumulative_cost = 0;
    std::set<int> scope_slices;  // empty for 3D runs
    bool carried = false;        // no refinement happened (already perfect)
};

struct ProtocolResult {
    std::vector<IterationResult> iterations;
    InteractionLedger ledger;
    std::vector<std::string> events;
};

/// The static plan run_protocol sends for a non-propagation scheme; draws
/// from rng.child("initial") only.
PromptPlan initial_plan(const ProtocolSpec& spec, const BinaryMask& gt, const SeededRng& rng);

/// Iteration 0 is the initial prediction; 1..k are refinements. Once the
/// prediction equals GT the remaining iterations repeat it at unchanged cost.
ProtocolResult run_protocol(SegmenterHandle& seg, const BinaryMask& gt, const ProtocolSpec& spec, SeededRng& rng);

}  // namespace isbench
