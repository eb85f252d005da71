#include "isbench/session.hpp"

#include <cmath>
#include <fstream>

#include "isbench/error.hpp"
#include "isbench/promptgen.hpp"
#include "isbench/rle.hpp"

namespace isbench {

using nlohmann::json;

void InteractionLedger::add(int step, std::string scheme_id, int cost, std::string note) {
    if (cost < 0) throw Error(Errc::InvalidArgument, "interaction cost must be >= 0");
    entries_.push_back({step, std::move(scheme_id), cost, std::move(note)});
    total_ += cost;
}

void Transcript::write(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(Errc::IoFailure, "cannot write " + path.string());
    for (const auto& line : lines_) out << line << '\n';
}

BinaryMask SegmenterHandle::send(const PredictRequest& request, const Dims& volume, int step,
                                 const std::string& scheme_id) {
    if (const auto bad = capability_violation(caps, request); !bad.empty())
        throw Error(Errc::CapabilityMissing, "segmenter does not advertise " + bad);
    BinaryMask out;
    try {
        out = segmenter.predict(session_id, request);
    } catch (const Error& e) {
        if (e.code() == Errc::SegmenterCrash || e.code() == Errc::ProtocolError) throw;
        throw Error(Errc::SegmenterFailure, e.what());
    } catch (const std::exception& e) {
        throw Error(Errc::SegmenterFailure, e.what());
    }
    const Dims expect = request.scope.mask_dims(volume);
    if (!(out.dims() == expect)) throw Error(Errc::SegmenterFailure, "mask dims do not match the requested scope");
    if (transcript) {
        json prompts = json::array();
        for (const auto& p : request.prompts) prompts.push_back(prompt_to_json(p));
        transcript->add(json{{"step", step},
                             {"scheme", scheme_id},
                             {"scope", scope_to_json(request.scope)},
                             {"prompts", std::move(prompts)},
                             {"prev_mask", request.prev_mask ? json(rle_digest(rle_encode(*request.prev_mask))) : json()},
                             {"mask", rle_digest(rle_encode(out))},
                             {"foreground", out.voxel_count()}});
    }
    return out;
}

SessionState::SessionState(BinaryMask ground_truth, bool volumetric_mode)
    : gt(std::move(ground_truth)), pred(gt.dims()), volumetric(volumetric_mode) {}

double RefinementStats::p() const {
    if (n_fn + n_fp == 0) throw Error(Errc::NothingToRefine, "prediction has no errors");
    return static_cast<double>(n_fn) / static_cast<double>(n_fn + n_fp);
}

RefinementStats refinement_stats(const BinaryMask& pred, const BinaryMask& gt) {
    if (!(pred.dims() == gt.dims())) throw Error(Errc::DimMismatch, "pred and gt dims differ");
    RefinementStats s;
    for (std::size_t i = 0; i < gt.dims().voxel_count(); ++i) {
        if (gt.test(i) && !pred.test(i)) ++s.n_fn;
        if (pred.test(i) && !gt.test(i)) ++s.n_fp;
    }
    return s;
}

namespace {

void predict_slice(SegmenterHandle& seg, SessionState& st, int z, std::vector<Prompt> prompts, bool with_prev, int step,
                   const std::string& scheme_id) {
    PredictRequest req{Scope::slice(z), std::move(prompts), std::nullopt};
    if (with_prev) req.prev_mask = as_volume(extract_slice(st.pred, Axis::Z, z));
    const auto mask = seg.send(req, st.gt.dims(), step, scheme_id);
    insert_slice(st.pred, Axis::Z, z, as_slice(mask));
    st.predicted_slices.insert(z);
}

void predict_volume(SegmenterHandle& seg, SessionState& st, std::vector<Prompt> prompts, bool with_prev, int step,
                    const std::string& scheme_id) {
    PredictRequest req{Scope::whole(), std::move(prompts), std::nullopt};
    if (with_prev) req.prev_mask = st.pred;
    st.pred = seg.send(req, st.gt.dims(), step, scheme_id);
}

Prompt moved_to(Prompt p, int z) {
    p.cost = 0;
    p.interpolated = true;
    if (p.kind == PromptKind::Box2D)
        p.z = z;
    else
        p.point.z = z;
    return p;
}

using Derive = Prompt (*)(const SliceMask& previous, int z);

Prompt derive_point(const SliceMask& previous, int z) {
    const auto c = centroid_point(largest_component(previous, Conn2D::Eight));
    auto p = Prompt::pos({c.x, c.y, z}, 0);
    p.interpolated = true;
    return p;
}

Prompt derive_box(const SliceMask& previous, int z) {
    auto p = Prompt::box2d(z, bounding_box_2d(previous), 0);
    p.interpolated = true;
    return p;
}

// Median first, then down to min(I), then up from median + 1 to max(I).
// `user` prompts override the derived prompt on their slice.
void propagate(SegmenterHandle& seg, SessionState& st, const ForegroundExtent& e, const std::map<int, Prompt>& user,
               Derive derive, const std::string& scheme_id) {
    const int m = e.median_idx;
    auto run = [&](int from, int to, int dir) {
        Prompt last = user.at(m);
        for (int z = from; dir < 0 ? z >= to : z <= to; z += dir) {
            Prompt p;
            if (const auto it = user.find(z); it != user.end()) {
                p = it->second;
            } else {
                const auto previous = extract_slice(st.pred, Axis::Z, z - dir);
                if (previous.empty()) {
                    p = moved_to(last, z);
                    st.events.push_back("slice " + std::to_string(z - dir) + " predicted empty; prompt carried to slice " +
                                        std::to_string(z));
                } else {
                    p = derive(previous, z);
                }
            }
            predict_slice(seg, st, z, {p}, false, 0, scheme_id);
            st.per_slice_prompts[z] = {p};
            last = p;
        }
    };
    predict_slice(seg, st, m, {user.at(m)}, false, 0, scheme_id);
    st.per_slice_prompts[m] = {user.at(m)};
    run(m - 1, e.min_idx, -1);
    run(m + 1, e.max_idx, +1);
}

Pixel slice_centre(const BinaryMask& gt, int z) {
    return centroid_point(largest_component(extract_slice(gt, Axis::Z, z), Conn2D::Eight));
}

std::vector<std::size_t> misclassified(const BinaryMask& pred, const BinaryMask& gt, std::size_t begin, std::size_t end) {
    std::vector<std::size_t> out;
    for (std::size_t i = begin; i < end; ++i)
        if (pred.test(i) != gt.test(i)) out.push_back(i);
    return out;
}

Prompt correction_at(const BinaryMask& gt, std::size_t i) {
    const auto q = gt.dims().coords(i);
    return gt.test(i) ? Prompt::pos(q) : Prompt::neg(q);
}

void require_refinable(const SegmenterHandle& seg, const SessionState& st) {
    if (st.pred == st.gt) throw Error(Errc::AlreadyPerfect, "prediction already equals ground truth");
    if (!seg.caps.accepts_mask_prompt)
        throw Error(Errc::CapabilityMissing, "segmenter does not accept mask prompts, refinement is impossible");
}

std::vector<Prompt> with_initial(const std::vector<Prompt>& initial, bool reuse, std::vector<Prompt> fresh) {
    if (!reuse) return fresh;
    std::vector<Prompt> out = initial;
    out.insert(out.end(), fresh.begin(), fresh.end());
    return out;
}

const std::vector<Prompt>& initial_for(const SessionState& st, int z) {
    static const std::vector<Prompt> none;
    const auto it = st.per_slice_prompts.find(z);
    return it == st.per_slice_prompts.end() ? none : it->second;
}

}  // namespace

SessionState predict_plan(SegmenterHandle& seg, const BinaryMask& gt, const PromptPlan& plan, bool reuse_initial) {
    SessionState st(gt, plan.volumetric);
    st.reuse_initial = reuse_initial;
    if (plan.volumetric) {
        predict_volume(seg, st, plan.volume_prompts, false, 0, plan.scheme_id);
        st.volume_prompts = plan.volume_prompts;
    } else {
        for (const auto& [z, prompts] : plan.per_slice) {
            predict_slice(seg, st, z, prompts, false, 0, plan.scheme_id);
            st.per_slice_prompts[z] = prompts;
        }
    }
    st.ledger.add(0, plan.scheme_id, plan.interaction_cost);
    return st;
}

SessionState point_propagation(SegmenterHandle& seg, const BinaryMask& gt, int user_points, bool reuse_initial) {
    if (gt.empty()) throw Error(Errc::EmptyMask, "ground-truth instance is empty");
    if (user_points < 1) throw Error(Errc::NTooSmall, "point propagation needs at least one click");
    const auto e = foreground_extent(gt);
    const std::string id = InitialScheme{InitialKind::PointProp, user_points}.id();
    std::map<int, Prompt> user;
    const auto centre = slice_centre(gt, e.median_idx);
    user[e.median_idx] = Prompt::pos({centre.x, centre.y, e.median_idx});
    if (user_points > 1) {
        auto anchors = equally_spaced_indices(e, user_points);
        // The anchor closest to the median is replaced by the median click.
        std::size_t nearest = 0;
        for (std::size_t i = 1; i < anchors.size(); ++i)
            if (std::abs(anchors[i] - e.median_idx) < std::abs(anchors[nearest] - e.median_idx)) nearest = i;
        anchors.erase(anchors.begin() + static_cast<std::ptrdiff_t>(nearest));
        for (const int z : anchors) {
            if (user.count(z)) continue;
            const auto c = slice_centre(gt, z);
            user[z] = Prompt::pos({c.x, c.y, z});
        }
    }
    SessionState st(gt, false);
    st.reuse_initial = reuse_initial;
    propagate(seg, st, e, user, derive_point, id);
    st.ledger.add(0, id, static_cast<int>(user.size()) * EffortSchedule::point, "clicks");
    st.ledger.add(0, id, 2 * EffortSchedule::boundary_pick, "axial boundary picks");
    return st;
}

SessionState box_propagation(SegmenterHandle& seg, const BinaryMask& gt, bool reuse_initial) {
    if (gt.empty()) throw Error(Errc::EmptyMask, "ground-truth instance is empty");
    const auto e = foreground_extent(gt);
    std::map<int, Prompt> user;
    user[e.median_idx] = Prompt::box2d(e.median_idx, bounding_box_2d(extract_slice(gt, Axis::Z, e.median_idx)));
    SessionState st(gt, false);
    st.reuse_initial = reuse_initial;
    propagate(seg, st, e, user, derive_box, "B_Prop");
    st.ledger.add(0, "B_Prop", EffortSchedule::box2d, "box");
    st.ledger.add(0, "B_Prop", 2 * EffortSchedule::boundary_pick, "axial boundary picks");
    return st;
}

void refine_step_random(SegmenterHandle& seg, SessionState& st, SeededRng& rng) {
    require_refinable(seg, st);
    const int step = st.iteration + 1;
    const auto& d = st.gt.dims();
    if (st.volumetric) {
        const auto wrong = misclassified(st.pred, st.gt, 0, d.voxel_count());
        const auto pick = wrong[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(wrong.size()) - 1))];
        predict_volume(seg, st, with_initial(st.volume_prompts, st.reuse_initial, {correction_at(st.gt, pick)}), true,
                       step, "1PPV_Refine");
        st.ledger.add(step, "1PPV_Refine", EffortSchedule::point);
        st.iteration = step;
        return;
    }
    const std::size_t plane = static_cast<std::size_t>(d.nx) * static_cast<std::size_t>(d.ny);
    int prompted = 0;
    const auto slices = st.gt.empty() ? std::vector<int>{} : foreground_extent(st.gt).slices;
    for (const int z : slices) {
        const auto wrong = misclassified(st.pred, st.gt, static_cast<std::size_t>(z) * plane,
                                         static_cast<std::size_t>(z + 1) * plane);
        if (wrong.empty()) continue;
        const auto pick = wrong[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(wrong.size()) - 1))];
        predict_slice(seg, st, z, with_initial(initial_for(st, z), st.reuse_initial, {correction_at(st.gt, pick)}),
                      true, step, "1PPS_Refine");
        ++prompted;
    }
    if (prompted == 0) throw Error(Errc::NothingToRefine, "no slice of the instance holds an error");
    st.ledger.add(step, "1PPS_Refine", prompted * EffortSchedule::point);
    st.iteration = step;
}

Scribble build_scribble(const BinaryMask& pred, const BinaryMask& gt, SeededRng& rng, int ring_radius,
                        double arc_fraction) {
    Scribble s;
    s.p = refinement_stats(pred, gt).p();
    s.positive = rng.bernoulli(s.p);
    const auto& d = gt.dims();
    if (s.positive) {
        BinaryMask fn(d);
        for (std::size_t i = 0; i < d.voxel_count(); ++i)
            if (gt.test(i) && !pred.test(i)) fn.set(i);
        const auto L = largest_component(fn, Conn3D::TwentySix);
        for (const int z : foreground_extent(L).slices) {
            const auto c = centroid_point(extract_slice(L, Axis::Z, z));
            s.points.push_back({c.x, c.y, z});
        }
        return s;
    }

    s.fp_slice = non_axial_slice_with_most_fp(pred, gt);
    const Axis axis = s.fp_slice.axis;
    const int idx = s.fp_slice.index;
    auto is_fp = [&](const Index3& q) { return pred.test(q) && !gt.test(q); };
    const auto gt_slice = extract_slice(gt, axis, idx);
    if (!gt_slice.empty()) {
        const auto curve = order_into_curve(chebyshev_ring(gt_slice, ring_radius), axis, idx);
        const std::size_t n = curve.points.size();
        s.curve_length = n;
        if (n > 0) {
            const auto want = static_cast<std::size_t>(std::ceil(arc_fraction * static_cast<double>(n) - 1e-9));
            s.arc_length = std::min(n, std::max<std::size_t>(1, want));
            const auto last_start = curve.closed ? n - 1 : n - s.arc_length;
            const auto start = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(last_start)));
            for (std::size_t i = 0; i < s.arc_length; ++i) {
                const auto q = slice_to_volume(axis, idx, curve.points[(start + i) % n]);
                if (is_fp(q)) s.points.push_back(q);
            }
        }
    }
    if (s.points.empty()) {
        s.fallback = true;
        const auto [w, h] = slice_shape(d, axis);
        std::vector<Index3> fps;
        for (int v = 0; v < h; ++v)
            for (int u = 0; u < w; ++u) {
                const auto q = slice_to_volume(axis, idx, Pixel{u, v});
                if (is_fp(q)) fps.push_back(q);
            }
        s.points.push_back(fps[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(fps.size()) - 1))]);
    }
    return s;
}

void refine_step_scribble(SegmenterHandle& seg, SessionState& st, SeededRng& rng, const SessionOptions& options) {
    require_refinable(seg, st);
    const int step = st.iteration + 1;
    const auto s = build_scribble(st.pred, st.gt, rng, options.ring_radius, options.arc_fraction);
    auto make = [&](const Index3& q) { return s.positive ? Prompt::pos(q, 0) : Prompt::neg(q, 0); };
    if (st.volumetric) {
        const auto& q = s.points[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(s.points.size()) - 1))];
        predict_volume(seg, st, with_initial(st.volume_prompts, st.reuse_initial, {make(q)}), true, step,
                       "Scribble_Refine");
    } else {
        std::map<int, std::vector<Prompt>> by_slice;
        for (const auto& q : s.points)
            if (!s.positive || !st.pred.test(q)) by_slice[q.z].push_back(make(q));
        for (auto& [z, fresh] : by_slice)
            predict_slice(seg, st, z, with_initial(initial_for(st, z), st.reuse_initial, std::move(fresh)), true, step,
                          "Scribble_Refine");
    }
    std::string note = s.positive ? "positive" : "negative";
    if (s.fallback) {
        note += ", arc held no false positive; random false positive of the slice used";
        st.events.push_back("step " + std::to_string(step) + ": " + note);
    }
    st.ledger.add(step, "Scribble_Refine", EffortSchedule::scribble, note);
    st.iteration = step;
}

PromptPlan initial_plan(const ProtocolSpec& spec, const BinaryMask& gt, const SeededRng& rng) {
    auto init_rng = rng.child("initial");
    auto plan = generate_plan(spec.initial, gt, init_rng);
    if (spec.options.box_perturb_k > 0) {
        auto prng = init_rng.child("perturb");
        plan = perturb_boxes(plan, spec.options.box_perturb_k, gt.dims(), prng);
    }
    return plan;
}

ProtocolResult run_protocol(SegmenterHandle& seg, const BinaryMask& gt, const ProtocolSpec& spec, SeededRng& rng) {
    const auto& opt = spec.options;
    auto st = [&] {
        switch (spec.initial.kind) {
            case InitialKind::PointProp: return point_propagation(seg, gt, spec.initial.n, opt.reuse_initial);
            case InitialKind::BoxProp: return box_propagation(seg, gt, opt.reuse_initial);
            default: return predict_plan(seg, gt, initial_plan(spec, gt, rng), opt.reuse_initial);
        }
    }();

    ProtocolResult out;
    out.iterations.push_back({0, st.pred, st.ledger.total(), st.predicted_slices, false});
    if (spec.refine != RefineKind::None) {
        for (int t = 1; t <= spec.iterations; ++t) {
            bool carried = false;
            if (st.pred == st.gt) {
                carried = true;
                st.events.push_back("iteration " + std::to_string(t) + ": already perfect, prediction carried");
            } else {
                auto step_rng = rng.child("refine/" + std::to_string(t));
                try {
                    if (spec.refine == RefineKind::RandomPoint)
                        refine_step_random(seg, st, step_rng);
                    else
                        refine_step_scribble(seg, st, step_rng, opt);
                } catch (const Error& e) {
                    if (e.code() != Errc::NothingToRefine) throw;
                    carried = true;
                    st.events.push_back("iteration " + std::to_string(t) + ": " + e.what());
                }
            }
            st.iteration = t;
            out.iterations.push_back({t, st.pred, st.ledger.total(), st.predicted_slices, carried});
        }
    }
    out.ledger = st.ledger;
    out.events = st.events;
    return out;
}

}  // namespace isbench
