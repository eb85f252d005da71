#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <functional>
#include <map>

#include "isbench/error.hpp"
#include "isbench/promptgen.hpp"
#include "isbench/session.hpp"
#include "test_support.hpp"

using namespace isbench;

namespace {

Capabilities all_caps() { return {true, true, true, true, true, true}; }

BinaryMask cuboid(const Dims& d, Index3 lo, Index3 hi) {
    BinaryMask m(d);
    for (int z = lo.z; z <= hi.z; ++z)
        for (int y = lo.y; y <= hi.y; ++y)
            for (int x = lo.x; x <= hi.x; ++x) m.set(Index3{x, y, z});
    return m;
}

BinaryMask crop(const BinaryMask& m, const Scope& s) {
    return s.volume ? m : as_volume(extract_slice(m, s.axis, s.index));
}

// Records every request and answers through `answer`.
struct FakeSegmenter : Segmenter {
    Capabilities caps = all_caps();
    std::function<BinaryMask(const PredictRequest&)> answer;
    std::vector<PredictRequest> requests;

    Capabilities capabilities() override { return caps; }
    std::string open_case(const CaseRef&) override { return "s0"; }
    BinaryMask predict(const std::string&, const PredictRequest& r) override {
        requests.push_back(r);
        return answer(r);
    }
    void close(const std::string&) override {}
};

FakeSegmenter perfect(const BinaryMask& gt) {
    FakeSegmenter f;
    f.answer = [gt](const PredictRequest& r) { return crop(gt, r.scope); };
    return f;
}

FakeSegmenter empty_model(const BinaryMask& gt) {
    FakeSegmenter f;
    f.answer = [d = gt.dims()](const PredictRequest& r) { return BinaryMask(r.scope.mask_dims(d)); };
    return f;
}

// Without a previous mask answers dilate(gt, 1); with one, flips exactly the
// clicked voxels of the previous mask to the click polarity.
FakeSegmenter click_fixer(const BinaryMask& gt) {
    FakeSegmenter f;
    f.answer = [gt](const PredictRequest& r) {
        if (!r.prev_mask) return crop(dilate(gt, 1), r.scope);
        BinaryMask out = *r.prev_mask;
        for (const auto& p : r.prompts) {
            if (!p.is_point() || p.interpolated) continue;
            Index3 q = p.point;
            if (!r.scope.volume) q.z = 0;
            out.set(q, p.kind == PromptKind::PosPoint);
        }
        return out;
    };
    return f;
}

std::vector<int> requested_slices(const FakeSegmenter& f) {
    std::vector<int> out;
    for (const auto& r : f.requests) out.push_back(r.scope.index);
    return out;
}

std::size_t errors(const BinaryMask& a, const BinaryMask& b) {
    std::size_t n = 0;
    for (std::size_t i = 0; i < a.dims().voxel_count(); ++i) n += a.test(i) != b.test(i);
    return n;
}

}  // namespace

TEST_CASE("handle enforces capabilities and mask dims") {
    const auto gt = cuboid({8, 8, 4}, {2, 2, 1}, {5, 5, 2});
    auto f = perfect(gt);
    f.caps.accepts_boxes = false;
    SegmenterHandle h(f, "s0", f.caps);
    PredictRequest boxes{Scope::slice(1), {Prompt::box2d(1, {{2, 2}, {5, 5}})}, std::nullopt};
    CHECK_THROWS_AS_MESSAGE(h.send(boxes, gt.dims(), 0, "Box_PS"), Error, "box");
    CHECK(f.requests.empty());

    PredictRequest point{Scope::slice(1), {Prompt::pos({3, 3, 1})}, std::nullopt};
    CHECK(h.send(point, gt.dims(), 0, "1PPS").dims() == Dims{8, 8, 1});

    f.answer = [](const PredictRequest&) { return BinaryMask(Dims{8, 8, 4}); };
    try {
        h.send(point, gt.dims(), 0, "1PPS");
        FAIL("expected failure");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::SegmenterFailure);
    }
    f.answer = [](const PredictRequest&) -> BinaryMask { throw std::runtime_error("boom"); };
    try {
        h.send(point, gt.dims(), 0, "1PPS");
        FAIL("expected failure");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::SegmenterFailure);
    }
}

TEST_CASE("static 2D plan predicts each planned slice once") {
    std::mt19937 gen(3);
    for (int seed = 0; seed < 20; ++seed) {
        const auto gt = largest_component(testing::random_blob({12, 12, 10}, gen));
        auto f = perfect(gt);
        SegmenterHandle h(f, "s0", f.caps);
        SeededRng rng(seed, "plan");
        const auto plan = generate_plan(parse_initial_scheme("3PPS"), gt, rng);
        const auto st = predict_plan(h, gt, plan, true);
        CHECK(st.pred == gt);
        CHECK(st.ledger.total() == plan.interaction_cost);
        CHECK(f.requests.size() == plan.per_slice.size());
        CHECK(st.predicted_slices.size() == plan.per_slice.size());
    }
}

TEST_CASE("point propagation: cost, order and single prediction per slice") {
    const Dims d{16, 16, 14};
    const auto gt = cuboid(d, {4, 4, 3}, {10, 10, 11});  // I = 3..11, median 7
    auto f = perfect(gt);
    SegmenterHandle h(f, "s0", f.caps);
    const auto st = point_propagation(h, gt);
    CHECK(st.ledger.total() == 3);
    CHECK(requested_slices(f) == std::vector<int>{7, 6, 5, 4, 3, 8, 9, 10, 11});
    CHECK(st.pred == gt);
    const auto& first = f.requests.front().prompts;
    REQUIRE(first.size() == 1);
    CHECK(first[0].point == Index3{7, 7, 7});
    CHECK(first[0].cost == 1);
    for (int z = 3; z <= 11; ++z)
        if (z != 7) CHECK(st.per_slice_prompts.at(z)[0].cost == 0);
}

TEST_CASE("5P Prop places extra clicks on anchors other than the median's neighbour") {
    const Dims d{12, 12, 20};
    const auto gt = cuboid(d, {3, 3, 0}, {8, 8, 19});  // I = 0..19, median 9, anchors 0 5 10 14 19
    auto f = perfect(gt);
    SegmenterHandle h(f, "s0", f.caps);
    const auto st = point_propagation(h, gt, 5);
    CHECK(st.ledger.total() == 7);
    std::set<int> clicked;
    for (const auto& [z, ps] : st.per_slice_prompts)
        if (ps[0].cost == 1) clicked.insert(z);
    CHECK(clicked == std::set<int>{0, 5, 9, 14, 19});
    CHECK(f.requests.size() == 20);
    CHECK(st.pred == gt);
}

TEST_CASE("box propagation costs 4 and single-slice instances cost 3") {
    const Dims d{10, 10, 6};
    const auto gt = cuboid(d, {2, 3, 1}, {6, 7, 4});
    auto f = perfect(gt);
    SegmenterHandle h(f, "s0", f.caps);
    const auto st = box_propagation(h, gt);
    CHECK(st.ledger.total() == 4);
    CHECK(st.pred == gt);
    CHECK(st.per_slice_prompts.at(1)[0].box2 == Box2{{2, 3}, {6, 7}});

    const auto flat = cuboid(d, {2, 2, 3}, {4, 4, 3});
    auto g = perfect(flat);
    SegmenterHandle hg(g, "s0", g.caps);
    const auto one = point_propagation(hg, flat);
    CHECK(one.ledger.total() == 3);
    CHECK(g.requests.size() == 1);
}

TEST_CASE("propagated prompts follow the previous prediction") {
    // The model answers a 3x3 square shifted one pixel right of the click, so
    // each propagated click moves one pixel further from the median.
    const Dims d{40, 12, 9};
    const auto gt = cuboid(d, {18, 4, 0}, {22, 8, 8});  // median 4, centre (20, 6)
    FakeSegmenter f;
    f.answer = [d](const PredictRequest& r) {
        BinaryMask out(r.scope.mask_dims(d));
        const auto c = r.prompts.at(0).point;
        for (int y = c.y - 1; y <= c.y + 1; ++y)
            for (int x = c.x; x <= c.x + 2; ++x) out.set(Index3{x, y, 0});
        return out;
    };
    SegmenterHandle h(f, "s0", f.caps);
    const auto st = point_propagation(h, gt);
    for (int z = 0; z < 9; ++z)
        CHECK(st.per_slice_prompts.at(z)[0].point == Index3{20 + std::abs(z - 4), 6, z});
}

TEST_CASE("empty predictions carry the last prompt forward") {
    const auto gt = cuboid({10, 10, 7}, {2, 2, 0}, {6, 6, 6});
    auto f = empty_model(gt);
    SegmenterHandle h(f, "s0", f.caps);
    const auto st = point_propagation(h, gt);
    for (const auto& [z, ps] : st.per_slice_prompts) {
        CHECK(ps[0].point.x == 4);
        CHECK(ps[0].point.y == 4);
        CHECK(ps[0].point.z == z);
    }
    CHECK(st.events.size() == 6);
    CHECK(st.pred.empty());

    auto g = empty_model(gt);
    SegmenterHandle hb(g, "s0", g.caps);
    const auto sb = box_propagation(hb, gt);
    for (const auto& [z, ps] : sb.per_slice_prompts) CHECK(ps[0].box2 == Box2{{2, 2}, {6, 6}});
}

TEST_CASE("1PPS refine on forced single errors") {
    const Dims d{10, 10, 6};
    const auto gt = cuboid(d, {2, 2, 1}, {6, 6, 4});
    auto f = perfect(gt);
    SegmenterHandle h(f, "s0", f.caps);

    SUBCASE("one false negative gives one positive click") {
        SessionState st(gt, false);
        st.pred = gt;
        st.pred.set(Index3{3, 4, 2}, false);
        SeededRng rng(0, "r");
        refine_step_random(h, st, rng);
        REQUIRE(f.requests.size() == 1);
        const auto& r = f.requests[0];
        CHECK(r.scope.index == 2);
        REQUIRE(r.prompts.size() == 1);
        CHECK(r.prompts[0] == Prompt::pos({3, 4, 2}));
        REQUIRE(r.prev_mask);
        CHECK(r.prev_mask->voxel_count() == 24);
        CHECK(st.ledger.total() == 1);
        CHECK(st.pred == gt);
    }
    SUBCASE("one false positive per slice on two slices") {
        SessionState st(gt, false);
        st.pred = gt;
        st.pred.set(Index3{8, 8, 1});
        st.pred.set(Index3{0, 9, 4});
        SeededRng rng(0, "r");
        refine_step_random(h, st, rng);
        CHECK(requested_slices(f) == std::vector<int>{1, 4});
        CHECK(f.requests[0].prompts[0] == Prompt::neg({8, 8, 1}));
        CHECK(f.requests[1].prompts[0] == Prompt::neg({0, 9, 4}));
        CHECK(st.ledger.total() == 2);
    }
    SUBCASE("errors outside the instance's slices cannot be reached") {
        SessionState st(gt, false);
        st.pred = gt;
        st.pred.set(Index3{0, 0, 5});
        SeededRng rng(0, "r");
        CHECK_THROWS_AS(refine_step_random(h, st, rng), Error);
        CHECK(f.requests.empty());
    }
    SUBCASE("perfect prediction and missing mask prompt are refused") {
        SessionState st(gt, false);
        st.pred = gt;
        SeededRng rng(0, "r");
        try {
            refine_step_random(h, st, rng);
        } catch (const Error& e) {
            CHECK(e.code() == Errc::AlreadyPerfect);
        }
        st.pred.set(Index3{0, 0, 1});
        h.caps.accepts_mask_prompt = false;
        try {
            refine_step_random(h, st, rng);
            FAIL("expected CapabilityMissing");
        } catch (const Error& e) {
            CHECK(e.code() == Errc::CapabilityMissing);
        }
    }
    SUBCASE("reuse sends a superset of the initial prompts") {
        for (const bool reuse : {true, false}) {
            f.requests.clear();
            SessionState st(gt, false);
            st.pred = gt;
            st.pred.set(Index3{2, 2, 3}, false);
            st.per_slice_prompts[3] = {Prompt::pos({4, 4, 3}), Prompt::pos({5, 5, 3})};
            st.reuse_initial = reuse;
            SeededRng rng(0, "r");
            refine_step_random(h, st, rng);
            const auto& sent = f.requests.at(0).prompts;
            CHECK(sent.size() == (reuse ? 3u : 1u));
            if (reuse) {
                CHECK(sent[0] == st.per_slice_prompts[3][0]);
                CHECK(sent[1] == st.per_slice_prompts[3][1]);
            }
            CHECK(sent.back() == Prompt::pos({2, 2, 3}));
        }
    }
}

TEST_CASE("1PPV refine picks a misclassified voxel uniformly") {
    const Dims d{6, 6, 6};
    const auto gt = cuboid(d, {1, 1, 1}, {4, 4, 4});
    BinaryMask pred = gt;
    const std::vector<Index3> wrong{{0, 0, 0}, {1, 1, 1}, {5, 5, 5}, {2, 3, 4}};
    for (const auto& q : wrong) pred.set(q, !gt.test(q));
    std::map<std::size_t, int> hits;
    for (int seed = 0; seed < 4000; ++seed) {
        auto f = perfect(gt);
        SegmenterHandle h(f, "s0", f.caps);
        SessionState st(gt, true);
        st.pred = pred;
        st.reuse_initial = false;
        SeededRng rng(seed, "ppv");
        refine_step_random(h, st, rng);
        REQUIRE(f.requests.size() == 1);
        const auto& r = f.requests[0];
        CHECK(r.scope.volume);
        REQUIRE(r.prompts.size() == 1);
        CHECK(r.prompts[0].kind == (gt.test(r.prompts[0].point) ? PromptKind::PosPoint : PromptKind::NegPoint));
        CHECK(*r.prev_mask == pred);
        CHECK(st.ledger.total() == 1);
        ++hits[d.linear(r.prompts[0].point)];
    }
    CHECK(hits.size() == 4);
    for (const auto& [q, n] : hits) CHECK(std::abs(n - 1000) < 120);
}

TEST_CASE("scribble polarity probability") {
    const Dims d{8, 8, 8};
    const auto gt = cuboid(d, {2, 2, 2}, {5, 5, 5});
    BinaryMask pred = gt;
    pred.set(Index3{2, 2, 2}, false);
    pred.set(Index3{5, 5, 5}, false);
    pred.set(Index3{3, 3, 3}, false);
    pred.set(Index3{0, 0, 3});
    const auto stats = refinement_stats(pred, gt);
    CHECK(stats.n_fn == 3);
    CHECK(stats.n_fp == 1);
    CHECK(stats.p() == doctest::Approx(0.75));
    int pos = 0;
    for (int seed = 0; seed < 10000; ++seed) {
        SeededRng rng(seed, "scribble");
        pos += build_scribble(pred, gt, rng).positive;
    }
    CHECK(std::abs(pos / 10000.0 - 0.75) < 0.03);
    CHECK_THROWS_AS(refinement_stats(gt, gt).p(), Error);
}

TEST_CASE("positive scribble is the bottom-to-top centre line of the largest FN component") {
    const Dims d{12, 12, 10};
    const auto gt = cuboid(d, {2, 2, 1}, {9, 9, 8});
    BinaryMask pred = gt;
    // Large FN block in z 2..6, small one elsewhere.
    for (int z = 2; z <= 6; ++z)
        for (int y = 3; y <= 5; ++y)
            for (int x = 3; x <= 7; ++x) pred.set(Index3{x, y, z}, false);
    pred.set(Index3{9, 9, 8}, false);
    SeededRng rng(1, "pos");
    const auto s = build_scribble(pred, gt, rng);
    REQUIRE(s.positive);
    REQUIRE(s.points.size() == 5);
    for (int i = 0; i < 5; ++i) CHECK(s.points[static_cast<std::size_t>(i)] == Index3{5, 4, 2 + i});
}

TEST_CASE("negative scribble: 40-pixel ring gives a 24-pixel arc of false positives") {
    const Dims d{12, 20, 20};
    // GT slice at x = 6 is a 7x7 square; its radius-2 ring has 4*7+12 = 40 pixels.
    const auto gt = cuboid(d, {5, 6, 6}, {7, 12, 12});
    BinaryMask pred = gt;
    for (int z = 3; z <= 15; ++z)
        for (int y = 3; y <= 15; ++y) pred.set(Index3{6, y, z});
    for (int seed = 0; seed < 50; ++seed) {
        SeededRng rng(seed, "neg");
        const auto s = build_scribble(pred, gt, rng);
        REQUIRE_FALSE(s.positive);
        CHECK(s.fp_slice.axis == Axis::X);
        CHECK(s.fp_slice.index == 6);
        CHECK(s.curve_length == 40);
        CHECK(s.arc_length == 24);
        CHECK_FALSE(s.fallback);
        REQUIRE(s.points.size() == 24);
        for (std::size_t i = 0; i < s.points.size(); ++i) {
            const auto& q = s.points[i];
            CHECK(q.x == 6);
            CHECK(pred.test(q));
            CHECK_FALSE(gt.test(q));
            const int cheb = std::max(std::max(std::abs(q.y - 9) - 3, std::abs(q.z - 9) - 3), 0);
            CHECK(cheb == 2);
            if (i > 0) {
                const auto& p = s.points[i - 1];
                CHECK(std::max(std::abs(p.y - q.y), std::abs(p.z - q.z)) == 1);
            }
        }
    }
}

TEST_CASE("negative scribble falls back to a random false positive off the ring") {
    const Dims d{12, 20, 20};
    const auto gt = cuboid(d, {5, 6, 6}, {7, 12, 12});
    BinaryMask pred = gt;
    pred.set(Index3{6, 18, 1});
    SeededRng rng(0, "fallback");
    const auto s = build_scribble(pred, gt, rng);
    CHECK_FALSE(s.positive);
    CHECK(s.fallback);
    REQUIRE(s.points.size() == 1);
    CHECK(s.points[0] == Index3{6, 18, 1});
}

TEST_CASE("scribble refine step: cost 3, negative clicks grouped per slice") {
    const Dims d{12, 20, 20};
    const auto gt = cuboid(d, {5, 6, 6}, {7, 12, 12});
    BinaryMask pred = gt;
    for (int z = 3; z <= 15; ++z)
        for (int y = 3; y <= 15; ++y) pred.set(Index3{6, y, z});
    auto f = perfect(gt);
    SegmenterHandle h(f, "s0", f.caps);
    SessionState st(gt, false);
    st.pred = pred;
    SeededRng rng(4, "step");
    auto copy = rng;
    const auto s = build_scribble(pred, gt, copy);
    refine_step_scribble(h, st, rng);
    CHECK(st.ledger.total() == 3);
    std::map<int, std::size_t> per_z;
    for (const auto& q : s.points) ++per_z[q.z];
    REQUIRE(f.requests.size() == per_z.size());
    for (const auto& r : f.requests) {
        CHECK(r.prev_mask);
        std::size_t negs = 0;
        for (const auto& p : r.prompts) negs += p.kind == PromptKind::NegPoint;
        CHECK(negs == per_z.at(r.scope.index));
    }
}

TEST_CASE("refinement protocol: cost accounting and carry-forward") {
    std::mt19937 gen(11);
    for (int seed = 0; seed < 20; ++seed) {
        const auto gt = largest_component(testing::random_blob({14, 14, 10}, gen, 5));
        auto f = click_fixer(gt);
        SegmenterHandle h(f, "s0", f.caps);
        ProtocolSpec spec{parse_initial_scheme("Box_PS"), RefineKind::RandomPoint, 5, {}};
        SeededRng rng(seed, "proto");
        const auto res = run_protocol(h, gt, spec, rng);
        REQUIRE(res.iterations.size() == 6);
        CHECK(res.iterations[0].cumulative_cost == 2 * static_cast<int>(foreground_extent(gt).slices.size()));
        for (std::size_t t = 1; t < res.iterations.size(); ++t) {
            const auto& prev = res.iterations[t - 1];
            const auto& cur = res.iterations[t];
            const auto before = errors(prev.pred, gt), after = errors(cur.pred, gt);
            const int spent = cur.cumulative_cost - prev.cumulative_cost;
            if (before == 0 || cur.carried) {
                CHECK(spent == 0);
                CHECK(cur.pred == prev.pred);
            } else {
                // Each click fixes exactly one voxel on its slice.
                CHECK(spent >= 1);
                CHECK(before - after == static_cast<std::size_t>(spent));
            }
        }
    }

    const auto gt = cuboid({8, 8, 6}, {2, 2, 1}, {5, 5, 4});
    auto f = perfect(gt);
    SegmenterHandle h(f, "s0", f.caps);
    ProtocolSpec spec{parse_initial_scheme("3D_Box"), RefineKind::RandomPoint, 3, {}};
    spec.options.reuse_initial = false;
    SeededRng rng(0, "perfect");
    const auto res = run_protocol(h, gt, spec, rng);
    for (const auto& it : res.iterations) {
        CHECK(it.cumulative_cost == 3);
        CHECK(it.pred == gt);
    }
    CHECK(res.iterations[3].carried);
    CHECK(res.events.size() == 3);
    CHECK(f.requests.size() == 1);
}

TEST_CASE("transcripts are identical for identical seeds") {
    const auto gt = testing::ellipsoid({16, 16, 12}, {8, 8, 6}, {5, 4, 4});
    auto run = [&](std::uint64_t seed, RefineKind refine, const char* initial) {
        auto f = click_fixer(gt);
        Transcript log;
        SegmenterHandle h(f, "s0", f.caps, &log);
        ProtocolSpec spec{parse_initial_scheme(initial), refine, 4, {}};
        SeededRng rng(seed, "case/inst1");
        run_protocol(h, gt, spec, rng);
        return log.lines();
    };
    for (const auto refine : {RefineKind::RandomPoint, RefineKind::Scribble}) {
        for (const char* initial : {"3PPS", "3P_Inter", "P_Prop", "5PPV"}) {
            const auto a = run(5, refine, initial);
            CHECK(a == run(5, refine, initial));
            CHECK(a != run(6, refine, initial));
        }
    }
}
