#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <unistd.h>

#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include "isbench/bench.hpp"
#include "isbench/conformance.hpp"
#include "isbench/error.hpp"
#include "isbench/report.hpp"
#include "isbench/wire.hpp"
#include "test_support.hpp"

using namespace isbench;
using nlohmann::json;

namespace {

struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& name)
        : path(std::filesystem::temp_directory_path() / ("isbench_" + name + "_" + std::to_string(::getpid()))) {
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

/// Serves `segmenter` on one end of a pipe pair from a background thread.
struct Served {
    std::unique_ptr<LineTransport> client;
    std::unique_ptr<LineTransport> server_end;
    ProtocolServer server;
    std::thread thread;

    explicit Served(Segmenter& seg) : server(seg, "test") {
        auto [a, b] = make_pipe_pair();
        client = std::move(a);
        server_end = std::move(b);
        thread = std::thread([this] { serve_lines(*server_end, [this](const std::string& l) { return server.handle(l); }); });
    }
    ~Served() {
        client.reset();
        thread.join();
    }
};

Prompt random_prompt(std::mt19937& gen) {
    std::uniform_int_distribution<int> c(0, 30), kind(0, 3);
    const Index3 a{c(gen), c(gen), c(gen)}, b{c(gen), c(gen), c(gen)};
    Prompt p;
    switch (kind(gen)) {
        case 0: p = Prompt::pos(a); break;
        case 1: p = Prompt::neg(a); break;
        case 2: p = Prompt::box2d(a.z, {{a.x, a.y}, {b.x, b.y}}); break;
        default: p = Prompt::box3d({a, b}); break;
    }
    p.interpolated = gen() % 2;
    p.duplicate = gen() % 3 == 0;
    return p;
}

/// Delegates to an oracle but answers with masks one voxel too wide.
struct WrongDims : Segmenter {
    OracleSegmenter inner{OracleSpec{}};
    Capabilities capabilities() override { return inner.capabilities(); }
    std::string open_case(const CaseRef& r) override { return inner.open_case(r); }
    BinaryMask predict(const std::string& s, const PredictRequest& r) override {
        const auto m = inner.predict(s, r);
        return BinaryMask({m.dims().nx + 1, m.dims().ny, m.dims().nz});
    }
    void close(const std::string& s) override { inner.close(s); }
};

/// Oracle restricted to 2D boxes.
struct BoxOnly : Segmenter {
    OracleSegmenter inner{OracleSpec{}};
    Capabilities capabilities() override { return {true, false, true, false, false, false}; }
    std::string open_case(const CaseRef& r) override { return inner.open_case(r); }
    BinaryMask predict(const std::string& s, const PredictRequest& r) override { return inner.predict(s, r); }
    void close(const std::string& s) override { inner.close(s); }
};

json small_dataset(const std::filesystem::path& dir, int cases = 3) {
    SyntheticDatasetSpec spec;
    spec.dataset_id = "synth";
    spec.cases = cases;
    spec.dim_min = 24;
    spec.dim_max = 28;
    spec.base.radius_min = 3;
    spec.base.radius_max = 4;
    return write_synthetic_dataset(spec, dir);
}

json base_config(const std::filesystem::path& dir) {
    return json{{"seed", 42},
                {"manifest", (dir / "data" / "manifest.json").string()},
                {"schemes", json::array({"3B_Inter", "Box_PS", json{{"initial", "1PPS"}, {"refine", "1PPS_Refine*"}, {"iterations", 2}}})},
                {"segmenter", {{"builtin", {{"kind", "perfect"}, {"mode", "2d"}}}}},
                {"output_dir", (dir / "out").string()}};
}

}  // namespace

TEST_CASE("wire codecs round-trip prompts and masks losslessly") {
    std::mt19937 gen(11);
    for (int t = 0; t < 300; ++t) {
        PredictRequest r;
        r.scope = gen() % 2 ? Scope::whole() : Scope::slice(static_cast<int>(gen() % 9));
        const int n = static_cast<int>(gen() % 5);
        for (int i = 0; i < n; ++i) r.prompts.push_back(random_prompt(gen));
        const Dims vol{9, 7, 9};
        if (gen() % 2) r.prev_mask = testing::random_mask(r.scope.mask_dims(vol), gen, 0.3);
        const auto back = predict_from_json(json::parse(predict_to_json("s", r).dump()));
        CHECK(back.scope == r.scope);
        CHECK(back.prompts == r.prompts);
        CHECK(back.prev_mask == r.prev_mask);
    }
}

TEST_CASE("protocol client and server agree over a pipe") {
    SyntheticCaseSpec spec;
    spec.dims = {24, 22, 20};
    spec.radius_max = 4;
    const auto c = generate_synthetic_case(spec);
    OracleSegmenter oracle(OracleSpec{});
    Served served(oracle);
    ProtocolClient client(std::move(served.client));
    CHECK(client.name() == "test");
    CHECK(client.capabilities() == oracle.capabilities());

    CaseRef ref;
    ref.case_id = "c";
    ref.labels = c.labels;
    const auto sid = client.open_case(ref);
    const auto z = c.centres[0].z;
    const auto mask = client.predict(sid, {Scope::slice(z), {Prompt::pos(c.centres[0])}, {}});
    CHECK(mask == as_volume(extract_slice(c.instances[0], Axis::Z, z)));
    client.close(sid);
    CHECK_THROWS_AS(client.predict(sid, {Scope::slice(z), {Prompt::pos(c.centres[0])}, {}}), Error);
}

TEST_CASE("server answers malformed input with error codes and keeps going") {
    OracleSegmenter oracle(OracleSpec{});
    ProtocolServer server(oracle, "x");
    auto r = json::parse(server.handle("{nope"));
    CHECK(r["type"] == "error");
    CHECK(r["code"] == "BAD_REQUEST");
    r = json::parse(server.handle(R"({"type":"predict","id":5,"session_id":"zz","scope":{"volume":true},"prompts":[]})"));
    CHECK(r["code"] == "UNKNOWN_SESSION");
    CHECK(r["id"] == 5);
    r = json::parse(server.handle(R"({"type":"launch","id":"a"})"));
    CHECK(r["code"] == "BAD_REQUEST");
    CHECK(r["id"] == "a");
    r = json::parse(server.handle(R"({"type":"hello","id":6})"));
    CHECK(r["type"] == "capabilities");
    CHECK(r["id"] == 6);
}

TEST_CASE("child process transport surfaces crashes and protocol errors") {
    try {
        ProtocolClient c(std::make_unique<ChildProcessTransport>("exit 0"));
        FAIL("expected a crash");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::SegmenterCrash);
    }
    try {
        // cat echoes the hello request back, which is not a capabilities message.
        ProtocolClient c(std::make_unique<ChildProcessTransport>("cat"));
        FAIL("expected a protocol error");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::ProtocolError);
    }
}

TEST_CASE("conformance: perfect oracles pass every clause") {
    TempDir tmp("conf_ok");
    for (const bool vol : {false, true}) {
        OracleSpec spec;
        spec.volumetric = vol;
        OracleSegmenter oracle(spec);
        Served served(oracle);
        const auto rep = conformance_test(*served.client, tmp.path);
        INFO(rep.to_text());
        CHECK(rep.passed());
        for (const auto* id : {"HELLO", "OPEN_CASE", "PREV_MASK", "MASK_DIMS", "RLE_VALID", "ORDERED_RESPONSES",
                               "ERROR_CODES", "CLOSE", "CAPABILITY_RESPECT"})
            CHECK(rep.find(id)->status == ClauseStatus::Pass);
        CHECK(rep.find("SCOPE_SLICE")->status == (vol ? ClauseStatus::Skip : ClauseStatus::Pass));
        CHECK(rep.find("SCOPE_VOLUME")->status == (vol ? ClauseStatus::Pass : ClauseStatus::Skip));
    }
}

TEST_CASE("conformance: wrong mask dims fail MASK_DIMS") {
    TempDir tmp("conf_dims");
    WrongDims seg;
    Served served(seg);
    const auto rep = conformance_test(*served.client, tmp.path);
    CHECK_FALSE(rep.passed());
    CHECK(rep.find("MASK_DIMS")->status == ClauseStatus::Fail);
    CHECK(rep.find("RLE_VALID")->status == ClauseStatus::Pass);
}

TEST_CASE("conformance: unadvertised features never reach the wire") {
    TempDir tmp("conf_caps");
    BoxOnly seg;
    Served served(seg);
    const auto rep = conformance_test(*served.client, tmp.path);
    INFO(rep.to_text());
    CHECK(rep.passed());
    CHECK(rep.find("SCOPE_SLICE")->status == ClauseStatus::Pass);
    CHECK(rep.find("SCOPE_VOLUME")->status == ClauseStatus::Skip);
    CHECK(rep.find("PREV_MASK")->status == ClauseStatus::Skip);
    CHECK(rep.find("CAPABILITY_RESPECT")->status == ClauseStatus::Pass);
    CHECK(rep.find("CAPABILITY_RESPECT")->detail == "withheld: volume scope, points, negative points, mask prompt");
}

TEST_CASE("conformance: a dead endpoint fails instead of throwing") {
    TempDir tmp("conf_dead");
    ChildProcessTransport t("exit 0");
    const auto rep = conformance_test(t, tmp.path);
    CHECK_FALSE(rep.passed());
    CHECK(rep.find("HELLO")->status == ClauseStatus::Fail);
}

TEST_CASE("run config parsing") {
    const auto base = std::filesystem::path("/cfg");
    json j{{"manifest", "m.json"},
           {"schemes", json::array({"3B Inter", json{{"initial", "Box_PS"}, {"box_perturbation", 3}},
                                    json{{"initial", "1PPS"}, {"refine", "Scribble_Refine*"}, {"iterations", 5}},
                                    json{{"initial", "1_center_PPV"}, {"refine", "Scribble_Refine"}, {"iterations", 5}}})},
           {"segmenter", {{"builtin", {{"kind", "correctable"}, {"mode", "3d"}, {"radius", 2}}}}}};
    const auto c = parse_run_config(j, base);
    CHECK(c.seed == 42);
    CHECK(c.manifests.at(0) == "/cfg/m.json");
    CHECK(c.output_dir == "/cfg/results");
    REQUIRE(c.schemes.size() == 4);
    CHECK(c.schemes[0].label() == "3B_Inter");
    CHECK(c.schemes[1].label() == "Box_PS~3");
    CHECK(c.schemes[2].label() == "1PPS+Scribble_Refine*");
    CHECK(c.schemes[2].reuse());
    CHECK(c.schemes[3].label() == "1_center_PPV+Scribble_Refine");
    CHECK_FALSE(c.schemes[3].reuse());
    CHECK(c.segmenter.builtin->kind == OracleKind::Correctable);

    auto bad = [&](const std::function<void(json&)>& edit) {
        auto k = j;
        edit(k);
        try {
            parse_run_config(k, base);
            return false;
        } catch (const Error& e) {
            return e.code() == Errc::ConfigInvalid;
        }
    };
    CHECK(bad([](json& k) { k["schemes"] = json::array({"7Q_Inter"}); }));
    CHECK(bad([](json& k) { k["schemes"] = json::array({json{{"initial", "1PPS"}, {"iterations", 3}}}); }));
    CHECK(bad([](json& k) { k["schemes"] = json::array({json{{"initial", "1PPS"}, {"box_perturbation", 3}}}); }));
    CHECK(bad([](json& k) { k["schemes"] = json::array({json{{"initial", "B_Prop"}, {"box_perturbation", 3}}}); }));
    CHECK(bad([](json& k) { k["schemes"] = json::array({"3B_Inter", "3B Inter"}); }));
    CHECK(bad([](json& k) { k["segmenter"]["command"] = "x"; }));
    CHECK(bad([](json& k) { k["segmenter"] = json::object(); }));
    CHECK(bad([](json& k) { k.erase("manifest"); }));
    CHECK(bad([](json& k) { k["parallelism"] = 0; }));
    CHECK(bad([](json& k) { k["max_failure_fraction"] = 2; }));
    CHECK(bad([](json& k) { k["segmenter"]["builtin"]["kind"] = "psychic"; }));
}

TEST_CASE("manifest parsing") {
    json m{{"dataset_id", "d"},
           {"cases", json::array({json{{"case_id", "a"}, {"image_path", "a_img.nii.gz"}, {"label_path", "/abs/a_lab.nii.gz"},
                                       {"class_map", {{"1", "liver"}, {"2", "tumor"}}}}})}};
    const auto d = parse_manifest(m, "/data");
    CHECK(d.cases[0].image_path == "/data/a_img.nii.gz");
    CHECK(d.cases[0].label_path == "/abs/a_lab.nii.gz");
    CHECK(d.cases[0].class_map.at(2) == "tumor");
    CHECK(d.cases[0].instance_policy == InstancePolicy::ConnectedComponents);

    auto dup = m;
    dup["cases"].push_back(m["cases"][0]);
    CHECK_THROWS_AS(parse_manifest(dup, "/"), Error);
    auto same_name = m;
    same_name["cases"][0]["class_map"]["2"] = "liver";
    CHECK_THROWS_AS(parse_manifest(same_name, "/"), Error);
    same_name["cases"][0]["instance_policy"] = "explicit_labels";
    CHECK_NOTHROW(parse_manifest(same_name, "/"));
    auto bad_key = m;
    bad_key["cases"][0]["class_map"] = {{"one", "liver"}};
    CHECK_THROWS_AS(parse_manifest(bad_key, "/"), Error);
}

TEST_CASE("benchmark run: perfect oracle, accounting and byte-identical reruns") {
    TempDir tmp("run");
    small_dataset(tmp.path / "data");
    auto j = base_config(tmp.path);
    const auto s1 = run_benchmark(parse_run_config(j, tmp.path));
    const auto csv1 = slurp(tmp.path / "out" / "results.csv");
    const auto manifest1 = slurp(tmp.path / "out" / "run_manifest.json");
    const auto transcript = tmp.path / "out" / "transcripts" / "synth" / "case000" / "1PPS-1PPS_Refine-" / "001.jsonl";
    const auto t1 = slurp(transcript);
    CHECK_FALSE(t1.empty());

    CHECK(s1.failed_sessions == 0);
    CHECK(s1.skipped_sessions == 0);
    CHECK_FALSE(s1.threshold_exceeded);
    std::size_t three_b = 0;
    for (const auto& r : s1.records) {
        REQUIRE(r.dsc);
        CHECK(*r.dsc == 1.0);
        if (r.scheme_id == "3B_Inter") {
            CHECK(r.interactions == 6);
            ++three_b;
        }
    }
    CHECK(three_b * 3 == s1.sessions);
    // 1PPS with two refinement iterations: three records per instance.
    CHECK(s1.records.size() == (three_b * 2) + three_b * 3);

    j["parallelism"] = 4;
    j["output_dir"] = (tmp.path / "out4").string();
    const auto s4 = run_benchmark(parse_run_config(j, tmp.path));
    CHECK(slurp(tmp.path / "out4" / "results.csv") == csv1);
    CHECK(slurp(tmp.path / "out4" / "aggregate.csv") == slurp(tmp.path / "out" / "aggregate.csv"));
    CHECK(slurp(tmp.path / "out4" / "run_manifest.json") == manifest1);
    CHECK(slurp(tmp.path / "out4" / "transcripts" / "synth" / "case000" / "1PPS-1PPS_Refine-" / "001.jsonl") == t1);

    j["seed"] = 43;
    j["output_dir"] = (tmp.path / "out43").string();
    run_benchmark(parse_run_config(j, tmp.path));
    CHECK(slurp(tmp.path / "out43" / "run_manifest.json") != manifest1);
}

TEST_CASE("benchmark run: capability gaps are skipped, crashes are recorded") {
    TempDir tmp("run_fail");
    small_dataset(tmp.path / "data", 2);
    auto j = base_config(tmp.path);
    j["schemes"] = json::array({"3B_Inter", "3D_Box"});
    const auto s = run_benchmark(parse_run_config(j, tmp.path));
    CHECK(s.skipped_sessions * 2 == s.sessions);
    CHECK(s.failed_sessions == 0);
    for (const auto& r : s.records) {
        if (r.scheme_id == "3D_Box") {
            CHECK_FALSE(r.dsc);
            CHECK(r.cause == "CapabilityMissing");
        } else {
            CHECK(r.dsc);
        }
    }
    const auto agg = aggregate(s.records);
    for (const auto& a : agg)
        if (a.scheme_id == "3D_Box") CHECK_FALSE(a.mean_dsc);

    j["segmenter"] = {{"command", "exit 0"}};
    j["max_failure_fraction"] = 0.5;
    const auto crashed = run_benchmark(parse_run_config(j, tmp.path));
    CHECK(crashed.failed_sessions == crashed.sessions);
    CHECK(crashed.threshold_exceeded);
    for (const auto& r : crashed.records) CHECK(r.cause == "SegmenterCrash");
    CHECK(slurp(tmp.path / "out" / "results.csv").find("NaN") != std::string::npos);
}

TEST_CASE("benchmark run: missing case files are a config error") {
    TempDir tmp("run_missing");
    small_dataset(tmp.path / "data", 1);
    std::filesystem::remove(tmp.path / "data" / "case000_image.nii.gz");
    try {
        run_benchmark(parse_run_config(base_config(tmp.path), tmp.path));
        FAIL("expected ConfigInvalid");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::ConfigInvalid);
    }
}

TEST_CASE("report tables") {
    std::vector<EvaluationRecord> recs;
    auto add = [&](std::string scheme, std::string c, std::string inst, int it, std::optional<double> d, int cost) {
        recs.push_back({"ds", c, "1", inst, it, d, cost, scheme, d ? "" : "SegmenterCrash"});
    };
    add("3B_Inter", "a", "001", 0, 0.5, 6);
    add("3B_Inter", "b", "001", 0, 1.0, 6);
    add("Box_PS", "a", "001", 0, 0.25, 10);
    add("Box_PS", "b", "001", 0, std::nullopt, 0);
    for (int it = 0; it <= 5; ++it) {
        add("1_center_PPV+Scribble_Refine", "a", "001", it, 0.9 - 0.1 * std::abs(it - 3), 1 + 3 * it);
        add("1_center_PPV+Scribble_Refine", "b", "001", it, 0.5, 1 + 3 * it);
    }
    const auto rep = build_report(recs);
    REQUIRE(rep.final_rows.size() == 3);
    CHECK(rep.series.size() == 8);
    std::size_t refine_rows = 0;
    for (const auto& r : rep.series) refine_rows += r.scheme_id == "1_center_PPV+Scribble_Refine";
    CHECK(refine_rows == 6);

    for (const auto& r : rep.final_rows) {
        if (r.scheme_id == "3B_Inter") {
            CHECK(*r.mean_dsc == doctest::Approx(0.75));
            CHECK(r.mean_interactions == 6);
        }
        if (r.scheme_id == "Box_PS") {
            CHECK(*r.mean_dsc == doctest::Approx(0.25));
            CHECK(r.n_missing == 1);
        }
        if (r.scheme_id == "1_center_PPV+Scribble_Refine") {
            CHECK(r.iteration == 5);
            CHECK(*r.mean_dsc == doctest::Approx((0.7 + 0.5) / 2));
        }
    }
    for (const auto& r : rep.best)
        if (r.scheme_id == "1_center_PPV+Scribble_Refine") CHECK(r.iteration == 3);

    // Every dataset row equals the metrics aggregation.
    for (const auto& a : aggregate(recs)) {
        if (a.level != "dataset") continue;
        bool found = false;
        for (const auto& r : rep.series)
            if (r.scheme_id == a.scheme_id && r.iteration == a.iteration) {
                found = true;
                CHECK(r.mean_dsc == a.mean_dsc);
                CHECK(r.n == a.n);
            }
        CHECK(found);
    }

    const auto text = rep.to_text();
    CHECK(text.find("Interactions") != std::string::npos);
    CHECK(text.find("Best iteration") != std::string::npos);
    CHECK(rep.final_csv().rfind("scheme,dataset,iteration,mean_dsc,interactions,n,n_missing\n", 0) == 0);
    CHECK_THROWS_AS(build_report({}), Error);
}

TEST_CASE("report from a results directory") {
    TempDir tmp("report");
    small_dataset(tmp.path / "data", 2);
    auto j = base_config(tmp.path);
    j["schemes"] = json::array({"3B_Inter", "Box_PS"});
    run_benchmark(parse_run_config(j, tmp.path));
    const auto rep = report_results(tmp.path / "out");
    CHECK(rep.final_rows.size() == 2);
    CHECK(std::filesystem::exists(tmp.path / "out" / "report.csv"));
    CHECK(std::filesystem::exists(tmp.path / "out" / "report.txt"));
    CHECK_THROWS_AS(report_results(tmp.path / "nowhere"), Error);
}
