// isbench: command-line front end of the benchmark engine.

#include <unistd.h>

#include <atomic>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"

#include "isbench/bench.hpp"
#include "isbench/conformance.hpp"
#include "isbench/error.hpp"
#include "isbench/image_io.hpp"
#include "isbench/promptgen.hpp"
#include "isbench/report.hpp"
#include "isbench/session.hpp"
#include "isbench/wire.hpp"

using namespace isbench;
using nlohmann::json;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitThreshold = 3;

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::ConfigInvalid, "cannot read " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw Error(Errc::ConfigInvalid, path + ": " + e.what());
    }
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(Errc::IoFailure, "cannot write " + path.string());
    out << text;
}

int cmd_run(const std::string& config_path, int parallelism, const std::string& out) {
    auto config = load_run_config(config_path);
    if (parallelism > 0) config.parallelism = parallelism;
    if (!out.empty()) config.output_dir = out;
    const auto s = run_benchmark(config);
    std::cerr << "sessions " << s.sessions << ", failed " << s.failed_sessions << ", skipped " << s.skipped_sessions
              << "\nresults in " << config.output_dir.string() << "\n";
    if (s.threshold_exceeded) {
        std::cerr << "failure fraction above " << config.max_failure_fraction << "\n";
        return kExitThreshold;
    }
    return 0;
}

SchemeRun scheme_from_flags(const std::string& scheme, const std::string& refine, int perturb) {
    json j{{"initial", scheme}, {"refine", refine.empty() ? "none" : refine}, {"box_perturbation", perturb}};
    if (!refine.empty()) j["iterations"] = 1;
    json cfg{{"manifest", "-"}, {"schemes", json::array({j})}, {"segmenter", {{"command", "-"}}}};
    return parse_run_config(cfg, ".").schemes.at(0);
}

int cmd_simulate(const std::string& manifest_path, const std::string& scheme_id, const std::string& refine, int perturb,
                 std::uint64_t seed, const std::string& out) {
    const auto scheme = scheme_from_flags(scheme_id, refine, perturb);
    if (scheme.initial.propagation())
        throw Error(Errc::ConfigInvalid, scheme.initial.id() + " derives its prompts from model output; run it instead");
    const auto manifest = load_manifest(manifest_path);
    ProtocolSpec spec;
    spec.initial = scheme.initial;
    spec.options.box_perturb_k = scheme.box_perturb_k;
    const auto label = scheme.label();
    std::size_t written = 0;
    for (const auto& c : manifest.cases) {
        const auto labels = read_volume(c.label_path);
        const auto dir = std::filesystem::path(out) / manifest.dataset_id / c.case_id;
        std::filesystem::create_directories(dir);
        for (const auto& inst : extract_instances(labels, c.instance_policy, c.class_map)) {
            const auto id = instance_label(inst);
            const SeededRng rng(seed, session_seed_path(manifest.dataset_id, c.case_id, id, label));
            auto plan = initial_plan(spec, inst.mask, rng);
            auto j = plan_to_json(plan);
            j["dataset"] = manifest.dataset_id;
            j["case"] = c.case_id;
            j["instance"] = id;
            j["class"] = inst.class_name;
            write_file(dir / (id + ".json"), j.dump(2) + "\n");
            ++written;
        }
    }
    std::cerr << written << " plans for " << label << " in " << out << "\n";
    return 0;
}

int cmd_evaluate(const std::string& pred_dir, const std::string& manifest_path, const std::string& scheme,
                 std::string out) {
    const auto manifest = load_manifest(manifest_path);
    if (out.empty()) out = pred_dir;
    std::vector<EvaluationRecord> records;
    for (const auto& c : manifest.cases) {
        const auto labels = read_volume(c.label_path);
        for (const auto& inst : extract_instances(labels, c.instance_policy, c.class_map)) {
            EvaluationRecord r;
            r.dataset_id = manifest.dataset_id;
            r.case_id = c.case_id;
            r.class_id = inst.class_name;
            r.instance_id = instance_label(inst);
            r.scheme_id = scheme;
            const auto path = std::filesystem::path(pred_dir) / c.case_id / (r.instance_id + ".nii.gz");
            if (!std::filesystem::exists(path)) {
                r.cause = "MissingPrediction";
            } else {
                const auto pred = read_volume(path);
                BinaryMask m(pred.dims());
                for (std::size_t i = 0; i < pred.dims().voxel_count(); ++i)
                    if (pred.at(i) != 0.0f) m.set(i);
                r.dsc = dsc(m, inst.mask);
            }
            records.push_back(std::move(r));
        }
    }
    sort_records(records);
    std::filesystem::create_directories(out);
    write_file(std::filesystem::path(out) / "results.csv", records_to_csv(records));
    write_file(std::filesystem::path(out) / "aggregate.csv", aggregate_to_csv(aggregate(records)));
    std::cout << build_report(records).to_text();
    return 0;
}

int cmd_report(const std::string& results) {
    std::cout << report_results(results).to_text();
    return 0;
}

int cmd_conformance(const std::string& cmd, const std::string& addr, std::string work_dir, bool as_json) {
    if (cmd.empty() == addr.empty()) throw Error(Errc::ConfigInvalid, "give exactly one of --cmd, --addr");
    std::unique_ptr<LineTransport> t;
    if (!cmd.empty())
        t = std::make_unique<ChildProcessTransport>(cmd);
    else
        t = connect_tcp(addr);
    const bool temp = work_dir.empty();
    if (temp)
        work_dir = (std::filesystem::temp_directory_path() / ("isbench_conformance_" + std::to_string(::getpid()))).string();
    const auto report = conformance_test(*t, work_dir);
    t.reset();
    if (temp) std::filesystem::remove_all(work_dir);
    std::cout << (as_json ? report.to_json().dump(2) + "\n" : report.to_text());
    return report.passed() ? 0 : kExitFailure;
}

int cmd_synth(const std::string& spec_path, const std::string& out) {
    const auto spec = synthetic_dataset_spec_from_json(spec_path.empty() ? json::object() : read_json_file(spec_path));
    const auto manifest = write_synthetic_dataset(spec, out);
    std::cerr << manifest["cases"].size() << " cases written to " << out << "\n";
    return 0;
}

int cmd_serve(const OracleSpec& spec, int port) {
    OracleSegmenter oracle(spec);
    const auto name = "oracle:" + oracle_kind_name(spec.kind);
    if (port < 0) {
        FdTransport stdio(STDIN_FILENO, STDOUT_FILENO, false);
        ProtocolServer server(oracle, name);
        serve_lines(stdio, [&](const std::string& line) { return server.handle(line); });
        return 0;
    }
    std::atomic<bool> stop{false};
    serve_tcp(
        port,
        [&] {
            auto server = std::make_shared<ProtocolServer>(oracle, name);
            return [server](const std::string& line) { return server->handle(line); };
        },
        [](int bound) { std::cerr << "listening on 127.0.0.1:" << bound << std::endl; }, stop);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Interactive 3D segmentation benchmark"};
    app.require_subcommand(1);

    std::string config_path, out;
    int parallelism = 0;
    auto* run = app.add_subcommand("run", "Run a benchmark configuration");
    run->add_option("--config", config_path, "Run configuration (JSON)")->required();
    run->add_option("--parallelism", parallelism, "Override the configured parallelism");
    run->add_option("--out", out, "Override the output directory");

    std::string manifest, scheme, refine;
    int perturb = 0;
    std::uint64_t seed = 42;
    auto* sim = app.add_subcommand("simulate-prompts", "Write the initial prompt plans of a scheme without a model");
    sim->add_option("--manifest", manifest, "Dataset manifest")->required();
    sim->add_option("--scheme", scheme, "Initial scheme id, e.g. 3B_Inter")->required();
    sim->add_option("--refine", refine, "Refinement scheme id (only affects the seed path)");
    sim->add_option("--box-perturbation", perturb, "Box vertex jitter in pixels");
    sim->add_option("--seed", seed, "Root seed");
    sim->add_option("--out", out, "Output directory")->required();

    std::string pred_dir, eval_scheme = "external";
    auto* eval = app.add_subcommand("evaluate", "Score predicted masks <pred-dir>/<case>/<instance>.nii.gz");
    eval->add_option("--pred-dir", pred_dir, "Prediction directory")->required();
    eval->add_option("--manifest", manifest, "Dataset manifest")->required();
    eval->add_option("--scheme", eval_scheme, "Scheme label written into the records");
    eval->add_option("--out", out, "Output directory (default: the prediction directory)");

    std::string results;
    auto* rep = app.add_subcommand("report", "Tabulate a results directory");
    rep->add_option("--results", results, "Results directory")->required();

    std::string cmd, addr, work_dir;
    bool as_json = false;
    auto* conf = app.add_subcommand("conformance", "Check a segmenter endpoint against the wire protocol");
    conf->add_option("--cmd", cmd, "Command line of a stdio segmenter");
    conf->add_option("--addr", addr, "host:port of a TCP segmenter");
    conf->add_option("--work-dir", work_dir, "Where the fixture case is written");
    conf->add_flag("--json", as_json, "Print the report as JSON");

    std::string spec_path;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset and manifest");
    synth->add_option("--spec", spec_path, "Dataset spec (JSON); defaults apply when omitted");
    synth->add_option("--out", out, "Output directory")->required();

    std::string kind = "perfect", mode = "2d", oracle_spec;
    int port = -1;
    OracleSpec ospec;
    auto* serve = app.add_subcommand("serve-oracle", "Serve a builtin oracle over stdio or TCP");
    serve->add_option("--spec", oracle_spec, "Oracle spec (JSON file)");
    serve->add_option("--kind", kind, "perfect|dilated|eroded|correctable|flood_fill|constant_empty");
    serve->add_option("--mode", mode, "2d|3d");
    serve->add_option("--k", ospec.k, "Dilation / erosion radius");
    serve->add_option("--radius", ospec.radius, "Correction radius");
    serve->add_option("--threshold", ospec.threshold, "Flood fill intensity tolerance");
    serve->add_option("--port", port, "TCP port on 127.0.0.1 (0 picks one); stdio when omitted");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) return cmd_run(config_path, parallelism, out);
        if (*sim) return cmd_simulate(manifest, scheme, refine, perturb, seed, out);
        if (*eval) return cmd_evaluate(pred_dir, manifest, eval_scheme, out);
        if (*rep) return cmd_report(results);
        if (*conf) return cmd_conformance(cmd, addr, work_dir, as_json);
        if (*synth) return cmd_synth(spec_path, out);
        if (*serve) {
            if (!oracle_spec.empty()) {
                ospec = oracle_spec_from_json(read_json_file(oracle_spec));
            } else {
                json j = oracle_spec_to_json(ospec);
                j["kind"] = kind;
                j["mode"] = mode;
                ospec = oracle_spec_from_json(j);
            }
            return cmd_serve(ospec, port);
        }
    } catch (const Error& e) {
        std::cerr << "isbench: " << e.what() << "\n";
        return e.code() == Errc::ConfigInvalid ? kExitConfig : kExitFailure;
    } catch (const std::exception& e) {
        std::cerr << "isbench: " << e.what() << "\n";
        return kExitFailure;
    }
    return 0;
}
