#include <fstream>
#include <set>

#include "isbench/bench.hpp"
#include "isbench/error.hpp"
#include "isbench/wire.hpp"

namespace isbench {

using nlohmann::json;

namespace {

json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::ConfigInvalid, "cannot read " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw Error(Errc::ConfigInvalid, path.string() + ": " + e.what());
    }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
}

SchemeRun parse_scheme(const json& j) {
    SchemeRun s;
    if (j.is_string()) {
        s.initial = parse_initial_scheme(j.get<std::string>());
        return s;
    }
    s.initial = parse_initial_scheme(j.at("initial").get<std::string>());
    bool star = false;
    s.refine = parse_refine_scheme(j.value("refine", std::string("none")), &star);
    s.iterations = j.value("iterations", s.refine == RefineKind::None ? 0 : 5);
    if (star) s.reuse_initial = true;
    if (j.contains("reuse_initial")) s.reuse_initial = j.at("reuse_initial").get<bool>();
    s.box_perturb_k = j.value("box_perturbation", 0);
    if (s.iterations < 0) throw Error(Errc::ConfigInvalid, "iterations must be >= 0");
    if (s.refine == RefineKind::None && s.iterations > 0)
        throw Error(Errc::ConfigInvalid, s.initial.id() + ": iterations need a refine scheme");
    if (s.box_perturb_k < 0) throw Error(Errc::ConfigInvalid, "box_perturbation must be >= 0");
    if (s.box_perturb_k > 0 && (!s.initial.uses_boxes() || s.initial.propagation()))
        throw Error(Errc::ConfigInvalid, s.initial.id() + ": box perturbation needs a static box scheme");
    return s;
}

json scheme_json(const SchemeRun& s) {
    json j{{"initial", s.initial.id()},
           {"refine", s.refine == RefineKind::None ? "none" : refine_id(s.refine, s.initial.volumetric())},
           {"iterations", s.iterations},
           {"reuse_initial", s.reuse()},
           {"box_perturbation", s.box_perturb_k}};
    return j;
}

}  // namespace

DatasetManifest parse_manifest(const json& j, const std::filesystem::path& base_dir) {
    DatasetManifest m;
    try {
        m.dataset_id = j.at("dataset_id").get<std::string>();
        std::set<std::string> ids;
        for (const auto& c : j.at("cases")) {
            CaseEntry e;
            e.case_id = c.at("case_id").get<std::string>();
            if (!ids.insert(e.case_id).second) throw Error(Errc::ConfigInvalid, "duplicate case id '" + e.case_id + "'");
            e.image_path = resolve(base_dir, c.at("image_path").get<std::string>());
            e.label_path = resolve(base_dir, c.at("label_path").get<std::string>());
            e.instance_policy = parse_instance_policy(c.value("instance_policy", std::string("connected_components")));
            std::set<std::string> names;
            const auto class_map = c.value("class_map", json::object());
            for (const auto& [k, v] : class_map.items()) {
                const int label = std::stoi(k);
                const auto name = v.get<std::string>();
                if (!names.insert(name).second && e.instance_policy == InstancePolicy::ConnectedComponents)
                    throw Error(Errc::ConfigInvalid, e.case_id + ": class name '" + name + "' used twice");
                e.class_map[label] = name;
            }
            m.cases.push_back(std::move(e));
        }
    } catch (const json::exception& e) {
        throw Error(Errc::ConfigInvalid, std::string("bad manifest: ") + e.what());
    } catch (const std::invalid_argument&) {
        throw Error(Errc::ConfigInvalid, "class_map keys must be integer label values");
    } catch (const Error& e) {
        if (e.code() == Errc::ConfigInvalid) throw;
        throw Error(Errc::ConfigInvalid, e.what());
    }
    if (m.cases.empty()) throw Error(Errc::ConfigInvalid, "manifest '" + m.dataset_id + "' has no cases");
    return m;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
    return parse_manifest(read_json(path), path.parent_path());
}

std::string SchemeRun::label() const {
    std::string out = initial.id();
    if (box_perturb_k > 0) out += "~" + std::to_string(box_perturb_k);
    if (refine != RefineKind::None) {
        out += "+" + refine_id(refine, initial.volumetric());
        if (reuse()) out += "*";
    }
    return out;
}

RunConfig parse_run_config(const json& j, const std::filesystem::path& base_dir) {
    RunConfig c;
    try {
        c.seed = j.value("seed", c.seed);
        if (j.contains("manifest")) c.manifests.push_back(resolve(base_dir, j.at("manifest").get<std::string>()));
        for (const auto& m : j.value("manifests", json::array()))
            c.manifests.push_back(resolve(base_dir, m.get<std::string>()));
        if (c.manifests.empty()) throw Error(Errc::ConfigInvalid, "config names no manifest");
        for (const auto& s : j.at("schemes")) c.schemes.push_back(parse_scheme(s));
        if (c.schemes.empty()) throw Error(Errc::ConfigInvalid, "config lists no schemes");
        std::set<std::string> labels;
        for (const auto& s : c.schemes)
            if (!labels.insert(s.label()).second) throw Error(Errc::ConfigInvalid, "scheme '" + s.label() + "' listed twice");

        const auto& seg = j.at("segmenter");
        int kinds = 0;
        if (seg.contains("builtin")) {
            c.segmenter.builtin = oracle_spec_from_json(seg.at("builtin"));
            ++kinds;
        }
        if (seg.contains("command")) {
            c.segmenter.command = seg.at("command").get<std::string>();
            ++kinds;
        }
        if (seg.contains("address")) {
            c.segmenter.address = seg.at("address").get<std::string>();
            ++kinds;
        }
        if (kinds != 1) throw Error(Errc::ConfigInvalid, "segmenter needs exactly one of builtin, command, address");

        c.output_dir = resolve(base_dir, j.value("output_dir", std::string("results")));
        c.parallelism = j.value("parallelism", 1);
        if (c.parallelism < 1) throw Error(Errc::ConfigInvalid, "parallelism must be >= 1");
        c.max_failure_fraction = j.value("max_failure_fraction", 0.0);
        if (!(c.max_failure_fraction >= 0.0 && c.max_failure_fraction <= 1.0))
            throw Error(Errc::ConfigInvalid, "max_failure_fraction must be in [0, 1]");
        const auto order = j.value("aggregation_order", std::string("class_first"));
        if (order != "class_first" && order != "case_first")
            throw Error(Errc::ConfigInvalid, "aggregation_order must be class_first or case_first");
        c.order = order == "case_first" ? AggregationOrder::CaseFirst : AggregationOrder::ClassFirst;
        c.transcripts = j.value("transcripts", true);

        json schemes = json::array();
        for (const auto& s : c.schemes) schemes.push_back(scheme_json(s));
        json manifests = json::array();
        for (const auto& m : c.manifests) manifests.push_back(m.lexically_normal().string());
        json segj = json::object();
        if (c.segmenter.builtin) segj["builtin"] = oracle_spec_to_json(*c.segmenter.builtin);
        if (!c.segmenter.command.empty()) segj["command"] = c.segmenter.command;
        if (!c.segmenter.address.empty()) segj["address"] = c.segmenter.address;
        c.source = json{{"seed", c.seed},          {"manifests", manifests}, {"schemes", schemes},
                        {"segmenter", segj},       {"aggregation_order", order},
                        {"max_failure_fraction", c.max_failure_fraction}};
    } catch (const json::exception& e) {
        throw Error(Errc::ConfigInvalid, std::string("bad config: ") + e.what());
    } catch (const Error& e) {
        if (e.code() == Errc::ConfigInvalid) throw;
        throw Error(Errc::ConfigInvalid, e.what());
    }
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    return parse_run_config(read_json(path), path.parent_path());
}

std::unique_ptr<Segmenter> connect_segmenter(const SegmenterConfig& config) {
    if (config.builtin) return std::make_unique<OracleSegmenter>(*config.builtin);
    if (!config.command.empty()) return std::make_unique<ProtocolClient>(std::make_unique<ChildProcessTransport>(config.command));
    if (!config.address.empty()) return std::make_unique<ProtocolClient>(connect_tcp(config.address));
    throw Error(Errc::ConfigInvalid, "no segmenter configured");
}

}  // namespace isbench
