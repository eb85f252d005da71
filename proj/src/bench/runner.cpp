#include <atomic>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <thread>

#include "isbench/bench.hpp"
#include "isbench/error.hpp"
#include "isbench/image_io.hpp"
#include "isbench/rng.hpp"
#include "isbench/session.hpp"

namespace isbench {

using nlohmann::json;

namespace {

std::string file_safe(const std::string& s) {
    std::string out = s;
    for (auto& c : out)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-' && c != '.') c = '-';
    return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(Errc::IoFailure, "cannot write " + path.string());
    out << text;
}

struct Task {
    const DatasetManifest* dataset;
    const CaseEntry* entry;
};

struct SessionLog {
    json info;
    bool failed = false;
    bool skipped = false;
};

struct TaskResult {
    std::vector<EvaluationRecord> records;
    std::vector<SessionLog> sessions;
};

/// One segmenter connection, reopened after transport-level failures.
class Worker {
public:
    explicit Worker(const RunConfig& config) : config_(config) {}

    TaskResult run(const Task& task) {
        TaskResult out;
        const auto& entry = *task.entry;
        const auto labels = read_volume(entry.label_path);
        const auto instances = extract_instances(labels, entry.instance_policy, entry.class_map);

        CaseRef ref;
        ref.case_id = entry.case_id;
        ref.image_path = entry.image_path;
        ref.instance_policy = std::string(instance_policy_name(entry.instance_policy));
        if (config_.segmenter.builtin)
            ref.labels = labels;
        else
            ref.label_path = entry.label_path;

        for (const auto& scheme : config_.schemes)
            for (const auto& inst : instances) run_session(task, ref, scheme, inst, out);
        return out;
    }

private:
    Segmenter& segmenter() {
        if (!seg_) {
            seg_ = connect_segmenter(config_.segmenter);
            caps_ = seg_->capabilities();
        }
        return *seg_;
    }

    void run_session(const Task& task, const CaseRef& ref, const SchemeRun& scheme, const Instance& inst,
                     TaskResult& out) {
        const auto& ds = task.dataset->dataset_id;
        const auto label = scheme.label();
        const auto inst_id = instance_label(inst);
        const auto seed_path = session_seed_path(ds, ref.case_id, inst_id, label);

        EvaluationRecord base;
        base.dataset_id = ds;
        base.case_id = ref.case_id;
        base.class_id = inst.class_name;
        base.instance_id = inst_id;
        base.scheme_id = label;

        SessionLog log;
        log.info = json{{"dataset", ds},         {"case", ref.case_id}, {"class", inst.class_name},
                        {"instance", inst_id},   {"label_value", inst.label}, {"scheme", label},
                        {"seed_path", seed_path}};

        ProtocolSpec spec;
        spec.initial = scheme.initial;
        spec.refine = scheme.refine;
        spec.iterations = scheme.iterations;
        spec.options.reuse_initial = scheme.reuse();
        spec.options.box_perturb_k = scheme.box_perturb_k;

        Transcript transcript;
        std::string sid;
        try {
            auto& seg = segmenter();
            sid = seg.open_case(ref);
            SegmenterHandle handle(seg, sid, caps_, &transcript);
            SeededRng rng(config_.seed, seed_path);
            const auto result = run_protocol(handle, inst.mask, spec, rng);
            seg.close(sid);
            sid.clear();
            for (const auto& it : result.iterations) {
                auto r = base;
                r.iteration = it.iteration;
                r.dsc = dsc(it.pred, inst.mask);
                r.interactions = it.cumulative_cost;
                out.records.push_back(std::move(r));
            }
            log.info["status"] = "ok";
            log.info["interactions"] = result.ledger.total();
            log.info["events"] = result.events;
        } catch (const Error& e) {
            if (!sid.empty() && seg_) {
                try {
                    seg_->close(sid);
                } catch (const Error&) {
                }
            }
            if (e.code() == Errc::SegmenterCrash || e.code() == Errc::ProtocolError) seg_.reset();
            const auto cause = std::string(errc_name(e.code()));
            for (int i = 0; i <= scheme.iterations; ++i) {
                auto r = base;
                r.iteration = i;
                r.cause = cause;
                out.records.push_back(std::move(r));
            }
            log.skipped = e.code() == Errc::CapabilityMissing;
            log.failed = !log.skipped;
            log.info["status"] = log.skipped ? "skipped" : "failed";
            log.info["cause"] = cause;
            log.info["message"] = e.what();
        }

        if (config_.transcripts) {
            const auto dir = config_.output_dir / "transcripts" / file_safe(ds) / file_safe(ref.case_id) / file_safe(label);
            std::error_code ec;
            std::filesystem::create_directories(dir, ec);
            transcript.write(dir / (inst_id + ".jsonl"));
        }
        out.sessions.push_back(std::move(log));
    }

    const RunConfig& config_;
    std::unique_ptr<Segmenter> seg_;
    Capabilities caps_;
};

}  // namespace

std::string session_seed_path(const std::string& dataset, const std::string& case_id, const std::string& instance,
                              const std::string& scheme_label) {
    return "run/" + dataset + "/" + case_id + "/" + instance + "/" + scheme_label;
}

std::string instance_label(const Instance& instance) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%03d", instance.id);
    return buf;
}

RunSummary run_benchmark(const RunConfig& config) {
    std::vector<DatasetManifest> datasets;
    for (const auto& m : config.manifests) datasets.push_back(load_manifest(m));
    std::vector<Task> tasks;
    for (const auto& d : datasets)
        for (const auto& c : d.cases) {
            for (const auto* p : {&c.image_path, &c.label_path})
                if (!std::filesystem::exists(*p))
                    throw Error(Errc::ConfigInvalid, d.dataset_id + "/" + c.case_id + ": missing " + p->string());
            tasks.push_back({&d, &c});
        }

    std::filesystem::create_directories(config.output_dir);

    std::vector<TaskResult> results(tasks.size());
    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr first_error;
    auto work = [&] {
        Worker worker(config);
        for (std::size_t i = next++; i < tasks.size(); i = next++) {
            try {
                results[i] = worker.run(tasks[i]);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        }
    };
    const auto n_workers = std::max<std::size_t>(1, std::min<std::size_t>(config.parallelism, tasks.size()));
    std::vector<std::thread> pool;
    for (std::size_t w = 1; w < n_workers; ++w) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);

    RunSummary summary;
    json sessions = json::array();
    for (auto& r : results) {
        summary.records.insert(summary.records.end(), r.records.begin(), r.records.end());
        for (auto& s : r.sessions) {
            ++summary.sessions;
            summary.failed_sessions += s.failed;
            summary.skipped_sessions += s.skipped;
            sessions.push_back(std::move(s.info));
        }
    }
    sort_records(summary.records);
    summary.aggregate = aggregate(summary.records, config.order);
    summary.threshold_exceeded =
        summary.sessions > 0 &&
        static_cast<double>(summary.failed_sessions) / static_cast<double>(summary.sessions) > config.max_failure_fraction;

    const auto& out = config.output_dir;
    write_text(out / "results.csv", records_to_csv(summary.records));
    write_text(out / "results.json", records_to_json(summary.records).dump(2) + "\n");
    write_text(out / "aggregate.csv", aggregate_to_csv(summary.aggregate));
    write_text(out / "aggregate.json", aggregate_to_json(summary.aggregate).dump(2) + "\n");

    char hash[17];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(fnv1a64(config.source.dump())));
    const json manifest{{"seed", config.seed},
                        {"config", config.source},
                        {"config_hash", hash},
                        {"sessions", sessions},
                        {"counts",
                         {{"sessions", summary.sessions},
                          {"failed", summary.failed_sessions},
                          {"skipped", summary.skipped_sessions},
                          {"threshold_exceeded", summary.threshold_exceeded}}}};
    write_text(out / "run_manifest.json", manifest.dump(2) + "\n");
    return summary;
}

}  // namespace isbench
