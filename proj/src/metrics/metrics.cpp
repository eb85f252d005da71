#include "isbench/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <tuple>

#include "isbench/error.hpp"

namespace isbench {

using nlohmann::json;

double dsc(const BinaryMask& pred, const BinaryMask& gt) {
    if (!(pred.dims() == gt.dims())) throw Error(Errc::DimMismatch, "pred and gt dims differ");
    if (gt.empty()) throw Error(Errc::EmptyGroundTruth, "ground truth is empty");
    const auto a = pred.bits();
    const auto b = gt.bits();
    std::size_t both = 0;
    for (std::size_t i = 0; i < a.size(); ++i) both += (a[i] & b[i]) != 0;
    return 2.0 * static_cast<double>(both) / static_cast<double>(pred.voxel_count() + gt.voxel_count());
}

namespace {

struct Acc {
    double sum = 0;
    std::size_t n = 0;
    std::size_t missing = 0;
    double inter_sum = 0;
    std::size_t inter_n = 0;

    void add(const std::optional<double>& v, std::size_t missing_below, double interactions, std::size_t inter_weight) {
        if (v) {
            sum += *v;
            ++n;
        }
        missing += missing_below;
        inter_sum += interactions * static_cast<double>(inter_weight);
        inter_n += inter_weight;
    }
    std::optional<double> mean() const {
        if (n == 0) return std::nullopt;
        return sum / static_cast<double>(n);
    }
    double interactions() const { return inter_n == 0 ? 0.0 : inter_sum / static_cast<double>(inter_n); }
};

// (scheme, iteration, dataset, class, case, instance); "*" marks a wildcard.
using Key = std::tuple<std::string, int, std::string, std::string, std::string, std::string>;

int depth(const std::string& level) {
    static const std::map<std::string, int> order{{"overall", 0}, {"dataset", 1}, {"class", 2}, {"case", 3}, {"instance", 4}};
    return order.at(level);
}

void emit(std::vector<AggregateRow>& out, const std::string& level, const std::map<Key, Acc>& groups) {
    for (const auto& [k, a] : groups) {
        AggregateRow r;
        r.level = level;
        std::tie(r.scheme_id, r.iteration, r.dataset_id, r.class_id, r.case_id, r.instance_id) = k;
        r.mean_dsc = a.mean();
        r.n = a.n;
        r.n_missing = a.missing;
        r.mean_interactions = a.interactions();
        out.push_back(std::move(r));
    }
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (const char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::vector<std::string> csv_split(const std::string& line) {
    std::vector<std::string> out(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                out.back() += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                out.back() += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.emplace_back();
        } else {
            out.back() += c;
        }
    }
    return out;
}

std::string fmt(double v, const char* spec) {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

}  // namespace

std::vector<AggregateRow> aggregate(const std::vector<EvaluationRecord>& records, AggregationOrder order) {
    const std::string any = "*";
    std::map<Key, Acc> inst, cas, cls, ds, all;
    for (const auto& r : records)
        inst[{r.scheme_id, r.iteration, r.dataset_id, r.class_id, r.case_id, r.instance_id}].add(
            r.dsc, r.dsc ? 0 : 1, r.interactions, 1);
    const bool by_class = order == AggregationOrder::ClassFirst;
    for (const auto& [k, a] : inst) {
        const auto& [s, it, d, c, cs, i] = k;
        cas[{s, it, d, by_class ? c : any, cs, any}].add(a.mean(), a.missing, a.interactions(), a.inter_n);
    }
    for (const auto& [k, a] : cas) {
        const auto& [s, it, d, c, cs, i] = k;
        if (by_class)
            cls[{s, it, d, c, any, any}].add(a.mean(), a.missing, a.interactions(), a.inter_n);
        else
            ds[{s, it, d, any, any, any}].add(a.mean(), a.missing, a.interactions(), a.inter_n);
    }
    for (const auto& [k, a] : cls) {
        const auto& [s, it, d, c, cs, i] = k;
        ds[{s, it, d, any, any, any}].add(a.mean(), a.missing, a.interactions(), a.inter_n);
    }
    for (const auto& [k, a] : ds) {
        const auto& [s, it, d, c, cs, i] = k;
        all[{s, it, any, any, any, any}].add(a.mean(), a.missing, a.interactions(), a.inter_n);
    }
    std::vector<AggregateRow> out;
    emit(out, "overall", all);
    emit(out, "dataset", ds);
    emit(out, "class", cls);
    emit(out, "case", cas);
    emit(out, "instance", inst);
    std::stable_sort(out.begin(), out.end(), [](const AggregateRow& a, const AggregateRow& b) {
        return std::tie(a.scheme_id, a.iteration) < std::tie(b.scheme_id, b.iteration) ||
               (std::tie(a.scheme_id, a.iteration) == std::tie(b.scheme_id, b.iteration) &&
                depth(a.level) < depth(b.level));
    });
    return out;
}

std::string format_dsc(const std::optional<double>& v) { return v ? fmt(*v, "%.6f") : "NaN"; }

std::string records_to_csv(const std::vector<EvaluationRecord>& records) {
    std::string out = "dataset,case,class,instance,iteration,scheme,interactions,dsc\n";
    for (const auto& r : records) {
        out += csv_escape(r.dataset_id) + ',' + csv_escape(r.case_id) + ',' + csv_escape(r.class_id) + ',' +
               csv_escape(r.instance_id) + ',' + std::to_string(r.iteration) + ',' + csv_escape(r.scheme_id) + ',' +
               std::to_string(r.interactions) + ',' + format_dsc(r.dsc) + '\n';
    }
    return out;
}

std::vector<EvaluationRecord> records_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line.rfind("dataset,case,class,instance,iteration,scheme,interactions,dsc", 0) != 0)
        throw Error(Errc::InvalidArgument, "records CSV header missing");
    std::vector<EvaluationRecord> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = csv_split(line);
        if (f.size() < 8) throw Error(Errc::InvalidArgument, "records CSV row has " + std::to_string(f.size()) + " fields");
        EvaluationRecord r;
        r.dataset_id = f[0];
        r.case_id = f[1];
        r.class_id = f[2];
        r.instance_id = f[3];
        r.scheme_id = f[5];
        try {
            r.iteration = std::stoi(f[4]);
            r.interactions = std::stoi(f[6]);
            if (f[7] != "NaN") r.dsc = std::stod(f[7]);
        } catch (const std::exception&) {
            throw Error(Errc::InvalidArgument, "bad number in records CSV row: " + line);
        }
        out.push_back(std::move(r));
    }
    return out;
}

json records_to_json(const std::vector<EvaluationRecord>& records) {
    json out = json::array();
    for (const auto& r : records) {
        json j{{"dataset", r.dataset_id},     {"case", r.case_id},   {"class", r.class_id},
               {"instance", r.instance_id},   {"iteration", r.iteration}, {"scheme", r.scheme_id},
               {"interactions", r.interactions}, {"dsc", r.dsc ? json(*r.dsc) : json()}};
        if (!r.cause.empty()) j["cause"] = r.cause;
        out.push_back(std::move(j));
    }
    return out;
}

std::vector<EvaluationRecord> records_from_json(const json& j) {
    std::vector<EvaluationRecord> out;
    try {
        for (const auto& e : j) {
            EvaluationRecord r;
            r.dataset_id = e.at("dataset").get<std::string>();
            r.case_id = e.at("case").get<std::string>();
            r.class_id = e.at("class").get<std::string>();
            r.instance_id = e.at("instance").get<std::string>();
            r.iteration = e.at("iteration").get<int>();
            r.scheme_id = e.at("scheme").get<std::string>();
            r.interactions = e.at("interactions").get<int>();
            if (!e.at("dsc").is_null()) r.dsc = e.at("dsc").get<double>();
            r.cause = e.value("cause", std::string());
            out.push_back(std::move(r));
        }
    } catch (const json::exception& ex) {
        throw Error(Errc::InvalidArgument, std::string("bad records JSON: ") + ex.what());
    }
    return out;
}

std::string aggregate_to_csv(const std::vector<AggregateRow>& rows) {
    std::string out = "level,dataset,scheme,iteration,class,case,instance,n,n_missing,mean_dsc,mean_interactions\n";
    for (const auto& r : rows)
        out += r.level + ',' + csv_escape(r.dataset_id) + ',' + csv_escape(r.scheme_id) + ',' +
               std::to_string(r.iteration) + ',' + csv_escape(r.class_id) + ',' + csv_escape(r.case_id) + ',' +
               csv_escape(r.instance_id) + ',' + std::to_string(r.n) + ',' + std::to_string(r.n_missing) + ',' +
               format_dsc(r.mean_dsc) + ',' + fmt(r.mean_interactions, "%.3f") + '\n';
    return out;
}

json aggregate_to_json(const std::vector<AggregateRow>& rows) {
    json out = json::array();
    for (const auto& r : rows)
        out.push_back({{"level", r.level},
                       {"dataset", r.dataset_id},
                       {"scheme", r.scheme_id},
                       {"iteration", r.iteration},
                       {"class", r.class_id},
                       {"case", r.case_id},
                       {"instance", r.instance_id},
                       {"n", r.n},
                       {"n_missing", r.n_missing},
                       {"mean_dsc", r.mean_dsc ? json(*r.mean_dsc) : json()},
                       {"mean_interactions", r.mean_interactions}});
    return out;
}

void sort_records(std::vector<EvaluationRecord>& records) {
    std::sort(records.begin(), records.end(), [](const EvaluationRecord& a, const EvaluationRecord& b) {
        return std::tie(a.dataset_id, a.scheme_id, a.case_id, a.class_id, a.instance_id, a.iteration) <
               std::tie(b.dataset_id, b.scheme_id, b.case_id, b.class_id, b.instance_id, b.iteration);
    });
}

}  // namespace isbench
