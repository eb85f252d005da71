#include "isbench/report.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

#include "isbench/error.hpp"

namespace isbench {

namespace {

std::string fmt2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

const char* kHeader = "scheme,dataset,iteration,mean_dsc,interactions,n,n_missing\n";

std::string rows_csv(const std::vector<ReportRow>& rows) {
    std::string out = kHeader;
    for (const auto& r : rows)
        out += r.scheme_id + "," + r.dataset_id + "," + std::to_string(r.iteration) + "," + format_dsc(r.mean_dsc) + "," +
               fmt2(r.mean_interactions) + "," + std::to_string(r.n) + "," + std::to_string(r.n_missing) + "\n";
    return out;
}

std::string rows_text(const std::string& title, const std::vector<ReportRow>& rows) {
    std::vector<std::vector<std::string>> cells{{"Prompter", "Dataset", "Iteration", "DSC", "Interactions", "n", "missing"}};
    for (const auto& r : rows)
        cells.push_back({r.scheme_id, r.dataset_id, std::to_string(r.iteration), format_dsc(r.mean_dsc),
                         fmt2(r.mean_interactions), std::to_string(r.n), std::to_string(r.n_missing)});
    std::vector<std::size_t> width(cells[0].size(), 0);
    for (const auto& row : cells)
        for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
    std::ostringstream s;
    s << title << "\n";
    for (std::size_t k = 0; k < cells.size(); ++k) {
        for (std::size_t i = 0; i < cells[k].size(); ++i) {
            const auto& c = cells[k][i];
            const auto pad = std::string(width[i] - c.size(), ' ');
            // Text columns left aligned, numbers right aligned.
            s << (i < 2 ? c + pad : pad + c) << (i + 1 < cells[k].size() ? "  " : "");
        }
        s << "\n";
        if (k == 0) {
            std::size_t total = 0;
            for (auto w : width) total += w + 2;
            s << std::string(total - 2, '-') << "\n";
        }
    }
    return s.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(Errc::IoFailure, "cannot write " + path.string());
    out << text;
}

}  // namespace

std::string Report::final_csv() const { return rows_csv(final_rows); }
std::string Report::series_csv() const { return rows_csv(series); }
std::string Report::best_csv() const { return rows_csv(best); }

std::string Report::to_text() const {
    return rows_text("Final iteration (headline)", final_rows) + "\n" + rows_text("Per iteration", series) + "\n" +
           rows_text("Best iteration (not the headline)", best);
}

Report build_report(const std::vector<EvaluationRecord>& records, AggregationOrder order) {
    if (records.empty()) throw Error(Errc::EmptyResults, "no evaluation records");
    Report rep;
    std::map<std::pair<std::string, std::string>, std::vector<ReportRow>> by_key;
    for (const auto& a : aggregate(records, order)) {
        if (a.level != "dataset") continue;
        ReportRow r{a.scheme_id, a.dataset_id, a.iteration, a.mean_dsc, a.mean_interactions, a.n, a.n_missing};
        by_key[{a.scheme_id, a.dataset_id}].push_back(r);
    }
    for (auto& [key, rows] : by_key) {
        std::sort(rows.begin(), rows.end(), [](const auto& x, const auto& y) { return x.iteration < y.iteration; });
        rep.series.insert(rep.series.end(), rows.begin(), rows.end());
        rep.final_rows.push_back(rows.back());
        const ReportRow* best = nullptr;
        for (const auto& r : rows)
            if (r.mean_dsc && (!best || *r.mean_dsc > *best->mean_dsc)) best = &r;
        if (best) rep.best.push_back(*best);
    }
    return rep;
}

Report report_results(const std::filesystem::path& results_dir) {
    const auto csv_path = results_dir / "results.csv";
    std::ifstream in(csv_path, std::ios::binary);
    if (!in) throw Error(Errc::EmptyResults, "no results at " + csv_path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    auto order = AggregationOrder::ClassFirst;
    if (std::ifstream m(results_dir / "run_manifest.json"); m) {
        try {
            const auto j = nlohmann::json::parse(m);
            if (j.at("config").value("aggregation_order", std::string()) == "case_first") order = AggregationOrder::CaseFirst;
        } catch (const nlohmann::json::exception&) {
        }
    }
    const auto rep = build_report(records_from_csv(buf.str()), order);
    write_text(results_dir / "report.csv", rep.final_csv());
    write_text(results_dir / "report_series.csv", rep.series_csv());
    write_text(results_dir / "report_best.csv", rep.best_csv());
    write_text(results_dir / "report.txt", rep.to_text());
    return rep;
}

}  // namespace isbench
