#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "isbench/metrics.hpp"

namespace isbench {

struct ReportRow {
    std::string scheme_id;
    std::string dataset_id;
    int iteration = 0;
    std::optional<double> mean_dsc;
    double mean_interactions = 0;
    std::size_t n = 0;
    std::size_t n_missing = 0;
};

/// Dataset-level tables. `final_rows` is the headline (last iteration of each
/// scheme), `series` holds every iteration, `best` the best iteration per
/// scheme and dataset, labeled as such and never used as the headline.
struct Report {
    std::vector<ReportRow> final_rows;
    std::vector<ReportRow> series;
    std::vector<ReportRow> best;

    std::string final_csv() const;
    std::string series_csv() const;
    std::string best_csv() const;
    std::string to_text() const;
};

/// Throws EmptyResults when there are no records.
Report build_report(const std::vector<EvaluationRecord>& records, AggregationOrder order = AggregationOrder::ClassFirst);

/// Reads results.csv (and the aggregation order from run_manifest.json when
/// present), writes report.csv, report_series.csv, report_best.csv and
/// report.txt next to it.
Report report_results(const std::filesystem::path& results_dir);

}  // namespace isbench
