#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "isbench/voxelgrid.hpp"

namespace isbench {

/// 2|pred & gt| / (|pred| + |gt|) on the full grid. Throws EmptyGroundTruth
/// and DimMismatch.
double dsc(const BinaryMask& pred, const BinaryMask& gt);

struct EvaluationRecord {
    std::string dataset_id;
    std::string case_id;
    std::string class_id;
    std::string instance_id;
    int iteration = 0;
    std::optional<double> dsc;  // absent when the session failed
    int interactions = 0;
    std::string scheme_id;
    std::string cause;  // error code name when dsc is absent

    bool operator==(const EvaluationRecord&) const = default;
};

/// ClassFirst: instances -> case within class -> class -> dataset.
/// CaseFirst: instances -> case (all classes) -> dataset.
enum class AggregationOrder { ClassFirst, CaseFirst };

struct AggregateRow {
    std::string level;  // instance | case | class | dataset | overall
    std::string dataset_id;
    std::string scheme_id;
    int iteration = 0;
    std::string class_id;     // "*" when not part of the key
    std::string case_id;      // "*" when not part of the key
    std::string instance_id;  // "*" when not part of the key
    std::optional<double> mean_dsc;
    std::size_t n = 0;          // contributing units one level down
    std::size_t n_missing = 0;  // instances without a DSC below this row
    double mean_interactions = 0;

    bool operator==(const AggregateRow&) const = default;
};

/// Rows sorted by (scheme, iteration, level depth, dataset, class, case,
/// instance). Independent of record order.
std::vector<AggregateRow> aggregate(const std::vector<EvaluationRecord>& records,
                                    AggregationOrder order = AggregationOrder::ClassFirst);

std::string format_dsc(const std::optional<double>& v);

/// Header: dataset,case,class,instance,iteration,scheme,interactions,dsc.
/// Missing values print as NaN.
std::string records_to_csv(const std::vector<EvaluationRecord>& records);
std::vector<EvaluationRecord> records_from_csv(const std::string& text);
nlohmann::json records_to_json(const std::vector<EvaluationRecord>& records);
std::vector<EvaluationRecord> records_from_json(const nlohmann::json& j);

std::string aggregate_to_csv(const std::vector<AggregateRow>& rows);
nlohmann::json aggregate_to_json(const std::vector<AggregateRow>& rows);

/// Canonical record order: dataset, scheme, case, class, instance, iteration.
void sort_records(std::vector<EvaluationRecord>& records);

}  // namespace isbench
