#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "isbench/segmenter.hpp"
#include "isbench/transport.hpp"

namespace isbench {

enum class ClauseStatus { Pass, Fail, Skip };

std::string_view clause_status_name(ClauseStatus status) noexcept;

struct ConformanceClause {
    std::string id;  // HELLO, OPEN_CASE, SCOPE_SLICE, ...
    ClauseStatus status = ClauseStatus::Skip;
    std::string detail;
};

struct ConformanceReport {
    std::string segmenter_name;
    Capabilities caps;
    std::vector<ConformanceClause> clauses;

    /// No clause failed.
    bool passed() const;
    const ConformanceClause* find(const std::string& id) const;
    std::string to_text() const;
    nlohmann::json to_json() const;
};

/// Drives a segmenter endpoint through every clause its capabilities make
/// applicable. A synthetic fixture case is written into `work_dir` and sent
/// by path. Never throws on endpoint misbehaviour; that is report content.
ConformanceReport conformance_test(LineTransport& transport, const std::filesystem::path& work_dir);

}  // namespace isbench
