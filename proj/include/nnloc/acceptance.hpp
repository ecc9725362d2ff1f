#pragma once

#include "nnloc/model.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace nnloc {

/// How a criterion failed. Check means it ran to completion but missed its tolerance.
enum class FailureKind { None, Check, Accuracy, Existence, Assumption, Config };
std::string to_string(FailureKind k);

struct CriterionResult {
    std::string id;
    std::string title;
    std::vector<std::string> tags;
    bool passed = false;
    FailureKind failure = FailureKind::None;
    std::string measured;
    std::string expected;
    double seconds = 0.0;
    double time_limit = 0.0;
    Json details = Json::object();

    Json to_json() const;
    /// One line: id, PASS/FAIL, title, measured vs expected, runtime.
    std::string summary_line() const;
};

struct SuiteOptions {
    /// Run only criteria carrying one of these tags (empty: all).
    std::vector<std::string> tags;
    /// Replaces every numerical tolerance of the battery and caps quadrature relative tolerances.
    std::optional<double> tolerance;
    std::uint64_t seed = 20240917;
    std::size_t mc_reps = 1000000;
};

struct SuiteReport {
    std::vector<CriterionResult> results;

    bool passed() const;
    /// 0 when everything passed; otherwise 4 for accuracy or tolerance failures, then 3 for
    /// existence, 2 for assumption and 1 for configuration failures.
    int exit_code() const;
    Json to_json() const;
};

struct CriterionInfo {
    std::string id;
    std::string title;
    std::vector<std::string> tags;
    double time_limit;
};

/// Criteria in run order.
const std::vector<CriterionInfo>& criteria();
/// Every tag used by some criterion.
std::vector<std::string> known_tags();

/// Runs the selected criteria in order; `on_result` (if set) sees each result as it completes.
/// Unknown tags throw InvalidParameter before anything runs.
SuiteReport run_suite(const SuiteOptions& opt, const std::function<void(const CriterionResult&)>& on_result = {});
/// Runs a single criterion by id (InvalidParameter for unknown ids).
CriterionResult run_criterion(const std::string& id, const SuiteOptions& opt);

} // namespace nnloc
