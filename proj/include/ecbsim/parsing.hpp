#pragma once

#include <string>
#include <vector>

#include "ecbsim/corpus.hpp"
#include "ecbsim/dates.hpp"
#include "ecbsim/errors.hpp"

namespace ecbsim::parsing {

enum class Direction { Up, Down, Unchanged };

std::string to_string(Direction d);

/// One (trader, tenor) rate prediction parsed from a forecast table.
struct ForecastRecord {
    Date event_date;
    std::string trader_id;
    corpus::Tenor tenor = corpus::Tenor::M3;
    Direction direction = Direction::Unchanged;
    double rate = 0.0;    // percent, coerced to 2-decimal precision
    int confidence = 0;   // 0..100

    bool operator==(const ForecastRecord&) const = default;
};

struct Anomaly {
    int row = 0;  // 1-based data-row index within the table
    std::string row_text;
    std::string reason;
};

/// Outcome of parsing one model response. records + dropped_rows equals the
/// number of table rows attempted; nothing is silently discarded.
struct ParseReport {
    std::vector<ForecastRecord> records;
    int dropped_rows = 0;
    std::vector<Anomaly> anomalies;
};

struct ParseOptions {
    double rate_min = -1.0;   // plausibility bounds, percent
    double rate_max = 10.0;
    bool strict = false;      // strict mode: incomplete tables are an error
    /// An Unchanged-direction rate farther than this from the run's per-tenor
    /// median is flagged as an anomaly (it is excluded, never mutated).
    double unchanged_epsilon = 0.5;
};

struct NoTableFoundError : DataError {
    NoTableFoundError() : DataError("no forecast table found in model output") {}
};

struct WrongDateError : DataError {
    explicit WrongDateError(Date found)
        : DataError("forecast table dated " + found.iso() +
                    " contradicts the expected conference date"),
          found(found) {}
    Date found;
};

struct IncompleteTableError : DataError {
    IncompleteTableError(int found_rows, int expected_rows)
        : DataError("incomplete forecast table: " + std::to_string(found_rows) + " of " +
                    std::to_string(expected_rows) + " expected rows"),
          found_rows(found_rows), expected_rows(expected_rows) {}
    int found_rows;
    int expected_rows;
};

/// Extract forecast records from the first markdown table in `raw` whose
/// header mentions both a trader and a tenor column. Handles code fences,
/// bold/backtick cell markup, an optional seventh rationale column, lower and
/// upper case tenor tokens, and "%"-suffixed numbers. Rows that fail
/// validation land in the anomaly list. Completeness expects
/// expected_traders x 3 rows (strict mode raises IncompleteTableError).
ParseReport parse_forecast_table(const std::string& raw, Date expected_date,
                                 int expected_traders, const ParseOptions& options = {});

/// Render records back to the canonical 6-column markdown table. Re-parsing
/// the output yields the same records.
std::string to_markdown_table(const std::vector<ForecastRecord>& records);

/// True when every tenor retains at least `min_fraction` of the expected
/// per-tenor rows; below that the run should be discarded and re-requested.
bool meets_completeness(const ParseReport& report, int expected_traders,
                        double min_fraction);

struct JudgeVerdict {
    std::string critique;
    std::string revised_prompt;
    std::string reasoning;
};

struct NotJsonError : DataError {
    NotJsonError() : DataError("judge output contains no parseable JSON object") {}
};

struct MissingKeyError : DataError {
    explicit MissingKeyError(const std::string& key)
        : DataError("judge JSON is missing required key '" + key + "'"), key(key) {}
    std::string key;
};

/// Parse the first JSON object in the judge response (surrounding prose and
/// code fences are tolerated). All three keys must be present and non-empty.
JudgeVerdict parse_judge_verdict(const std::string& raw);

/// True when a revised analyst prompt no longer requests per-trader rate
/// levels in percent across all three tenors in tabular form. Checked via
/// required-token rules: the three tenor tokens, a rate-in-percent
/// instruction, and a table-output instruction must all be present.
bool detect_task_drift(const std::string& revised_prompt);

} // namespace ecbsim::parsing
