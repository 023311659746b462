#pragma once

#include <array>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "ecbsim/dates.hpp"
#include "ecbsim/errors.hpp"

namespace ecbsim::corpus {

/// Swap tenors tracked throughout the pipeline.
enum class Tenor { M3, Y2, Y10 };

constexpr std::array<Tenor, 3> kAllTenors{Tenor::M3, Tenor::Y2, Tenor::Y10};

/// Canonical file/CSV token: "3M", "2Y", "10Y".
std::string tenor_token(Tenor t);
/// Parse "3M"/"3m"/"2Y"/"2y"/"10Y"/"10y". Throws DataError on anything else.
Tenor tenor_from_token(std::string_view token);

/// One press-conference event, the unit of simulation.
struct Conference {
    std::string id;          // "conf-YYYY-MM-DD"; dates are unique in a corpus
    Date date;
    std::string transcript;  // full text including Q&A, never empty
    std::string source_path;
};

/// Daily high/low of a swap rate, in percent.
struct DailyRateRange {
    Date date;
    Tenor tenor;
    double high = 0.0;
    double low = 0.0;
};

/// Market-based disagreement for one (event, tenor, window): mean daily
/// high-low range over the window's business days, in percentage points.
struct VolatilityObservation {
    Date event_date;
    Tenor tenor;
    int window_days = 0;  // 1, 2 or 3
    double value = 0.0;   // >= 0
};

struct CorpusSplit {
    std::vector<Conference> train;
    std::vector<Conference> test;
};

struct MissingFileError : DataError {
    explicit MissingFileError(const std::string& path)
        : DataError("missing file: " + path) {}
};

struct MalformedRecordError : DataError {
    MalformedRecordError(int line, const std::string& detail)
        : DataError("malformed record at line " + std::to_string(line) + ": " + detail),
          line(line) {}
    int line;
};

struct DuplicateDateError : DataError {
    explicit DuplicateDateError(Date d)
        : DataError("duplicate conference date: " + d.iso()), date(d) {}
    Date date;
};

struct EmptyTranscriptError : DataError {
    explicit EmptyTranscriptError(Date d)
        : DataError("empty transcript for conference " + d.iso()), date(d) {}
    Date date;
};

struct MissingDayError : DataError {
    MissingDayError(Date d, Tenor t)
        : DataError("no rate range for business day " + d.iso() + " tenor " + tenor_token(t)),
          date(d), tenor(t) {}
    Date date;
    Tenor tenor;
};

struct EmptyCorpusError : ValidationError {
    EmptyCorpusError() : ValidationError("corpus is empty") {}
};

/// Load a JSON-lines transcript file ({"date": "YYYY-MM-DD", "text": ...} per
/// line). Result is sorted ascending by date; duplicate dates and empty
/// transcripts are rejected.
std::vector<Conference> load_conferences(const std::string& path);

/// Inverse of load_conferences; (date, text) round-trips losslessly.
void write_conferences(const std::string& path, const std::vector<Conference>& conferences);

/// Load the daily rate CSV (header "date,tenor,high,low", tenor tokens
/// exactly 3M/2Y/10Y). Requires high >= low and finite values.
std::vector<DailyRateRange> load_rate_ranges(const std::string& path);

/// Daily ranges indexed by (date, tenor), with the event-window volatility
/// computation. Read-only after construction.
class RateRangeSeries {
public:
    RateRangeSeries() = default;
    explicit RateRangeSeries(const std::vector<DailyRateRange>& ranges);

    bool has(Date d, Tenor t) const;

    /// Mean (high - low) over `window_days` business days starting at the
    /// event day. A window business day without data raises MissingDayError.
    VolatilityObservation event_volatility(Date event_date, Tenor tenor,
                                           int window_days) const;

    /// Observations for every (event, tenor) pair with complete window data;
    /// incomplete pairs are skipped (the caller sees effective N shrink).
    std::vector<VolatilityObservation> observations(const std::vector<Conference>& events,
                                                    int window_days) const;

    size_t size() const { return ranges_.size(); }

private:
    std::map<std::pair<long, Tenor>, std::pair<double, double>> ranges_;  // (high, low)
};

/// Earliest floor(train_fraction * n) conferences become train, the rest test.
CorpusSplit chronological_split(const std::vector<Conference>& conferences,
                                double train_fraction);

} // namespace ecbsim::corpus
