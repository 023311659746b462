#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ecbsim/corpus.hpp"
#include "ecbsim/dates.hpp"
#include "ecbsim/dispersion.hpp"
#include "ecbsim/errors.hpp"

namespace ecbsim::eval {

enum class Metric { Spearman, Pearson, Kendall };

std::string to_string(Metric m);
Metric metric_from_name(const std::string& name);

/// Synthetic-vs-market pairs for one tenor; dates strictly increasing, no
/// missing values (events without market data are excluded upstream).
struct PairedObs {
    Date date;
    double synthetic = 0.0;
    double market = 0.0;
};

struct PairedSeries {
    std::vector<PairedObs> pairs;
    corpus::Tenor tenor = corpus::Tenor::M3;
};

struct TooFewPairsError : ValidationError {
    TooFewPairsError(int n, int required)
        : ValidationError("need at least " + std::to_string(required) + " pairs, got " +
                          std::to_string(n)) {}
};

struct ConstantSeriesError : ValidationError {
    ConstantSeriesError() : ValidationError("correlation undefined for a constant series") {}
};

/// Join a dispersion table with market observations on event date for one
/// tenor. `market` must already be filtered to a single window.
PairedSeries paired_series(const dispersion::DispersionTable& table,
                           std::span<const corpus::VolatilityObservation> market,
                           corpus::Tenor tenor);

/// Average ranks (ties get the mean of the ranks they span), 1-based.
std::vector<double> average_ranks(std::span<const double> values);

/// Correlation estimate on raw vectors. Spearman is Pearson on average ranks;
/// Kendall is tie-adjusted tau-b computed with an O(n log n) inversion count;
/// Pearson is the centered product-moment estimate. Requires n >= 3 and, for
/// Pearson/Spearman, non-constant inputs.
double correlate(std::span<const double> x, std::span<const double> y, Metric metric);
double correlate(const PairedSeries& series, Metric metric);

struct CorrelationResult {
    Metric metric = Metric::Spearman;
    double estimate = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    int n = 0;
};

/// Seeded percentile bootstrap over resampled pairs. Requires n >= 10 and
/// reps >= 100. Replicates whose resample is degenerate (constant) are
/// skipped.
std::pair<double, double> bootstrap_ci(const PairedSeries& series, Metric metric, int reps,
                                       double alpha, std::uint64_t seed);

struct RollingPoint {
    Date date;
    std::optional<double> estimate;  // empty when below min_obs or degenerate
    int n = 0;                       // pairs inside the window
};

/// Trailing calendar-window Spearman at each event date. The window at date d
/// covers pairs with date in (d - window_months, d].
std::vector<RollingPoint> rolling_correlation(const PairedSeries& series, int window_months,
                                              int min_obs);

struct IccResult {
    corpus::Tenor tenor = corpus::Tenor::M3;
    double icc = 0.0;
    double sigma2_conferences = 0.0;
    double sigma2_methods = 0.0;
    int k_methods = 0;
};

struct IncompleteMatrixError : ValidationError {
    explicit IncompleteMatrixError(const std::string& detail)
        : ValidationError("ICC matrix invalid: " + detail) {}
};

struct DegenerateVarianceError : ValidationError {
    DegenerateVarianceError()
        : ValidationError("ICC undefined: all matrix values are identical") {}
};

/// One-way random-effects decomposition of an events x methods matrix:
/// the within-event mean square estimates the method variance, and
/// (between-event MS - within MS) / k estimates the conference variance
/// (truncated at zero). ICC = conf / (conf + methods).
IccResult icc(const std::vector<std::vector<double>>& matrix, corpus::Tenor tenor);

struct KeyMismatchError : ValidationError {
    explicit KeyMismatchError(const std::vector<std::string>& missing)
        : ValidationError("dispersion tables do not share a key set; first differences: " +
                          join(missing)) {}
    static std::string join(const std::vector<std::string>& keys);
};

/// Per-key arithmetic mean of dispersion tables sharing the same
/// (event, tenor) key set.
dispersion::DispersionTable ensemble_average(
    const std::vector<dispersion::DispersionTable>& tables);

struct EmptyTextError : ValidationError {
    EmptyTextError() : ValidationError("readability undefined for text without words") {}
};

/// Heuristic syllable count: contiguous vowel groups (y counts as a vowel)
/// with a silent trailing-e adjustment, minimum 1 per word.
int count_syllables(const std::string& word);

/// Flesch-Kincaid grade level:
///   0.39 * (words / sentences) + 11.8 * (syllables / words) - 15.59
/// with sentence segmentation on terminal punctuation. Trailing text without
/// terminal punctuation counts as one sentence.
double flesch_kincaid_grade(const std::string& text);

} // namespace ecbsim::eval
