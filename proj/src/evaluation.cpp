#include "ecbsim/evaluation.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>

#include "ecbsim/rng.hpp"

namespace ecbsim::eval {

std::string to_string(Metric m) {
    switch (m) {
        case Metric::Spearman: return "spearman";
        case Metric::Pearson: return "pearson";
        case Metric::Kendall: return "kendall";
    }
    return "?";
}

Metric metric_from_name(const std::string& name) {
    if (name == "spearman") return Metric::Spearman;
    if (name == "pearson") return Metric::Pearson;
    if (name == "kendall") return Metric::Kendall;
    throw ValidationError("unknown correlation metric: '" + name + "'");
}

PairedSeries paired_series(const dispersion::DispersionTable& table,
                           std::span<const corpus::VolatilityObservation> market,
                           corpus::Tenor tenor) {
    PairedSeries out;
    out.tenor = tenor;
    std::map<long, double> market_by_date;
    for (const auto& obs : market) {
        if (obs.tenor == tenor) market_by_date[obs.event_date.serial()] = obs.value;
    }
    for (const auto& [key, cell] : table.rows) {
        if (key.second != tenor) continue;
        auto it = market_by_date.find(key.first.serial());
        if (it == market_by_date.end()) continue;  // missing market data: pair dropped
        out.pairs.push_back(PairedObs{key.first, cell.value, it->second});
    }
    return out;  // map iteration order keeps dates strictly increasing
}

std::vector<double> average_ranks(std::span<const double> values) {
    const size_t n = values.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return values[a] < values[b]; });

    std::vector<double> ranks(n);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        double mean_rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (size_t k = i; k <= j; ++k) ranks[order[k]] = mean_rank;
        i = j + 1;
    }
    return ranks;
}

namespace {

double pearson_core(std::span<const double> x, std::span<const double> y) {
    const size_t n = x.size();
    double mx = 0.0, my = 0.0;
    for (size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) throw ConstantSeriesError();
    return sxy / std::sqrt(sxx * syy);
}

/// Count inversions (strict descents) while merge-sorting `v` in place.
std::uint64_t merge_count_inversions(std::vector<double>& v) {
    const size_t n = v.size();
    std::vector<double> buf(n);
    std::uint64_t swaps = 0;
    for (size_t width = 1; width < n; width *= 2) {
        for (size_t left = 0; left < n; left += 2 * width) {
            size_t mid = std::min(left + width, n);
            size_t right = std::min(left + 2 * width, n);
            size_t i = left, j = mid, k = left;
            while (i < mid && j < right) {
                if (v[j] < v[i]) {
                    swaps += mid - i;  // v[i..mid) all exceed v[j]
                    buf[k++] = v[j++];
                } else {
                    buf[k++] = v[i++];
                }
            }
            while (i < mid) buf[k++] = v[i++];
            while (j < right) buf[k++] = v[j++];
            std::copy(buf.begin() + static_cast<long>(left),
                      buf.begin() + static_cast<long>(right),
                      v.begin() + static_cast<long>(left));
        }
    }
    return swaps;
}

std::uint64_t tie_pairs(std::span<const double> sorted) {
    std::uint64_t total = 0;
    size_t i = 0;
    while (i < sorted.size()) {
        size_t j = i;
        while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
        std::uint64_t t = j - i + 1;
        total += t * (t - 1) / 2;
        i = j + 1;
    }
    return total;
}

/// Tie-adjusted Kendall tau-b via sort and inversion counting.
double kendall_tau_b(std::span<const double> x, std::span<const double> y) {
    const size_t n = x.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (x[a] != x[b]) return x[a] < x[b];
        return y[a] < y[b];
    });

    const std::uint64_t n0 = static_cast<std::uint64_t>(n) * (n - 1) / 2;

    // pairs tied in x, and jointly tied in (x, y)
    std::uint64_t n1 = 0, n3 = 0;
    {
        size_t i = 0;
        while (i < n) {
            size_t j = i;
            while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
            std::uint64_t t = j - i + 1;
            n1 += t * (t - 1) / 2;
            size_t a = i;
            while (a <= j) {
                size_t b = a;
                while (b + 1 <= j && y[order[b + 1]] == y[order[a]]) ++b;
                std::uint64_t u = b - a + 1;
                n3 += u * (u - 1) / 2;
                a = b + 1;
            }
            i = j + 1;
        }
    }

    std::vector<double> y_in_x_order(n);
    for (size_t i = 0; i < n; ++i) y_in_x_order[i] = y[order[i]];
    const std::uint64_t swaps = merge_count_inversions(y_in_x_order);
    const std::uint64_t n2 = tie_pairs(y_in_x_order);  // now sorted by y

    const double denom = std::sqrt(static_cast<double>(n0 - n1)) *
                         std::sqrt(static_cast<double>(n0 - n2));
    if (n0 == n1 || n0 == n2) throw ConstantSeriesError();

    const double con_minus_dis = static_cast<double>(n0) - static_cast<double>(n1) -
                                 static_cast<double>(n2) + static_cast<double>(n3) -
                                 2.0 * static_cast<double>(swaps);
    return con_minus_dis / denom;
}

} // namespace

double correlate(std::span<const double> x, std::span<const double> y, Metric metric) {
    if (x.size() != y.size()) throw ValidationError("series length mismatch");
    if (x.size() < 3) throw TooFewPairsError(static_cast<int>(x.size()), 3);

    switch (metric) {
        case Metric::Pearson:
            return pearson_core(x, y);
        case Metric::Spearman: {
            std::vector<double> rx = average_ranks(x);
            std::vector<double> ry = average_ranks(y);
            return pearson_core(rx, ry);
        }
        case Metric::Kendall:
            return kendall_tau_b(x, y);
    }
    throw ValidationError("unreachable metric");
}

double correlate(const PairedSeries& series, Metric metric) {
    std::vector<double> x, y;
    x.reserve(series.pairs.size());
    y.reserve(series.pairs.size());
    for (size_t i = 0; i < series.pairs.size(); ++i) {
        if (i > 0 && !(series.pairs[i - 1].date < series.pairs[i].date))
            throw ValidationError("paired series dates must be strictly increasing");
        x.push_back(series.pairs[i].synthetic);
        y.push_back(series.pairs[i].market);
    }
    return correlate(x, y, metric);
}

namespace {

double quantile_linear(const std::vector<double>& sorted, double p) {
    if (sorted.size() == 1) return sorted[0];
    double h = p * static_cast<double>(sorted.size() - 1);
    size_t lo = static_cast<size_t>(std::floor(h));
    size_t hi = std::min(lo + 1, sorted.size() - 1);
    double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

} // namespace

std::pair<double, double> bootstrap_ci(const PairedSeries& series, Metric metric, int reps,
                                       double alpha, std::uint64_t seed) {
    const size_t n = series.pairs.size();
    if (n < 10) throw TooFewPairsError(static_cast<int>(n), 10);
    if (reps < 100) throw ValidationError("bootstrap needs at least 100 replications");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0, 1)");

    std::vector<double> x(n), y(n);
    for (size_t i = 0; i < n; ++i) {
        x[i] = series.pairs[i].synthetic;
        y[i] = series.pairs[i].market;
    }

    Rng rng(seed);
    std::vector<double> estimates;
    estimates.reserve(static_cast<size_t>(reps));
    std::vector<double> bx(n), by(n);
    for (int r = 0; r < reps; ++r) {
        for (size_t i = 0; i < n; ++i) {
            size_t idx = static_cast<size_t>(rng.below(n));
            bx[i] = x[idx];
            by[i] = y[idx];
        }
        try {
            estimates.push_back(correlate(bx, by, metric));
        } catch (const ConstantSeriesError&) {
            // degenerate resample; skipped
        }
    }
    if (estimates.empty())
        throw ValidationError("every bootstrap replicate was degenerate");

    std::sort(estimates.begin(), estimates.end());
    return {quantile_linear(estimates, alpha / 2.0),
            quantile_linear(estimates, 1.0 - alpha / 2.0)};
}

std::vector<RollingPoint> rolling_correlation(const PairedSeries& series, int window_months,
                                              int min_obs) {
    if (window_months < 1) throw ValidationError("window_months must be >= 1");

    std::vector<RollingPoint> out;
    out.reserve(series.pairs.size());
    for (size_t i = 0; i < series.pairs.size(); ++i) {
        const Date end = series.pairs[i].date;
        const Date start = end.plus_months(-window_months);
        std::vector<double> x, y;
        for (size_t j = 0; j <= i; ++j) {
            if (series.pairs[j].date > start && series.pairs[j].date <= end) {
                x.push_back(series.pairs[j].synthetic);
                y.push_back(series.pairs[j].market);
            }
        }
        RollingPoint pt;
        pt.date = end;
        pt.n = static_cast<int>(x.size());
        if (pt.n >= std::max(min_obs, 3)) {
            try {
                pt.estimate = correlate(x, y, Metric::Spearman);
            } catch (const ConstantSeriesError&) {
                // window degenerate; left missing
            }
        }
        out.push_back(pt);
    }
    return out;
}

IccResult icc(const std::vector<std::vector<double>>& matrix, corpus::Tenor tenor) {
    const size_t n = matrix.size();
    if (n < 3) throw IncompleteMatrixError("need at least 3 events");
    const size_t k = matrix[0].size();
    if (k < 2) throw IncompleteMatrixError("need at least 2 methods");
    for (const auto& row : matrix) {
        if (row.size() != k) throw IncompleteMatrixError("ragged rows");
        for (double v : row) {
            if (!std::isfinite(v)) throw IncompleteMatrixError("non-finite cell");
        }
    }

    double grand = 0.0;
    std::vector<double> row_mean(n, 0.0);
    for (size_t i = 0; i < n; ++i) {
        for (double v : matrix[i]) row_mean[i] += v;
        row_mean[i] /= static_cast<double>(k);
        grand += row_mean[i];
    }
    grand /= static_cast<double>(n);

    double ss_between = 0.0, ss_within = 0.0;
    for (size_t i = 0; i < n; ++i) {
        ss_between += (row_mean[i] - grand) * (row_mean[i] - grand);
        for (double v : matrix[i]) ss_within += (v - row_mean[i]) * (v - row_mean[i]);
    }
    const double ms_between =
        static_cast<double>(k) * ss_between / static_cast<double>(n - 1);
    const double ms_within = ss_within / static_cast<double>(n * (k - 1));

    IccResult r;
    r.tenor = tenor;
    r.k_methods = static_cast<int>(k);
    r.sigma2_methods = ms_within;
    r.sigma2_conferences = std::max(0.0, (ms_between - ms_within) / static_cast<double>(k));
    const double total = r.sigma2_conferences + r.sigma2_methods;
    if (total == 0.0) throw DegenerateVarianceError();
    r.icc = r.sigma2_conferences / total;
    return r;
}

std::string KeyMismatchError::join(const std::vector<std::string>& keys) {
    std::string out;
    for (size_t i = 0; i < keys.size() && i < 5; ++i) {
        if (i > 0) out += ", ";
        out += keys[i];
    }
    if (keys.size() > 5) out += ", ...";
    return out;
}

dispersion::DispersionTable ensemble_average(
    const std::vector<dispersion::DispersionTable>& tables) {
    if (tables.empty()) throw ValidationError("no dispersion tables to ensemble");

    // key-set equality against the first table
    std::vector<std::string> mismatches;
    for (size_t t = 1; t < tables.size(); ++t) {
        for (const auto& [key, _] : tables[0].rows) {
            if (!tables[t].rows.count(key))
                mismatches.push_back(key.first.iso() + "/" + corpus::tenor_token(key.second));
        }
        for (const auto& [key, _] : tables[t].rows) {
            if (!tables[0].rows.count(key))
                mismatches.push_back(key.first.iso() + "/" + corpus::tenor_token(key.second));
        }
    }
    if (!mismatches.empty()) throw KeyMismatchError(mismatches);

    dispersion::DispersionTable out;
    out.runs_used = tables[0].runs_used;
    for (const auto& table : tables)
        out.runs_used = std::min(out.runs_used, table.runs_used);
    for (const auto& [key, first_cell] : tables[0].rows) {
        dispersion::DispersionCell cell;
        cell.value = 0.0;
        cell.n_runs = first_cell.n_runs;
        cell.n_valid_min = first_cell.n_valid_min;
        for (const auto& table : tables) {
            const auto& c = table.rows.at(key);
            cell.value += c.value;
            cell.n_runs = std::min(cell.n_runs, c.n_runs);
            cell.n_valid_min = std::min(cell.n_valid_min, c.n_valid_min);
        }
        cell.value /= static_cast<double>(tables.size());
        out.rows[key] = cell;
    }
    return out;
}

int count_syllables(const std::string& word) {
    std::string w;
    w.reserve(word.size());
    for (char c : word) {
        if (std::isalpha(static_cast<unsigned char>(c)))
            w.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    if (w.empty()) return 1;

    auto is_vowel = [](char c) {
        return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u' || c == 'y';
    };

    int groups = 0;
    bool in_group = false;
    for (char c : w) {
        if (is_vowel(c)) {
            if (!in_group) ++groups;
            in_group = true;
        } else {
            in_group = false;
        }
    }

    // silent trailing e ("rate", "table"), except when it is the only vowel
    // sound or follows "l" after a consonant ("table" keeps its final group)
    if (groups > 1 && w.size() >= 2 && w.back() == 'e' && !is_vowel(w[w.size() - 2])) {
        bool consonant_le = w.size() >= 3 && w[w.size() - 2] == 'l' &&
                            !is_vowel(w[w.size() - 3]);
        if (!consonant_le) --groups;
    }
    return std::max(groups, 1);
}

double flesch_kincaid_grade(const std::string& text) {
    long words = 0, sentences = 0, syllables = 0;
    long words_in_sentence = 0;
    std::string word;

    auto flush_word = [&]() {
        bool has_alpha = std::any_of(word.begin(), word.end(), [](unsigned char c) {
            return std::isalpha(c) != 0;
        });
        if (has_alpha) {
            ++words;
            ++words_in_sentence;
            syllables += count_syllables(word);
        }
        word.clear();
    };

    for (char c : text) {
        if (c == '.' || c == '!' || c == '?') {
            flush_word();
            if (words_in_sentence > 0) {
                ++sentences;
                words_in_sentence = 0;
            }
        } else if (std::isspace(static_cast<unsigned char>(c))) {
            flush_word();
        } else {
            word.push_back(c);
        }
    }
    flush_word();
    if (words_in_sentence > 0) ++sentences;  // trailing text without a terminator

    if (words == 0 || sentences == 0) throw EmptyTextError();

    return 0.39 * (static_cast<double>(words) / static_cast<double>(sentences)) +
           11.8 * (static_cast<double>(syllables) / static_cast<double>(words)) - 15.59;
}

} // namespace ecbsim::eval
