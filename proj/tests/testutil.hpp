#pragma once

// Shared fixture builders and independent statistical oracles for the test
// suites. Oracle implementations deliberately use different algorithms from
// the library (counting ranks instead of sorting, raw-moment Pearson, O(n^2)
// pair enumeration for Kendall) so they can certify the production paths.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "ecbsim/corpus.hpp"
#include "ecbsim/dates.hpp"
#include "ecbsim/rng.hpp"

namespace testutil {

using ecbsim::Date;
using ecbsim::Rng;

// ---------------------------------------------------------------------------
// scratch directories
// ---------------------------------------------------------------------------

class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        namespace fs = std::filesystem;
        static int counter = 0;
        path_ = (fs::temp_directory_path() /
                 ("ecbsim-" + tag + "-" + std::to_string(::getpid()) + "-" +
                  std::to_string(counter++)))
                    .string();
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::string& path() const { return path_; }
    std::string file(const std::string& name) const {
        return (std::filesystem::path(path_) / name).string();
    }

private:
    std::string path_;
};

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

// ---------------------------------------------------------------------------
// fixture corpus: conferences with controlled ambiguity + matching rates
// ---------------------------------------------------------------------------

/// Transcript with exactly `level` hedging words; filler avoids the mock's
/// hedging list and contains no ISO dates.
inline std::string transcript_with_level(int level) {
    std::string text =
        "The Governing Council held its regular policy meeting and reviewed recent "
        "developments in output and prices. Rates were left unchanged at this meeting. ";
    for (int i = 0; i < level; ++i) text += "perhaps ";
    text += "The staff projections were presented to the council.";
    return text;
}

/// Monthly conferences starting 2015-01-15, nudged off weekends, ambiguity
/// level of conference i equal to levels[i].
inline std::vector<ecbsim::corpus::Conference> make_conferences(
    const std::vector<int>& levels) {
    std::vector<ecbsim::corpus::Conference> out;
    Date base = Date::from_ymd(2015, 1, 15);
    for (size_t i = 0; i < levels.size(); ++i) {
        Date d = base.plus_months(static_cast<int>(i));
        while (d.is_weekend()) d = d.plus_days(1);
        ecbsim::corpus::Conference c;
        c.id = "conf-" + d.iso();
        c.date = d;
        c.transcript = transcript_with_level(levels[i]);
        c.source_path = "(fixture)";
        out.push_back(std::move(c));
    }
    return out;
}

inline void write_conferences_jsonl(const std::string& path,
                                    const std::vector<ecbsim::corpus::Conference>& confs) {
    ecbsim::corpus::write_conferences(path, confs);
}

/// Rates CSV whose event-window volatility is exactly 0.01 * level * mult(t)
/// for each conference (constant daily range across the window's business
/// days). Monthly spacing keeps the windows disjoint.
inline void write_rates_csv(const std::string& path,
                            const std::vector<ecbsim::corpus::Conference>& confs,
                            const std::vector<int>& levels, int window_days = 3) {
    std::ofstream out(path);
    out << "date,tenor,high,low\n";
    const char* tokens[3] = {"3M", "2Y", "10Y"};
    const double mult[3] = {1.0, 2.0, 3.0};
    const double base[3] = {2.0, 2.5, 3.0};
    for (size_t i = 0; i < confs.size(); ++i) {
        for (Date d : ecbsim::business_days_from(confs[i].date, window_days)) {
            for (int t = 0; t < 3; ++t) {
                double range = 0.01 * levels[i] * mult[t];
                char line[128];
                std::snprintf(line, sizeof(line), "%s,%s,%.6f,%.6f\n", d.iso().c_str(),
                              tokens[t], base[t] + range, base[t]);
                out << line;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// deterministic gaussian draws (Box-Muller over the project Rng)
// ---------------------------------------------------------------------------

class Gaussian {
public:
    explicit Gaussian(std::uint64_t seed) : rng_(seed) {}
    double next() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        do {
            u1 = rng_.unit();
        } while (u1 <= 0.0);
        double u2 = rng_.unit();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 2.0 * M_PI * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

private:
    Rng rng_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// ---------------------------------------------------------------------------
// independent statistical oracles
// ---------------------------------------------------------------------------

/// Fractional ranks by counting (r = 1 + #smaller + (#equal - 1)/2).
inline std::vector<double> oracle_ranks(const std::vector<double>& v) {
    std::vector<double> out(v.size());
    for (size_t i = 0; i < v.size(); ++i) {
        size_t smaller = 0, equal = 0;
        for (size_t j = 0; j < v.size(); ++j) {
            if (v[j] < v[i]) ++smaller;
            if (v[j] == v[i]) ++equal;
        }
        out[i] = 1.0 + static_cast<double>(smaller) +
                 (static_cast<double>(equal) - 1.0) / 2.0;
    }
    return out;
}

/// Raw-moment Pearson (n*Sxy - Sx*Sy form).
inline double oracle_pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxy = 0, sxx = 0, syy = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxy += x[i] * y[i];
        sxx += x[i] * x[i];
        syy += y[i] * y[i];
    }
    return (n * sxy - sx * sy) /
           std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
}

inline double oracle_spearman(const std::vector<double>& x, const std::vector<double>& y) {
    return oracle_pearson(oracle_ranks(x), oracle_ranks(y));
}

/// Explicit no-ties rank formula 1 - 6*sum(d^2)/(n(n^2-1)); valid only when
/// both inputs are tie-free.
inline double oracle_spearman_formula(const std::vector<double>& x,
                                      const std::vector<double>& y) {
    auto rx = oracle_ranks(x);
    auto ry = oracle_ranks(y);
    double sum_d2 = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        double d = rx[i] - ry[i];
        sum_d2 += d * d;
    }
    double n = static_cast<double>(x.size());
    return 1.0 - 6.0 * sum_d2 / (n * (n * n - 1.0));
}

/// Tie-adjusted Kendall tau-b by full pair enumeration.
inline double oracle_kendall(const std::vector<double>& x, const std::vector<double>& y) {
    double concordant = 0, discordant = 0, ties_x = 0, ties_y = 0;
    const size_t n = x.size();
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = i + 1; j < n; ++j) {
            double dx = x[i] - x[j];
            double dy = y[i] - y[j];
            if (dx == 0 && dy == 0) continue;
            if (dx == 0) ++ties_x;
            else if (dy == 0) ++ties_y;
            else if (dx * dy > 0) ++concordant;
            else ++discordant;
        }
    }
    double n0 = static_cast<double>(n) * (n - 1) / 2.0;
    double n1 = ties_x, n2 = ties_y;
    // pairs tied in both count toward neither margin's untied total
    double joint = n0 - concordant - discordant - ties_x - ties_y;
    return (concordant - discordant) /
           std::sqrt((n0 - (n1 + joint)) * (n0 - (n2 + joint)));
}

/// Pooled standard deviation across runs (the estimator the pipeline must
/// NOT use; kept as the contrast case).
inline double pooled_std(const std::vector<std::vector<double>>& runs) {
    std::vector<double> all;
    for (const auto& r : runs) all.insert(all.end(), r.begin(), r.end());
    double mean = 0;
    for (double v : all) mean += v;
    mean /= static_cast<double>(all.size());
    double ss = 0;
    for (double v : all) ss += (v - mean) * (v - mean);
    return std::sqrt(ss / static_cast<double>(all.size() - 1));
}

} // namespace testutil
