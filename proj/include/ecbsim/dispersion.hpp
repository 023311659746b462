#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "ecbsim/corpus.hpp"
#include "ecbsim/dates.hpp"
#include "ecbsim/errors.hpp"
#include "ecbsim/parsing.hpp"

namespace ecbsim::dispersion {

/// Cross-sectional dispersion of one simulation run: sample standard
/// deviation of the agents' rates per tenor, plus valid-row counts.
struct RunDispersion {
    Date event_date;
    int run_index = 0;
    std::map<corpus::Tenor, double> per_tenor;
    std::map<corpus::Tenor, int> n_valid;
};

struct InsufficientRecordsError : ValidationError {
    InsufficientRecordsError(corpus::Tenor tenor, int n)
        : ValidationError("need >= 2 records for tenor " + corpus::tenor_token(tenor) +
                          ", got " + std::to_string(n)),
          tenor(tenor), n(n) {}
    corpus::Tenor tenor;
    int n;
};

struct EmptyInputError : ValidationError {
    EmptyInputError() : ValidationError("no run dispersions to aggregate") {}
};

/// Sample standard deviation (n-1 divisor) of the rates for one tenor within
/// one event/run. Requires >= 2 records of that tenor.
double cross_sectional_std(std::span<const parsing::ForecastRecord> records,
                           corpus::Tenor tenor);

/// Per-tenor dispersion of one parsed run; tenors with fewer than 2 valid
/// records are omitted (their absence shows up in n_valid).
RunDispersion run_dispersion(Date event_date, int run_index,
                             std::span<const parsing::ForecastRecord> records);

struct DispersionCell {
    double value = 0.0;   // mean of run-level standard deviations
    int n_runs = 0;       // runs contributing to this cell
    int n_valid_min = 0;  // smallest per-run valid-record count
};

/// Synthetic disagreement per (event, tenor): run-level standard deviations
/// averaged across runs (std within run first, mean across runs second).
struct DispersionTable {
    std::map<std::pair<Date, corpus::Tenor>, DispersionCell> rows;
    int runs_used = 0;  // configured run count; cells with n_runs below it were flagged
};

DispersionTable build_dispersion_table(const std::vector<RunDispersion>& run_dispersions);

/// CSV export, header "date,tenor,dispersion,n_runs,n_valid_min", preceded by
/// "# run_id: ..." when a run id is given. Deterministic row order.
void write_csv(const DispersionTable& table, const std::string& path,
               const std::string& run_id = "");

DispersionTable read_csv(const std::string& path);

} // namespace ecbsim::dispersion
