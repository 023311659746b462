#include "ecbsim/dispersion.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace ecbsim::dispersion {

double cross_sectional_std(std::span<const parsing::ForecastRecord> records,
                           corpus::Tenor tenor) {
    std::vector<double> rates;
    for (const auto& r : records) {
        if (r.tenor == tenor) rates.push_back(r.rate);
    }
    if (rates.size() < 2)
        throw InsufficientRecordsError(tenor, static_cast<int>(rates.size()));

    double mean = 0.0;
    for (double v : rates) mean += v;
    mean /= static_cast<double>(rates.size());
    double ss = 0.0;
    for (double v : rates) ss += (v - mean) * (v - mean);
    return std::sqrt(ss / static_cast<double>(rates.size() - 1));
}

RunDispersion run_dispersion(Date event_date, int run_index,
                             std::span<const parsing::ForecastRecord> records) {
    RunDispersion out;
    out.event_date = event_date;
    out.run_index = run_index;
    for (corpus::Tenor t : corpus::kAllTenors) {
        int n = static_cast<int>(std::count_if(records.begin(), records.end(),
                                               [&](const parsing::ForecastRecord& r) {
                                                   return r.tenor == t;
                                               }));
        out.n_valid[t] = n;
        if (n >= 2) out.per_tenor[t] = cross_sectional_std(records, t);
    }
    return out;
}

DispersionTable build_dispersion_table(const std::vector<RunDispersion>& run_dispersions) {
    if (run_dispersions.empty()) throw EmptyInputError();

    struct Acc {
        double sum = 0.0;
        int n = 0;
        int n_valid_min = 0;
    };
    std::map<std::pair<Date, corpus::Tenor>, Acc> acc;
    int max_runs = 0;
    std::map<long, int> runs_per_event;
    for (const auto& rd : run_dispersions) {
        int& cnt = runs_per_event[rd.event_date.serial()];
        ++cnt;
        max_runs = std::max(max_runs, cnt);
        for (const auto& [tenor, value] : rd.per_tenor) {
            Acc& a = acc[{rd.event_date, tenor}];
            a.sum += value;
            int nv = 0;
            auto it = rd.n_valid.find(tenor);
            if (it != rd.n_valid.end()) nv = it->second;
            a.n_valid_min = a.n == 0 ? nv : std::min(a.n_valid_min, nv);
            a.n += 1;
        }
    }

    DispersionTable table;
    table.runs_used = max_runs;
    for (const auto& [key, a] : acc) {
        table.rows[key] = DispersionCell{a.sum / static_cast<double>(a.n), a.n, a.n_valid_min};
    }
    return table;
}

void write_csv(const DispersionTable& table, const std::string& path,
               const std::string& run_id) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open for writing: " + path);
    if (!run_id.empty()) out << "# run_id: " << run_id << "\n";
    out << "date,tenor,dispersion,n_runs,n_valid_min\n";
    for (const auto& [key, cell] : table.rows) {
        char value[32];
        std::snprintf(value, sizeof(value), "%.6f", cell.value);
        out << key.first.iso() << "," << corpus::tenor_token(key.second) << "," << value << ","
            << cell.n_runs << "," << cell.n_valid_min << "\n";
    }
}

DispersionTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw corpus::MissingFileError(path);

    DispersionTable table;
    std::string line;
    int lineno = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            if (line != "date,tenor,dispersion,n_runs,n_valid_min")
                throw DataError("unexpected dispersion CSV header in " + path + ": '" + line +
                                "'");
            header_seen = true;
            continue;
        }
        std::stringstream ss(line);
        std::string date_s, tenor_s, value_s, runs_s, valid_s;
        if (!std::getline(ss, date_s, ',') || !std::getline(ss, tenor_s, ',') ||
            !std::getline(ss, value_s, ',') || !std::getline(ss, runs_s, ',') ||
            !std::getline(ss, valid_s)) {
            throw corpus::MalformedRecordError(lineno, "expected 5 CSV fields");
        }
        try {
            DispersionCell cell;
            cell.value = std::stod(value_s);
            cell.n_runs = std::stoi(runs_s);
            cell.n_valid_min = std::stoi(valid_s);
            table.rows[{Date::parse_iso(date_s), corpus::tenor_from_token(tenor_s)}] = cell;
            table.runs_used = std::max(table.runs_used, cell.n_runs);
        } catch (const std::exception& e) {
            throw corpus::MalformedRecordError(lineno, e.what());
        }
    }
    if (!header_seen) throw DataError("dispersion CSV has no header: " + path);
    return table;
}

} // namespace ecbsim::dispersion
