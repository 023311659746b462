#include "ecbsim/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace ecbsim::corpus {

using nlohmann::json;

std::string tenor_token(Tenor t) {
    switch (t) {
        case Tenor::M3: return "3M";
        case Tenor::Y2: return "2Y";
        case Tenor::Y10: return "10Y";
    }
    return "?";
}

Tenor tenor_from_token(std::string_view token) {
    std::string up;
    up.reserve(token.size());
    for (char c : token) up.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    if (up == "3M") return Tenor::M3;
    if (up == "2Y") return Tenor::Y2;
    if (up == "10Y") return Tenor::Y10;
    throw DataError("unknown tenor token: '" + std::string(token) + "'");
}

std::vector<Conference> load_conferences(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingFileError(path);

    std::vector<Conference> out;
    std::set<long> seen;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json rec = json::parse(line, nullptr, false);
        if (rec.is_discarded() || !rec.is_object())
            throw MalformedRecordError(lineno, "not a JSON object");
        if (!rec.contains("date") || !rec["date"].is_string())
            throw MalformedRecordError(lineno, "missing string field 'date'");
        if (!rec.contains("text") || !rec["text"].is_string())
            throw MalformedRecordError(lineno, "missing string field 'text'");

        Date date;
        try {
            date = Date::parse_iso(rec["date"].get<std::string>());
        } catch (const DataError& e) {
            throw MalformedRecordError(lineno, e.what());
        }
        std::string text = rec["text"].get<std::string>();
        if (text.empty()) throw EmptyTranscriptError(date);
        if (!seen.insert(date.serial()).second) throw DuplicateDateError(date);

        out.push_back(Conference{"conf-" + date.iso(), date, std::move(text), path});
    }
    std::sort(out.begin(), out.end(),
              [](const Conference& a, const Conference& b) { return a.date < b.date; });
    return out;
}

void write_conferences(const std::string& path, const std::vector<Conference>& conferences) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open for writing: " + path);
    for (const auto& c : conferences) {
        json rec{{"date", c.date.iso()}, {"text", c.transcript}};
        out << rec.dump() << "\n";
    }
}

std::vector<DailyRateRange> load_rate_ranges(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingFileError(path);

    std::string line;
    if (!std::getline(in, line)) throw DataError("empty rate file: " + path);
    // tolerate a trailing \r from CRLF files
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "date,tenor,high,low")
        throw DataError("unexpected rate CSV header: '" + line + "'");

    std::vector<DailyRateRange> out;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string date_s, tenor_s, high_s, low_s;
        if (!std::getline(ss, date_s, ',') || !std::getline(ss, tenor_s, ',') ||
            !std::getline(ss, high_s, ',') || !std::getline(ss, low_s)) {
            throw MalformedRecordError(lineno, "expected 4 CSV fields");
        }
        DailyRateRange r;
        try {
            r.date = Date::parse_iso(date_s);
            r.tenor = tenor_from_token(tenor_s);
            r.high = std::stod(high_s);
            r.low = std::stod(low_s);
        } catch (const std::exception& e) {
            throw MalformedRecordError(lineno, e.what());
        }
        if (!std::isfinite(r.high) || !std::isfinite(r.low))
            throw MalformedRecordError(lineno, "non-finite rate value");
        if (r.high < r.low)
            throw MalformedRecordError(lineno, "high < low");
        out.push_back(r);
    }
    return out;
}

RateRangeSeries::RateRangeSeries(const std::vector<DailyRateRange>& ranges) {
    for (const auto& r : ranges) {
        // last record wins on duplicate (date, tenor) keys
        ranges_[{r.date.serial(), r.tenor}] = {r.high, r.low};
    }
}

bool RateRangeSeries::has(Date d, Tenor t) const {
    return ranges_.count({d.serial(), t}) > 0;
}

VolatilityObservation RateRangeSeries::event_volatility(Date event_date, Tenor tenor,
                                                        int window_days) const {
    if (window_days < 1 || window_days > 3)
        throw ValidationError("window_days must be 1, 2 or 3 (got " +
                              std::to_string(window_days) + ")");
    double sum = 0.0;
    for (Date d : business_days_from(event_date, window_days)) {
        auto it = ranges_.find({d.serial(), tenor});
        if (it == ranges_.end()) throw MissingDayError(d, tenor);
        sum += it->second.first - it->second.second;
    }
    return VolatilityObservation{event_date, tenor, window_days,
                                 sum / static_cast<double>(window_days)};
}

std::vector<VolatilityObservation> RateRangeSeries::observations(
    const std::vector<Conference>& events, int window_days) const {
    std::vector<VolatilityObservation> out;
    for (const auto& ev : events) {
        for (Tenor t : kAllTenors) {
            try {
                out.push_back(event_volatility(ev.date, t, window_days));
            } catch (const MissingDayError&) {
                // pair dropped; effective N per tenor is reported by callers
            }
        }
    }
    return out;
}

CorpusSplit chronological_split(const std::vector<Conference>& conferences,
                                double train_fraction) {
    if (conferences.empty()) throw EmptyCorpusError();
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw ValidationError("train_fraction must lie strictly between 0 and 1");

    std::vector<Conference> sorted = conferences;
    std::sort(sorted.begin(), sorted.end(),
              [](const Conference& a, const Conference& b) { return a.date < b.date; });

    size_t train_n = static_cast<size_t>(
        std::floor(train_fraction * static_cast<double>(sorted.size())));
    CorpusSplit split;
    split.train.assign(sorted.begin(), sorted.begin() + static_cast<long>(train_n));
    split.test.assign(sorted.begin() + static_cast<long>(train_n), sorted.end());
    return split;
}

} // namespace ecbsim::corpus
