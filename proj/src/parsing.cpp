#include "ecbsim/parsing.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <sstream>

#include <json.hpp>

namespace ecbsim::parsing {

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

/// Strip markdown emphasis and code markup from a cell.
std::string clean_cell(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        if (c == '*' || c == '`' || c == '_') continue;
        out.push_back(c);
    }
    return trim(out);
}

std::vector<std::string> split_row(const std::string& line) {
    // "| a | b |" -> {"a", "b"}; leading/trailing empties from the outer pipes
    // are dropped, interior empties kept (they are real empty cells).
    std::vector<std::string> cells;
    std::string cur;
    for (size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '|') {
            cells.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(line[i]);
        }
    }
    cells.push_back(cur);
    if (!cells.empty() && trim(cells.front()).empty()) cells.erase(cells.begin());
    if (!cells.empty() && trim(cells.back()).empty()) cells.pop_back();
    for (auto& c : cells) c = clean_cell(c);
    return cells;
}

bool is_separator_row(const std::vector<std::string>& cells) {
    if (cells.empty()) return false;
    for (const auto& c : cells) {
        if (c.empty()) return false;
        for (char ch : c) {
            if (ch != '-' && ch != ':' && ch != ' ') return false;
        }
    }
    return true;
}

std::optional<corpus::Tenor> parse_tenor(const std::string& cell) {
    std::string t = lower(cell);
    if (t == "3m" || t == "3-month" || t == "3 month" || t == "3 months" || t == "3mo")
        return corpus::Tenor::M3;
    if (t == "2y" || t == "2-year" || t == "2 year" || t == "2 years" || t == "2yr")
        return corpus::Tenor::Y2;
    if (t == "10y" || t == "10-year" || t == "10 year" || t == "10 years" || t == "10yr")
        return corpus::Tenor::Y10;
    return std::nullopt;
}

std::optional<Direction> parse_direction(const std::string& cell) {
    std::string d = lower(cell);
    if (d == "up") return Direction::Up;
    if (d == "down") return Direction::Down;
    if (d == "unchanged") return Direction::Unchanged;
    return std::nullopt;
}

std::optional<double> parse_number(std::string cell) {
    cell = trim(cell);
    if (!cell.empty() && cell.back() == '%') cell = trim(cell.substr(0, cell.size() - 1));
    if (cell.empty()) return std::nullopt;
    // locale-independent: digits, sign, single '.' only
    size_t i = (cell[0] == '+' || cell[0] == '-') ? 1 : 0;
    bool dot = false, digit = false;
    for (; i < cell.size(); ++i) {
        if (cell[i] == '.') {
            if (dot) return std::nullopt;
            dot = true;
        } else if (std::isdigit(static_cast<unsigned char>(cell[i]))) {
            digit = true;
        } else {
            return std::nullopt;
        }
    }
    if (!digit) return std::nullopt;
    try {
        return std::stod(cell);
    } catch (const std::out_of_range&) {
        return std::nullopt;
    }
}

double round2(double v) { return std::round(v * 100.0) / 100.0; }

bool valid_trader_token(const std::string& s) {
    if (s.empty()) return false;
    for (char c : s) {
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-') return false;
    }
    // require at least one alphanumeric so "---" or "..." never passes
    return std::any_of(s.begin(), s.end(),
                       [](unsigned char c) { return std::isalnum(c) != 0; });
}

struct ColumnMap {
    int date = -1, trader = -1, tenor = -1, direction = -1, rate = -1, confidence = -1;
};

ColumnMap map_columns(const std::vector<std::string>& header) {
    ColumnMap m;
    for (int i = 0; i < static_cast<int>(header.size()); ++i) {
        std::string h = lower(header[static_cast<size_t>(i)]);
        if (m.date < 0 && h.find("date") != std::string::npos) m.date = i;
        else if (m.trader < 0 && h.find("trader") != std::string::npos) m.trader = i;
        else if (m.tenor < 0 && h.find("tenor") != std::string::npos) m.tenor = i;
        else if (m.direction < 0 && (h.find("direction") != std::string::npos ||
                                     h.find("call") != std::string::npos))
            m.direction = i;
        else if (m.rate < 0 && h.find("rate") != std::string::npos) m.rate = i;
        else if (m.confidence < 0 && (h.find("confidence") != std::string::npos ||
                                      h.find("conviction") != std::string::npos ||
                                      h.find("certainty") != std::string::npos))
            m.confidence = i;
    }
    // positional fallback for the canonical layout
    if (m.direction < 0 && m.tenor >= 0) m.direction = m.tenor + 1;
    if (m.rate < 0 && m.direction >= 0) m.rate = m.direction + 1;
    if (m.confidence < 0 && m.rate >= 0) m.confidence = m.rate + 1;
    return m;
}

} // namespace

std::string to_string(Direction d) {
    switch (d) {
        case Direction::Up: return "Up";
        case Direction::Down: return "Down";
        case Direction::Unchanged: return "Unchanged";
    }
    return "?";
}

ParseReport parse_forecast_table(const std::string& raw, Date expected_date,
                                 int expected_traders, const ParseOptions& options) {
    if (raw.empty()) throw ValidationError("empty model output");

    // drop code-fence lines, keep their content
    std::vector<std::string> lines;
    {
        std::istringstream ss(raw);
        std::string line;
        while (std::getline(ss, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (trim(line).rfind("```", 0) == 0) continue;
            lines.push_back(line);
        }
    }

    // locate the first table whose header names a trader and a tenor column
    size_t header_idx = lines.size();
    ColumnMap cols;
    for (size_t i = 0; i < lines.size(); ++i) {
        std::string t = trim(lines[i]);
        if (t.empty() || t[0] != '|') continue;
        auto cells = split_row(lines[i]);
        if (cells.size() < 4 || is_separator_row(cells)) continue;
        ColumnMap m = map_columns(cells);
        if (m.trader >= 0 && m.tenor >= 0) {
            header_idx = i;
            cols = m;
            break;
        }
    }
    if (header_idx == lines.size()) throw NoTableFoundError();

    ParseReport report;
    int data_row = 0;
    std::optional<Date> contradicting;
    for (size_t i = header_idx + 1; i < lines.size(); ++i) {
        std::string t = trim(lines[i]);
        if (t.empty() || t[0] != '|') break;  // table ended
        auto cells = split_row(lines[i]);
        if (is_separator_row(cells)) continue;
        ++data_row;

        auto anomaly = [&](const std::string& reason) {
            report.anomalies.push_back(Anomaly{data_row, trim(lines[i]), reason});
        };

        int needed = std::max({cols.trader, cols.tenor, cols.direction, cols.rate,
                               cols.confidence});
        if (static_cast<int>(cells.size()) <= needed) {
            anomaly("too few columns");
            continue;
        }

        ForecastRecord rec;
        rec.event_date = expected_date;
        if (cols.date >= 0 && cols.date < static_cast<int>(cells.size())) {
            const std::string& dc = cells[static_cast<size_t>(cols.date)];
            if (dc.size() == 10 && dc[4] == '-' && dc[7] == '-') {
                try {
                    Date d = Date::parse_iso(dc);
                    if (d != expected_date && !contradicting) contradicting = d;
                } catch (const DataError&) {
                    // non-date content in the date cell; tolerated (placeholder rows)
                }
            }
        }

        rec.trader_id = cells[static_cast<size_t>(cols.trader)];
        if (!valid_trader_token(rec.trader_id)) {
            anomaly("invalid trader id");
            continue;
        }

        auto tenor = parse_tenor(cells[static_cast<size_t>(cols.tenor)]);
        if (!tenor) {
            anomaly("unknown tenor '" + cells[static_cast<size_t>(cols.tenor)] + "'");
            continue;
        }
        rec.tenor = *tenor;

        auto direction = parse_direction(cells[static_cast<size_t>(cols.direction)]);
        if (!direction) {
            anomaly("unknown direction '" + cells[static_cast<size_t>(cols.direction)] + "'");
            continue;
        }
        rec.direction = *direction;

        auto rate = parse_number(cells[static_cast<size_t>(cols.rate)]);
        if (!rate || !std::isfinite(*rate)) {
            anomaly("unparseable rate");
            continue;
        }
        rec.rate = round2(*rate);
        if (rec.rate < options.rate_min || rec.rate > options.rate_max) {
            anomaly("rate outside plausibility bounds");
            continue;
        }

        auto conf = parse_number(cells[static_cast<size_t>(cols.confidence)]);
        if (!conf) {
            anomaly("unparseable confidence");
            continue;
        }
        int c = static_cast<int>(std::lround(*conf));
        if (c < 0 || c > 100) {
            anomaly("confidence outside [0, 100]");
            continue;
        }
        rec.confidence = c;

        bool dup = std::any_of(report.records.begin(), report.records.end(),
                               [&](const ForecastRecord& r) {
                                   return r.trader_id == rec.trader_id && r.tenor == rec.tenor;
                               });
        if (dup) {
            anomaly("duplicate (trader, tenor) row");
            continue;
        }
        report.records.push_back(std::move(rec));
    }

    if (contradicting) throw WrongDateError(*contradicting);

    // direction-consistency flag: an Unchanged rate far from the run's
    // per-tenor median is excluded as an anomaly (never mutated)
    if (options.unchanged_epsilon > 0.0) {
        std::map<corpus::Tenor, std::vector<double>> by_tenor;
        for (const auto& r : report.records) by_tenor[r.tenor].push_back(r.rate);
        std::map<corpus::Tenor, double> median;
        for (auto& [tenor, rates] : by_tenor) {
            std::sort(rates.begin(), rates.end());
            size_t n = rates.size();
            median[tenor] = n % 2 ? rates[n / 2] : 0.5 * (rates[n / 2 - 1] + rates[n / 2]);
        }
        std::vector<ForecastRecord> kept;
        kept.reserve(report.records.size());
        for (auto& r : report.records) {
            if (r.direction == Direction::Unchanged &&
                std::abs(r.rate - median[r.tenor]) > options.unchanged_epsilon) {
                char buf[96];
                std::snprintf(buf, sizeof(buf),
                              "unchanged direction but rate %.2f deviates from tenor median %.2f",
                              r.rate, median[r.tenor]);
                report.anomalies.push_back(Anomaly{0, r.trader_id + " " +
                                                          corpus::tenor_token(r.tenor),
                                                   buf});
            } else {
                kept.push_back(std::move(r));
            }
        }
        report.records = std::move(kept);
    }

    report.dropped_rows = static_cast<int>(report.anomalies.size());

    if (options.strict) {
        int expected_rows = expected_traders * static_cast<int>(corpus::kAllTenors.size());
        if (static_cast<int>(report.records.size()) != expected_rows)
            throw IncompleteTableError(static_cast<int>(report.records.size()), expected_rows);
    }
    return report;
}

std::string to_markdown_table(const std::vector<ForecastRecord>& records) {
    std::string out =
        "| Date | Trader ID | Tenor | Expected Direction | New Expected Rate (%) | Confidence "
        "(0-100) |\n"
        "|------|-----------|-------|--------------------|-----------------------|------------"
        "--------|\n";
    for (const auto& r : records) {
        char rate[32];
        std::snprintf(rate, sizeof(rate), "%.2f", r.rate);
        out += "| " + r.event_date.iso() + " | " + r.trader_id + " | " +
               corpus::tenor_token(r.tenor) + " | " + to_string(r.direction) + " | " + rate +
               " | " + std::to_string(r.confidence) + " |\n";
    }
    return out;
}

bool meets_completeness(const ParseReport& report, int expected_traders, double min_fraction) {
    for (corpus::Tenor t : corpus::kAllTenors) {
        int n = static_cast<int>(std::count_if(report.records.begin(), report.records.end(),
                                               [&](const ForecastRecord& r) {
                                                   return r.tenor == t;
                                               }));
        if (static_cast<double>(n) <
            min_fraction * static_cast<double>(expected_traders) - 1e-9)
            return false;
    }
    return true;
}

JudgeVerdict parse_judge_verdict(const std::string& raw) {
    if (raw.empty()) throw ValidationError("empty judge output");

    // find the first balanced JSON object, quote- and escape-aware
    size_t start = raw.find('{');
    std::string candidate;
    while (start != std::string::npos) {
        int depth = 0;
        bool in_string = false, escaped = false;
        for (size_t i = start; i < raw.size(); ++i) {
            char c = raw[i];
            if (in_string) {
                if (escaped) escaped = false;
                else if (c == '\\') escaped = true;
                else if (c == '"') in_string = false;
            } else if (c == '"') {
                in_string = true;
            } else if (c == '{') {
                ++depth;
            } else if (c == '}') {
                if (--depth == 0) {
                    candidate = raw.substr(start, i - start + 1);
                    break;
                }
            }
        }
        if (!candidate.empty()) break;
        start = raw.find('{', start + 1);
    }
    if (candidate.empty()) throw NotJsonError();

    nlohmann::json obj = nlohmann::json::parse(candidate, nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) throw NotJsonError();

    JudgeVerdict v;
    for (const char* key : {"critique", "revised_prompt", "reasoning"}) {
        if (!obj.contains(key) || !obj[key].is_string() ||
            obj[key].get<std::string>().empty())
            throw MissingKeyError(key);
    }
    v.critique = obj["critique"].get<std::string>();
    v.revised_prompt = obj["revised_prompt"].get<std::string>();
    v.reasoning = obj["reasoning"].get<std::string>();
    return v;
}

bool detect_task_drift(const std::string& revised_prompt) {
    std::string text = lower(revised_prompt);

    auto contains_any = [&](std::initializer_list<const char*> tokens) {
        for (const char* tok : tokens) {
            if (text.find(tok) != std::string::npos) return true;
        }
        return false;
    };

    bool has_3m = contains_any({"3m", "3-month", "3 month", "3 months", "three-month"});
    bool has_2y = contains_any({"2y", "2-year", "2 year", "2 years", "two-year"});
    bool has_10y = contains_any({"10y", "10-year", "10 year", "10 years", "ten-year"});
    bool rate_in_percent = text.find("rate") != std::string::npos &&
                           (text.find("percent") != std::string::npos ||
                            text.find('%') != std::string::npos);
    bool tabular = text.find("table") != std::string::npos;

    return !(has_3m && has_2y && has_10y && rate_in_percent && tabular);
}

} // namespace ecbsim::parsing
