#include "ecbsim/dates.hpp"

#include <cctype>
#include <cstdio>

#include "ecbsim/errors.hpp"

namespace ecbsim {

namespace {

bool all_digits(const std::string& s, size_t from, size_t to) {
    for (size_t i = from; i < to; ++i) {
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
    }
    return true;
}

} // namespace

Date Date::parse_iso(const std::string& text) {
    if (text.size() != 10 || text[4] != '-' || text[7] != '-' ||
        !all_digits(text, 0, 4) || !all_digits(text, 5, 7) || !all_digits(text, 8, 10)) {
        throw DataError("malformed date (expected YYYY-MM-DD): '" + text + "'");
    }
    int y = std::stoi(text.substr(0, 4));
    unsigned m = static_cast<unsigned>(std::stoi(text.substr(5, 2)));
    unsigned d = static_cast<unsigned>(std::stoi(text.substr(8, 2)));
    std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m},
                                    std::chrono::day{d}};
    if (!ymd.ok()) throw DataError("invalid calendar date: '" + text + "'");
    return Date(std::chrono::sys_days{ymd});
}

Date Date::from_ymd(int year, unsigned month, unsigned day) {
    std::chrono::year_month_day ymd{std::chrono::year{year}, std::chrono::month{month},
                                    std::chrono::day{day}};
    if (!ymd.ok()) {
        throw DataError("invalid calendar date: " + std::to_string(year) + "-" +
                        std::to_string(month) + "-" + std::to_string(day));
    }
    return Date(std::chrono::sys_days{ymd});
}

std::string Date::iso() const {
    std::chrono::year_month_day ymd{days_};
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

int Date::year() const {
    return static_cast<int>(std::chrono::year_month_day{days_}.year());
}

unsigned Date::month() const {
    return static_cast<unsigned>(std::chrono::year_month_day{days_}.month());
}

unsigned Date::day() const {
    return static_cast<unsigned>(std::chrono::year_month_day{days_}.day());
}

Date Date::plus_days(int n) const { return Date(days_ + std::chrono::days{n}); }

Date Date::plus_months(int n) const {
    std::chrono::year_month_day ymd{days_};
    std::chrono::year_month ym{ymd.year(), ymd.month()};
    ym += std::chrono::months{n};
    std::chrono::year_month_day shifted{ym.year(), ym.month(), ymd.day()};
    if (!shifted.ok()) {
        // clamp to the last day of the target month
        shifted = std::chrono::year_month_day_last{ym.year(),
                                                   std::chrono::month_day_last{ym.month()}};
    }
    return Date(std::chrono::sys_days{shifted});
}

bool Date::is_weekend() const {
    std::chrono::weekday wd{days_};
    return wd == std::chrono::Saturday || wd == std::chrono::Sunday;
}

std::vector<Date> business_days_from(Date start, int count) {
    std::vector<Date> out;
    out.reserve(static_cast<size_t>(count));
    Date d = start;
    while (static_cast<int>(out.size()) < count) {
        if (!d.is_weekend()) out.push_back(d);
        d = d.plus_days(1);
    }
    return out;
}

} // namespace ecbsim
