#pragma once

#include <chrono>
#include <compare>
#include <string>
#include <vector>

namespace ecbsim {

/// Calendar date without a time zone. Thin wrapper over std::chrono::sys_days
/// with strict ISO-8601 parsing, month arithmetic for rolling windows, and the
/// weekend-skipping business-day stepping used for post-announcement windows.
/// Holidays are deliberately not modelled; a missing business day in the data
/// is an error upstream, never a silent skip.
class Date {
public:
    Date() = default;

    /// Parse strict "YYYY-MM-DD". Throws DataError on anything else.
    static Date parse_iso(const std::string& text);
    static Date from_ymd(int year, unsigned month, unsigned day);

    std::string iso() const;

    int year() const;
    unsigned month() const;
    unsigned day() const;

    Date plus_days(int n) const;
    /// Calendar-month shift with end-of-month clamping (Mar 31 - 1mo = Feb 28/29).
    Date plus_months(int n) const;

    bool is_weekend() const;

    /// Days since the Unix epoch; handy as a map key.
    long serial() const { return static_cast<long>(days_.time_since_epoch().count()); }

    auto operator<=>(const Date&) const = default;

private:
    explicit Date(std::chrono::sys_days d) : days_(d) {}
    std::chrono::sys_days days_{};
};

/// The first `count` business days on or after `start` (Mon-Fri only).
std::vector<Date> business_days_from(Date start, int count);

} // namespace ecbsim
