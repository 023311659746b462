#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ecbsim/dates.hpp"
#include "ecbsim/errors.hpp"

using ecbsim::Date;

TEST_CASE("iso parse and format round-trip") {
    Date d = Date::parse_iso("2022-07-21");
    CHECK(d.iso() == "2022-07-21");
    CHECK(d.year() == 2022);
    CHECK(d.month() == 7);
    CHECK(d.day() == 21);
}

TEST_CASE("malformed dates rejected") {
    CHECK_THROWS_AS(Date::parse_iso("2022/07/21"), ecbsim::DataError);
    CHECK_THROWS_AS(Date::parse_iso("2022-7-21"), ecbsim::DataError);
    CHECK_THROWS_AS(Date::parse_iso("2022-02-30"), ecbsim::DataError);
    CHECK_THROWS_AS(Date::parse_iso("not-a-date"), ecbsim::DataError);
    CHECK_THROWS_AS(Date::parse_iso(""), ecbsim::DataError);
}

TEST_CASE("ordering and day arithmetic") {
    Date a = Date::parse_iso("2008-10-02");
    CHECK(a.plus_days(1).iso() == "2008-10-03");
    CHECK(a.plus_days(-2).iso() == "2008-09-30");
    CHECK(a < Date::parse_iso("2008-10-03"));
    CHECK(a == Date::parse_iso("2008-10-02"));
}

TEST_CASE("month arithmetic clamps to month end") {
    CHECK(Date::parse_iso("2022-03-31").plus_months(-1).iso() == "2022-02-28");
    CHECK(Date::parse_iso("2020-03-31").plus_months(-1).iso() == "2020-02-29");  // leap
    CHECK(Date::parse_iso("2022-01-15").plus_months(12).iso() == "2023-01-15");
    CHECK(Date::parse_iso("2022-01-15").plus_months(-12).iso() == "2021-01-15");
}

TEST_CASE("weekends") {
    CHECK(Date::parse_iso("2022-07-23").is_weekend());  // Saturday
    CHECK(Date::parse_iso("2022-07-24").is_weekend());  // Sunday
    CHECK_FALSE(Date::parse_iso("2022-07-22").is_weekend());
}

TEST_CASE("business days skip weekends") {
    // Thursday start: Thu, Fri, Mon
    auto days = ecbsim::business_days_from(Date::parse_iso("2022-07-21"), 3);
    REQUIRE(days.size() == 3);
    CHECK(days[0].iso() == "2022-07-21");
    CHECK(days[1].iso() == "2022-07-22");
    CHECK(days[2].iso() == "2022-07-25");

    // Saturday start rolls to Monday
    auto from_sat = ecbsim::business_days_from(Date::parse_iso("2022-07-23"), 1);
    CHECK(from_sat[0].iso() == "2022-07-25");
}
