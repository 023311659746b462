#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ecbsim/parsing.hpp"
#include "ecbsim/rng.hpp"

using namespace ecbsim;
using namespace ecbsim::parsing;

namespace {

const Date kDate = Date::parse_iso("2022-07-21");

std::string table_header() {
    return "| Date | Trader ID | Tenor | Expected Direction | New Expected Rate (%) | "
           "Confidence (0-100) |\n"
           "|------|-----------|-------|--------------------|-----------------------|----|\n";
}

} // namespace

TEST_CASE("the documented example row parses") {
    std::string raw = table_header() + "| 2022-07-21 | T001 | 3M | Up | 3.15 | 65 |\n";
    ParseReport report = parse_forecast_table(raw, kDate, 1);
    REQUIRE(report.records.size() == 1);
    const auto& r = report.records[0];
    CHECK(r.trader_id == "T001");
    CHECK(r.tenor == corpus::Tenor::M3);
    CHECK(r.direction == Direction::Up);
    CHECK(r.rate == doctest::Approx(3.15));
    CHECK(r.confidence == 65);
    CHECK(r.event_date == kDate);
    CHECK(report.dropped_rows == 0);
}

TEST_CASE("json output has no table") {
    CHECK_THROWS_AS(
        parse_forecast_table(R"({"forecasts": [{"trader": "T001"}]})", kDate, 30),
        NoTableFoundError);
    CHECK_THROWS_AS(parse_forecast_table("I cannot produce forecasts for this text.", kDate,
                                         30),
                    NoTableFoundError);
}

TEST_CASE("tenor and direction normalization") {
    std::string raw = table_header() +
                      "| 2022-07-21 | T001 | 3m | UP | 3.15 | 65 |\n"
                      "| 2022-07-21 | T001 | 2y | down | 2.85% | 80 |\n"
                      "| 2022-07-21 | T001 | 10Y | Unchanged | 3.00 | 70 |\n";
    ParseReport report = parse_forecast_table(raw, kDate, 1);
    REQUIRE(report.records.size() == 3);
    CHECK(report.records[0].tenor == corpus::Tenor::M3);
    CHECK(report.records[1].tenor == corpus::Tenor::Y2);
    CHECK(report.records[1].rate == doctest::Approx(2.85));  // % suffix stripped
    CHECK(report.records[2].tenor == corpus::Tenor::Y10);
    CHECK(report.records[2].direction == Direction::Unchanged);
}

TEST_CASE("anomalies are recorded, never silently dropped") {
    std::string raw = table_header() +
                      "| 2022-07-21 | T001 | 3M | Up | 3.15 | 65 |\n"
                      "| 2022-07-21 | T002 | 5Y | Up | 3.15 | 65 |\n"       // bad tenor
                      "| 2022-07-21 | T003 | 3M | Sideways | 3.15 | 65 |\n" // bad direction
                      "| 2022-07-21 | T004 | 3M | Up | 99.99 | 65 |\n"      // out of bounds
                      "| 2022-07-21 | T005 | 3M | Up | 3.15 | 150 |\n"      // bad confidence
                      "| ... | ... | ... | ... | ... | ... |\n"             // placeholder
                      "| 2022-07-21 | T001 | 3M | Up | 3.20 | 60 |\n";      // duplicate
    ParseReport report = parse_forecast_table(raw, kDate, 2);
    CHECK(report.records.size() == 1);
    CHECK(report.dropped_rows == 6);
    CHECK(report.anomalies.size() == 6);
    CHECK(static_cast<int>(report.records.size()) + report.dropped_rows == 7);
}

TEST_CASE("wrong table date contradicts the expected event") {
    std::string raw = table_header() + "| 2023-01-01 | T001 | 3M | Up | 3.15 | 65 |\n";
    CHECK_THROWS_AS(parse_forecast_table(raw, kDate, 1), WrongDateError);
}

TEST_CASE("placeholder date cells fall back to the expected date") {
    std::string raw = table_header() + "| YYYY-MM-DD | T001 | 3M | Up | 3.15 | 65 |\n";
    ParseReport report = parse_forecast_table(raw, kDate, 1);
    REQUIRE(report.records.size() == 1);
    CHECK(report.records[0].event_date == kDate);
}

TEST_CASE("markdown wrappers and emphasis are tolerated") {
    SUBCASE("code fences") {
        std::string raw = "Here is the table:\n```markdown\n" + table_header() +
                          "| 2022-07-21 | T001 | 3M | Up | 3.15 | 65 |\n```\n";
        CHECK(parse_forecast_table(raw, kDate, 1).records.size() == 1);
    }
    SUBCASE("bold cells") {
        std::string raw =
            table_header() + "| 2022-07-21 | **T001** | **3M** | Up | **3.15** | 65 |\n";
        ParseReport report = parse_forecast_table(raw, kDate, 1);
        REQUIRE(report.records.size() == 1);
        CHECK(report.records[0].trader_id == "T001");
        CHECK(report.records[0].rate == doctest::Approx(3.15));
    }
    SUBCASE("extra rationale column is ignored") {
        std::string raw =
            "| Date | Trader ID | Tenor | Expected Direction | New Expected Rate (%) | "
            "Confidence (0-100) | Rationale |\n"
            "|---|---|---|---|---|---|---|\n"
            "| 2022-07-21 | T001 | 3M | Up | 3.15 | 65 | hawkish tone |\n";
        ParseReport report = parse_forecast_table(raw, kDate, 1);
        REQUIRE(report.records.size() == 1);
        CHECK(report.records[0].confidence == 65);
    }
}

TEST_CASE("strict mode enforces completeness") {
    std::string raw = table_header() + "| 2022-07-21 | T001 | 3M | Up | 3.15 | 65 |\n";
    ParseOptions strict;
    strict.strict = true;
    CHECK_THROWS_AS(parse_forecast_table(raw, kDate, 30, strict), IncompleteTableError);
}

TEST_CASE("lenient completeness check is per tenor") {
    std::string raw = table_header();
    for (int i = 1; i <= 10; ++i) {
        char row[96];
        std::snprintf(row, sizeof(row), "| 2022-07-21 | T%03d | 3M | Up | 3.15 | 65 |\n", i);
        raw += row;
    }
    ParseReport report = parse_forecast_table(raw, kDate, 10);
    CHECK(meets_completeness(report, 10, 0.8) == false);  // 2Y and 10Y missing entirely

    raw += "| 2022-07-21 | T001 | 2Y | Up | 2.85 | 65 |\n";
    for (int i = 1; i <= 10; ++i) {
        char row[96];
        std::snprintf(row, sizeof(row), "| 2022-07-21 | T%03d | 10Y | Up | 3.25 | 65 |\n", i);
        raw += row;
    }
    report = parse_forecast_table(raw, kDate, 10);
    CHECK(meets_completeness(report, 10, 0.8) == false);  // 2Y has 1/10
    CHECK(meets_completeness(report, 10, 0.1) == true);
}

TEST_CASE("unchanged direction with outlying rate is flagged") {
    std::string raw = table_header() +
                      "| 2022-07-21 | T001 | 2Y | Up | 2.00 | 65 |\n"
                      "| 2022-07-21 | T002 | 2Y | Up | 2.02 | 65 |\n"
                      "| 2022-07-21 | T003 | 2Y | Unchanged | 2.01 | 65 |\n"
                      "| 2022-07-21 | T004 | 2Y | Unchanged | 5.00 | 65 |\n";
    ParseReport report = parse_forecast_table(raw, kDate, 4);
    CHECK(report.records.size() == 3);  // T004 flagged
    REQUIRE(report.anomalies.size() == 1);
    CHECK(report.anomalies[0].reason.find("unchanged direction") != std::string::npos);
}

TEST_CASE("round-trip: serialize then reparse yields identical records") {
    std::string raw = table_header() +
                      "| 2022-07-21 | T001 | 3M | Up | 3.15 | 65 |\n"
                      "| 2022-07-21 | T001 | 2Y | Down | 2.85 | 80 |\n"
                      "| 2022-07-21 | T002 | 10Y | Unchanged | 3.00 | 70 |\n";
    ParseReport first = parse_forecast_table(raw, kDate, 2);
    std::string serialized = to_markdown_table(first.records);
    ParseReport second = parse_forecast_table(serialized, kDate, 2);
    CHECK(first.records == second.records);
}

TEST_CASE("property: round-trip on generated tables") {
    Rng rng(99);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<ForecastRecord> records;
        int n = 1 + static_cast<int>(rng.below(40));
        for (int i = 0; i < n; ++i) {
            ForecastRecord r;
            r.event_date = kDate;
            r.trader_id = "T" + std::to_string(100 + i);
            r.tenor = corpus::kAllTenors[rng.below(3)];
            r.direction = static_cast<Direction>(rng.below(2));  // Up/Down only:
            // Unchanged could legitimately be flagged by the median rule
            r.rate = static_cast<double>(rng.below(900)) / 100.0;
            r.confidence = static_cast<int>(rng.below(101));
            records.push_back(r);
        }
        // de-duplicate (trader, tenor) pairs the generator may have produced
        std::vector<ForecastRecord> unique;
        for (const auto& r : records) {
            bool dup = false;
            for (const auto& u : unique) {
                if (u.trader_id == r.trader_id && u.tenor == r.tenor) dup = true;
            }
            if (!dup) unique.push_back(r);
        }
        ParseReport reparsed = parse_forecast_table(to_markdown_table(unique), kDate, n);
        CHECK(reparsed.records == unique);
        CHECK(reparsed.anomalies.empty());
    }
}

TEST_CASE("judge verdict parsing") {
    SUBCASE("clean json") {
        JudgeVerdict v = parse_judge_verdict(
            R"({"critique": "too vague", "revised_prompt": "new prompt", "reasoning": "why"})");
        CHECK(v.critique == "too vague");
        CHECK(v.revised_prompt == "new prompt");
        CHECK(v.reasoning == "why");
    }
    SUBCASE("fenced json with prose around it") {
        std::string raw = "Here is my verdict:\n```json\n"
                          R"({"critique": "c", "revised_prompt": "p", "reasoning": "r"})"
                          "\n```\nLet me know if you need more.";
        JudgeVerdict v = parse_judge_verdict(raw);
        CHECK(v.revised_prompt == "p");
    }
    SUBCASE("nested braces inside strings survive extraction") {
        JudgeVerdict v = parse_judge_verdict(
            R"({"critique": "uses { and }", "revised_prompt": "a {b} c", "reasoning": "r"})");
        CHECK(v.revised_prompt == "a {b} c");
    }
    SUBCASE("missing key") {
        CHECK_THROWS_AS(parse_judge_verdict(R"({"critique": "x", "reasoning": "y"})"),
                        MissingKeyError);
    }
    SUBCASE("empty value counts as missing") {
        CHECK_THROWS_AS(
            parse_judge_verdict(
                R"({"critique": "x", "revised_prompt": "", "reasoning": "y"})"),
            MissingKeyError);
    }
    SUBCASE("no json at all") {
        CHECK_THROWS_AS(parse_judge_verdict("plain refusal text"), NotJsonError);
        CHECK_THROWS_AS(parse_judge_verdict("{broken json"), NotJsonError);
    }
}

TEST_CASE("task drift detection") {
    const std::string baseline =
        "Simulate traders across three tenors (3 months, 2 years, 10 years). Provide a new "
        "expected swap rate (in percent). Output only a markdown table.";
    CHECK_FALSE(detect_task_drift(baseline));

    SUBCASE("basis-point reframing drifts") {
        CHECK(detect_task_drift(
            "Predict the change in basis points of the 10-year OIS rate. Output a single "
            "number like +5."));
    }
    SUBCASE("dropping a tenor drifts") {
        CHECK(detect_task_drift(
            "Simulate traders for the 3-month and 2-year tenors. Provide the rate in "
            "percent. Output a table."));
    }
    SUBCASE("dropping the table output drifts") {
        CHECK(detect_task_drift(
            "For tenors 3M, 2Y and 10Y provide rates in percent as a JSON object."));
    }
    SUBCASE("dropping the percent-level instruction drifts") {
        CHECK(detect_task_drift(
            "For tenors 3M, 2Y and 10Y output a table of directional calls only."));
    }
}
