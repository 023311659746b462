#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ecbsim/personas.hpp"
#include "ecbsim/prompting.hpp"
#include "testutil.hpp"

using namespace ecbsim;
using namespace ecbsim::prompting;

namespace {

corpus::Conference conference_on(const std::string& iso, const std::string& text) {
    corpus::Conference c;
    c.date = Date::parse_iso(iso);
    c.id = "conf-" + iso;
    c.transcript = text;
    c.source_path = "(test)";
    return c;
}

const std::string kRegistryPath = std::string(ECBSIM_DATA_DIR) + "/perturbations.jsonl";

} // namespace

TEST_CASE("zero-shot render: date substitution, sections, transcript") {
    auto population = personas::generate_population(42, 30);
    auto target = conference_on("2022-07-21", "The council raised its key rates today.");
    PromptSpec spec = render_zero_shot(target, population);

    CHECK(spec.kind == PromptKind::ZeroShot);
    CHECK(spec.body.find("available as of 2022-07-21") != std::string::npos);
    for (const char* section :
         {"Context:", "Trader Characteristics:", "Task:", "Output:", "Guidelines:"}) {
        CHECK(spec.body.find(section) != std::string::npos);
    }
    CHECK(spec.body.find("Expected Direction") != std::string::npos);
    CHECK(spec.body.find("Confidence") != std::string::npos);
    CHECK(spec.body.find(target.transcript) != std::string::npos);
    CHECK(spec.body.find("T001:") != std::string::npos);  // roster embedded
    CHECK(spec.body.find("[date]") == std::string::npos);
}

TEST_CASE("empty persona list falls back to delegated characteristics") {
    auto target = conference_on("2022-07-21", "Transcript body.");
    PromptSpec spec = render_zero_shot(target, {});
    CHECK(spec.body.find("Assign these characteristics yourself") != std::string::npos);
    CHECK(spec.body.find("Expected Direction") != std::string::npos);
}

TEST_CASE("rendering is a pure function of its inputs") {
    auto population = personas::generate_population(42, 30);
    auto target = conference_on("2022-07-21", "Same text.");
    CHECK(render_zero_shot(target, population).body ==
          render_zero_shot(target, population).body);
}

TEST_CASE("few-shot renders exemplars most-recent-last") {
    auto population = personas::generate_population(42, 12);
    auto target = conference_on("2022-07-21", "Target transcript.");
    FewShotContext context;
    for (const char* iso : {"2022-04-14", "2022-06-09", "2022-07-07"}) {
        Exemplar ex;
        ex.conference = conference_on(iso, std::string("Earlier conference of ") + iso);
        ex.market_disagreement[corpus::Tenor::M3] = 0.04;
        ex.market_disagreement[corpus::Tenor::Y2] = 0.09;
        ex.market_disagreement[corpus::Tenor::Y10] = 0.113;
        context.exemplars.push_back(std::move(ex));
    }
    PromptSpec spec = render_few_shot(target, context, population);
    CHECK(spec.kind == PromptKind::FewShot);

    size_t p1 = spec.body.find("2022-04-14");
    size_t p2 = spec.body.find("2022-06-09");
    size_t p3 = spec.body.find("2022-07-07");
    REQUIRE(p1 != std::string::npos);
    REQUIRE(p2 != std::string::npos);
    REQUIRE(p3 != std::string::npos);
    CHECK(p1 < p2);
    CHECK(p2 < p3);
    CHECK(spec.body.find("2Y: 0.09") != std::string::npos);
    CHECK(spec.body.find("10Y: 0.11") != std::string::npos);  // 2-decimal formatting
}

TEST_CASE("few-shot boundaries") {
    auto population = personas::generate_population(42, 12);
    auto target = conference_on("2022-07-21", "Target transcript.");

    SUBCASE("no history is an error") {
        CHECK_THROWS_AS(render_few_shot(target, FewShotContext{}, population),
                        NoHistoryError);
    }
    SUBCASE("two priors render two exemplars without error") {
        FewShotContext context;
        for (const char* iso : {"2022-06-09", "2022-07-07"}) {
            Exemplar ex;
            ex.conference = conference_on(iso, "Earlier text.");
            ex.market_disagreement[corpus::Tenor::Y2] = 0.10;
            context.exemplars.push_back(std::move(ex));
        }
        PromptSpec spec = render_few_shot(target, context, population);
        CHECK(spec.body.find("Example 1") != std::string::npos);
        CHECK(spec.body.find("Example 2") != std::string::npos);
        CHECK(spec.body.find("Example 3") == std::string::npos);
    }
    SUBCASE("exemplar dated after the target is rejected") {
        FewShotContext context;
        Exemplar ex;
        ex.conference = conference_on("2022-09-08", "Future text.");
        context.exemplars.push_back(std::move(ex));
        CHECK_THROWS_AS(render_few_shot(target, context, population), ValidationError);
    }
}

TEST_CASE("leakage guard: exemplar dates precede the target date") {
    auto population = personas::generate_population(42, 12);
    auto target = conference_on("2022-07-21", "Target transcript.");
    FewShotContext context;
    Exemplar ex;
    ex.conference = conference_on("2022-06-09", "Earlier text.");
    ex.market_disagreement[corpus::Tenor::Y2] = 0.10;
    context.exemplars.push_back(std::move(ex));
    PromptSpec spec = render_few_shot(target, context, population);

    CHECK_FALSE(has_future_dates(spec.body, target.date));
    auto dates = scan_iso_dates(spec.body);
    CHECK(!dates.empty());
    for (Date d : dates) CHECK(d <= target.date);

    // a smuggled future date is caught
    CHECK(has_future_dates(spec.body + " as seen on 2022-09-08", target.date));
}

TEST_CASE("iso date scanner ignores near-matches") {
    auto dates = scan_iso_dates("v1.2022-07-213 and 12022-07-21 but 2022-07-21 is real; "
                                "2022-13-01 is not a date");
    REQUIRE(dates.size() == 1);
    CHECK(dates[0].iso() == "2022-07-21");
}

TEST_CASE("judge input embeds prompt, score and history digest") {
    auto population = personas::generate_population(42, 30);
    PromptSpec current = zero_shot_template(population);

    SUBCASE("score and prompt verbatim, empty history") {
        std::string text = render_judge_input(current, 0.47, {});
        CHECK(text.find("0.47") != std::string::npos);
        CHECK(text.find(current.body) != std::string::npos);
        CHECK(text.find("(none)") != std::string::npos);
    }
    SUBCASE("two history entries listed in order") {
        std::vector<HistoryDigestEntry> history{{1, 0.47, "too vague"},
                                                {2, 0.58, "tie ambiguity to spread"}};
        std::string text = render_judge_input(current, 0.31, history);
        size_t p1 = text.find("iteration 1");
        size_t p2 = text.find("iteration 2");
        REQUIRE(p1 != std::string::npos);
        REQUIRE(p2 != std::string::npos);
        CHECK(p1 < p2);
    }
    SUBCASE("score outside [-1, 1] rejected") {
        CHECK_THROWS_AS(render_judge_input(current, 1.5, {}), ValidationError);
        CHECK_THROWS_AS(render_judge_input(current, -1.5, {}), ValidationError);
    }
}

TEST_CASE("perturbation registry: appendix substitutions") {
    auto registry = PerturbationRegistry::load(kRegistryPath);
    REQUIRE(registry.size() == 15);
    auto population = personas::generate_population(42, 30);
    PromptSpec base = zero_shot_template(population);

    SUBCASE("variation 1: individual traders -> distinct market participants") {
        PromptSpec v = registry.apply(base, 1);
        CHECK(v.body.find("distinct market participants") != std::string::npos);
        CHECK(v.body.find("individual traders") == std::string::npos);
        CHECK(v.kind == PromptKind::Perturbation);
        CHECK(v.variation_id == 1);
    }
    SUBCASE("variation 13: risk tolerance relabeling") {
        PromptSpec v = registry.apply(base, 13);
        CHECK(v.body.find("Risk Tolerance: Conservative/Moderate/Aggressive") !=
              std::string::npos);
        CHECK(v.body.find("Risk Aversion: High/Medium/Low") == std::string::npos);
        // roster lines are relabeled too
        CHECK(v.body.find("Risk Aversion:") == std::string::npos);
    }
    SUBCASE("variation 16 is unknown") {
        CHECK_THROWS_AS(registry.apply(base, 16), UnknownVariationError);
        CHECK_THROWS_AS(registry.apply(base, 0), UnknownVariationError);
    }
    SUBCASE("intensities match the registry split") {
        int minor = 0, medium = 0;
        for (int id : registry.ids()) {
            const auto& v = registry.variation(id);
            if (v.intensity == "minor") ++minor;
            else ++medium;
            if (v.intensity == "medium") CHECK(v.reconstruction);
        }
        CHECK(minor == 10);
        CHECK(medium == 5);
    }
}

TEST_CASE("perturbations are idempotent") {
    auto registry = PerturbationRegistry::load(kRegistryPath);
    auto population = personas::generate_population(42, 30);
    PromptSpec base = zero_shot_template(population);
    for (int id : registry.ids()) {
        PromptSpec once = registry.apply(base, id);
        PromptSpec again = registry.apply(PromptSpec{PromptKind::ZeroShot, 0, 0, once.body,
                                                     once.version_tag},
                                          id);
        CHECK_MESSAGE(once.body == again.body, "variation ", id, " not idempotent");
    }
}

TEST_CASE("perturbed templates still materialize into working prompts") {
    auto registry = PerturbationRegistry::load(kRegistryPath);
    auto population = personas::generate_population(42, 30);
    PromptSpec base = zero_shot_template(population);
    auto target = conference_on("2022-07-21", "Transcript body here.");
    for (int id : registry.ids()) {
        PromptSpec v = registry.apply(base, id);
        std::string body = materialize(v.body, target);
        CHECK(body.find("2022-07-21") != std::string::npos);
        CHECK(body.find("Transcript body here.") != std::string::npos);
    }
}
