#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ecbsim/errors.hpp"

#include <json.hpp>

namespace ecbsim::personas {

enum class RiskAversion { High, Medium, Low };

enum class Bias {
    ConfirmationBias,
    Overconfidence,
    Anchoring,
    Herding,
    LossAversion,
    RecencyBias,
};

enum class Style {
    Fundamentalist,
    Technical,
    SentimentDriven,
    Quantitative,
    NarrativeFocused,
    PolicySkeptic,
};

std::string to_string(RiskAversion r);
std::string to_string(Bias b);
std::string to_string(Style s);

/// One synthetic trader: categorical risk level, 1-2 behavioral biases and
/// exactly one interpretive style.
struct AgentPersona {
    std::string trader_id;  // "T001".."T999", zero-padded, unique
    RiskAversion risk = RiskAversion::Medium;
    std::vector<Bias> biases;  // 1 or 2 distinct entries
    Style style = Style::Fundamentalist;
};

struct PopulationTooSmallError : ValidationError {
    explicit PopulationTooSmallError(int n)
        : ValidationError("population of " + std::to_string(n) +
                          " cannot cover all 6 interpretation styles (need >= 6)") {}
};

/// Deterministic population of n personas. The first personas walk through
/// every style and risk level (so coverage holds for n >= 6); the remainder
/// are drawn from the seeded generator. Pure function of (seed, n).
std::vector<AgentPersona> generate_population(std::uint64_t seed, int n);

/// One-line prompt description, e.g.
/// "T007: Risk Aversion: Low; Biases: Anchoring, Herding; Style: Quantitative".
std::string describe(const AgentPersona& p);

nlohmann::json to_json(const std::vector<AgentPersona>& population);

} // namespace ecbsim::personas
