#include "ecbsim/personas.hpp"

#include <array>
#include <cstdio>

#include "ecbsim/rng.hpp"

namespace ecbsim::personas {

namespace {

constexpr std::array<RiskAversion, 3> kRisks{RiskAversion::High, RiskAversion::Medium,
                                             RiskAversion::Low};
constexpr std::array<Style, 6> kStyles{Style::Fundamentalist,   Style::Technical,
                                       Style::SentimentDriven,  Style::Quantitative,
                                       Style::NarrativeFocused, Style::PolicySkeptic};
constexpr std::array<Bias, 6> kBiases{Bias::ConfirmationBias, Bias::Overconfidence,
                                      Bias::Anchoring,        Bias::Herding,
                                      Bias::LossAversion,     Bias::RecencyBias};

} // namespace

std::string to_string(RiskAversion r) {
    switch (r) {
        case RiskAversion::High: return "High";
        case RiskAversion::Medium: return "Medium";
        case RiskAversion::Low: return "Low";
    }
    return "?";
}

std::string to_string(Bias b) {
    switch (b) {
        case Bias::ConfirmationBias: return "Confirmation Bias";
        case Bias::Overconfidence: return "Overconfidence";
        case Bias::Anchoring: return "Anchoring";
        case Bias::Herding: return "Herding";
        case Bias::LossAversion: return "Loss Aversion";
        case Bias::RecencyBias: return "Recency Bias";
    }
    return "?";
}

std::string to_string(Style s) {
    switch (s) {
        case Style::Fundamentalist: return "Fundamentalist";
        case Style::Technical: return "Technical";
        case Style::SentimentDriven: return "Sentiment-driven";
        case Style::Quantitative: return "Quantitative";
        case Style::NarrativeFocused: return "Narrative-focused";
        case Style::PolicySkeptic: return "Policy-skeptic";
    }
    return "?";
}

std::vector<AgentPersona> generate_population(std::uint64_t seed, int n) {
    if (n < static_cast<int>(kStyles.size())) throw PopulationTooSmallError(n);

    Rng rng(seed);
    std::vector<AgentPersona> out;
    out.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        AgentPersona p;
        char buf[16];
        std::snprintf(buf, sizeof(buf), "T%03d", i + 1);
        p.trader_id = buf;
        // stratified round-robin first, random fill afterwards
        p.style = i < static_cast<int>(kStyles.size())
                      ? kStyles[static_cast<size_t>(i)]
                      : kStyles[rng.below(kStyles.size())];
        p.risk = i < static_cast<int>(kRisks.size())
                     ? kRisks[static_cast<size_t>(i)]
                     : kRisks[rng.below(kRisks.size())];
        size_t first = rng.below(kBiases.size());
        p.biases.push_back(kBiases[first]);
        if (rng.below(2) == 1) {
            size_t second = rng.below(kBiases.size() - 1);
            if (second >= first) ++second;
            p.biases.push_back(kBiases[second]);
        }
        out.push_back(std::move(p));
    }
    return out;
}

std::string describe(const AgentPersona& p) {
    std::string biases;
    for (size_t i = 0; i < p.biases.size(); ++i) {
        if (i > 0) biases += ", ";
        biases += to_string(p.biases[i]);
    }
    return p.trader_id + ": Risk Aversion: " + to_string(p.risk) + "; Biases: " + biases +
           "; Style: " + to_string(p.style);
}

nlohmann::json to_json(const std::vector<AgentPersona>& population) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& p : population) {
        nlohmann::json biases = nlohmann::json::array();
        for (Bias b : p.biases) biases.push_back(to_string(b));
        arr.push_back({{"trader_id", p.trader_id},
                       {"risk_aversion", to_string(p.risk)},
                       {"biases", biases},
                       {"style", to_string(p.style)}});
    }
    return arr;
}

} // namespace ecbsim::personas
