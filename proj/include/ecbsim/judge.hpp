#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ecbsim/corpus.hpp"
#include "ecbsim/errors.hpp"
#include "ecbsim/parsing.hpp"
#include "ecbsim/prompting.hpp"
#include "ecbsim/provider.hpp"
#include "ecbsim/simulate.hpp"

namespace ecbsim::judge {

/// One completed optimization step. The verdict is absent only when the loop
/// stopped on the correlation threshold before consulting the judge, or when
/// the judge's output stayed malformed after the single re-query.
struct HistoryEntry {
    int iteration = 0;  // strictly increasing from 1
    prompting::PromptSpec prompt;
    double avg_correlation = 0.0;
    std::optional<parsing::JudgeVerdict> verdict;
};

struct OptimizationHistory {
    std::vector<HistoryEntry> entries;
};

enum class StopReason { MaxIterations, ThresholdMet, DriftDetected };

std::string to_string(StopReason r);

struct OptimizationResult {
    OptimizationHistory history;
    prompting::PromptSpec best_prompt;  // argmax of avg_correlation, earliest on ties
    double best_score = 0.0;
    StopReason stop_reason = StopReason::MaxIterations;
};

struct JudgeParseFailureError : DataError {
    explicit JudgeParseFailureError(int iteration)
        : DataError("judge output unparseable at iteration " + std::to_string(iteration) +
                    " (after one re-query)"),
          iteration(iteration) {}
    int iteration;
};

struct OptimizeConfig {
    int max_iterations = 5;
    /// Stop once the average correlation reaches this value. The default is
    /// deliberately unreachable so max_iterations governs.
    double threshold = 1.1;
    sim::SimOptions sim;
    std::string judge_model = "judge-default";
    double judge_temperature = 0.0;
    /// A tenor contributes to the score only with at least this many
    /// dispersion/market pairs.
    int min_pairs_per_tenor = 10;
    /// Optional JSON-lines ledger; when it exists, optimization resumes after
    /// its last complete iteration.
    std::string history_path;
};

/// Score one prompt template: simulate every conference, average the
/// run-level dispersions, and take the unweighted mean of per-tenor Spearman
/// correlations against the market series (tenors below min_pairs excluded).
double score_prompt(const std::vector<corpus::Conference>& conferences,
                    const std::vector<corpus::VolatilityObservation>& market,
                    const prompting::PromptSpec& prompt_template, provider::Client& analyst,
                    const OptimizeConfig& config, const std::string& context_prefix);

/// The iterative judge loop: simulate -> score -> record -> critique ->
/// adopt revision. Stops on the threshold, the iteration cap, or a revision
/// that drifts away from the rate-level table task (drifted revisions are
/// rejected and never scored). Judge requests always run at
/// config.judge_temperature (0.0 by default).
OptimizationResult optimize(const std::vector<corpus::Conference>& train,
                            const std::vector<corpus::VolatilityObservation>& market,
                            const prompting::PromptSpec& initial_prompt,
                            provider::Client& analyst, provider::Client& judge_llm,
                            const OptimizeConfig& config);

/// Score every historical prompt on the held-out set with the identical
/// scoring function. Keyed by iteration.
std::map<int, double> evaluate_prompts_out_of_sample(
    const std::vector<corpus::Conference>& test,
    const std::vector<corpus::VolatilityObservation>& market,
    const OptimizationHistory& history, provider::Client& analyst,
    const OptimizeConfig& config);

/// JSON-lines persistence (one entry per line).
void append_history_entry(const std::string& path, const HistoryEntry& entry);
OptimizationHistory load_history(const std::string& path);

} // namespace ecbsim::judge
