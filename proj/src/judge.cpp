#include "ecbsim/judge.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "ecbsim/evaluation.hpp"

namespace ecbsim::judge {

using nlohmann::json;

std::string to_string(StopReason r) {
    switch (r) {
        case StopReason::MaxIterations: return "max_iterations";
        case StopReason::ThresholdMet: return "threshold_met";
        case StopReason::DriftDetected: return "drift_detected";
    }
    return "?";
}

double score_prompt(const std::vector<corpus::Conference>& conferences,
                    const std::vector<corpus::VolatilityObservation>& market,
                    const prompting::PromptSpec& prompt_template, provider::Client& analyst,
                    const OptimizeConfig& config, const std::string& context_prefix) {
    if (conferences.empty()) throw ValidationError("no conferences to score against");

    sim::CorpusSimResult simmed = sim::simulate_events(
        conferences,
        [&](const corpus::Conference& c) {
            return prompting::materialize(prompt_template.body, c);
        },
        analyst, config.sim, context_prefix);
    if (simmed.runs.empty())
        throw ValidationError("no usable simulation runs for " + context_prefix);

    dispersion::DispersionTable table = dispersion::build_dispersion_table(simmed.runs);

    double sum = 0.0;
    int tenors_used = 0;
    for (corpus::Tenor t : corpus::kAllTenors) {
        eval::PairedSeries series = eval::paired_series(table, market, t);
        if (static_cast<int>(series.pairs.size()) < config.min_pairs_per_tenor) continue;
        try {
            sum += eval::correlate(series, eval::Metric::Spearman);
            ++tenors_used;
        } catch (const eval::ConstantSeriesError&) {
            // a degenerate tenor contributes nothing
        }
    }
    if (tenors_used == 0)
        throw ValidationError("no tenor has at least " +
                              std::to_string(config.min_pairs_per_tenor) + " valid pairs");
    return sum / static_cast<double>(tenors_used);
}

namespace {

std::vector<prompting::HistoryDigestEntry> digest_of(const OptimizationHistory& history) {
    std::vector<prompting::HistoryDigestEntry> out;
    out.reserve(history.entries.size());
    for (const auto& e : history.entries) {
        prompting::HistoryDigestEntry d;
        d.iteration = e.iteration;
        d.score = e.avg_correlation;
        d.critique_summary = e.verdict ? e.verdict->critique : "(no verdict recorded)";
        out.push_back(std::move(d));
    }
    return out;
}

parsing::JudgeVerdict query_judge(provider::Client& judge_llm,
                                  const prompting::PromptSpec& current, double score,
                                  const OptimizationHistory& history,
                                  const OptimizeConfig& config, int iteration) {
    const std::string user = prompting::render_judge_input(current, score,
                                                           digest_of(history));
    for (int attempt = 0; attempt < 2; ++attempt) {
        provider::CompletionRequest req;
        req.model_id = config.judge_model;
        req.system_prompt = prompting::judge_system_prompt();
        req.user_message = user;
        req.temperature = config.judge_temperature;
        req.run_index = attempt;  // the re-query is a distinct request
        req.context = "optimize:judge:iter" + std::to_string(iteration) +
                      (attempt > 0 ? ":requery" : "");
        provider::CompletionResponse resp = judge_llm.complete(req);
        try {
            return parsing::parse_judge_verdict(resp.text);
        } catch (const DataError&) {
            // malformed verdict; one re-query allowed
        }
    }
    throw JudgeParseFailureError(iteration);
}

HistoryEntry best_entry(const OptimizationHistory& history) {
    const HistoryEntry* best = &history.entries.front();
    for (const auto& e : history.entries) {
        if (e.avg_correlation > best->avg_correlation) best = &e;  // earliest wins ties
    }
    return *best;
}

OptimizationResult finish(OptimizationHistory history, StopReason reason) {
    OptimizationResult result;
    HistoryEntry best = best_entry(history);
    result.history = std::move(history);
    result.best_prompt = best.prompt;
    result.best_score = best.avg_correlation;
    result.stop_reason = reason;
    return result;
}

prompting::PromptSpec revision_prompt(const parsing::JudgeVerdict& verdict, int iteration) {
    prompting::PromptSpec next;
    next.kind = prompting::PromptKind::JudgeRevision;
    next.iteration = iteration;
    next.body = verdict.revised_prompt;
    next.version_tag = prompting::make_version_tag(next.kind, iteration, 0, next.body);
    return next;
}

} // namespace

OptimizationResult optimize(const std::vector<corpus::Conference>& train,
                            const std::vector<corpus::VolatilityObservation>& market,
                            const prompting::PromptSpec& initial_prompt,
                            provider::Client& analyst, provider::Client& judge_llm,
                            const OptimizeConfig& config) {
    if (train.empty()) throw ValidationError("training set is empty");
    if (config.max_iterations < 1) throw ValidationError("max_iterations must be >= 1");

    OptimizationHistory history;
    prompting::PromptSpec current = initial_prompt;

    // resume from a persisted ledger when present
    if (!config.history_path.empty() && std::filesystem::exists(config.history_path)) {
        history = load_history(config.history_path);
        if (!history.entries.empty()) {
            const HistoryEntry& last = history.entries.back();
            if (last.avg_correlation >= config.threshold)
                return finish(std::move(history), StopReason::ThresholdMet);
            if (last.verdict && parsing::detect_task_drift(last.verdict->revised_prompt))
                return finish(std::move(history), StopReason::DriftDetected);
            if (static_cast<int>(history.entries.size()) >= config.max_iterations)
                return finish(std::move(history), StopReason::MaxIterations);
            if (!last.verdict) throw JudgeParseFailureError(last.iteration);
            current = revision_prompt(*last.verdict, last.iteration);
        }
    }

    auto persist = [&](const HistoryEntry& e) {
        if (!config.history_path.empty()) append_history_entry(config.history_path, e);
    };

    for (int m = static_cast<int>(history.entries.size()) + 1; m <= config.max_iterations;
         ++m) {
        const double score =
            score_prompt(train, market, current, analyst, config,
                         "optimize:iter" + std::to_string(m));

        if (score >= config.threshold) {
            HistoryEntry entry{m, current, score, std::nullopt};
            history.entries.push_back(entry);
            persist(entry);
            return finish(std::move(history), StopReason::ThresholdMet);
        }

        parsing::JudgeVerdict verdict;
        try {
            verdict = query_judge(judge_llm, current, score, history, config, m);
        } catch (const JudgeParseFailureError&) {
            HistoryEntry entry{m, current, score, std::nullopt};
            history.entries.push_back(entry);
            persist(entry);
            throw;
        }

        HistoryEntry entry{m, current, score, verdict};
        history.entries.push_back(entry);
        persist(entry);

        if (parsing::detect_task_drift(verdict.revised_prompt))
            return finish(std::move(history), StopReason::DriftDetected);

        current = revision_prompt(verdict, m);
    }
    return finish(std::move(history), StopReason::MaxIterations);
}

std::map<int, double> evaluate_prompts_out_of_sample(
    const std::vector<corpus::Conference>& test,
    const std::vector<corpus::VolatilityObservation>& market,
    const OptimizationHistory& history, provider::Client& analyst,
    const OptimizeConfig& config) {
    if (history.entries.empty()) throw ValidationError("optimization history is empty");
    if (test.empty()) throw ValidationError("test set is empty");

    std::map<int, double> scores;
    for (const auto& entry : history.entries) {
        scores[entry.iteration] =
            score_prompt(test, market, entry.prompt, analyst, config,
                         "evaluate:iter" + std::to_string(entry.iteration));
    }
    return scores;
}

void append_history_entry(const std::string& path, const HistoryEntry& entry) {
    std::ofstream out(path, std::ios::app);
    if (!out) throw DataError("cannot append to history file: " + path);
    json rec{{"iteration", entry.iteration},
             {"prompt",
              {{"kind", static_cast<int>(entry.prompt.kind)},
               {"iteration", entry.prompt.iteration},
               {"variation_id", entry.prompt.variation_id},
               {"body", entry.prompt.body},
               {"version_tag", entry.prompt.version_tag}}},
             {"avg_correlation", entry.avg_correlation}};
    if (entry.verdict) {
        rec["verdict"] = {{"critique", entry.verdict->critique},
                          {"revised_prompt", entry.verdict->revised_prompt},
                          {"reasoning", entry.verdict->reasoning}};
    }
    out << rec.dump() << "\n";
}

OptimizationHistory load_history(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw corpus::MissingFileError(path);

    OptimizationHistory history;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json rec = json::parse(line, nullptr, false);
        if (rec.is_discarded() || !rec.is_object())
            throw corpus::MalformedRecordError(lineno, "not a JSON object");
        HistoryEntry e;
        e.iteration = rec.at("iteration").get<int>();
        const auto& p = rec.at("prompt");
        e.prompt.kind = static_cast<prompting::PromptKind>(p.at("kind").get<int>());
        e.prompt.iteration = p.at("iteration").get<int>();
        e.prompt.variation_id = p.at("variation_id").get<int>();
        e.prompt.body = p.at("body").get<std::string>();
        e.prompt.version_tag = p.at("version_tag").get<std::string>();
        e.avg_correlation = rec.at("avg_correlation").get<double>();
        if (rec.contains("verdict")) {
            parsing::JudgeVerdict v;
            v.critique = rec["verdict"].at("critique").get<std::string>();
            v.revised_prompt = rec["verdict"].at("revised_prompt").get<std::string>();
            v.reasoning = rec["verdict"].at("reasoning").get<std::string>();
            e.verdict = v;
        }
        int expected = static_cast<int>(history.entries.size()) + 1;
        if (e.iteration != expected)
            throw corpus::MalformedRecordError(
                lineno, "history iterations must increase from 1 without gaps");
        history.entries.push_back(std::move(e));
    }
    return history;
}

} // namespace ecbsim::judge
