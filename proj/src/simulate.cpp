#include "ecbsim/simulate.hpp"

namespace ecbsim::sim {

namespace {

provider::CompletionRequest make_request(const std::string& body, const SimOptions& options,
                                         int run_index, const std::string& context) {
    provider::CompletionRequest req;
    req.model_id = options.analyst_model;
    req.system_prompt = "";
    req.user_message = body;
    req.temperature = options.analyst_temperature;
    req.run_index = run_index;
    req.context = context;
    return req;
}

} // namespace

EventSimResult simulate_event(const corpus::Conference& conference,
                              const std::string& prompt_body, provider::Client& client,
                              const SimOptions& options, const std::string& context_prefix) {
    EventSimResult result;
    for (int run = 0; run < options.runs_per_prompt; ++run) {
        parsing::ParseReport report;
        int effective_run = run;
        bool usable = false;
        for (int attempt = 0; attempt < 2 && !usable; ++attempt) {
            effective_run = run + attempt * options.retry_run_offset;
            const std::string context = context_prefix + ":" + conference.date.iso() + ":run" +
                                        std::to_string(effective_run);
            provider::CompletionResponse resp =
                client.complete(make_request(prompt_body, options, effective_run, context));
            try {
                report = parsing::parse_forecast_table(resp.text, conference.date,
                                                       options.expected_traders, options.parse);
            } catch (const DataError& e) {
                result.anomalies.push_back(EventAnomaly{conference.date, effective_run, "",
                                                        std::string("parse failure: ") +
                                                            e.what()});
                continue;  // re-request once
            }
            usable = parsing::meets_completeness(report, options.expected_traders,
                                                 options.completeness);
            if (!usable && attempt == 0) {
                result.anomalies.push_back(
                    EventAnomaly{conference.date, effective_run, "",
                                 "run below completeness threshold; re-requested"});
            }
        }

        for (const auto& a : report.anomalies) {
            result.anomalies.push_back(
                EventAnomaly{conference.date, effective_run, a.row_text, a.reason});
        }

        if (!usable) {
            ++result.discarded_runs;
            result.anomalies.push_back(EventAnomaly{conference.date, effective_run, "",
                                                    "run discarded after re-request"});
            continue;
        }
        result.runs.push_back(
            dispersion::run_dispersion(conference.date, run, report.records));
    }
    return result;
}

CorpusSimResult simulate_events(
    const std::vector<corpus::Conference>& conferences,
    const std::function<std::string(const corpus::Conference&)>& make_body,
    provider::Client& client, const SimOptions& options, const std::string& context_prefix) {
    std::vector<EventSimResult> per_event(conferences.size());
    std::vector<char> skipped(conferences.size(), 0);

    provider::parallel_for(conferences.size(), options.parallelism, [&](size_t i) {
        const std::string body = make_body(conferences[i]);
        if (body.empty()) {
            skipped[i] = 1;
            return;
        }
        per_event[i] = simulate_event(conferences[i], body, client, options, context_prefix);
    });

    CorpusSimResult out;
    for (size_t i = 0; i < conferences.size(); ++i) {
        if (skipped[i]) {
            out.skipped_events.push_back(conferences[i].date);
            continue;
        }
        auto& ev = per_event[i];
        out.runs.insert(out.runs.end(), ev.runs.begin(), ev.runs.end());
        out.anomalies.insert(out.anomalies.end(), ev.anomalies.begin(), ev.anomalies.end());
        out.discarded_runs += ev.discarded_runs;
    }
    return out;
}

} // namespace ecbsim::sim
