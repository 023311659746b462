#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ecbsim/corpus.hpp"
#include "ecbsim/dispersion.hpp"
#include "ecbsim/parsing.hpp"
#include "ecbsim/provider.hpp"

namespace ecbsim::sim {

struct SimOptions {
    int runs_per_prompt = 5;
    int expected_traders = 30;  // completeness is judged against this count
    std::string analyst_model = "analyst-default";
    double analyst_temperature = 1.0;
    parsing::ParseOptions parse;
    /// Minimum surviving per-tenor row fraction; a run below it is discarded
    /// and re-requested once (with a shifted run index, so the retry is a
    /// distinct request rather than a cache replay).
    double completeness = 0.8;
    int parallelism = 4;
    int retry_run_offset = 10000;
};

struct EventAnomaly {
    Date event_date;
    int run_index = 0;
    std::string row_text;
    std::string reason;
};

struct EventSimResult {
    std::vector<dispersion::RunDispersion> runs;
    std::vector<EventAnomaly> anomalies;
    int discarded_runs = 0;
};

/// Run one conference through the provider `runs_per_prompt` times with a
/// fully materialized prompt body, parse each response and compute run-level
/// dispersion. Anomalous rows are logged, never silently dropped.
EventSimResult simulate_event(const corpus::Conference& conference,
                              const std::string& prompt_body, provider::Client& client,
                              const SimOptions& options, const std::string& context_prefix);

struct CorpusSimResult {
    std::vector<dispersion::RunDispersion> runs;
    std::vector<EventAnomaly> anomalies;
    int discarded_runs = 0;
    std::vector<Date> skipped_events;  // events with no usable prompt (e.g. no history)
};

/// Simulate many conferences with bounded parallelism. `make_body` maps a
/// conference to its prompt body; returning an empty string skips the event
/// (recorded in skipped_events). Aggregation order is by conference, so the
/// result is deterministic regardless of completion order.
CorpusSimResult simulate_events(
    const std::vector<corpus::Conference>& conferences,
    const std::function<std::string(const corpus::Conference&)>& make_body,
    provider::Client& client, const SimOptions& options, const std::string& context_prefix);

} // namespace ecbsim::sim
