#pragma once

#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "ecbsim/config.hpp"
#include "ecbsim/corpus.hpp"
#include "ecbsim/dispersion.hpp"
#include "ecbsim/judge.hpp"
#include "ecbsim/provider.hpp"

namespace ecbsim::cli {

enum class Strategy { ZeroShot, FewShot, Perturbation };

std::string strategy_label(Strategy strategy, int variation_id = 0);

/// Provenance record written next to every output.
struct RunManifest {
    std::string run_id;
    std::string strategy;
    std::string config_digest;
    std::uint64_t seed = 0;
    std::string started;
    std::string finished;
    std::string provider;
    nlohmann::json extra;  // command-specific additions (e.g. sampled dates)
};

void write_manifest(const std::string& path, const RunManifest& manifest);
std::string iso_now();

/// Build the configured analyst/judge client. Mock needs no credentials;
/// hosted vendors read their API key from the environment at request time.
std::unique_ptr<provider::Client> make_client(const Config& config);

/// Optional cache wrapper (returns the inner client when caching is off).
struct ClientStack {
    std::unique_ptr<provider::Client> base;
    std::shared_ptr<provider::ResponseCache> cache;
    std::unique_ptr<provider::Client> cached;  // may be null
    provider::Client& top() { return cached ? *cached : *base; }
};

ClientStack make_client_stack(const Config& config);

struct SimulateOutcome {
    dispersion::DispersionTable table;
    RunManifest manifest;
    int skipped_events = 0;
    int discarded_runs = 0;
    std::string dispersion_csv;
    std::string anomalies_path;
    std::string manifest_path;
};

/// Full simulate pipeline for one strategy: load corpus -> render prompts ->
/// complete runs_per_prompt times per conference -> parse -> dispersion.
/// Writes dispersion.csv (run id embedded), anomalies.jsonl and
/// manifest.json under out_dir.
SimulateOutcome run_simulate(const Config& config, Strategy strategy, int variation_id,
                             provider::Client& client, const std::string& out_dir);

/// sim::SimOptions derived from the config.
sim::SimOptions sim_options(const Config& config);

/// judge::OptimizeConfig derived from the config (history path left empty).
judge::OptimizeConfig optimize_config(const Config& config);

struct ReportInputs {
    std::vector<std::string> dispersion_paths;  // >= 1
    std::string rates_path;
    std::string conferences_path;  // optional; enables the readability benchmark
};

/// Statistical report over dispersion tables and market data: 3 metrics x 3
/// tenors with bootstrap CIs, rolling correlations, ICC across tables (>= 2
/// tables), readability benchmark (when transcripts are given) and the
/// ensemble table. Writes report.json and report-tables/*.csv; returns the
/// report JSON.
nlohmann::json run_report(const ReportInputs& inputs, const Config& config,
                          const std::string& out_dir);

} // namespace ecbsim::cli
