#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "ecbsim/errors.hpp"

namespace ecbsim::cli {

/// Effective run configuration. Loaded from a TOML file (a pragmatic subset:
/// [sections], key = value with strings, numbers and booleans, # comments);
/// CLI flags override file values; secrets come only from the environment.
struct Config {
    // [corpus]
    std::string conferences_path;
    std::string rates_path;

    // [simulation]
    int population = 30;
    std::uint64_t seed = 42;
    int runs_per_prompt = 5;
    int window_days = 3;
    double train_fraction = 0.75;
    bool delegated_personas = false;
    bool reseed_per_event = false;
    double rate_min = -1.0;
    double rate_max = 10.0;
    double completeness = 0.8;
    double unchanged_epsilon = 0.5;

    // [provider]
    std::string provider_name = "mock";  // mock | openai | anthropic | google
    std::string analyst_model = "analyst-default";
    std::string judge_model = "judge-default";
    double temperature = 1.0;
    double judge_temperature = 0.0;
    int parallelism = 4;
    std::string cache_path;
    int max_attempts = 4;
    std::string base_url;
    std::string api_key_env;
    int timeout_seconds = 120;

    // [judge]
    int max_iterations = 5;
    double threshold = 1.1;  // > 1 disables the early stop
    int min_pairs = 10;

    // [prompting]
    std::string registry_path = "data/perturbations.jsonl";

    // [report]
    int bootstrap_reps = 5000;
    double alpha = 0.05;
    int rolling_window_months = 12;
    int rolling_min_obs = 6;
};

/// Parse the TOML config file. Unknown sections or keys are rejected so that
/// typos fail fast (exit code 2).
Config load_config(const std::string& path);

/// Digest over every knob that affects outputs (paths excluded from identity
/// would be wrong: the input files are part of what a run means).
std::string config_digest(const Config& config);

/// Deterministic run id: a digest of (config digest, seed, strategy label).
std::string make_run_id(const Config& config, const std::string& strategy_label);

} // namespace ecbsim::cli
