#include "ecbsim/config.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <functional>

#include "ecbsim/digest.hpp"

namespace ecbsim::cli {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

/// Raw "section.key" -> value-text map for the supported TOML subset.
std::map<std::string, std::string> parse_toml(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("missing config file: " + path);

    std::map<std::string, std::string> out;
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        // strip comments outside quotes
        bool in_string = false;
        for (size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) in_string = !in_string;
            else if (line[i] == '#' && !in_string) {
                line.resize(i);
                break;
            }
        }
        line = trim(line);
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (line.back() != ']')
                throw ValidationError(path + ":" + std::to_string(lineno) +
                                      ": malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ValidationError(path + ":" + std::to_string(lineno) +
                                  ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw ValidationError(path + ":" + std::to_string(lineno) +
                                  ": empty key or value");
        out[(section.empty() ? key : section + "." + key)] = value;
    }
    return out;
}

std::string unquote(const std::string& value, const std::string& where) {
    if (value.size() < 2 || value.front() != '"' || value.back() != '"')
        throw ValidationError(where + ": expected a quoted string, got " + value);
    std::string out;
    for (size_t i = 1; i + 1 < value.size(); ++i) {
        if (value[i] == '\\' && i + 2 < value.size()) {
            ++i;
            switch (value[i]) {
                case 'n': out += '\n'; break;
                case 't': out += '\t'; break;
                case '"': out += '"'; break;
                case '\\': out += '\\'; break;
                default: out += value[i];
            }
        } else {
            out += value[i];
        }
    }
    return out;
}

} // namespace

Config load_config(const std::string& path) {
    auto raw = parse_toml(path);
    Config cfg;

    auto take = [&](const std::string& key) -> std::string* {
        auto it = raw.find(key);
        return it == raw.end() ? nullptr : &it->second;
    };
    auto set_string = [&](const std::string& key, std::string& field) {
        if (auto* v = take(key)) {
            field = unquote(*v, key);
            raw.erase(key);
        }
    };
    auto set_int = [&](const std::string& key, auto& field) {
        if (auto* v = take(key)) {
            try {
                field = static_cast<std::remove_reference_t<decltype(field)>>(
                    std::stoll(*v));
            } catch (const std::exception&) {
                throw ValidationError(key + ": expected an integer, got " + *v);
            }
            raw.erase(key);
        }
    };
    auto set_double = [&](const std::string& key, double& field) {
        if (auto* v = take(key)) {
            try {
                field = std::stod(*v);
            } catch (const std::exception&) {
                throw ValidationError(key + ": expected a number, got " + *v);
            }
            raw.erase(key);
        }
    };
    auto set_bool = [&](const std::string& key, bool& field) {
        if (auto* v = take(key)) {
            if (*v == "true") field = true;
            else if (*v == "false") field = false;
            else throw ValidationError(key + ": expected true or false, got " + *v);
            raw.erase(key);
        }
    };

    set_string("corpus.conferences", cfg.conferences_path);
    set_string("corpus.rates", cfg.rates_path);

    set_int("simulation.population", cfg.population);
    set_int("simulation.seed", cfg.seed);
    set_int("simulation.runs_per_prompt", cfg.runs_per_prompt);
    set_int("simulation.window_days", cfg.window_days);
    set_double("simulation.train_fraction", cfg.train_fraction);
    set_bool("simulation.delegated_personas", cfg.delegated_personas);
    set_bool("simulation.reseed_per_event", cfg.reseed_per_event);
    set_double("simulation.rate_min", cfg.rate_min);
    set_double("simulation.rate_max", cfg.rate_max);
    set_double("simulation.completeness", cfg.completeness);
    set_double("simulation.unchanged_epsilon", cfg.unchanged_epsilon);

    set_string("provider.name", cfg.provider_name);
    set_string("provider.analyst_model", cfg.analyst_model);
    set_string("provider.judge_model", cfg.judge_model);
    set_double("provider.temperature", cfg.temperature);
    set_double("provider.judge_temperature", cfg.judge_temperature);
    set_int("provider.parallelism", cfg.parallelism);
    set_string("provider.cache", cfg.cache_path);
    set_int("provider.max_attempts", cfg.max_attempts);
    set_string("provider.base_url", cfg.base_url);
    set_string("provider.api_key_env", cfg.api_key_env);
    set_int("provider.timeout_seconds", cfg.timeout_seconds);

    set_int("judge.max_iterations", cfg.max_iterations);
    set_double("judge.threshold", cfg.threshold);
    set_int("judge.min_pairs", cfg.min_pairs);

    set_string("prompting.registry", cfg.registry_path);

    set_int("report.bootstrap_reps", cfg.bootstrap_reps);
    set_double("report.alpha", cfg.alpha);
    set_int("report.rolling_window_months", cfg.rolling_window_months);
    set_int("report.rolling_min_obs", cfg.rolling_min_obs);

    if (!raw.empty())
        throw ValidationError("unknown config key: " + raw.begin()->first);

    if (cfg.population < 6)
        throw ValidationError("simulation.population must be >= 6");
    if (cfg.runs_per_prompt < 1)
        throw ValidationError("simulation.runs_per_prompt must be >= 1");
    if (cfg.window_days < 1 || cfg.window_days > 3)
        throw ValidationError("simulation.window_days must be 1, 2 or 3");
    if (!(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0))
        throw ValidationError("simulation.train_fraction must lie in (0, 1)");
    if (!(cfg.temperature >= 0.0 && cfg.temperature <= 2.0))
        throw ValidationError("provider.temperature must lie in [0, 2]");
    return cfg;
}

std::string config_digest(const Config& c) {
    // canonical key=value serialization of every output-affecting knob
    std::string s;
    auto add = [&](const std::string& key, const std::string& value) {
        s += key + "=" + value + "\n";
    };
    char buf[64];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.10g", v);
        return std::string(buf);
    };
    add("corpus.conferences", c.conferences_path);
    add("corpus.rates", c.rates_path);
    add("simulation.population", std::to_string(c.population));
    add("simulation.seed", std::to_string(c.seed));
    add("simulation.runs_per_prompt", std::to_string(c.runs_per_prompt));
    add("simulation.window_days", std::to_string(c.window_days));
    add("simulation.train_fraction", num(c.train_fraction));
    add("simulation.delegated_personas", c.delegated_personas ? "true" : "false");
    add("simulation.reseed_per_event", c.reseed_per_event ? "true" : "false");
    add("simulation.rate_min", num(c.rate_min));
    add("simulation.rate_max", num(c.rate_max));
    add("simulation.completeness", num(c.completeness));
    add("simulation.unchanged_epsilon", num(c.unchanged_epsilon));
    add("provider.name", c.provider_name);
    add("provider.analyst_model", c.analyst_model);
    add("provider.judge_model", c.judge_model);
    add("provider.temperature", num(c.temperature));
    add("provider.judge_temperature", num(c.judge_temperature));
    add("judge.max_iterations", std::to_string(c.max_iterations));
    add("judge.threshold", num(c.threshold));
    add("judge.min_pairs", std::to_string(c.min_pairs));
    add("prompting.registry", c.registry_path);
    add("report.bootstrap_reps", std::to_string(c.bootstrap_reps));
    add("report.alpha", num(c.alpha));
    add("report.rolling_window_months", std::to_string(c.rolling_window_months));
    add("report.rolling_min_obs", std::to_string(c.rolling_min_obs));
    return sha256_hex(s);
}

std::string make_run_id(const Config& config, const std::string& strategy_label) {
    return short_digest(config_digest(config) + "|" + std::to_string(config.seed) + "|" +
                            strategy_label,
                        12);
}

} // namespace ecbsim::cli
