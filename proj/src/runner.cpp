#include "ecbsim/runner.hpp"

#include <algorithm>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>

#include "ecbsim/digest.hpp"
#include "ecbsim/evaluation.hpp"
#include "ecbsim/prompting.hpp"
#include "ecbsim/simulate.hpp"

namespace ecbsim::cli {

namespace fs = std::filesystem;
using nlohmann::json;

std::string strategy_label(Strategy strategy, int variation_id) {
    switch (strategy) {
        case Strategy::ZeroShot: return "zero-shot";
        case Strategy::FewShot: return "few-shot";
        case Strategy::Perturbation: return "perturb-" + std::to_string(variation_id);
    }
    return "?";
}

std::string iso_now() {
    auto t = std::time(nullptr);
    char buf[32];
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_manifest(const std::string& path, const RunManifest& m) {
    json doc{{"run_id", m.run_id},       {"strategy", m.strategy},
             {"config_digest", m.config_digest}, {"seed", m.seed},
             {"started", m.started},     {"finished", m.finished},
             {"provider", m.provider}};
    if (!m.extra.is_null()) doc["extra"] = m.extra;
    std::ofstream out(path);
    if (!out) throw DataError("cannot write manifest: " + path);
    out << doc.dump(2) << "\n";
}

std::unique_ptr<provider::Client> make_client(const Config& config) {
    if (config.provider_name == "mock") {
        provider::MockOptions opts;
        opts.population = config.population;
        opts.seed = config.seed;
        return std::make_unique<provider::MockClient>(opts);
    }
    provider::HttpOptions opts;
    opts.vendor = provider::vendor_from_name(config.provider_name);
    opts.base_url = config.base_url;
    opts.api_key_env = config.api_key_env;
    opts.retry.max_attempts = config.max_attempts;
    opts.timeout_seconds = config.timeout_seconds;
    return std::make_unique<provider::HttpClient>(opts);
}

ClientStack make_client_stack(const Config& config) {
    ClientStack stack;
    stack.base = make_client(config);
    if (!config.cache_path.empty()) {
        stack.cache = std::make_shared<provider::ResponseCache>(config.cache_path);
        stack.cached = std::make_unique<provider::CachingClient>(*stack.base, stack.cache);
    }
    return stack;
}

sim::SimOptions sim_options(const Config& config) {
    sim::SimOptions opt;
    opt.runs_per_prompt = config.runs_per_prompt;
    opt.expected_traders = config.population;
    opt.analyst_model = config.analyst_model;
    opt.analyst_temperature = config.temperature;
    opt.parse.rate_min = config.rate_min;
    opt.parse.rate_max = config.rate_max;
    opt.parse.unchanged_epsilon = config.unchanged_epsilon;
    opt.completeness = config.completeness;
    opt.parallelism = config.parallelism;
    return opt;
}

judge::OptimizeConfig optimize_config(const Config& config) {
    judge::OptimizeConfig oc;
    oc.max_iterations = config.max_iterations;
    oc.threshold = config.threshold;
    oc.sim = sim_options(config);
    oc.judge_model = config.judge_model;
    oc.judge_temperature = config.judge_temperature;
    oc.min_pairs_per_tenor = config.min_pairs;
    return oc;
}

namespace {

std::uint64_t mix_seed(std::uint64_t seed, const std::string& salt) {
    std::uint64_t h = seed ^ 0x517cc1b727220a95ULL;
    for (unsigned char c : salt) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace

SimulateOutcome run_simulate(const Config& config, Strategy strategy, int variation_id,
                             provider::Client& client, const std::string& out_dir) {
    fs::create_directories(out_dir);

    auto conferences = corpus::load_conferences(config.conferences_path);
    corpus::RateRangeSeries ranges;
    if (!config.rates_path.empty())
        ranges = corpus::RateRangeSeries(corpus::load_rate_ranges(config.rates_path));
    else if (strategy == Strategy::FewShot)
        throw ValidationError("few-shot simulation needs corpus.rates for exemplar context");

    const std::string label = strategy_label(strategy, variation_id);
    RunManifest manifest;
    manifest.run_id = make_run_id(config, label);
    manifest.strategy = label;
    manifest.config_digest = config_digest(config);
    manifest.seed = config.seed;
    manifest.provider = client.name();
    manifest.started = iso_now();

    prompting::RenderOptions render_opts;
    render_opts.delegated_personas = config.delegated_personas;
    render_opts.population = config.population;

    auto population_for = [&](const corpus::Conference& c) {
        std::uint64_t seed = config.reseed_per_event
                                 ? mix_seed(config.seed, c.date.iso())
                                 : config.seed;
        return personas::generate_population(seed, config.population);
    };

    // event-agnostic template for strategies that share one (perturbations)
    std::optional<prompting::PerturbationRegistry> registry;
    if (strategy == Strategy::Perturbation)
        registry = prompting::PerturbationRegistry::load(config.registry_path);

    auto make_body = [&](const corpus::Conference& target) -> std::string {
        auto population = config.delegated_personas
                              ? std::vector<personas::AgentPersona>{}
                              : population_for(target);
        switch (strategy) {
            case Strategy::ZeroShot:
                return prompting::render_zero_shot(target, population, render_opts).body;
            case Strategy::Perturbation: {
                prompting::PromptSpec base =
                    prompting::zero_shot_template(population, render_opts);
                prompting::PromptSpec perturbed = registry->apply(base, variation_id);
                return prompting::materialize(perturbed.body, target);
            }
            case Strategy::FewShot: {
                prompting::FewShotContext context;
                // up to the three most recent strictly-earlier conferences
                std::vector<const corpus::Conference*> priors;
                for (const auto& c : conferences) {
                    if (c.date < target.date) priors.push_back(&c);
                }
                if (priors.empty()) return "";  // first conference: no history
                size_t take = std::min<size_t>(3, priors.size());
                for (size_t i = priors.size() - take; i < priors.size(); ++i) {
                    prompting::Exemplar ex;
                    ex.conference = *priors[i];
                    for (corpus::Tenor t : corpus::kAllTenors) {
                        try {
                            ex.market_disagreement[t] =
                                ranges.event_volatility(priors[i]->date, t,
                                                        config.window_days)
                                    .value;
                        } catch (const corpus::MissingDayError&) {
                            // tenor shown as unavailable in the exemplar
                        }
                    }
                    context.exemplars.push_back(std::move(ex));
                }
                return prompting::render_few_shot(target, context, population, render_opts)
                    .body;
            }
        }
        return "";
    };

    sim::CorpusSimResult result = sim::simulate_events(conferences, make_body, client,
                                                       sim_options(config), "sim:" + label);

    SimulateOutcome outcome;
    outcome.table = dispersion::build_dispersion_table(result.runs);
    outcome.table.runs_used = config.runs_per_prompt;
    outcome.skipped_events = static_cast<int>(result.skipped_events.size());
    outcome.discarded_runs = result.discarded_runs;

    outcome.dispersion_csv = (fs::path(out_dir) / "dispersion.csv").string();
    dispersion::write_csv(outcome.table, outcome.dispersion_csv, manifest.run_id);

    outcome.anomalies_path = (fs::path(out_dir) / "anomalies.jsonl").string();
    {
        std::ofstream out(outcome.anomalies_path);
        if (!out) throw DataError("cannot write anomaly log: " + outcome.anomalies_path);
        for (Date d : result.skipped_events) {
            out << json{{"run_id", manifest.run_id},
                        {"event_date", d.iso()},
                        {"reason", "skipped: no prior history for few-shot context"}}
                       .dump()
                << "\n";
        }
        for (const auto& a : result.anomalies) {
            out << json{{"run_id", manifest.run_id},
                        {"event_date", a.event_date.iso()},
                        {"run_index", a.run_index},
                        {"row_text", a.row_text},
                        {"reason", a.reason}}
                       .dump()
                << "\n";
        }
    }

    manifest.finished = iso_now();
    manifest.extra = json{{"events", conferences.size()},
                          {"skipped_events", outcome.skipped_events},
                          {"discarded_runs", outcome.discarded_runs}};
    outcome.manifest_path = (fs::path(out_dir) / "manifest.json").string();
    write_manifest(outcome.manifest_path, manifest);
    outcome.manifest = manifest;
    return outcome;
}

namespace {

json correlation_block(const eval::PairedSeries& series, int bootstrap_reps, double alpha,
                       std::uint64_t seed) {
    json block = json::object();
    for (eval::Metric metric :
         {eval::Metric::Spearman, eval::Metric::Pearson, eval::Metric::Kendall}) {
        json entry;
        entry["n"] = series.pairs.size();
        try {
            entry["estimate"] = eval::correlate(series, metric);
            auto [lo, hi] = eval::bootstrap_ci(series, metric, bootstrap_reps, alpha,
                                               seed + static_cast<unsigned>(metric));
            entry["ci_low"] = lo;
            entry["ci_high"] = hi;
        } catch (const ValidationError& e) {
            entry["error"] = e.what();
        }
        block[eval::to_string(metric)] = entry;
    }
    return block;
}

void write_table_csv(const std::string& path, const std::string& header,
                     const std::vector<std::string>& rows) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write report table: " + path);
    out << header << "\n";
    for (const auto& r : rows) out << r << "\n";
}

} // namespace

json run_report(const ReportInputs& inputs, const Config& config,
                const std::string& out_dir) {
    if (inputs.dispersion_paths.empty())
        throw ValidationError("report needs at least one dispersion table");

    fs::create_directories(out_dir);
    fs::create_directories(fs::path(out_dir) / "report-tables");

    std::vector<dispersion::DispersionTable> tables;
    tables.reserve(inputs.dispersion_paths.size());
    for (const auto& p : inputs.dispersion_paths)
        tables.push_back(dispersion::read_csv(p));
    const dispersion::DispersionTable& primary = tables.front();

    corpus::RateRangeSeries ranges(corpus::load_rate_ranges(inputs.rates_path));

    // market observations for every event date in any table
    std::vector<Date> event_dates;
    for (const auto& t : tables) {
        for (const auto& [key, _] : t.rows) event_dates.push_back(key.first);
    }
    std::sort(event_dates.begin(), event_dates.end());
    event_dates.erase(std::unique(event_dates.begin(), event_dates.end()),
                      event_dates.end());

    std::vector<corpus::VolatilityObservation> market;
    for (Date d : event_dates) {
        for (corpus::Tenor t : corpus::kAllTenors) {
            try {
                market.push_back(ranges.event_volatility(d, t, config.window_days));
            } catch (const corpus::MissingDayError&) {
                // pair dropped; effective N reported below
            }
        }
    }

    const std::string run_id = make_run_id(config, "report");
    json report;
    report["run_id"] = run_id;
    report["window_days"] = config.window_days;
    report["tables"] = inputs.dispersion_paths;

    // per-tenor correlations with bootstrap CIs on the primary table
    json correlations = json::object();
    std::vector<std::string> corr_rows;
    int tenors_reported = 0;
    for (corpus::Tenor tenor : corpus::kAllTenors) {
        eval::PairedSeries series = eval::paired_series(primary, market, tenor);
        json block;
        block["n"] = series.pairs.size();
        if (static_cast<int>(series.pairs.size()) < config.min_pairs) {
            block["warning"] = "fewer than " + std::to_string(config.min_pairs) +
                               " pairs; tenor omitted";
        } else {
            block["metrics"] = correlation_block(series, config.bootstrap_reps, config.alpha,
                                                 config.seed + 1000 * (tenors_reported + 1));
            ++tenors_reported;
            for (auto& [metric, entry] : block["metrics"].items()) {
                if (!entry.contains("estimate")) continue;
                char row[256];
                std::snprintf(row, sizeof(row), "%s,%s,%.6f,%.6f,%.6f,%d",
                              corpus::tenor_token(tenor).c_str(), metric.c_str(),
                              entry["estimate"].get<double>(), entry["ci_low"].get<double>(),
                              entry["ci_high"].get<double>(), entry["n"].get<int>());
                corr_rows.push_back(row);
            }
        }
        correlations[corpus::tenor_token(tenor)] = block;
    }
    if (tenors_reported == 0)
        throw ValidationError("no tenor has at least " + std::to_string(config.min_pairs) +
                              " dispersion/market pairs");
    report["correlations"] = correlations;
    write_table_csv((fs::path(out_dir) / "report-tables" / "correlations.csv").string(),
                    "tenor,metric,estimate,ci_low,ci_high,n", corr_rows);

    // rolling Spearman per tenor
    json rolling = json::object();
    for (corpus::Tenor tenor : corpus::kAllTenors) {
        eval::PairedSeries series = eval::paired_series(primary, market, tenor);
        if (static_cast<int>(series.pairs.size()) < config.min_pairs) continue;
        auto points = eval::rolling_correlation(series, config.rolling_window_months,
                                                config.rolling_min_obs);
        std::vector<std::string> rows;
        json arr = json::array();
        for (const auto& pt : points) {
            char row[128];
            if (pt.estimate) {
                std::snprintf(row, sizeof(row), "%s,%.6f,%d", pt.date.iso().c_str(),
                              *pt.estimate, pt.n);
                arr.push_back({{"date", pt.date.iso()}, {"estimate", *pt.estimate},
                               {"n", pt.n}});
            } else {
                std::snprintf(row, sizeof(row), "%s,,%d", pt.date.iso().c_str(), pt.n);
                arr.push_back({{"date", pt.date.iso()}, {"estimate", nullptr}, {"n", pt.n}});
            }
            rows.push_back(row);
        }
        rolling[corpus::tenor_token(tenor)] = arr;
        write_table_csv((fs::path(out_dir) / "report-tables" /
                         ("rolling_" + corpus::tenor_token(tenor) + ".csv"))
                            .string(),
                        "date,estimate,n", rows);
    }
    report["rolling"] = rolling;

    // ICC across tables (methods) per tenor, when at least two tables
    if (tables.size() >= 2) {
        json icc_block = json::object();
        std::vector<std::string> icc_rows;
        for (corpus::Tenor tenor : corpus::kAllTenors) {
            // complete matrix over events present in every table for this tenor
            std::vector<std::vector<double>> matrix;
            for (Date d : event_dates) {
                std::vector<double> row;
                for (const auto& t : tables) {
                    auto it = t.rows.find({d, tenor});
                    if (it == t.rows.end()) break;
                    row.push_back(it->second.value);
                }
                if (row.size() == tables.size()) matrix.push_back(std::move(row));
            }
            try {
                eval::IccResult r = eval::icc(matrix, tenor);
                icc_block[corpus::tenor_token(tenor)] = {
                    {"icc", r.icc},
                    {"sigma2_conferences", r.sigma2_conferences},
                    {"sigma2_methods", r.sigma2_methods},
                    {"k_methods", r.k_methods},
                    {"n_events", matrix.size()}};
                char row[160];
                std::snprintf(row, sizeof(row), "%s,%.6f,%.8f,%.8f,%d,%zu",
                              corpus::tenor_token(tenor).c_str(), r.icc,
                              r.sigma2_conferences, r.sigma2_methods, r.k_methods,
                              matrix.size());
                icc_rows.push_back(row);
            } catch (const ValidationError& e) {
                icc_block[corpus::tenor_token(tenor)] = {{"error", e.what()}};
            }
        }
        report["icc"] = icc_block;
        write_table_csv((fs::path(out_dir) / "report-tables" / "icc.csv").string(),
                        "tenor,icc,sigma2_conferences,sigma2_methods,k_methods,n_events",
                        icc_rows);

        // ensemble: per-key mean across tables, with its own correlations
        dispersion::DispersionTable ens = eval::ensemble_average(tables);
        dispersion::write_csv(ens,
                              (fs::path(out_dir) / "report-tables" / "ensemble.csv").string(),
                              run_id);
        json ens_corr = json::object();
        for (corpus::Tenor tenor : corpus::kAllTenors) {
            eval::PairedSeries series = eval::paired_series(ens, market, tenor);
            if (static_cast<int>(series.pairs.size()) < config.min_pairs) continue;
            try {
                ens_corr[corpus::tenor_token(tenor)] = {
                    {"spearman", eval::correlate(series, eval::Metric::Spearman)},
                    {"n", series.pairs.size()}};
            } catch (const ValidationError& e) {
                ens_corr[corpus::tenor_token(tenor)] = {{"error", e.what()}};
            }
        }
        report["ensemble"] = ens_corr;
    }

    // readability benchmark when transcripts are available
    if (!inputs.conferences_path.empty()) {
        auto conferences = corpus::load_conferences(inputs.conferences_path);
        std::map<long, double> grade_by_date;
        std::vector<std::string> fk_rows;
        for (const auto& c : conferences) {
            double grade = eval::flesch_kincaid_grade(c.transcript);
            grade_by_date[c.date.serial()] = grade;
            char row[64];
            std::snprintf(row, sizeof(row), "%s,%.4f", c.date.iso().c_str(), grade);
            fk_rows.push_back(row);
        }
        write_table_csv((fs::path(out_dir) / "report-tables" / "readability.csv").string(),
                        "date,fk_grade", fk_rows);

        json fk = json::object();
        for (corpus::Tenor tenor : corpus::kAllTenors) {
            eval::PairedSeries series;
            series.tenor = tenor;
            for (const auto& obs : market) {
                if (obs.tenor != tenor) continue;
                auto it = grade_by_date.find(obs.event_date.serial());
                if (it == grade_by_date.end()) continue;
                series.pairs.push_back(
                    eval::PairedObs{obs.event_date, it->second, obs.value});
            }
            std::sort(series.pairs.begin(), series.pairs.end(),
                      [](const eval::PairedObs& a, const eval::PairedObs& b) {
                          return a.date < b.date;
                      });
            if (static_cast<int>(series.pairs.size()) < config.min_pairs) continue;
            try {
                fk[corpus::tenor_token(tenor)] = {
                    {"spearman", eval::correlate(series, eval::Metric::Spearman)},
                    {"n", series.pairs.size()}};
            } catch (const ValidationError& e) {
                fk[corpus::tenor_token(tenor)] = {{"error", e.what()}};
            }
        }
        report["readability"] = fk;
    }

    std::ofstream out(fs::path(out_dir) / "report.json");
    if (!out) throw DataError("cannot write report.json under " + out_dir);
    out << report.dump(2) << "\n";
    return report;
}

} // namespace ecbsim::cli
