#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "ecbsim/config.hpp"
#include "ecbsim/corpus.hpp"
#include "ecbsim/digest.hpp"
#include "ecbsim/evaluation.hpp"
#include "ecbsim/judge.hpp"
#include "ecbsim/personas.hpp"
#include "ecbsim/prompting.hpp"
#include "ecbsim/rng.hpp"
#include "ecbsim/runner.hpp"
#include "ecbsim/simulate.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ecbsim;

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir = "run";
    std::string provider_override;
    std::int64_t seed_override = -1;
};

cli::Config load_effective_config(const CommonArgs& args) {
    cli::Config cfg = cli::load_config(args.config_path);
    if (!args.provider_override.empty()) cfg.provider_name = args.provider_override;
    if (args.seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(args.seed_override);
    return cfg;
}

void add_common(CLI::App* cmd, CommonArgs& args, bool with_out = true) {
    cmd->add_option("--config", args.config_path, "TOML configuration file")
        ->required()
        ->check(CLI::ExistingFile);
    if (with_out) cmd->add_option("--out", args.out_dir, "Output directory");
    cmd->add_option("--provider", args.provider_override,
                    "Override provider (mock|openai|anthropic|google)");
    cmd->add_option("--seed", args.seed_override, "Override simulation seed");
}

int cmd_ingest_check(const CommonArgs& args) {
    cli::Config cfg = load_effective_config(args);
    auto conferences = corpus::load_conferences(cfg.conferences_path);
    std::cout << "conferences: " << conferences.size() << " (" << conferences.front().date.iso()
              << " .. " << conferences.back().date.iso() << ")\n";

    if (cfg.rates_path.empty()) {
        std::cout << "rates: (not configured)\n";
        return 0;
    }
    auto raw = corpus::load_rate_ranges(cfg.rates_path);
    corpus::RateRangeSeries ranges(raw);
    std::cout << "rates: " << raw.size() << " daily ranges\n";
    std::cout << "window " << cfg.window_days << " business day(s):\n";
    for (corpus::Tenor t : corpus::kAllTenors) {
        int complete = 0;
        for (const auto& c : conferences) {
            try {
                ranges.event_volatility(c.date, t, cfg.window_days);
                ++complete;
            } catch (const corpus::MissingDayError&) {
            }
        }
        std::cout << "  " << corpus::tenor_token(t) << ": " << complete << " of "
                  << conferences.size() << " events with complete market data\n";
    }
    return 0;
}

int cmd_personas(std::uint64_t seed, int count, const std::string& out_path) {
    auto population = personas::generate_population(seed, count);
    json doc = personas::to_json(population);
    if (out_path.empty()) {
        std::cout << doc.dump(2) << "\n";
    } else {
        std::ofstream out(out_path);
        if (!out) throw DataError("cannot write " + out_path);
        out << doc.dump(2) << "\n";
    }
    return 0;
}

int cmd_simulate(const CommonArgs& args, const std::string& strategy_name, int variation) {
    cli::Config cfg = load_effective_config(args);
    cli::Strategy strategy;
    if (variation > 0) strategy = cli::Strategy::Perturbation;
    else if (strategy_name == "zero-shot") strategy = cli::Strategy::ZeroShot;
    else if (strategy_name == "few-shot") strategy = cli::Strategy::FewShot;
    else throw ValidationError("unknown strategy: '" + strategy_name + "'");

    cli::ClientStack stack = cli::make_client_stack(cfg);
    fs::create_directories(args.out_dir);
    provider::RecordingClient recorded(stack.top(),
                                       (fs::path(args.out_dir) / "prompts-audit.jsonl")
                                           .string());
    cli::SimulateOutcome outcome =
        cli::run_simulate(cfg, strategy, variation, recorded, args.out_dir);
    std::cout << "run " << outcome.manifest.run_id << ": " << outcome.table.rows.size()
              << " dispersion cells, " << outcome.skipped_events << " skipped events, "
              << outcome.discarded_runs << " discarded runs\n"
              << "wrote " << outcome.dispersion_csv << "\n";
    return 0;
}

int cmd_judge_optimize(const CommonArgs& args) {
    cli::Config cfg = load_effective_config(args);
    fs::create_directories(args.out_dir);

    auto conferences = corpus::load_conferences(cfg.conferences_path);
    corpus::CorpusSplit split = corpus::chronological_split(conferences, cfg.train_fraction);
    corpus::RateRangeSeries ranges(corpus::load_rate_ranges(cfg.rates_path));
    auto market = ranges.observations(split.train, cfg.window_days);

    auto population = cfg.delegated_personas
                          ? std::vector<personas::AgentPersona>{}
                          : personas::generate_population(cfg.seed, cfg.population);
    prompting::RenderOptions render_opts;
    render_opts.delegated_personas = cfg.delegated_personas;
    render_opts.population = cfg.population;
    prompting::PromptSpec initial = prompting::zero_shot_template(population, render_opts);

    cli::ClientStack stack = cli::make_client_stack(cfg);
    provider::RecordingClient recorded(stack.top(),
                                       (fs::path(args.out_dir) / "prompts-audit.jsonl")
                                           .string());

    judge::OptimizeConfig oc = cli::optimize_config(cfg);
    oc.history_path = (fs::path(args.out_dir) / "history.jsonl").string();

    cli::RunManifest manifest;
    manifest.run_id = cli::make_run_id(cfg, "judge-optimize");
    manifest.strategy = "judge-optimize";
    manifest.config_digest = cli::config_digest(cfg);
    manifest.seed = cfg.seed;
    manifest.provider = stack.top().name();
    manifest.started = cli::iso_now();

    judge::OptimizationResult result =
        judge::optimize(split.train, market, initial, recorded, recorded, oc);

    manifest.finished = cli::iso_now();
    manifest.extra = json{{"train_events", split.train.size()},
                          {"iterations", result.history.entries.size()}};
    cli::write_manifest((fs::path(args.out_dir) / "manifest.json").string(), manifest);

    json summary;
    summary["run_id"] = manifest.run_id;
    summary["stop_reason"] = judge::to_string(result.stop_reason);
    summary["best_score"] = result.best_score;
    summary["iterations"] = json::array();
    int best_iteration = 0;
    for (const auto& e : result.history.entries) {
        summary["iterations"].push_back({{"iteration", e.iteration},
                                         {"train_score", e.avg_correlation},
                                         {"version_tag", e.prompt.version_tag}});
        if (e.prompt.version_tag == result.best_prompt.version_tag && best_iteration == 0)
            best_iteration = e.iteration;
    }
    summary["best_iteration"] = best_iteration;
    std::ofstream out(fs::path(args.out_dir) / "summary.json");
    out << summary.dump(2) << "\n";

    std::cout << "optimization stopped: " << judge::to_string(result.stop_reason) << " after "
              << result.history.entries.size() << " iteration(s); best score "
              << result.best_score << " at iteration " << best_iteration << "\n"
              << "history: " << oc.history_path << "\n";
    return 0;
}

int cmd_judge_evaluate(const CommonArgs& args, const std::string& history_path) {
    cli::Config cfg = load_effective_config(args);
    fs::create_directories(args.out_dir);

    auto conferences = corpus::load_conferences(cfg.conferences_path);
    corpus::CorpusSplit split = corpus::chronological_split(conferences, cfg.train_fraction);
    corpus::RateRangeSeries ranges(corpus::load_rate_ranges(cfg.rates_path));
    auto market = ranges.observations(split.test, cfg.window_days);

    judge::OptimizationHistory history = judge::load_history(history_path);

    cli::ClientStack stack = cli::make_client_stack(cfg);
    provider::RecordingClient recorded(stack.top(),
                                       (fs::path(args.out_dir) / "prompts-audit.jsonl")
                                           .string());
    judge::OptimizeConfig oc = cli::optimize_config(cfg);

    auto scores =
        judge::evaluate_prompts_out_of_sample(split.test, market, history, recorded, oc);

    cli::RunManifest manifest;
    manifest.run_id = cli::make_run_id(cfg, "judge-evaluate");
    manifest.strategy = "judge-evaluate";
    manifest.config_digest = cli::config_digest(cfg);
    manifest.seed = cfg.seed;
    manifest.provider = stack.top().name();
    manifest.started = cli::iso_now();
    manifest.finished = cli::iso_now();
    manifest.extra = json{{"test_events", split.test.size()}};
    cli::write_manifest((fs::path(args.out_dir) / "manifest.json").string(), manifest);

    json doc;
    doc["run_id"] = manifest.run_id;
    for (const auto& [iteration, score] : scores)
        doc["test_scores"][std::to_string(iteration)] = score;
    std::ofstream out(fs::path(args.out_dir) / "test_scores.json");
    out << doc.dump(2) << "\n";
    std::cout << "evaluated " << scores.size() << " prompt(s) out of sample\n";
    for (const auto& [iteration, score] : scores)
        std::cout << "  iteration " << iteration << ": " << score << "\n";
    return 0;
}

int cmd_perturb_suite(const CommonArgs& args, int sample_size) {
    cli::Config cfg = load_effective_config(args);
    fs::create_directories(args.out_dir);

    auto conferences = corpus::load_conferences(cfg.conferences_path);
    if (sample_size <= 0 || sample_size > static_cast<int>(conferences.size()))
        sample_size = static_cast<int>(conferences.size());

    // seeded sample without replacement, kept in chronological order
    std::vector<size_t> indices(conferences.size());
    for (size_t i = 0; i < indices.size(); ++i) indices[i] = i;
    Rng rng(cfg.seed ^ 0x7e7b7e7b7e7b7e7bULL);
    for (size_t i = indices.size() - 1; i > 0; --i) {
        size_t j = static_cast<size_t>(rng.below(i + 1));
        std::swap(indices[i], indices[j]);
    }
    indices.resize(static_cast<size_t>(sample_size));
    std::sort(indices.begin(), indices.end());
    std::vector<corpus::Conference> sampled;
    sampled.reserve(indices.size());
    for (size_t i : indices) sampled.push_back(conferences[i]);

    auto registry = prompting::PerturbationRegistry::load(cfg.registry_path);
    auto population = cfg.delegated_personas
                          ? std::vector<personas::AgentPersona>{}
                          : personas::generate_population(cfg.seed, cfg.population);
    prompting::RenderOptions render_opts;
    render_opts.delegated_personas = cfg.delegated_personas;
    render_opts.population = cfg.population;
    prompting::PromptSpec base = prompting::zero_shot_template(population, render_opts);

    cli::ClientStack stack = cli::make_client_stack(cfg);
    provider::RecordingClient recorded(stack.top(),
                                       (fs::path(args.out_dir) / "prompts-audit.jsonl")
                                           .string());
    sim::SimOptions sopt = cli::sim_options(cfg);

    cli::RunManifest manifest;
    manifest.run_id = cli::make_run_id(cfg, "perturb-suite");
    manifest.strategy = "perturb-suite";
    manifest.config_digest = cli::config_digest(cfg);
    manifest.seed = cfg.seed;
    manifest.provider = stack.top().name();
    manifest.started = cli::iso_now();

    std::map<int, dispersion::DispersionTable> tables;
    for (int id : registry.ids()) {
        prompting::PromptSpec perturbed = registry.apply(base, id);
        sim::CorpusSimResult result = sim::simulate_events(
            sampled,
            [&](const corpus::Conference& c) {
                return prompting::materialize(perturbed.body, c);
            },
            recorded, sopt, "perturb:" + std::to_string(id));
        tables[id] = dispersion::build_dispersion_table(result.runs);
        char name[64];
        std::snprintf(name, sizeof(name), "perturb-%02d.csv", id);
        dispersion::write_csv(tables[id], (fs::path(args.out_dir) / name).string(),
                              manifest.run_id);
        std::cout << "variation " << id << " (" << registry.variation(id).intensity
                  << "): " << tables[id].rows.size() << " cells\n";
    }

    // reliability across prompt variations, per tenor and intensity group
    auto icc_for = [&](const std::vector<int>& ids, corpus::Tenor tenor)
        -> std::optional<eval::IccResult> {
        std::vector<std::vector<double>> matrix;
        for (const auto& c : sampled) {
            std::vector<double> row;
            for (int id : ids) {
                auto it = tables[id].rows.find({c.date, tenor});
                if (it == tables[id].rows.end()) break;
                row.push_back(it->second.value);
            }
            if (row.size() == ids.size()) matrix.push_back(std::move(row));
        }
        try {
            return eval::icc(matrix, tenor);
        } catch (const ValidationError&) {
            return std::nullopt;
        }
    };

    std::vector<int> all_ids = registry.ids(), minor_ids, medium_ids;
    for (int id : all_ids) {
        (registry.variation(id).intensity == "minor" ? minor_ids : medium_ids).push_back(id);
    }

    json icc_doc;
    std::ofstream icc_csv(fs::path(args.out_dir) / "icc.csv");
    icc_csv << "tenor,group,icc,sigma2_conferences,sigma2_methods,k_methods\n";
    for (corpus::Tenor tenor : corpus::kAllTenors) {
        for (const auto& [group, ids] :
             std::vector<std::pair<std::string, std::vector<int>>>{
                 {"all", all_ids}, {"minor", minor_ids}, {"medium", medium_ids}}) {
            if (ids.size() < 2) continue;
            auto r = icc_for(ids, tenor);
            if (!r) continue;
            icc_doc[corpus::tenor_token(tenor)][group] = {
                {"icc", r->icc},
                {"sigma2_conferences", r->sigma2_conferences},
                {"sigma2_methods", r->sigma2_methods},
                {"k_methods", r->k_methods}};
            char row[160];
            std::snprintf(row, sizeof(row), "%s,%s,%.6f,%.8f,%.8f,%d",
                          corpus::tenor_token(tenor).c_str(), group.c_str(), r->icc,
                          r->sigma2_conferences, r->sigma2_methods, r->k_methods);
            icc_csv << row << "\n";
            std::cout << corpus::tenor_token(tenor) << " " << group << ": ICC " << r->icc
                      << "\n";
        }
    }
    std::ofstream icc_json(fs::path(args.out_dir) / "icc.json");
    icc_json << icc_doc.dump(2) << "\n";

    manifest.finished = cli::iso_now();
    json dates = json::array();
    for (const auto& c : sampled) dates.push_back(c.date.iso());
    manifest.extra = json{{"sample_size", sample_size}, {"sampled_dates", dates}};
    cli::write_manifest((fs::path(args.out_dir) / "manifest.json").string(), manifest);
    return 0;
}

int cmd_report(const CommonArgs& args, const std::vector<std::string>& dispersion_paths) {
    cli::Config cfg = load_effective_config(args);
    cli::ReportInputs inputs;
    inputs.dispersion_paths = dispersion_paths;
    inputs.rates_path = cfg.rates_path;
    inputs.conferences_path = cfg.conferences_path;
    json report = cli::run_report(inputs, cfg, args.out_dir);

    cli::RunManifest manifest;
    manifest.run_id = report["run_id"].get<std::string>();
    manifest.strategy = "report";
    manifest.config_digest = cli::config_digest(cfg);
    manifest.seed = cfg.seed;
    manifest.provider = "(none)";
    manifest.started = cli::iso_now();
    manifest.finished = manifest.started;
    cli::write_manifest((fs::path(args.out_dir) / "manifest.json").string(), manifest);

    std::cout << "report written to " << args.out_dir << "/report.json\n";
    for (const auto& [tenor, block] : report["correlations"].items()) {
        if (block.contains("metrics") && block["metrics"]["spearman"].contains("estimate")) {
            std::cout << "  " << tenor << " spearman "
                      << block["metrics"]["spearman"]["estimate"].get<double>() << " (n="
                      << block["n"].get<int>() << ")\n";
        }
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"LLM trader-agent simulation of post-conference rate disagreement"};
    app.require_subcommand(1);

    CommonArgs ingest_args;
    auto* ingest = app.add_subcommand("ingest-check",
                                      "Validate corpus and market data, report coverage");
    add_common(ingest, ingest_args, false);

    std::uint64_t personas_seed = 42;
    int personas_count = 30;
    std::string personas_out;
    auto* personas_cmd =
        app.add_subcommand("personas", "Generate the synthetic trader population");
    personas_cmd->add_option("--seed", personas_seed, "Population seed");
    personas_cmd->add_option("--count", personas_count, "Population size");
    personas_cmd->add_option("--out", personas_out, "Write JSON here instead of stdout");

    CommonArgs sim_args;
    std::string sim_strategy = "zero-shot";
    int sim_variation = 0;
    auto* simulate =
        app.add_subcommand("simulate", "Simulate conferences and emit dispersion.csv");
    add_common(simulate, sim_args);
    simulate->add_option("--strategy", sim_strategy, "zero-shot or few-shot");
    simulate->add_option("--variation", sim_variation,
                         "Perturbation id 1-15 (overrides --strategy)");

    CommonArgs opt_args;
    auto* optimize = app.add_subcommand(
        "judge-optimize", "Iterative judge loop on the chronological training set");
    add_common(optimize, opt_args);

    CommonArgs eval_args;
    std::string history_path;
    auto* evaluate = app.add_subcommand(
        "judge-evaluate", "Score every optimized prompt on the held-out test set");
    add_common(evaluate, eval_args);
    evaluate->add_option("--history", history_path, "history.jsonl from judge-optimize")
        ->required()
        ->check(CLI::ExistingFile);

    CommonArgs perturb_args;
    int sample_size = 30;
    auto* perturb = app.add_subcommand(
        "perturb-suite", "Run all prompt variations on a sampled conference subset");
    add_common(perturb, perturb_args);
    perturb->add_option("--sample-size", sample_size, "Number of sampled conferences");

    CommonArgs report_args;
    std::vector<std::string> dispersion_paths;
    auto* report = app.add_subcommand("report", "Statistical validation report");
    add_common(report, report_args);
    report->add_option("--dispersion", dispersion_paths, "Dispersion CSV (repeatable)")
        ->required();

    try {
        app.parse(argc, argv);
        if (*ingest) return cmd_ingest_check(ingest_args);
        if (*personas_cmd) return cmd_personas(personas_seed, personas_count, personas_out);
        if (*simulate) return cmd_simulate(sim_args, sim_strategy, sim_variation);
        if (*optimize) return cmd_judge_optimize(opt_args);
        if (*evaluate) return cmd_judge_evaluate(eval_args, history_path);
        if (*perturb) return cmd_perturb_suite(perturb_args, sample_size);
        if (*report) return cmd_report(report_args, dispersion_paths);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;  // usage problems are validation errors
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
