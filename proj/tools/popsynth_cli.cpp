// popsynth command line: benchmark generation, structure learning, fitting,
// corpus export, generation, evaluation, single experiments and sweeps.
//
// Exit codes: 0 success, 2 configuration error, 3 stage failure,
// 4 attempt budget exhausted.
#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <sstream>

#include "popsynth/popsynth.hpp"

namespace fs = std::filesystem;
using namespace popsynth;

namespace {

enum ExitCode { kOk = 0, kConfig = 2, kStage = 3, kBudget = 4 };

bool is_config_error(const std::exception& e) {
    return dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const InvalidRate*>(&e) ||
           dynamic_cast<const NonPositiveTemperature*>(&e);
}

int exit_code_for(const std::exception_ptr& ep) {
    try {
        std::rethrow_exception(ep);
    } catch (const AttemptBudgetExceeded&) {
        return kBudget;
    } catch (const StageError& e) {
        if (e.stage() == "config") return kConfig;
        if (e.cause()) {
            const int inner = exit_code_for(e.cause());
            if (inner == kBudget) return kBudget;
        }
        return kStage;
    } catch (const std::exception& e) {
        return is_config_error(e) ? kConfig : kStage;
    } catch (...) {
        return kStage;
    }
}

// Flags shared by most subcommands, bound onto each subcommand that uses them.
struct Common {
    std::string schema;
    std::string population;
    std::string sample;
    double sample_rate = 0.05;
    std::uint64_t seed = 0;
    std::string out_dir = ".";
};

void add_schema(CLI::App* app, Common& c) { app->add_option("--schema", c.schema, "Attribute schema JSON")->required(); }
void add_out_dir(CLI::App* app, Common& c) {
    app->add_option("--out-dir", c.out_dir, "Output directory")->capture_default_str();
}
void add_seed(CLI::App* app, Common& c) { app->add_option("--seed", c.seed, "Master seed")->capture_default_str(); }
void add_data(CLI::App* app, Common& c) {
    app->add_option("--population", c.population, "Population CSV (h-population)");
    app->add_option("--sample", c.sample, "Sample CSV (h-sample); split from the population when omitted");
    app->add_option("--sample-rate", c.sample_rate, "Sampling rate used when splitting")->capture_default_str();
}

// The sample named on the command line, or a split of the population.
Dataset resolve_sample(const Common& c, const SchemaPtr& schema) {
    if (!c.sample.empty()) return run_stage("load", [&] { return load_dataset_file(c.sample, schema, "h-sample"); });
    if (c.population.empty()) throw ConfigError("need --sample or --population");
    auto pop = run_stage("load", [&] { return load_dataset_file(c.population, schema, "h-population"); });
    return run_stage("split", [&] { return split_h_sample(pop, c.sample_rate, derive_seed(c.seed, 1)); });
}

SchemaPtr load_schema(const Common& c) {
    return run_stage("load", [&] { return load_schema_file(c.schema); });
}

void write_json(const fs::path& path, const nlohmann::json& j) {
    run_stage("write", [&] { write_text_file(path, j.dump(2) + "\n"); });
}

void report(const std::string& what, const fs::path& path) { std::cout << what << ": " << path.string() << '\n'; }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Population synthesis with Bayesian-network guided generation"};
    app.require_subcommand(1);
    Common c;

    // benchmark
    auto* bench = app.add_subcommand("benchmark", "Emit a synthetic ground-truth benchmark");
    std::string spec_path;
    std::size_t population_size = 200'000;
    std::size_t coverage_reps = 5;
    Common bc;
    bc.seed = 2024;
    bench->add_option("--spec", spec_path, "Benchmark spec JSON (default: built-in 10-attribute benchmark)");
    bench->add_option("--population-size", population_size, "h-population size")->capture_default_str();
    bench->add_option("--sample-rate", bc.sample_rate, "h-sample rate")->capture_default_str();
    bench->add_option("--coverage-reps", coverage_reps, "Replications per rate in coverage.csv")->capture_default_str();
    add_seed(bench, bc);
    add_out_dir(bench, bc);

    // learn-structure
    auto* learn = app.add_subcommand("learn-structure", "Hill-climb a DAG on the sample (K2 score)");
    std::size_t max_in_degree = 1;
    std::size_t restarts = 4;
    add_schema(learn, c);
    add_data(learn, c);
    add_seed(learn, c);
    add_out_dir(learn, c);
    learn->add_option("--max-in-degree", max_in_degree, "Parent cap per node")->capture_default_str();
    learn->add_option("--restarts", restarts, "Hill-climb restarts")->capture_default_str();

    // fit
    auto* fit = app.add_subcommand("fit", "Estimate conditional tables for a DAG");
    std::string dag_path;
    double alpha = 0.1;
    add_schema(fit, c);
    add_data(fit, c);
    add_seed(fit, c);
    add_out_dir(fit, c);
    fit->add_option("--dag", dag_path, "DAG JSON")->required();
    fit->add_option("--alpha", alpha, "Additive smoothing")->capture_default_str();

    // corpus
    auto* corpus = app.add_subcommand("corpus", "Export the sample as sentences for fine-tuning");
    std::string ordering = "dag-det";
    add_schema(corpus, c);
    add_data(corpus, c);
    add_seed(corpus, c);
    add_out_dir(corpus, c);
    corpus->add_option("--dag", dag_path, "DAG JSON")->required();
    corpus->add_option("--ordering", ordering, "dag-det | dag-rand | random-perm")->capture_default_str();

    // generate
    auto* generate = app.add_subcommand("generate", "Generate a synthetic population");
    std::string model = "bn-chain";
    std::string bayesnet_path;
    std::string endpoint;
    double tau = 1.0;
    double lambda = 1.0;
    std::size_t target_count = 0;
    double max_attempts_factor = 20.0;
    std::size_t batch_size = 256;
    add_schema(generate, c);
    add_data(generate, c);
    add_seed(generate, c);
    add_out_dir(generate, c);
    generate->add_option("--model", model, "prototypical | bn-chain | external")->capture_default_str();
    generate->add_option("--bayesnet", bayesnet_path, "Fitted network JSON (bn-chain, external prompt)");
    generate->add_option("--dag", dag_path, "DAG JSON (external prompt when no network is given)");
    generate->add_option("--endpoint", endpoint, "Adapter address tcp://host:port or a command to spawn");
    generate->add_option("--tau", tau, "Decoding temperature")->capture_default_str();
    generate->add_option("--lambda", lambda, "Fit depth in [0, 1]")->capture_default_str();
    generate->add_option("--ordering", ordering, "dag-det | dag-rand | random-perm")->capture_default_str();
    generate->add_option("--target-count", target_count, "Records to generate (0: population size)");
    generate->add_option("--max-attempts-factor", max_attempts_factor, "Abort after factor * M attempts")
        ->capture_default_str();
    generate->add_option("--batch-size", batch_size, "Lines per adapter request")->capture_default_str();

    // evaluate
    auto* evaluate_cmd = app.add_subcommand("evaluate", "Score a generated population");
    std::string generated_path;
    bool conventional = false;
    add_schema(evaluate_cmd, c);
    add_data(evaluate_cmd, c);
    add_seed(evaluate_cmd, c);
    add_out_dir(evaluate_cmd, c);
    evaluate_cmd->add_option("--generated", generated_path, "Generated CSV")->required();
    evaluate_cmd->add_flag("--conventional-srmse", conventional, "RMSE over all cells divided by the mean cell");

    // experiment and sweep share the full configuration
    ExperimentConfig cfg;
    std::string config_path;
    std::string model_name = "bn-chain";
    std::string ordering_name = "dag-det";
    auto add_experiment_flags = [&](CLI::App* sc) {
        sc->add_option("--config", config_path, "Experiment config JSON; flags given explicitly override it");
        sc->add_option("--schema", cfg.schema_path, "Attribute schema JSON");
        sc->add_option("--population", cfg.population_path, "Population CSV");
        sc->add_option("--sample", cfg.sample_path, "Sample CSV (split from the population when omitted)");
        sc->add_option("--sample-rate", cfg.sample_rate, "Sampling rate")->capture_default_str();
        sc->add_option("--model", model_name, "prototypical | bn-chain | external")->capture_default_str();
        sc->add_option("--lambda", cfg.lambda, "Fit depth in [0, 1]")->capture_default_str();
        sc->add_option("--alpha", cfg.alpha, "Additive smoothing")->capture_default_str();
        sc->add_option("--tau", cfg.tau, "Decoding temperature")->capture_default_str();
        sc->add_option("--max-in-degree", cfg.max_in_degree, "Parent cap per node")->capture_default_str();
        sc->add_option("--restarts", cfg.restarts, "Hill-climb restarts")->capture_default_str();
        sc->add_option("--ordering", ordering_name, "dag-det | dag-rand | random-perm")->capture_default_str();
        sc->add_option("--target-count", cfg.target_count, "Records to generate (0: population size)");
        sc->add_option("--endpoint", cfg.endpoint, "Adapter address or command (external model)");
        sc->add_option("--max-attempts-factor", cfg.max_attempts_factor, "Abort after factor * M attempts")
            ->capture_default_str();
        sc->add_option("--batch-size", cfg.batch_size, "Lines per adapter request")->capture_default_str();
        sc->add_option("--out-dir", cfg.out_dir, "Output directory");
        sc->add_option("--seed", cfg.seed, "Master seed")->capture_default_str();
    };
    auto* experiment = app.add_subcommand("experiment", "Split, fit, generate and evaluate in one run");
    add_experiment_flags(experiment);

    auto* sweep_cmd = app.add_subcommand("sweep", "Temperature x depth sensitivity grid");
    add_experiment_flags(sweep_cmd);
    SweepGrid grid{{0.5, 1.0, 1.5}, {0.3, 0.6, 0.9, 1.0}, {0, 1, 2, 3, 4}};
    std::size_t workers = 0;
    sweep_cmd->add_option("--taus", grid.taus, "Temperature grid")->delimiter(',')->capture_default_str();
    sweep_cmd->add_option("--depths", grid.depths, "Depth (lambda) grid")->delimiter(',')->capture_default_str();
    sweep_cmd->add_option("--seeds", grid.seeds, "Seeds")->delimiter(',')->capture_default_str();
    sweep_cmd->add_option("--workers", workers, "Parallel cells (0: hardware concurrency)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kConfig;
    }

    try {
        const fs::path out = *bench ? bc.out_dir : c.out_dir;

        if (*bench) {
            auto spec = spec_path.empty() ? default_benchmark_spec(bc.seed)
                                          : benchmark_spec_from_json(load_json_file(spec_path));
            if (spec_path.empty()) {
                spec.population_size = population_size;
                spec.sample_rate = bc.sample_rate;
            }
            spec.validate();
            const auto b = run_stage("benchmark", [&] { return make_benchmark(spec); });
            const auto& schema = *b.truth.schema;
            run_stage("write", [&] {
                write_text_file(out / "schema.json", schema_to_json(schema).dump(2) + "\n");
                write_text_file(out / "truth.json", bayesnet_to_json(b.truth).dump(2) + "\n");
                write_text_file(out / "dag.json", dag_to_json(b.truth.dag, schema.names()).dump(2) + "\n");
                write_text_file(out / "benchmark_spec.json", benchmark_spec_to_json(spec).dump(2) + "\n");
                write_dataset_file(out / "population.csv", b.population);
                write_dataset_file(out / "sample.csv", b.sample);
                if (coverage_reps > 0) {
                    const auto curve = coverage_analysis(b.population, {0.01, 0.02, 0.05, 0.1, 0.2, 0.5},
                                                         coverage_reps, benchmark_split_seed(spec));
                    std::ostringstream ss;
                    write_coverage_csv(ss, curve);
                    write_text_file(out / "coverage.csv", ss.str());
                }
            });
            const auto cov = sample_coverage(CombinationIndex(b.sample), CombinationIndex(b.population));
            std::cout << "population " << b.population.size() << " records, sample " << b.sample.size()
                      << " records, combo coverage " << cov.combo_coverage << ", instance coverage "
                      << cov.instance_coverage << '\n';
            report("written", out);
            return kOk;
        }

        if (*learn) {
            const auto schema = load_schema(c);
            const auto sample = resolve_sample(c, schema);
            HillClimbOptions opt;
            opt.max_in_degree = max_in_degree;
            opt.restarts = restarts;
            opt.seed = derive_seed(c.seed, 2);
            if (opt.max_in_degree < 1 || opt.restarts < 1) throw ConfigError("max in-degree and restarts must be >= 1");
            const auto res = run_stage("fit", [&] { return hill_climb_search(sample, opt); });
            auto j = dag_to_json(res.dag, schema->names());
            j["score"] = res.score;
            write_json(out / "dag.json", j);
            std::cout << "K2 log score " << res.score << ", " << res.dag.edge_count() << " edges\n";
            report("dag", out / "dag.json");
            return kOk;
        }

        if (*fit) {
            const auto schema = load_schema(c);
            const auto sample = resolve_sample(c, schema);
            const auto dag = run_stage("load", [&] { return dag_from_json(load_json_file(dag_path), schema->names()); });
            const auto bn = run_stage("fit", [&] { return fit_cpts(sample, dag, alpha); });
            write_json(out / "bayesnet.json", bayesnet_to_json(bn));
            report("bayesnet", out / "bayesnet.json");
            return kOk;
        }

        if (*corpus) {
            const auto schema = load_schema(c);
            const auto sample = resolve_sample(c, schema);
            const auto dag = run_stage("load", [&] { return dag_from_json(load_json_file(dag_path), schema->names()); });
            const auto policy = ordering_policy_from_string(ordering);
            run_stage("write", [&] {
                std::ostringstream ss;
                write_corpus(ss, sample, dag, policy, derive_seed(c.seed, 4));
                write_text_file(out / "corpus.txt", ss.str());
            });
            report("corpus", out / "corpus.txt");
            return kOk;
        }

        if (*generate) {
            const auto schema = load_schema(c);
            const auto kind = model_kind_from_string(model);
            GenerationConfig gen;
            gen.temperature = tau;
            gen.ordering_policy = ordering_policy_from_string(ordering);
            gen.seed = derive_seed(c.seed, 3);
            gen.max_attempts_factor = max_attempts_factor;
            gen.batch_size = batch_size;
            gen.target_count = target_count;
            if (gen.target_count == 0) {
                if (c.population.empty()) throw ConfigError("--target-count is required without --population");
                gen.target_count =
                    run_stage("load", [&] { return load_dataset_file(c.population, schema, "h-population"); }).size();
            }
            run_stage("config", [&] { gen.validate(); });

            GenerationResult res;
            if (kind == ModelKind::Prototypical) {
                const auto sample = resolve_sample(c, schema);
                res.dataset = run_stage("generate", [&] {
                    return prototypical_generate(PrototypicalAgent(sample), gen.target_count, gen.seed);
                });
                res.stats.attempts = res.stats.accepted = gen.target_count;
            } else {
                std::optional<BayesNet> bn;
                if (!bayesnet_path.empty())
                    bn = run_stage("load", [&] { return bayesnet_from_json(load_json_file(bayesnet_path), schema); });
                if (kind == ModelKind::BnChain) {
                    if (!bn) throw ConfigError("bn-chain generation needs --bayesnet");
                    res = run_stage("generate",
                                    [&] { return generate_population(ChainModel(*bn, lambda), gen, schema, bn->dag); });
                } else {
                    if (endpoint.empty()) throw ConfigError("external generation needs --endpoint");
                    Dag dag = bn ? bn->dag : Dag(schema->size());
                    if (!bn && !dag_path.empty())
                        dag = run_stage("load", [&] { return dag_from_json(load_json_file(dag_path), schema->names()); });
                    res = run_stage("generate", [&] {
                        auto channel = open_endpoint(endpoint);
                        TextGenerationClient client(*channel);
                        return generate_via_external(client, gen, schema, generation_prompt(*schema, dag), true);
                    });
                }
            }
            run_stage("write", [&] {
                write_dataset_file(out / "generated.csv", res.dataset);
                write_text_file(out / "stats.json", to_json(res.stats).dump(2) + "\n");
                if (!res.raw.empty()) {
                    std::ostringstream ss;
                    write_raw_jsonl(ss, res.raw);
                    write_text_file(out / "raw.jsonl", ss.str());
                }
            });
            std::cout << res.stats.accepted << " records accepted of " << res.stats.attempts << " attempts\n";
            report("generated", out / "generated.csv");
            return kOk;
        }

        if (*evaluate_cmd) {
            const auto schema = load_schema(c);
            if (c.population.empty()) throw ConfigError("evaluate needs --population");
            const auto pop = run_stage("load", [&] { return load_dataset_file(c.population, schema, "h-population"); });
            const auto sample = resolve_sample(c, schema);
            const auto gen = run_stage("load", [&] { return load_dataset_file(generated_path, schema, "generated"); });
            auto r = run_stage("evaluate", [&] {
                return evaluate(gen, sample, pop, conventional ? SrmseVariant::Conventional : SrmseVariant::Relative);
            });
            r.config = {{"schema", c.schema},
                        {"population", c.population},
                        {"sample", c.sample},
                        {"generated", generated_path},
                        {"srmse", conventional ? "conventional" : "relative"}};
            write_json(out / "report.json", to_json(r));
            std::cout << "precision " << r.precision << ", recall " << r.recall << ", f1 " << r.f1 << '\n';
            report("report", out / "report.json");
            return kOk;
        }

        // experiment / sweep
        if (!config_path.empty()) {
            // Explicit flags win over the file.
            auto file_cfg = experiment_config_from_json(load_json_file(config_path));
            auto* sc = *experiment ? experiment : sweep_cmd;
            auto given = [&](const char* flag) { return sc->count(flag) > 0; };
            auto keep = [&](const char* flag, auto& dst, const auto& src) {
                if (given(flag)) dst = src;
            };
            keep("--schema", file_cfg.schema_path, cfg.schema_path);
            keep("--population", file_cfg.population_path, cfg.population_path);
            keep("--sample", file_cfg.sample_path, cfg.sample_path);
            keep("--sample-rate", file_cfg.sample_rate, cfg.sample_rate);
            keep("--lambda", file_cfg.lambda, cfg.lambda);
            keep("--alpha", file_cfg.alpha, cfg.alpha);
            keep("--tau", file_cfg.tau, cfg.tau);
            keep("--max-in-degree", file_cfg.max_in_degree, cfg.max_in_degree);
            keep("--restarts", file_cfg.restarts, cfg.restarts);
            keep("--target-count", file_cfg.target_count, cfg.target_count);
            keep("--endpoint", file_cfg.endpoint, cfg.endpoint);
            keep("--max-attempts-factor", file_cfg.max_attempts_factor, cfg.max_attempts_factor);
            keep("--batch-size", file_cfg.batch_size, cfg.batch_size);
            keep("--out-dir", file_cfg.out_dir, cfg.out_dir);
            keep("--seed", file_cfg.seed, cfg.seed);
            if (given("--model")) file_cfg.model = model_kind_from_string(model_name);
            if (given("--ordering")) file_cfg.ordering = ordering_policy_from_string(ordering_name);
            cfg = file_cfg;
        } else {
            cfg.model = model_kind_from_string(model_name);
            cfg.ordering = ordering_policy_from_string(ordering_name);
        }
        if (cfg.schema_path.empty() || cfg.population_path.empty())
            throw ConfigError("--schema and --population are required");
        if (cfg.out_dir.empty()) cfg.out_dir = ".";

        if (*experiment) {
            const auto r = run_experiment(cfg);
            std::cout << "precision " << r.precision << ", recall " << r.recall << ", f1 " << r.f1 << ", unique "
                      << r.unique_combinations_generated << ", marginal SRMSE " << r.marginal_srmse
                      << ", bivariate SRMSE " << r.bivariate_srmse << '\n';
            report("report", fs::path(cfg.out_dir) / "report.json");
            return kOk;
        }

        const auto result = sweep(cfg, grid, workers);
        for (const auto& f : result.failures)
            std::cerr << "cell tau=" << f.tau << " depth=" << f.depth << " seed=" << f.seed << " failed: " << f.message
                      << '\n';
        if (result.best)
            std::cout << "best F1 " << result.best->f1 << " at tau=" << result.best->tau
                      << " depth=" << result.best->depth << '\n';
        report("sweep", fs::path(cfg.out_dir) / "sweep.csv");
        return result.rows.empty() ? kStage : kOk;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_for(std::current_exception());
    }
}
