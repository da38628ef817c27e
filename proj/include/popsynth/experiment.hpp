#ifndef POPSYNTH_EXPERIMENT_HPP
#define POPSYNTH_EXPERIMENT_HPP

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "popsynth/bayesnet.hpp"
#include "popsynth/dataset.hpp"
#include "popsynth/endpoint.hpp"
#include "popsynth/genmodels.hpp"
#include "popsynth/metrics.hpp"
#include "popsynth/sampler.hpp"

namespace popsynth {

enum class ModelKind { Prototypical, BnChain, External };

inline std::string_view to_string(ModelKind m) {
    switch (m) {
        case ModelKind::Prototypical: return "prototypical";
        case ModelKind::BnChain: return "bn-chain";
        case ModelKind::External: return "external";
    }
    return "unknown";
}

inline ModelKind model_kind_from_string(std::string_view s) {
    if (s == "prototypical") return ModelKind::Prototypical;
    if (s == "bn-chain") return ModelKind::BnChain;
    if (s == "external") return ModelKind::External;
    throw ConfigError("unknown model '" + std::string(s) + "'");
}

struct ExperimentConfig {
    std::string schema_path;
    std::string population_path;
    std::string sample_path;  // empty: split the population at sample_rate
    double sample_rate = 0.05;
    ModelKind model = ModelKind::BnChain;
    double lambda = 1.0;  // fit depth of bn-chain
    double alpha = 0.1;
    double tau = 1.0;
    std::size_t max_in_degree = 1;
    std::size_t restarts = 4;
    OrderingPolicy ordering = OrderingPolicy::DagDeterministic;
    std::size_t target_count = 0;  // 0: population size
    std::string endpoint;
    double max_attempts_factor = 20.0;
    std::size_t batch_size = 256;
    std::string out_dir;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(sample_rate > 0.0 && sample_rate <= 1.0)) throw InvalidRate(sample_rate);
        if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("lambda must lie in [0, 1]");
        if (!(alpha >= 0.0)) throw ConfigError("alpha must be non-negative");
        if (!(tau > 0.0)) throw NonPositiveTemperature(tau);
        if (max_in_degree < 1) throw ConfigError("max in-degree must be >= 1");
        if (restarts < 1) throw ConfigError("restarts must be >= 1");
        if (model == ModelKind::External && endpoint.empty()) throw ConfigError("external model needs --endpoint");
    }

    // Seed streams for each stage.
    std::uint64_t split_seed() const { return derive_seed(seed, 1); }
    std::uint64_t structure_seed() const { return derive_seed(seed, 2); }
    std::uint64_t generation_seed() const { return derive_seed(seed, 3); }
};

inline nlohmann::json to_json(const ExperimentConfig& c) {
    return {{"schema", c.schema_path},
            {"population", c.population_path},
            {"sample", c.sample_path},
            {"sample_rate", c.sample_rate},
            {"model", to_string(c.model)},
            {"lambda", c.lambda},
            {"alpha", c.alpha},
            {"tau", c.tau},
            {"max_in_degree", c.max_in_degree},
            {"restarts", c.restarts},
            {"ordering", to_string(c.ordering)},
            {"target_count", c.target_count},
            {"endpoint", c.endpoint},
            {"max_attempts_factor", c.max_attempts_factor},
            {"batch_size", c.batch_size},
            {"out_dir", c.out_dir},
            {"seed", c.seed},
            {"seeds",
             {{"split", c.split_seed()}, {"structure", c.structure_seed()}, {"generation", c.generation_seed()}}}};
}

inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
    ExperimentConfig c;
    try {
        c.schema_path = j.value("schema", c.schema_path);
        c.population_path = j.value("population", c.population_path);
        c.sample_path = j.value("sample", c.sample_path);
        c.sample_rate = j.value("sample_rate", c.sample_rate);
        c.model = model_kind_from_string(j.value("model", std::string(to_string(c.model))));
        c.lambda = j.value("lambda", c.lambda);
        c.alpha = j.value("alpha", c.alpha);
        c.tau = j.value("tau", c.tau);
        c.max_in_degree = j.value("max_in_degree", c.max_in_degree);
        c.restarts = j.value("restarts", c.restarts);
        c.ordering = ordering_policy_from_string(j.value("ordering", std::string(to_string(c.ordering))));
        c.target_count = j.value("target_count", c.target_count);
        c.endpoint = j.value("endpoint", c.endpoint);
        c.max_attempts_factor = j.value("max_attempts_factor", c.max_attempts_factor);
        c.batch_size = j.value("batch_size", c.batch_size);
        c.out_dir = j.value("out_dir", c.out_dir);
        c.seed = j.value("seed", c.seed);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed experiment config: ") + e.what());
    }
    return c;
}

inline SchemaPtr load_schema_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open schema file '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError("schema file '" + path + "' is not valid JSON: " + e.what());
    }
    return std::make_shared<const AttributeSchema>(schema_from_json(j));
}

inline Dataset load_dataset_file(const std::string& path, SchemaPtr schema, std::string tag) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open dataset file '" + path + "'");
    return load_dataset(in, std::move(schema), std::move(tag));
}

inline nlohmann::json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
    }
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << content;
}

inline void write_dataset_file(const std::filesystem::path& path, const Dataset& ds) {
    std::ostringstream ss;
    write_dataset_csv(ss, ds);
    write_text_file(path, ss.str());
}

struct ExperimentInputs {
    Dataset population;
    Dataset sample;
};

inline ExperimentInputs load_inputs(const ExperimentConfig& config) {
    auto schema = run_stage("load", [&] { return load_schema_file(config.schema_path); });
    ExperimentInputs in;
    in.population = run_stage("load", [&] { return load_dataset_file(config.population_path, schema, "h-population"); });
    if (!config.sample_path.empty()) {
        in.sample = run_stage("load", [&] { return load_dataset_file(config.sample_path, schema, "h-sample"); });
    } else {
        in.sample = run_stage("split", [&] {
            return split_h_sample(in.population, config.sample_rate, config.split_seed());
        });
    }
    return in;
}

/// Structure learning plus table fitting on the sample.
inline BayesNet learn_bayesnet(const Dataset& sample, const ExperimentConfig& config) {
    const auto dag = hill_climb(sample, config.max_in_degree, config.restarts, config.structure_seed());
    return fit_cpts(sample, dag, config.alpha);
}

struct ExperimentOutcome {
    EvalReport report;
    Dataset generated;
    GenerationStats stats;
    std::vector<RawLine> raw;
};

/// Fit (unless `fitted` is supplied) -> generate -> evaluate, in memory.
inline ExperimentOutcome run_experiment_on(const ExperimentInputs& in, const ExperimentConfig& config,
                                           const BayesNet* fitted = nullptr) {
    run_stage("config", [&] { config.validate(); });
    const auto schema = in.population.schema_ptr();
    GenerationConfig gen;
    gen.target_count = config.target_count ? config.target_count : in.population.size();
    gen.temperature = config.tau;
    gen.ordering_policy = config.ordering;
    gen.seed = config.generation_seed();
    gen.max_attempts_factor = config.max_attempts_factor;
    gen.batch_size = config.batch_size;

    ExperimentOutcome out;
    nlohmann::json echo = to_json(config);
    echo["resolved_target_count"] = gen.target_count;

    if (config.model == ModelKind::Prototypical) {
        out.generated = run_stage("generate", [&] {
            return prototypical_generate(PrototypicalAgent(in.sample), gen.target_count, gen.seed);
        });
        out.stats.attempts = out.stats.accepted = gen.target_count;
    } else {
        std::optional<BayesNet> learned;
        if (!fitted) learned = run_stage("fit", [&] { return learn_bayesnet(in.sample, config); });
        const BayesNet& bn = fitted ? *fitted : *learned;
        echo["dag"] = dag_to_json(bn.dag, schema->names());
        GenerationResult res;
        if (config.model == ModelKind::BnChain) {
            res = run_stage("generate", [&] {
                return generate_population(ChainModel(bn, config.lambda), gen, schema, bn.dag);
            });
        } else {
            res = run_stage("generate", [&] {
                auto channel = open_endpoint(config.endpoint);
                TextGenerationClient client(*channel);
                const auto prompt = generation_prompt(*schema, bn.dag);
                return generate_via_external(client, gen, schema, prompt, true);
            });
        }
        out.generated = std::move(res.dataset);
        out.stats = std::move(res.stats);
        out.raw = std::move(res.raw);
    }
    out.report = run_stage("evaluate", [&] { return evaluate(out.generated, in.sample, in.population); });
    out.report.config = echo;
    return out;
}

inline void write_experiment_outputs(const std::filesystem::path& dir, const ExperimentOutcome& out) {
    write_text_file(dir / "report.json", to_json(out.report).dump(2) + "\n");
    write_text_file(dir / "stats.json", to_json(out.stats).dump(2) + "\n");
    write_dataset_file(dir / "generated.csv", out.generated);
    if (!out.raw.empty()) {
        std::ostringstream ss;
        write_raw_jsonl(ss, out.raw);
        write_text_file(dir / "raw.jsonl", ss.str());
    }
}

/// Load/split -> fit -> generate -> evaluate, persisting outputs under out_dir when set.
inline EvalReport run_experiment(const ExperimentConfig& config) {
    run_stage("config", [&] { config.validate(); });
    const auto in = load_inputs(config);
    auto out = run_experiment_on(in, config);
    if (!config.out_dir.empty()) run_stage("write", [&] { write_experiment_outputs(config.out_dir, out); });
    return out.report;
}

struct SweepGrid {
    std::vector<double> taus;
    std::vector<double> depths;
    std::vector<std::uint64_t> seeds;
};

struct SweepRow {
    double tau = 0.0;
    double depth = 0.0;
    std::uint64_t seed = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t unique_count = 0;
    double marginal_srmse = 0.0;
    double bivariate_srmse = 0.0;
};

struct SweepCell {
    double tau = 0.0;
    double depth = 0.0;
    std::size_t runs = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double unique_count = 0.0;
};

struct SweepFailure {
    double tau = 0.0;
    double depth = 0.0;
    std::uint64_t seed = 0;
    std::string message;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    std::vector<SweepCell> cells;  // grid order: tau-major, then depth
    std::vector<SweepFailure> failures;
    std::optional<SweepCell> best;
};

/// Highest mean F1; ties go to the lower tau, then the higher depth.
inline std::optional<SweepCell> best_f1_cell(const std::vector<SweepCell>& cells) {
    std::optional<SweepCell> best;
    for (const auto& c : cells) {
        if (c.runs == 0) continue;
        if (!best || c.f1 > best->f1 ||
            (c.f1 == best->f1 && (c.tau < best->tau || (c.tau == best->tau && c.depth > best->depth))))
            best = c;
    }
    return best;
}

/// Runs every (tau, depth, seed) cell; depth is the bn-chain lambda. Seed s
/// reproduces run_experiment with config.seed = s. A failing cell is recorded
/// and the sweep moves on.
inline SweepResult sweep_on(const Dataset& population, const std::optional<Dataset>& fixed_sample,
                            const ExperimentConfig& base, const SweepGrid& grid, std::size_t workers = 0) {
    if (grid.taus.empty() || grid.depths.empty() || grid.seeds.empty()) throw ConfigError("sweep grids must be non-empty");

    struct PerSeed {
        ExperimentInputs inputs;
        std::optional<BayesNet> bn;
        std::string error;
    };
    std::vector<PerSeed> per_seed(grid.seeds.size());
    for (std::size_t s = 0; s < grid.seeds.size(); ++s) {
        auto cfg = base;
        cfg.seed = grid.seeds[s];
        auto& ps = per_seed[s];
        try {
            ps.inputs.population = population;
            ps.inputs.sample = fixed_sample ? *fixed_sample
                                            : run_stage("split", [&] {
                                                  return split_h_sample(population, cfg.sample_rate, cfg.split_seed());
                                              });
            if (cfg.model != ModelKind::Prototypical)
                ps.bn = run_stage("fit", [&] { return learn_bayesnet(ps.inputs.sample, cfg); });
        } catch (const std::exception& e) {
            ps.error = e.what();
        }
    }

    struct Job {
        std::size_t tau, depth, seed;
    };
    std::vector<Job> jobs;
    for (std::size_t t = 0; t < grid.taus.size(); ++t)
        for (std::size_t d = 0; d < grid.depths.size(); ++d)
            for (std::size_t s = 0; s < grid.seeds.size(); ++s) jobs.push_back({t, d, s});

    std::vector<std::optional<SweepRow>> rows(jobs.size());
    std::vector<std::string> errors(jobs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < jobs.size();) {
            const auto& job = jobs[i];
            auto cfg = base;
            cfg.seed = grid.seeds[job.seed];
            cfg.tau = grid.taus[job.tau];
            cfg.lambda = grid.depths[job.depth];
            const auto& ps = per_seed[job.seed];
            if (!ps.error.empty()) {
                errors[i] = ps.error;
                continue;
            }
            try {
                const auto out = run_experiment_on(ps.inputs, cfg, ps.bn ? &*ps.bn : nullptr);
                const auto& r = out.report;
                rows[i] = SweepRow{cfg.tau,     cfg.lambda, cfg.seed, r.precision, r.recall, r.f1,
                                   r.unique_combinations_generated, r.marginal_srmse, r.bivariate_srmse};
            } catch (const std::exception& e) {
                errors[i] = e.what();
            }
        }
    };
    workers = workers ? workers : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min(workers, jobs.size());
    {
        std::vector<std::jthread> pool;
        for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
        worker();
    }

    SweepResult result;
    for (std::size_t t = 0; t < grid.taus.size(); ++t) {
        for (std::size_t d = 0; d < grid.depths.size(); ++d) {
            SweepCell cell{grid.taus[t], grid.depths[d]};
            for (std::size_t i = 0; i < jobs.size(); ++i) {
                if (jobs[i].tau != t || jobs[i].depth != d) continue;
                if (!rows[i]) {
                    result.failures.push_back({grid.taus[t], grid.depths[d], grid.seeds[jobs[i].seed], errors[i]});
                    continue;
                }
                const auto& r = *rows[i];
                result.rows.push_back(r);
                ++cell.runs;
                cell.precision += r.precision;
                cell.recall += r.recall;
                cell.f1 += r.f1;
                cell.unique_count += static_cast<double>(r.unique_count);
            }
            if (cell.runs) {
                const double n = static_cast<double>(cell.runs);
                cell.precision /= n;
                cell.recall /= n;
                cell.f1 /= n;
                cell.unique_count /= n;
            }
            result.cells.push_back(cell);
        }
    }
    result.best = best_f1_cell(result.cells);
    return result;
}

inline void write_sweep_csv(std::ostream& out, const SweepResult& r) {
    out << "tau,depth,seed,precision,recall,f1,unique_count,marginal_srmse,bivariate_srmse\n";
    out.precision(10);
    for (const auto& row : r.rows)
        out << row.tau << ',' << row.depth << ',' << row.seed << ',' << row.precision << ',' << row.recall << ','
            << row.f1 << ',' << row.unique_count << ',' << row.marginal_srmse << ',' << row.bivariate_srmse << '\n';
}

inline nlohmann::json sweep_summary_json(const SweepResult& r, const ExperimentConfig& base, const SweepGrid& grid) {
    auto cell_json = [](const SweepCell& c) {
        return nlohmann::json{{"tau", c.tau},   {"depth", c.depth}, {"runs", c.runs},          {"precision", c.precision},
                              {"recall", c.recall}, {"f1", c.f1},   {"unique_count", c.unique_count}};
    };
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& c : r.cells) cells.push_back(cell_json(c));
    nlohmann::json failures = nlohmann::json::array();
    for (const auto& f : r.failures)
        failures.push_back({{"tau", f.tau}, {"depth", f.depth}, {"seed", f.seed}, {"message", f.message}});
    return {{"config", to_json(base)},
            {"grid", {{"taus", grid.taus}, {"depths", grid.depths}, {"seeds", grid.seeds}}},
            {"cells", cells},
            {"best_f1", r.best ? cell_json(*r.best) : nlohmann::json(nullptr)},
            {"failures", failures}};
}

inline SweepResult sweep(const ExperimentConfig& base, const SweepGrid& grid, std::size_t workers = 0) {
    run_stage("config", [&] { base.validate(); });
    auto schema = run_stage("load", [&] { return load_schema_file(base.schema_path); });
    auto population = run_stage("load", [&] { return load_dataset_file(base.population_path, schema, "h-population"); });
    std::optional<Dataset> sample;
    if (!base.sample_path.empty())
        sample = run_stage("load", [&] { return load_dataset_file(base.sample_path, schema, "h-sample"); });
    auto result = sweep_on(population, sample, base, grid, workers);
    if (!base.out_dir.empty()) {
        run_stage("write", [&] {
            std::ostringstream ss;
            write_sweep_csv(ss, result);
            write_text_file(std::filesystem::path(base.out_dir) / "sweep.csv", ss.str());
            write_text_file(std::filesystem::path(base.out_dir) / "sweep_summary.json",
                            sweep_summary_json(result, base, grid).dump(2) + "\n");
        });
    }
    return result;
}

}  // namespace popsynth

#endif  // POPSYNTH_EXPERIMENT_HPP
