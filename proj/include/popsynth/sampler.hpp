#ifndef POPSYNTH_SAMPLER_HPP
#define POPSYNTH_SAMPLER_HPP

#include <algorithm>
#include <chrono>
#include <map>
#include <ostream>
#include <thread>
#include <vector>

#include <json.hpp>

#include "popsynth/dag.hpp"
#include "popsynth/dataset.hpp"
#include "popsynth/endpoint.hpp"
#include "popsynth/genmodels.hpp"
#include "popsynth/textcodec.hpp"

namespace popsynth {

struct GenerationConfig {
    std::size_t target_count = 1;
    double temperature = 1.0;
    OrderingPolicy ordering_policy = OrderingPolicy::DagDeterministic;
    Ordering fixed_ordering;  // read for OrderingPolicy::Fixed only
    std::uint64_t seed = 0;
    double max_attempts_factor = 20.0;
    std::size_t batch_size = 256;
    std::size_t workers = 0;  // 0 = hardware concurrency

    void validate() const {
        if (target_count < 1) throw ConfigError("target count must be >= 1");
        if (!(temperature > 0.0)) throw NonPositiveTemperature(temperature);
        if (!(max_attempts_factor >= 1.0)) throw ConfigError("max_attempts_factor must be >= 1");
        if (batch_size < 1) throw ConfigError("batch size must be >= 1");
    }

    std::size_t attempt_budget() const {
        return static_cast<std::size_t>(max_attempts_factor * static_cast<double>(target_count));
    }
};

struct GenerationStats {
    std::size_t attempts = 0;
    std::size_t accepted = 0;
    std::map<InvalidReason, std::size_t> rejected_by_reason;
    double wall_time_seconds = 0.0;

    std::size_t rejected() const {
        std::size_t n = 0;
        for (const auto& [r, c] : rejected_by_reason) n += c;
        return n;
    }
};

inline nlohmann::json to_json(const GenerationStats& s) {
    nlohmann::json reasons = nlohmann::json::object();
    for (auto r : kAllInvalidReasons) {
        auto it = s.rejected_by_reason.find(r);
        reasons[std::string(to_string(r))] = it == s.rejected_by_reason.end() ? 0 : it->second;
    }
    return {{"attempts", s.attempts},
            {"accepted", s.accepted},
            {"rejected", s.rejected()},
            {"rejected_by_reason", reasons},
            {"wall_time_seconds", s.wall_time_seconds}};
}

struct RawLine {
    std::string text;
    bool accepted = false;
    std::optional<InvalidReason> reason;
};

inline void write_raw_jsonl(std::ostream& out, const std::vector<RawLine>& lines) {
    for (const auto& l : lines) {
        nlohmann::json j{{"text", l.text}, {"accepted", l.accepted}};
        j["reason"] = l.reason ? nlohmann::json(std::string(to_string(*l.reason))) : nlohmann::json(nullptr);
        out << j.dump() << '\n';
    }
}

struct GenerationResult {
    Dataset dataset;
    GenerationStats stats;
    std::vector<RawLine> raw;  // external generation only
};

/// Draws one record attribute by attribute from a built-in model.
inline void sample_record(const ConditionalModel& model, const Ordering& ordering, double tau, Rng& rng,
                          std::span<CategoryId> out, std::vector<double>& scratch) {
    std::fill(out.begin(), out.end(), kUnassigned);
    for (std::size_t t = 0; t < ordering.size(); ++t) {
        const auto attr = ordering[t];
        scratch.resize(model.cardinality(attr));
        model.conditional(ordering, t, out, scratch);
        apply_temperature_inplace(scratch, tau);
        out[attr] = static_cast<CategoryId>(sample_categorical(scratch, rng));
    }
}

/// Generates exactly target_count records from a built-in model. Record n
/// uses its own stream derive_seed(seed, n) for both its ordering and its
/// draws, so the output is identical for any worker count.
inline GenerationResult generate_population(const ConditionalModel& model, const GenerationConfig& config,
                                            SchemaPtr schema, const Dag& dag) {
    config.validate();
    const auto start = std::chrono::steady_clock::now();
    const auto d = schema->size();
    if (model.attribute_count() != d || dag.node_count() != d) throw ConfigError("model, DAG and schema disagree");
    const auto m = config.target_count;

    std::optional<Ordering> shared;
    if (config.ordering_policy == OrderingPolicy::DagDeterministic || config.ordering_policy == OrderingPolicy::Fixed) {
        Rng unused(config.seed);
        shared = resolve_ordering(config.ordering_policy, dag, unused, config.fixed_ordering);
    }

    std::vector<CategoryId> values(m * d);
    auto work = [&](std::size_t begin, std::size_t end) {
        std::vector<double> scratch;
        for (std::size_t n = begin; n < end; ++n) {
            Rng rng(derive_seed(config.seed, n));
            const Ordering ordering =
                shared ? *shared : resolve_ordering(config.ordering_policy, dag, rng, config.fixed_ordering);
            sample_record(model, ordering, config.temperature, rng, std::span<CategoryId>(values.data() + n * d, d),
                          scratch);
        }
    };

    std::size_t workers = config.workers ? config.workers : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min(workers, std::max<std::size_t>(1, m / 4096));
    if (workers <= 1) {
        work(0, m);
    } else {
        std::vector<std::jthread> pool;
        const std::size_t chunk = (m + workers - 1) / workers;
        for (std::size_t w = 0; w < workers; ++w) {
            const auto b = std::min(m, w * chunk);
            const auto e = std::min(m, b + chunk);
            pool.emplace_back(work, b, e);
        }
    }

    GenerationResult result{Dataset(schema, "generated"), {}, {}};
    result.dataset.reserve(m);
    for (std::size_t n = 0; n < m; ++n) result.dataset.add_unchecked(RecordView(values.data() + n * d, d));
    result.stats.attempts = m;
    result.stats.accepted = m;
    result.stats.wall_time_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

/// Prompt for the first attribute of the DAG's deterministic ordering.
inline std::string generation_prompt(const AttributeSchema& schema, const Dag& dag) {
    Rng unused(0);
    const auto ordering = sample_topological_order(dag, TraversalPolicy::Deterministic, unused);
    return clause_prompt(schema, ordering[0]);
}

/// Requests text lines in batches, keeps lines that decode into valid
/// records, and re-requests until target_count records are accepted. Aborts
/// once the attempt budget (max_attempts_factor * target_count lines) is spent.
inline GenerationResult generate_via_external(TextGenerationClient& client, const GenerationConfig& config,
                                              SchemaPtr schema, const std::string& prompt, bool keep_raw = false) {
    config.validate();
    const auto start = std::chrono::steady_clock::now();
    const auto m = config.target_count;
    const auto budget = config.attempt_budget();
    GenerationResult result{Dataset(schema, "generated"), {}, {}};
    result.dataset.reserve(m);
    auto& stats = result.stats;

    for (std::uint64_t batch = 0; stats.accepted < m; ++batch) {
        if (stats.attempts >= budget) throw AttemptBudgetExceeded(stats.attempts, stats.accepted);
        GenerateRequest req;
        req.count = std::min({config.batch_size, m - stats.accepted, budget - stats.attempts});
        req.temperature = config.temperature;
        req.prompt = prompt;
        req.seed = derive_seed(config.seed, batch);
        for (auto& text : client.generate(req)) {
            ++stats.attempts;
            auto decoded = decode_text(text, *schema);
            if (auto* rec = std::get_if<Record>(&decoded)) {
                result.dataset.add_unchecked(*rec);
                ++stats.accepted;
                if (keep_raw) result.raw.push_back({std::move(text), true, std::nullopt});
            } else {
                const auto reason = std::get<InvalidOutput>(decoded).reason;
                ++stats.rejected_by_reason[reason];
                if (keep_raw) result.raw.push_back({std::move(text), false, reason});
            }
        }
    }
    stats.wall_time_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

}  // namespace popsynth

#endif  // POPSYNTH_SAMPLER_HPP
