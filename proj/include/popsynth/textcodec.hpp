#ifndef POPSYNTH_TEXTCODEC_HPP
#define POPSYNTH_TEXTCODEC_HPP

#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "popsynth/dag.hpp"
#include "popsynth/dataset.hpp"

namespace popsynth {

/// Textual form of one record:
///   "The respondent's <display> is <phrase>, The respondent's <display> is <phrase>."
struct EncodedText {
    std::string text;
    Ordering ordering;
};

inline std::string clause_prompt(const AttributeSchema& schema, std::size_t attr) {
    return std::string(kClausePrefix) + schema.attribute(attr).display_name + " is";
}

inline EncodedText encode_record(RecordView record, const Ordering& ordering, const AttributeSchema& schema) {
    EncodedText out{{}, ordering};
    for (std::size_t t = 0; t < ordering.size(); ++t) {
        const auto& a = schema.attribute(ordering[t]);
        if (t) out.text += kClauseSeparator;
        out.text += kClausePrefix;
        out.text += a.display_name;
        out.text += " is ";
        out.text += a.categories[record[ordering[t]]].phrase;
    }
    out.text += kTerminator;
    return out;
}

enum class InvalidReason { MalformedClause, UnknownAttribute, UnknownPhrase, MissingAttribute, DuplicateAttribute };

inline constexpr std::string_view to_string(InvalidReason r) {
    switch (r) {
        case InvalidReason::MalformedClause: return "MalformedClause";
        case InvalidReason::UnknownAttribute: return "UnknownAttribute";
        case InvalidReason::UnknownPhrase: return "UnknownPhrase";
        case InvalidReason::MissingAttribute: return "MissingAttribute";
        case InvalidReason::DuplicateAttribute: return "DuplicateAttribute";
    }
    return "Unknown";
}

inline constexpr InvalidReason kAllInvalidReasons[] = {
    InvalidReason::MalformedClause, InvalidReason::UnknownAttribute, InvalidReason::UnknownPhrase,
    InvalidReason::MissingAttribute, InvalidReason::DuplicateAttribute};

struct InvalidOutput {
    InvalidReason reason;
    std::string detail;
};

using DecodeResult = std::variant<Record, InvalidOutput>;

/// Parses one line of generated text back into a record in schema order.
/// Never throws on input content; anything outside the attribute space
/// comes back as InvalidOutput with a reason.
inline DecodeResult decode_text(std::string_view text, const AttributeSchema& schema) {
    auto invalid = [](InvalidReason r, std::string detail) -> DecodeResult {
        return InvalidOutput{r, std::move(detail)};
    };
    constexpr std::string_view ws = " \t\r\n";
    const auto first = text.find_first_not_of(ws);
    if (first == std::string_view::npos) return invalid(InvalidReason::MalformedClause, "empty text");
    text = text.substr(first, text.find_last_not_of(ws) - first + 1);

    if (!text.ends_with(kTerminator)) return invalid(InvalidReason::MalformedClause, "missing terminator");
    text.remove_suffix(kTerminator.size());
    if (!text.starts_with(kClausePrefix)) return invalid(InvalidReason::MalformedClause, "missing clause prefix");
    text.remove_prefix(kClausePrefix.size());

    const std::string boundary = std::string(kClauseSeparator) + std::string(kClausePrefix);
    const auto d = schema.size();
    Record rec(d, 0);
    std::vector<char> seen(d, 0);
    std::size_t pos = 0;
    for (;;) {
        const auto next = text.find(boundary, pos);
        const auto clause = text.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos);

        // longest display name followed by " is "
        std::optional<std::size_t> attr;
        std::size_t best_len = 0;
        for (std::size_t i = 0; i < d; ++i) {
            const auto& name = schema.attribute(i).display_name;
            if (name.size() + 4 <= clause.size() && name.size() >= best_len && clause.starts_with(name) &&
                clause.substr(name.size(), 4) == " is ") {
                attr = i;
                best_len = name.size();
            }
        }
        if (!attr) {
            if (clause.find(" is ") == std::string_view::npos)
                return invalid(InvalidReason::MalformedClause, std::string(clause));
            return invalid(InvalidReason::UnknownAttribute, std::string(clause.substr(0, clause.find(" is "))));
        }
        const auto phrase = clause.substr(best_len + 4);
        const auto id = schema.category_by_phrase(*attr, phrase);
        if (!id) return invalid(InvalidReason::UnknownPhrase, std::string(phrase));
        if (seen[*attr]) return invalid(InvalidReason::DuplicateAttribute, schema.attribute(*attr).name);
        seen[*attr] = 1;
        rec[*attr] = *id;

        if (next == std::string_view::npos) break;
        pos = next + boundary.size();
    }
    for (std::size_t i = 0; i < d; ++i)
        if (!seen[i]) return invalid(InvalidReason::MissingAttribute, schema.attribute(i).name);
    return rec;
}

enum class OrderingPolicy { DagDeterministic, DagRandomized, RandomPermutation, Fixed };

inline constexpr std::string_view to_string(OrderingPolicy p) {
    switch (p) {
        case OrderingPolicy::DagDeterministic: return "dag-det";
        case OrderingPolicy::DagRandomized: return "dag-rand";
        case OrderingPolicy::RandomPermutation: return "random-perm";
        case OrderingPolicy::Fixed: return "fixed";
    }
    return "unknown";
}

inline OrderingPolicy ordering_policy_from_string(std::string_view s) {
    if (s == "dag-det") return OrderingPolicy::DagDeterministic;
    if (s == "dag-rand") return OrderingPolicy::DagRandomized;
    if (s == "random-perm") return OrderingPolicy::RandomPermutation;
    if (s == "fixed") return OrderingPolicy::Fixed;
    throw ConfigError("unknown ordering policy '" + std::string(s) + "'");
}

/// Resolves the ordering for one record under a policy. `fixed` is only read
/// for OrderingPolicy::Fixed.
inline Ordering resolve_ordering(OrderingPolicy policy, const Dag& dag, Rng& rng, const Ordering& fixed = {}) {
    switch (policy) {
        case OrderingPolicy::DagDeterministic:
            return sample_topological_order(dag, TraversalPolicy::Deterministic, rng);
        case OrderingPolicy::DagRandomized: return sample_topological_order(dag, TraversalPolicy::Randomized, rng);
        case OrderingPolicy::RandomPermutation: return random_permutation(dag.node_count(), rng);
        case OrderingPolicy::Fixed:
            if (!is_permutation_of(fixed, dag.node_count())) throw ConfigError("fixed ordering is not a permutation");
            return fixed;
    }
    throw ConfigError("unknown ordering policy");
}

/// One encoded line per record. Record n draws its ordering from stream
/// derive_seed(seed, n), so output does not depend on how lines are consumed.
template <class Sink>
void build_corpus(const Dataset& ds, const Dag& dag, OrderingPolicy policy, std::uint64_t seed, Sink&& sink,
                  const Ordering& fixed = {}) {
    for (std::size_t n = 0; n < ds.size(); ++n) {
        Rng rng(derive_seed(seed, n));
        sink(encode_record(ds.record(n), resolve_ordering(policy, dag, rng, fixed), ds.schema()));
    }
}

inline std::vector<EncodedText> build_corpus(const Dataset& ds, const Dag& dag, OrderingPolicy policy,
                                             std::uint64_t seed, const Ordering& fixed = {}) {
    std::vector<EncodedText> out;
    out.reserve(ds.size());
    build_corpus(ds, dag, policy, seed, [&](EncodedText e) { out.push_back(std::move(e)); }, fixed);
    return out;
}

inline void write_corpus(std::ostream& out, const Dataset& ds, const Dag& dag, OrderingPolicy policy,
                         std::uint64_t seed) {
    build_corpus(ds, dag, policy, seed, [&](const EncodedText& e) { out << e.text << '\n'; });
}

}  // namespace popsynth

#endif  // POPSYNTH_TEXTCODEC_HPP
