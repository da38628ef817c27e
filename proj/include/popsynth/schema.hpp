#ifndef POPSYNTH_SCHEMA_HPP
#define POPSYNTH_SCHEMA_HPP

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "popsynth/error.hpp"

namespace popsynth {

using CategoryId = std::uint16_t;
using CombinationKey = std::uint64_t;

/// A record: one category id per attribute, positionally aligned with the schema.
using Record = std::vector<CategoryId>;
using RecordView = std::span<const CategoryId>;

inline constexpr std::string_view kClausePrefix = "The respondent's ";
inline constexpr std::string_view kClauseSeparator = ", ";
inline constexpr std::string_view kTerminator = ".";

struct Category {
    CategoryId id = 0;
    std::string label;
    std::string phrase;
};

struct Attribute {
    std::string name;
    std::string display_name;
    std::vector<Category> categories;

    std::size_t cardinality() const { return categories.size(); }
};

/// The categorical attribute space. Category ids are dense and 0-based in
/// declaration order; labels (CSV) and phrases (text) are presentation only.
/// Full-record combination keys are mixed-radix integers, so the product of
/// all cardinalities must fit in 64 bits.
class AttributeSchema {
public:
    AttributeSchema() = default;

    explicit AttributeSchema(std::vector<Attribute> attributes) : attributes_(std::move(attributes)) {
        validate_and_index();
    }

    std::size_t size() const { return attributes_.size(); }
    const Attribute& attribute(std::size_t i) const { return attributes_.at(i); }
    const std::vector<Attribute>& attributes() const { return attributes_; }
    std::size_t cardinality(std::size_t i) const { return attributes_[i].categories.size(); }

    std::vector<std::size_t> cardinalities() const {
        std::vector<std::size_t> out;
        out.reserve(size());
        for (const auto& a : attributes_) out.push_back(a.cardinality());
        return out;
    }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        for (const auto& a : attributes_) out.push_back(a.name);
        return out;
    }

    std::optional<std::size_t> index_of(std::string_view name) const {
        auto it = by_name_.find(std::string(name));
        if (it == by_name_.end()) return std::nullopt;
        return it->second;
    }

    std::optional<CategoryId> category_by_label(std::size_t attr, std::string_view label) const {
        const auto& m = by_label_[attr];
        auto it = m.find(std::string(label));
        if (it == m.end()) return std::nullopt;
        return it->second;
    }

    std::optional<CategoryId> category_by_phrase(std::size_t attr, std::string_view phrase) const {
        const auto& m = by_phrase_[attr];
        auto it = m.find(std::string(phrase));
        if (it == m.end()) return std::nullopt;
        return it->second;
    }

    /// Number of distinct full combinations (product of cardinalities).
    std::uint64_t combination_space() const { return space_; }

    bool is_valid(RecordView r) const {
        if (r.size() != size()) return false;
        for (std::size_t i = 0; i < r.size(); ++i)
            if (r[i] >= cardinality(i)) return false;
        return true;
    }

    CombinationKey key_of(RecordView r) const {
        CombinationKey k = 0;
        for (std::size_t i = 0; i < r.size(); ++i) k += strides_[i] * r[i];
        return k;
    }

    Record decode_key(CombinationKey k) const {
        Record r(size());
        for (std::size_t i = 0; i < size(); ++i) r[i] = static_cast<CategoryId>((k / strides_[i]) % cardinality(i));
        return r;
    }

    friend bool operator==(const AttributeSchema& a, const AttributeSchema& b) {
        if (a.size() != b.size()) return false;
        for (std::size_t i = 0; i < a.size(); ++i) {
            const auto& x = a.attributes_[i];
            const auto& y = b.attributes_[i];
            if (x.name != y.name || x.display_name != y.display_name || x.cardinality() != y.cardinality())
                return false;
            for (std::size_t k = 0; k < x.cardinality(); ++k)
                if (x.categories[k].label != y.categories[k].label ||
                    x.categories[k].phrase != y.categories[k].phrase)
                    return false;
        }
        return true;
    }

private:
    void validate_and_index() {
        if (attributes_.size() < 2) throw SchemaError("schema needs at least 2 attributes");
        by_label_.assign(attributes_.size(), {});
        by_phrase_.assign(attributes_.size(), {});
        strides_.assign(attributes_.size(), 1);
        std::uint64_t stride = 1;
        for (std::size_t i = 0; i < attributes_.size(); ++i) {
            auto& a = attributes_[i];
            if (a.name.empty()) throw SchemaError("attribute " + std::to_string(i) + " has an empty name");
            if (a.name.find_first_of(",\n\r") != std::string::npos)
                throw SchemaError("attribute name '" + a.name + "' contains a comma or newline");
            if (a.display_name.empty()) a.display_name = a.name;
            if (!by_name_.emplace(a.name, i).second) throw SchemaError("duplicate attribute name '" + a.name + "'");
            if (a.categories.size() < 2) throw SchemaError("attribute '" + a.name + "' needs at least 2 categories");
            if (a.categories.size() > std::numeric_limits<CategoryId>::max())
                throw SchemaError("attribute '" + a.name + "' has too many categories");
            for (std::size_t k = 0; k < a.categories.size(); ++k) {
                auto& c = a.categories[k];
                c.id = static_cast<CategoryId>(k);
                if (c.phrase.empty()) c.phrase = c.label;
                if (c.label.empty() || c.label.find_first_of(",\n\r") != std::string::npos)
                    throw SchemaError("category label '" + c.label + "' of '" + a.name +
                                      "' is empty or contains a comma or newline");
                if (c.phrase.find_first_of("\n\r") != std::string::npos ||
                    c.phrase.find(std::string(kClauseSeparator) + std::string(kClausePrefix)) != std::string::npos)
                    throw SchemaError("category phrase '" + c.phrase + "' of '" + a.name +
                                      "' would make encoded text ambiguous");
                if (!by_label_[i].emplace(c.label, c.id).second)
                    throw SchemaError("duplicate category label '" + c.label + "' in '" + a.name + "'");
                if (!by_phrase_[i].emplace(c.phrase, c.id).second)
                    throw SchemaError("duplicate category phrase '" + c.phrase + "' in '" + a.name + "'");
            }
            strides_[i] = stride;
            if (stride > std::numeric_limits<std::uint64_t>::max() / a.categories.size())
                throw SchemaError("combination space does not fit in 64 bits");
            stride *= a.categories.size();
        }
        space_ = stride;
    }

    std::vector<Attribute> attributes_;
    std::unordered_map<std::string, std::size_t> by_name_;
    std::vector<std::unordered_map<std::string, CategoryId>> by_label_;
    std::vector<std::unordered_map<std::string, CategoryId>> by_phrase_;
    std::vector<std::uint64_t> strides_;
    std::uint64_t space_ = 0;
};

inline AttributeSchema schema_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("attributes") || !j["attributes"].is_array())
        throw SchemaError("schema JSON must be an object with an 'attributes' array");
    std::vector<Attribute> attrs;
    try {
        for (const auto& ja : j["attributes"]) {
            Attribute a;
            a.name = ja.at("name").get<std::string>();
            a.display_name = ja.value("display_name", a.name);
            for (const auto& jc : ja.at("categories")) {
                Category c;
                if (jc.is_string()) {
                    c.label = jc.get<std::string>();
                } else {
                    c.label = jc.at("label").get<std::string>();
                    c.phrase = jc.value("phrase", c.label);
                }
                a.categories.push_back(std::move(c));
            }
            attrs.push_back(std::move(a));
        }
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("malformed schema JSON: ") + e.what());
    }
    return AttributeSchema(std::move(attrs));
}

inline nlohmann::json schema_to_json(const AttributeSchema& s) {
    nlohmann::json attrs = nlohmann::json::array();
    for (const auto& a : s.attributes()) {
        nlohmann::json cats = nlohmann::json::array();
        for (const auto& c : a.categories) cats.push_back({{"label", c.label}, {"phrase", c.phrase}});
        attrs.push_back({{"name", a.name}, {"display_name", a.display_name}, {"categories", cats}});
    }
    return {{"attributes", attrs}};
}

}  // namespace popsynth

#endif  // POPSYNTH_SCHEMA_HPP
