#ifndef POPSYNTH_DATASET_HPP
#define POPSYNTH_DATASET_HPP

#include <algorithm>
#include <cmath>
#include <istream>
#include <memory>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "popsynth/error.hpp"
#include "popsynth/random.hpp"
#include "popsynth/schema.hpp"

namespace popsynth {

using SchemaPtr = std::shared_ptr<const AttributeSchema>;

/// A multiset of records over one schema, stored row-major in a flat buffer.
/// Immutable once handed out; builders append through add().
class Dataset {
public:
    Dataset() = default;
    explicit Dataset(SchemaPtr schema, std::string source_tag = {})
        : schema_(std::move(schema)), source_tag_(std::move(source_tag)) {}

    const AttributeSchema& schema() const { return *schema_; }
    const SchemaPtr& schema_ptr() const { return schema_; }
    const std::string& source_tag() const { return source_tag_; }
    void set_source_tag(std::string tag) { source_tag_ = std::move(tag); }

    std::size_t size() const { return schema_ && schema_->size() ? values_.size() / schema_->size() : 0; }
    bool empty() const { return values_.empty(); }
    std::size_t width() const { return schema_->size(); }

    RecordView record(std::size_t i) const {
        const auto d = width();
        return RecordView(values_.data() + i * d, d);
    }
    CategoryId at(std::size_t row, std::size_t attr) const { return values_[row * width() + attr]; }
    CombinationKey key(std::size_t i) const { return schema_->key_of(record(i)); }

    void add(RecordView r) {
        if (!schema_->is_valid(r)) throw Error("record does not validate against schema");
        values_.insert(values_.end(), r.begin(), r.end());
    }
    void add_unchecked(RecordView r) { values_.insert(values_.end(), r.begin(), r.end()); }
    void reserve(std::size_t n) { values_.reserve(n * width()); }

    const std::vector<CategoryId>& values() const { return values_; }

    friend bool operator==(const Dataset& a, const Dataset& b) {
        return *a.schema_ == *b.schema_ && a.values_ == b.values_;
    }

private:
    SchemaPtr schema_;
    std::string source_tag_;
    std::vector<CategoryId> values_;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

inline void chomp(std::string& s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == '\n')) s.pop_back();
}

}  // namespace detail

/// Reads a dataset CSV: header row of attribute names (any order), one record
/// per row with category labels. Columns are remapped to schema order.
inline Dataset load_dataset(std::istream& in, SchemaPtr schema, std::string source_tag = {}) {
    const auto& s = *schema;
    std::string line;
    if (!std::getline(in, line)) throw EmptyDataset();
    detail::chomp(line);
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    const auto header = detail::split_csv_line(line);

    std::vector<std::size_t> column_to_attr(header.size());
    std::vector<bool> seen(s.size(), false);
    for (std::size_t c = 0; c < header.size(); ++c) {
        auto idx = s.index_of(header[c]);
        if (!idx || seen[*idx]) throw UnknownColumn(header[c]);
        seen[*idx] = true;
        column_to_attr[c] = *idx;
    }
    for (std::size_t i = 0; i < s.size(); ++i)
        if (!seen[i]) throw SchemaError("missing column '" + s.attribute(i).name + "'");

    Dataset ds(std::move(schema), std::move(source_tag));
    Record rec(s.size());
    std::size_t row = 0;
    while (std::getline(in, line)) {
        detail::chomp(line);
        if (line.empty()) continue;
        ++row;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != header.size())
            throw SchemaError("row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                              " cells, expected " + std::to_string(header.size()));
        for (std::size_t c = 0; c < cells.size(); ++c) {
            const auto attr = column_to_attr[c];
            auto id = s.category_by_label(attr, cells[c]);
            if (!id) throw UnknownCategoryLabel(row, c, s.attribute(attr).name, cells[c]);
            rec[attr] = *id;
        }
        ds.add_unchecked(rec);
    }
    if (ds.empty()) throw EmptyDataset();
    return ds;
}

inline void write_dataset_csv(std::ostream& out, const Dataset& ds) {
    const auto& s = ds.schema();
    for (std::size_t i = 0; i < s.size(); ++i) out << (i ? "," : "") << s.attribute(i).name;
    out << '\n';
    for (std::size_t r = 0; r < ds.size(); ++r) {
        auto rec = ds.record(r);
        for (std::size_t i = 0; i < rec.size(); ++i)
            out << (i ? "," : "") << s.attribute(i).categories[rec[i]].label;
        out << '\n';
    }
}

/// round(rate * n), ties up, never below 1 for a non-empty population.
inline std::size_t sample_size_for(double rate, std::size_t n) {
    auto m = static_cast<std::size_t>(std::floor(rate * static_cast<double>(n) + 0.5));
    return std::clamp<std::size_t>(m, n ? 1 : 0, n);
}

/// Uniform draw without replacement of round(rate*N) records. Selected
/// records keep their population order.
inline Dataset split_h_sample(const Dataset& population, double rate, std::uint64_t seed) {
    if (!(rate > 0.0 && rate <= 1.0)) throw InvalidRate(rate);
    const auto n = population.size();
    const auto m = sample_size_for(rate, n);
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Rng rng(seed);
    for (std::size_t i = 0; i < m; ++i) {
        auto j = i + uniform_index(rng, n - i);
        std::swap(idx[i], idx[j]);
    }
    idx.resize(m);
    std::sort(idx.begin(), idx.end());
    Dataset out(population.schema_ptr(), "h-sample");
    out.reserve(m);
    for (auto i : idx) out.add_unchecked(population.record(i));
    return out;
}

/// Occurrence count of every full attribute combination present in a dataset.
class CombinationIndex {
public:
    CombinationIndex() = default;
    explicit CombinationIndex(const Dataset& ds) {
        counts_.reserve(ds.size());
        for (std::size_t i = 0; i < ds.size(); ++i) ++counts_[ds.key(i)];
        total_ = ds.size();
    }

    std::size_t total() const { return total_; }
    std::size_t unique() const { return counts_.size(); }
    bool contains(CombinationKey k) const { return counts_.count(k) != 0; }
    std::size_t count(CombinationKey k) const {
        auto it = counts_.find(k);
        return it == counts_.end() ? 0 : it->second;
    }
    const std::unordered_map<CombinationKey, std::size_t>& counts() const { return counts_; }

private:
    std::unordered_map<CombinationKey, std::size_t> counts_;
    std::size_t total_ = 0;
};

inline CombinationIndex build_combination_index(const Dataset& ds) { return CombinationIndex(ds); }

struct Coverage {
    double combo_coverage = 0.0;
    double instance_coverage = 0.0;
};

/// Share of the population's unique combinations seen in the sample, and
/// share of population records whose combination is seen in the sample.
inline Coverage sample_coverage(const CombinationIndex& sample, const CombinationIndex& population) {
    std::size_t combos = 0;
    std::size_t instances = 0;
    for (const auto& [k, c] : population.counts()) {
        if (sample.contains(k)) {
            ++combos;
            instances += c;
        }
    }
    Coverage cov;
    if (population.unique()) cov.combo_coverage = static_cast<double>(combos) / population.unique();
    if (population.total()) cov.instance_coverage = static_cast<double>(instances) / population.total();
    return cov;
}

struct CoverageRow {
    double sampling_rate = 0.0;
    std::size_t replication = 0;
    std::uint64_t seed = 0;
    double combo_coverage = 0.0;
    double instance_coverage = 0.0;
};

using CoverageCurve = std::vector<CoverageRow>;

/// Replication r of every rate draws its h-sample with seed + r.
inline CoverageCurve coverage_analysis(const Dataset& population, const std::vector<double>& rates,
                                       std::size_t replications, std::uint64_t seed) {
    if (rates.empty()) throw InvalidRate(0.0);
    for (double r : rates)
        if (!(r > 0.0 && r <= 1.0)) throw InvalidRate(r);
    const CombinationIndex pop(population);
    CoverageCurve curve;
    for (double rate : rates) {
        for (std::size_t rep = 0; rep < replications; ++rep) {
            const auto s = seed + rep;
            const CombinationIndex sample(split_h_sample(population, rate, s));
            const auto cov = sample_coverage(sample, pop);
            curve.push_back({rate, rep, s, cov.combo_coverage, cov.instance_coverage});
        }
    }
    return curve;
}

inline void write_coverage_csv(std::ostream& out, const CoverageCurve& curve) {
    out << "rate,replication,combo_coverage,instance_coverage\n";
    out.precision(10);
    for (const auto& r : curve)
        out << r.sampling_rate << ',' << r.replication << ',' << r.combo_coverage << ',' << r.instance_coverage
            << '\n';
}

}  // namespace popsynth

#endif  // POPSYNTH_DATASET_HPP
