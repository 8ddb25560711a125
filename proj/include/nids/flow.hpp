#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "nids/error.hpp"

namespace nids {

enum class Label : std::uint8_t { Benign = 0, Malicious = 1 };

inline int to_int(Label l) { return static_cast<int>(l); }

// Maps a raw source tag ("Normal", "BENIGN", "DDoS", ...) onto the binary
// label. Anything not listed as benign is malicious.
struct LabelMap {
    std::vector<std::string> benign{"Normal", "BENIGN"};

    Label operator()(std::string_view raw) const {
        while (!raw.empty() && (raw.front() == ' ' || raw.front() == '\t')) raw.remove_prefix(1);
        while (!raw.empty() && (raw.back() == ' ' || raw.back() == '\t' || raw.back() == '\r')) raw.remove_suffix(1);
        for (const auto& b : benign) {
            if (raw == b) return Label::Benign;
        }
        return Label::Malicious;
    }
};

// Names of the categorical and continuous fields, shared between all records
// of one dataset so that a record only stores values.
struct FieldLayout {
    std::vector<std::string> categorical;
    std::vector<std::string> continuous;

    bool operator==(const FieldLayout&) const = default;
};

// One network flow. Values are stored in the order of the shared layout.
class FlowRecord {
public:
    FlowRecord() : layout_(std::make_shared<FieldLayout>()) {}

    FlowRecord(std::shared_ptr<const FieldLayout> layout, std::vector<std::string> categorical,
               std::vector<double> continuous, Label label, std::string source_tag = {})
        : layout_(std::move(layout)),
          categorical_(std::move(categorical)),
          continuous_(std::move(continuous)),
          label_(label),
          source_tag_(std::move(source_tag)) {
        if (!layout_ || categorical_.size() != layout_->categorical.size() ||
            continuous_.size() != layout_->continuous.size()) {
            throw SchemaError("FlowRecord values do not match field layout");
        }
    }

    // Convenience constructor that builds a private layout. Used for
    // one-off records (tests, hand-built fixtures).
    static FlowRecord from_fields(std::vector<std::pair<std::string, std::string>> categorical,
                                  std::vector<std::pair<std::string, double>> continuous, Label label,
                                  std::string source_tag = {}) {
        auto layout = std::make_shared<FieldLayout>();
        std::vector<std::string> cat;
        std::vector<double> cont;
        for (auto& [k, v] : categorical) {
            layout->categorical.push_back(k);
            cat.push_back(std::move(v));
        }
        for (auto& [k, v] : continuous) {
            layout->continuous.push_back(k);
            cont.push_back(v);
        }
        return FlowRecord(std::move(layout), std::move(cat), std::move(cont), label, std::move(source_tag));
    }

    const FieldLayout& layout() const { return *layout_; }
    const std::shared_ptr<const FieldLayout>& shared_layout() const { return layout_; }
    const std::vector<std::string>& categorical_values() const { return categorical_; }
    const std::vector<double>& continuous_values() const { return continuous_; }
    Label label() const { return label_; }
    const std::string& source_tag() const { return source_tag_; }

    const std::string* categorical(std::string_view name) const {
        const auto& names = layout_->categorical;
        for (std::size_t i = 0; i < names.size(); ++i) {
            if (names[i] == name) return &categorical_[i];
        }
        return nullptr;
    }

    std::optional<double> continuous(std::string_view name) const {
        const auto& names = layout_->continuous;
        for (std::size_t i = 0; i < names.size(); ++i) {
            if (names[i] == name) return continuous_[i];
        }
        return std::nullopt;
    }

private:
    std::shared_ptr<const FieldLayout> layout_;
    std::vector<std::string> categorical_;
    std::vector<double> continuous_;
    Label label_ = Label::Benign;
    std::string source_tag_;
};

// Bijection between training values and indices 1..n. Index 0 is reserved
// for out-of-vocabulary values and never assigned.
class Vocabulary {
public:
    Vocabulary() = default;

    // Values are sorted so the mapping does not depend on record order.
    template <class Range>
    static Vocabulary from_values(const Range& values) {
        std::set<std::string> uniq;
        for (const auto& v : values) uniq.insert(std::string(v));
        return from_sorted(std::vector<std::string>(uniq.begin(), uniq.end()));
    }

    // Takes the index order as given (deserialization). Duplicates are an error.
    static Vocabulary from_ordered(std::vector<std::string> values) {
        Vocabulary v;
        v.values_ = std::move(values);
        for (std::size_t i = 0; i < v.values_.size(); ++i) {
            if (!v.index_.emplace(v.values_[i], i + 1).second) {
                throw SchemaError("duplicate vocabulary entry '" + v.values_[i] + "'");
            }
        }
        return v;
    }

    std::size_t encode(std::string_view value) const {
        auto it = index_.find(std::string(value));
        return it == index_.end() ? 0 : it->second;
    }

    // index in [1, n]
    const std::string& decode(std::size_t index) const {
        if (index == 0 || index > values_.size()) {
            throw SchemaError("vocabulary index " + std::to_string(index) + " out of range");
        }
        return values_[index - 1];
    }

    std::size_t cardinality() const { return values_.size(); }
    const std::vector<std::string>& values() const { return values_; }

    bool operator==(const Vocabulary& o) const { return values_ == o.values_; }

private:
    static Vocabulary from_sorted(std::vector<std::string> values) { return from_ordered(std::move(values)); }

    std::vector<std::string> values_;
    std::unordered_map<std::string, std::size_t> index_;
};

enum class FeatureKind { Categorical, Continuous };

struct FeatureDescriptor {
    std::string name;
    FeatureKind kind = FeatureKind::Continuous;

    // categorical, filled when the schema is fitted
    Vocabulary vocabulary;
    std::size_t embedding_dims = 0;
    // For IP-address features: how many leading octets are kept (4 = full).
    std::optional<int> ip_octets;

    // continuous, filled when the schema is fitted
    double x_min = 0.0;
    double x_max = 0.0;

    static FeatureDescriptor named(std::string name, FeatureKind kind) {
        FeatureDescriptor d;
        d.name = std::move(name);
        d.kind = kind;
        return d;
    }

    bool operator==(const FeatureDescriptor&) const = default;
};

// Ordered feature list. An unfitted schema only carries names and kinds (as
// produced by ingestion); a fitted one also carries vocabularies, embedding
// sizes and scaler bounds computed from a training split.
class FeatureSchema {
public:
    FeatureSchema() = default;
    explicit FeatureSchema(std::vector<FeatureDescriptor> features, bool fitted = false)
        : features_(std::move(features)), fitted_(fitted) {
        std::set<std::string> seen;
        for (const auto& f : features_) {
            if (!seen.insert(f.name).second) throw SchemaError("duplicate feature '" + f.name + "'");
            if (f.kind == FeatureKind::Continuous && f.x_min > f.x_max) {
                throw SchemaError("feature '" + f.name + "' has x_min > x_max");
            }
        }
    }

    static FeatureSchema from_layout(const FieldLayout& layout) {
        std::vector<FeatureDescriptor> fs;
        for (const auto& n : layout.categorical) fs.push_back(FeatureDescriptor::named(n, FeatureKind::Categorical));
        for (const auto& n : layout.continuous) fs.push_back(FeatureDescriptor::named(n, FeatureKind::Continuous));
        return FeatureSchema(std::move(fs));
    }

    const std::vector<FeatureDescriptor>& features() const { return features_; }
    bool fitted() const { return fitted_; }
    bool empty() const { return features_.empty(); }

    const FeatureDescriptor* find(std::string_view name) const {
        for (const auto& f : features_) {
            if (f.name == name) return &f;
        }
        return nullptr;
    }

    std::vector<const FeatureDescriptor*> of_kind(FeatureKind kind) const {
        std::vector<const FeatureDescriptor*> out;
        for (const auto& f : features_) {
            if (f.kind == kind) out.push_back(&f);
        }
        return out;
    }

    std::vector<std::string> names(FeatureKind kind) const {
        std::vector<std::string> out;
        for (const auto& f : features_) {
            if (f.kind == kind) out.push_back(f.name);
        }
        return out;
    }

    bool operator==(const FeatureSchema&) const = default;

private:
    std::vector<FeatureDescriptor> features_;
    bool fitted_ = false;
};

struct ValidationResult {
    std::vector<std::string> violations;

    explicit operator bool() const { return violations.empty(); }
    bool ok() const { return violations.empty(); }

    std::string describe() const {
        std::string s;
        for (const auto& v : violations) {
            if (!s.empty()) s += "; ";
            s += v;
        }
        return s;
    }
};

// Checks names, kinds, finiteness and label of one record against a schema.
// Every problem is listed, each naming the offending field.
inline ValidationResult validate_record(const FlowRecord& record, const FeatureSchema& schema) {
    ValidationResult r;
    const auto& layout = record.layout();

    std::set<std::string> cat(layout.categorical.begin(), layout.categorical.end());
    std::set<std::string> cont(layout.continuous.begin(), layout.continuous.end());
    if (cat.size() != layout.categorical.size() || cont.size() != layout.continuous.size()) {
        r.violations.push_back("duplicate field name in record");
    }
    for (const auto& n : cat) {
        if (cont.count(n)) r.violations.push_back("field '" + n + "' is both categorical and continuous");
    }

    for (const auto& f : schema.features()) {
        const bool in_cat = cat.count(f.name) > 0;
        const bool in_cont = cont.count(f.name) > 0;
        if (!in_cat && !in_cont) {
            r.violations.push_back("missing field '" + f.name + "'");
        } else if (f.kind == FeatureKind::Categorical && !in_cat) {
            r.violations.push_back("field '" + f.name + "' should be categorical");
        } else if (f.kind == FeatureKind::Continuous && !in_cont) {
            r.violations.push_back("field '" + f.name + "' should be continuous");
        }
    }
    for (const auto& n : layout.categorical) {
        if (!schema.find(n)) r.violations.push_back("unexpected field '" + n + "'");
    }
    for (std::size_t i = 0; i < layout.continuous.size(); ++i) {
        const auto& n = layout.continuous[i];
        if (!schema.find(n)) r.violations.push_back("unexpected field '" + n + "'");
        if (!std::isfinite(record.continuous_values()[i])) {
            r.violations.push_back("non-finite value in field '" + n + "'");
        }
    }
    const int lbl = to_int(record.label());
    if (lbl != 0 && lbl != 1) r.violations.push_back("label " + std::to_string(lbl) + " is not binary");
    return r;
}

struct DroppedColumn {
    std::string name;
    std::string reason;  // "zero-variance" | "missing-values"

    bool operator==(const DroppedColumn&) const = default;
};

struct Provenance {
    std::vector<std::string> files;
    std::vector<DroppedColumn> dropped_columns;
    std::optional<std::uint64_t> seed;
};

// Records plus the (unfitted) schema they conform to.
struct LabeledDataset {
    std::vector<FlowRecord> records;
    FeatureSchema schema;
    Provenance provenance;

    std::size_t size() const { return records.size(); }

    std::size_t count(Label l) const {
        return static_cast<std::size_t>(
            std::count_if(records.begin(), records.end(), [l](const FlowRecord& r) { return r.label() == l; }));
    }

    // Same schema and provenance, different records.
    LabeledDataset with_records(std::vector<FlowRecord> recs) const {
        LabeledDataset d;
        d.records = std::move(recs);
        d.schema = schema;
        d.provenance = provenance;
        return d;
    }
};

}  // namespace nids
