#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nids/error.hpp"
#include "nids/flow.hpp"
#include "nids/tensor.hpp"

namespace nids {

// ---------------------------------------------------------------------------
// Min-max scaling

struct FeatureBounds {
    std::string name;
    double x_min = 0.0;
    double x_max = 0.0;

    bool operator==(const FeatureBounds&) const = default;
};

// Per-feature bounds, in schema order. Fit on a training split only.
struct ScalerParams {
    std::vector<FeatureBounds> bounds;

    const FeatureBounds& at(std::string_view name) const {
        for (const auto& b : bounds) {
            if (b.name == name) return b;
        }
        throw SchemaError("scaler has no feature '" + std::string(name) + "'");
    }

    bool operator==(const ScalerParams&) const = default;
};

inline ScalerParams fit_scaler(const LabeledDataset& train) {
    if (train.records.empty()) throw ConfigError("cannot fit scaler on an empty dataset");
    ScalerParams p;
    for (const auto& name : train.schema.names(FeatureKind::Continuous)) {
        FeatureBounds b{name, 0.0, 0.0};
        bool first = true;
        for (const auto& r : train.records) {
            auto v = r.continuous(name);
            if (!v) throw SchemaError("record " + r.source_tag() + " lacks feature '" + name + "'");
            if (first) {
                b.x_min = b.x_max = *v;
                first = false;
            } else {
                b.x_min = std::min(b.x_min, *v);
                b.x_max = std::max(b.x_max, *v);
            }
        }
        p.bounds.push_back(std::move(b));
    }
    return p;
}

// (x - min) / (max - min), clamped to [0,1]. A constant feature maps to 0.
inline double scale_value(double x, double x_min, double x_max) {
    if (x_max == x_min) return 0.0;
    const double v = (x - x_min) / (x_max - x_min);
    return std::clamp(v, 0.0, 1.0);
}

inline double apply_scaler(const ScalerParams& params, double x, std::string_view feature) {
    const auto& b = params.at(feature);
    return scale_value(x, b.x_min, b.x_max);
}

// ---------------------------------------------------------------------------
// Embedding sizes

// ceil(cardinality^(1/4)), computed in integers: the smallest k with
// k^4 >= cardinality.
inline std::size_t embedding_dims(std::size_t cardinality) {
    if (cardinality == 0) throw ConfigError("embedding_dims: cardinality must be positive");
    auto k = static_cast<std::size_t>(std::floor(std::pow(static_cast<double>(cardinality), 0.25)));
    auto pow4 = [](std::size_t v) { return v * v * v * v; };
    while (k > 1 && pow4(k) >= cardinality) --k;
    while (pow4(k) < cardinality) ++k;
    return k;
}

// The published CIC IDS 2017 embedding table. Its Destination Port row
// prints 15 while the fourth-root rule gives 16; we always use the rule.
struct PublishedEmbedding {
    const char* feature;
    std::size_t cardinality;
    std::size_t printed_dims;
};

inline constexpr std::array<PublishedEmbedding, 4> published_cic_embeddings{{
    {"SrcIP", 17002, 12},
    {"DstIP", 19112, 12},
    {"SrcPort", 64638, 16},
    {"DstPort", 53791, 15},
}};

// Non-empty when a fitted cardinality matches a published row whose printed
// size disagrees with the computed one.
inline std::optional<std::string> published_dims_conflict(std::string_view feature, std::size_t cardinality) {
    for (const auto& p : published_cic_embeddings) {
        if (feature == p.feature && cardinality == p.cardinality && embedding_dims(cardinality) != p.printed_dims) {
            return std::string(feature) + ": cardinality " + std::to_string(cardinality) + " gives " +
                   std::to_string(embedding_dims(cardinality)) + " embedding dims; the published table lists " +
                   std::to_string(p.printed_dims) + " (using " + std::to_string(embedding_dims(cardinality)) + ")";
        }
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// IP truncation

// Keeps the first `octets` (1..4) octets of a dotted address. The input may
// itself be a truncated form, as long as it has at least `octets` octets.
inline std::string truncate_ip(std::string_view ip, int octets) {
    if (octets < 1 || octets > 4) throw ConfigError("truncate_ip: octets must be in 1..4");
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    for (;;) {
        auto dot = ip.find('.', start);
        parts.push_back(ip.substr(start, dot == std::string_view::npos ? std::string_view::npos : dot - start));
        if (dot == std::string_view::npos) break;
        start = dot + 1;
    }
    if (parts.size() > 4) throw ConfigError("truncate_ip: '" + std::string(ip) + "' has more than 4 octets");
    for (auto p : parts) {
        if (p.empty() || p.size() > 3 || !std::all_of(p.begin(), p.end(), [](char c) { return c >= '0' && c <= '9'; })) {
            throw ConfigError("truncate_ip: malformed address '" + std::string(ip) + "'");
        }
        if (std::stoi(std::string(p)) > 255) throw ConfigError("truncate_ip: octet out of range in '" + std::string(ip) + "'");
    }
    if (static_cast<int>(parts.size()) < octets) {
        throw ConfigError("truncate_ip: '" + std::string(ip) + "' has fewer than " + std::to_string(octets) + " octets");
    }
    std::string out;
    for (int i = 0; i < octets; ++i) {
        if (i) out += '.';
        out += parts[static_cast<std::size_t>(i)];
    }
    return out;
}

// ---------------------------------------------------------------------------
// One-hot

// Length cardinality+1; slot 0 is the out-of-vocabulary slot.
inline std::vector<double> one_hot(const Vocabulary& vocab, std::string_view value) {
    std::vector<double> v(vocab.cardinality() + 1, 0.0);
    v[vocab.encode(value)] = 1.0;
    return v;
}

// ---------------------------------------------------------------------------
// Schema fitting and dataset encoding

enum class IpMode { full, first3, drop };
enum class CategoricalMode { index, onehot };

inline std::string to_string(IpMode m) {
    switch (m) {
        case IpMode::full: return "full";
        case IpMode::first3: return "first3";
        case IpMode::drop: return "drop";
    }
    return "full";
}

inline IpMode parse_ip_mode(std::string_view s) {
    if (s == "full") return IpMode::full;
    if (s == "first3") return IpMode::first3;
    if (s == "drop") return IpMode::drop;
    throw ConfigError("unknown ip_mode '" + std::string(s) + "' (expected full|first3|drop)");
}

inline std::string to_string(CategoricalMode m) { return m == CategoricalMode::index ? "index" : "onehot"; }

inline CategoricalMode parse_categorical_mode(std::string_view s) {
    if (s == "index") return CategoricalMode::index;
    if (s == "onehot") return CategoricalMode::onehot;
    throw ConfigError("unknown categorical_mode '" + std::string(s) + "' (expected index|onehot)");
}

struct EncodeOptions {
    IpMode ip_mode = IpMode::full;
    CategoricalMode categorical_mode = CategoricalMode::index;
    // Categorical features to keep; empty keeps all of them.
    std::vector<std::string> categorical_features;
    std::vector<std::string> ip_features{"SrcIP", "DstIP"};

    bool is_ip(std::string_view name) const {
        return std::find(ip_features.begin(), ip_features.end(), name) != ip_features.end();
    }

    bool operator==(const EncodeOptions&) const = default;
};

// Fits vocabularies, embedding sizes and scaler bounds on a training split.
// IP features are truncated before the vocabulary is built (first3) or left
// out entirely (drop).
inline FeatureSchema fit_schema(const LabeledDataset& train, const EncodeOptions& opt,
                                std::vector<std::string>* notes = nullptr) {
    if (train.records.empty()) throw ConfigError("cannot fit schema on an empty dataset");
    std::vector<FeatureDescriptor> out;
    for (const auto& f : train.schema.features()) {
        if (f.kind != FeatureKind::Categorical) continue;
        if (!opt.categorical_features.empty() &&
            std::find(opt.categorical_features.begin(), opt.categorical_features.end(), f.name) ==
                opt.categorical_features.end()) {
            continue;
        }
        const bool ip = opt.is_ip(f.name);
        if (ip && opt.ip_mode == IpMode::drop) continue;
        const int octets = opt.ip_mode == IpMode::first3 ? 3 : 4;
        std::vector<std::string> values;
        values.reserve(train.records.size());
        for (const auto& r : train.records) {
            const auto* v = r.categorical(f.name);
            if (!v) throw SchemaError("record " + r.source_tag() + " lacks feature '" + f.name + "'");
            values.push_back(ip && octets < 4 ? truncate_ip(*v, octets) : *v);
        }
        auto d = FeatureDescriptor::named(f.name, FeatureKind::Categorical);
        d.vocabulary = Vocabulary::from_values(values);
        d.embedding_dims = embedding_dims(d.vocabulary.cardinality());
        if (ip) d.ip_octets = octets;
        if (notes) {
            if (auto n = published_dims_conflict(f.name, d.vocabulary.cardinality())) notes->push_back(*n);
        }
        out.push_back(std::move(d));
    }
    const auto scaler = fit_scaler(train);
    for (const auto& b : scaler.bounds) {
        auto d = FeatureDescriptor::named(b.name, FeatureKind::Continuous);
        d.x_min = b.x_min;
        d.x_max = b.x_max;
        out.push_back(std::move(d));
    }
    return FeatureSchema(std::move(out), true);
}

inline ScalerParams scaler_of(const FeatureSchema& schema) {
    ScalerParams p;
    for (const auto* f : schema.of_kind(FeatureKind::Continuous)) p.bounds.push_back({f->name, f->x_min, f->x_max});
    return p;
}

// Numeric form of a dataset under a fitted schema.
//
// index mode: `dense` holds the scaled continuous features and `indices`
// one vocabulary-index column per categorical feature (for embeddings).
// onehot mode: `dense` holds the continuous features followed by one one-hot
// block per categorical feature; `indices` is empty. These blocks have one
// column per vocabulary value and no OOV column (so 3 protocol values add 3
// columns); an unseen value encodes as an all-zero block.
struct EncodedBatch {
    Tensor2 dense;
    std::vector<std::vector<std::size_t>> indices;
    std::vector<double> labels;
    std::vector<std::string> dense_columns;
    std::vector<std::string> index_features;

    std::size_t rows() const { return labels.size(); }

    EncodedBatch select(std::span<const std::size_t> rows) const {
        EncodedBatch b;
        b.dense = dense.gather_rows(rows);
        b.indices.resize(indices.size());
        for (std::size_t f = 0; f < indices.size(); ++f) {
            b.indices[f].reserve(rows.size());
            for (auto r : rows) b.indices[f].push_back(indices[f][r]);
        }
        b.labels.reserve(rows.size());
        for (auto r : rows) b.labels.push_back(labels[r]);
        b.dense_columns = dense_columns;
        b.index_features = index_features;
        return b;
    }
};

inline EncodedBatch encode_dataset(const LabeledDataset& data, const FeatureSchema& schema, CategoricalMode mode) {
    if (!schema.fitted()) throw SchemaError("encode_dataset needs a fitted schema");
    const auto cats = schema.of_kind(FeatureKind::Categorical);
    const auto conts = schema.of_kind(FeatureKind::Continuous);
    const std::size_t n = data.records.size();

    // Resolve each schema feature to a position in the data layout once.
    auto position = [](const std::vector<std::string>& names, const std::string& want) -> std::optional<std::size_t> {
        for (std::size_t i = 0; i < names.size(); ++i) {
            if (names[i] == want) return i;
        }
        return std::nullopt;
    };

    EncodedBatch out;
    std::size_t width = conts.size();
    if (mode == CategoricalMode::onehot) {
        for (const auto* c : cats) width += c->vocabulary.cardinality();
    }
    out.dense = Tensor2(n, width);
    out.labels.reserve(n);
    for (const auto* c : conts) out.dense_columns.push_back(c->name);
    if (mode == CategoricalMode::onehot) {
        for (const auto* c : cats) {
            for (const auto& v : c->vocabulary.values()) out.dense_columns.push_back(c->name + "=" + v);
        }
    } else {
        out.indices.assign(cats.size(), std::vector<std::size_t>(n, 0));
        for (const auto* c : cats) out.index_features.push_back(c->name);
    }

    const FieldLayout* cached_layout = nullptr;
    std::vector<std::size_t> cont_pos(conts.size()), cat_pos(cats.size());
    for (std::size_t i = 0; i < n; ++i) {
        const auto& r = data.records[i];
        if (&r.layout() != cached_layout) {
            for (std::size_t k = 0; k < conts.size(); ++k) {
                auto p = position(r.layout().continuous, conts[k]->name);
                if (!p) throw SchemaError("data lacks continuous feature '" + conts[k]->name + "'");
                cont_pos[k] = *p;
            }
            for (std::size_t k = 0; k < cats.size(); ++k) {
                auto p = position(r.layout().categorical, cats[k]->name);
                if (!p) throw SchemaError("data lacks categorical feature '" + cats[k]->name + "'");
                cat_pos[k] = *p;
            }
            cached_layout = &r.layout();
        }
        auto row = out.dense.row(i);
        for (std::size_t k = 0; k < conts.size(); ++k) {
            const double x = r.continuous_values()[cont_pos[k]];
            if (!std::isfinite(x)) throw SchemaError("non-finite value in feature '" + conts[k]->name + "'");
            row[k] = scale_value(x, conts[k]->x_min, conts[k]->x_max);
        }
        std::size_t offset = conts.size();
        for (std::size_t k = 0; k < cats.size(); ++k) {
            const auto* c = cats[k];
            const std::string& raw = r.categorical_values()[cat_pos[k]];
            std::size_t idx;
            if (c->ip_octets && *c->ip_octets < 4) {
                // malformed addresses fall into the OOV slot
                try {
                    idx = c->vocabulary.encode(truncate_ip(raw, *c->ip_octets));
                } catch (const ConfigError&) {
                    idx = 0;
                }
            } else {
                idx = c->vocabulary.encode(raw);
            }
            if (mode == CategoricalMode::onehot) {
                if (idx > 0) row[offset + idx - 1] = 1.0;
                offset += c->vocabulary.cardinality();
            } else {
                out.indices[k][i] = idx;
            }
        }
        out.labels.push_back(static_cast<double>(to_int(r.label())));
    }
    return out;
}

// Same as above, additionally checking that the options agree with how the
// schema was fitted.
inline EncodedBatch encode_dataset(const LabeledDataset& data, const FeatureSchema& schema, const EncodeOptions& opt) {
    for (const auto* c : schema.of_kind(FeatureKind::Categorical)) {
        if (!opt.is_ip(c->name)) continue;
        const int want = opt.ip_mode == IpMode::first3 ? 3 : 4;
        if (opt.ip_mode == IpMode::drop || !c->ip_octets || *c->ip_octets != want) {
            throw SchemaError("schema feature '" + c->name + "' was not fitted with ip_mode " + to_string(opt.ip_mode));
        }
    }
    return encode_dataset(data, schema, opt.categorical_mode);
}

}  // namespace nids
