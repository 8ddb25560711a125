#pragma once

#include <array>
#include <charconv>
#include <cstdint>
#include <istream>
#include <iterator>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "nids/error.hpp"
#include "nids/flow.hpp"
#include "nids/models.hpp"
#include "nids/nn.hpp"
#include "nids/preprocess.hpp"

namespace nids {

using nlohmann::json;

inline constexpr int model_format_version = 1;
inline constexpr const char* model_format_name = "nids-model";

// ---------------------------------------------------------------------------
// Schema

inline json schema_to_json(const FeatureSchema& s) {
    json feats = json::array();
    for (const auto& f : s.features()) {
        json j{{"name", f.name}, {"kind", f.kind == FeatureKind::Categorical ? "categorical" : "continuous"}};
        if (f.kind == FeatureKind::Categorical) {
            j["vocabulary"] = f.vocabulary.values();
            j["embedding_dims"] = f.embedding_dims;
            if (f.ip_octets) j["ip_octets"] = *f.ip_octets;
        } else {
            j["x_min"] = f.x_min;
            j["x_max"] = f.x_max;
        }
        feats.push_back(std::move(j));
    }
    return json{{"fitted", s.fitted()}, {"features", std::move(feats)}};
}

inline FeatureSchema schema_from_json(const json& j) {
    std::vector<FeatureDescriptor> fs;
    for (const auto& jf : j.at("features")) {
        FeatureDescriptor f;
        f.name = jf.at("name").get<std::string>();
        const auto kind = jf.at("kind").get<std::string>();
        if (kind == "categorical") {
            f.kind = FeatureKind::Categorical;
            f.vocabulary = Vocabulary::from_ordered(jf.at("vocabulary").get<std::vector<std::string>>());
            f.embedding_dims = jf.at("embedding_dims").get<std::size_t>();
            if (jf.contains("ip_octets")) f.ip_octets = jf.at("ip_octets").get<int>();
        } else if (kind == "continuous") {
            f.kind = FeatureKind::Continuous;
            f.x_min = jf.at("x_min").get<double>();
            f.x_max = jf.at("x_max").get<double>();
        } else {
            throw SchemaError("unknown feature kind '" + kind + "'");
        }
        fs.push_back(std::move(f));
    }
    return FeatureSchema(std::move(fs), j.at("fitted").get<bool>());
}

inline json options_to_json(const EncodeOptions& o) {
    return json{{"ip_mode", to_string(o.ip_mode)},
                {"categorical_mode", to_string(o.categorical_mode)},
                {"categorical_features", o.categorical_features},
                {"ip_features", o.ip_features}};
}

inline EncodeOptions options_from_json(const json& j) {
    EncodeOptions o;
    o.ip_mode = parse_ip_mode(j.at("ip_mode").get<std::string>());
    o.categorical_mode = parse_categorical_mode(j.at("categorical_mode").get<std::string>());
    o.categorical_features = j.at("categorical_features").get<std::vector<std::string>>();
    o.ip_features = j.at("ip_features").get<std::vector<std::string>>();
    return o;
}

inline json train_config_to_json(const TrainConfig& c) {
    return json{{"epochs", c.epochs},       {"batch_size", c.batch_size}, {"seed", c.seed},
                {"learning_rate", c.learning_rate}, {"rho", c.rho},   {"epsilon", c.epsilon},
                {"dropout", c.dropout},     {"l1_lambda", c.l1_lambda},   {"threshold", c.threshold},
                {"ip_mode", to_string(c.ip_mode)}};
}

inline TrainConfig train_config_from_json(const json& j) {
    TrainConfig c;
    c.epochs = j.at("epochs").get<std::size_t>();
    c.batch_size = j.at("batch_size").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.rho = j.at("rho").get<double>();
    c.epsilon = j.at("epsilon").get<double>();
    c.dropout = j.at("dropout").get<double>();
    c.l1_lambda = j.at("l1_lambda").get<double>();
    c.threshold = j.at("threshold").get<double>();
    c.ip_mode = parse_ip_mode(j.at("ip_mode").get<std::string>());
    return c;
}

// ---------------------------------------------------------------------------
// Layers

inline json tensor_to_json(const Tensor2& t) {
    return json{{"rows", t.rows()}, {"cols", t.cols()}, {"data", t.data()}};
}

inline Tensor2 tensor_from_json(const json& j) {
    return Tensor2(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                   j.at("data").get<std::vector<double>>());
}

inline Param param_from_json(const json& j) {
    return Param(j.at("name").get<std::string>(), tensor_from_json(j.at("value")));
}

inline json param_to_json(const Param& p) { return json{{"name", p.name}, {"value", tensor_to_json(p.value)}}; }

inline json stack_to_json(const Sequential& s) {
    json layers = json::array();
    for (const auto& l : s.layers()) {
        json j{{"type", layer_kind(l)}};
        if (const auto* d = std::get_if<Dense>(&l)) {
            j["weight"] = param_to_json(d->weight());
            j["bias"] = param_to_json(d->bias());
        } else if (const auto* d = std::get_if<Dropout>(&l)) {
            j["rate"] = d->rate();
        }
        layers.push_back(std::move(j));
    }
    return layers;
}

inline Sequential stack_from_json(const json& j) {
    Sequential s;
    for (const auto& jl : j) {
        const auto type = jl.at("type").get<std::string>();
        if (type == "dense") {
            s.add(Dense(param_from_json(jl.at("weight")), param_from_json(jl.at("bias"))));
        } else if (type == "relu") {
            s.add(Relu{});
        } else if (type == "sigmoid") {
            s.add(Sigmoid{});
        } else if (type == "dropout") {
            s.add(Dropout(jl.at("rate").get<double>()));
        } else {
            throw SchemaError("unknown layer type '" + type + "'");
        }
    }
    return s;
}

// ---------------------------------------------------------------------------
// Model file

struct ModelFile {
    std::variant<DnnModel, AutoencoderModel> model;
    TrainConfig train;
    std::string provenance_digest;

    bool is_dnn() const { return std::holds_alternative<DnnModel>(model); }
    const char* kind() const { return is_dnn() ? "dnn" : "autoencoder"; }
};

inline json model_to_json(const ModelFile& f) {
    json j{{"format", model_format_name},
           {"version", model_format_version},
           {"kind", f.kind()},
           {"train_config", train_config_to_json(f.train)},
           {"provenance_digest", f.provenance_digest}};
    if (const auto* m = std::get_if<DnnModel>(&f.model)) {
        j["schema"] = schema_to_json(m->schema);
        j["options"] = options_to_json(m->options);
        json emb = json::array();
        for (const auto& e : m->embeddings) emb.push_back(param_to_json(e.table()));
        j["embeddings"] = std::move(emb);
        j["layers"] = stack_to_json(m->stack);
    } else {
        const auto& a = std::get<AutoencoderModel>(f.model);
        j["schema"] = schema_to_json(a.schema);
        j["options"] = options_to_json(a.options);
        j["layers"] = stack_to_json(a.stack);
        j["l1_layer"] = a.l1_layer;
        j["l1_lambda"] = a.l1_lambda;
    }
    return j;
}

// Doubles are written in shortest round-trip form, so parsing the text back
// yields the identical 64-bit values.
inline std::string save_model(const ModelFile& f) { return model_to_json(f).dump(1) + "\n"; }

inline ModelFile load_model(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("model file is not valid JSON: ") + e.what(), e.byte);
    }
    try {
        if (j.at("format").get<std::string>() != model_format_name) throw SchemaError("not a model file");
        if (j.at("version").get<int>() != model_format_version) {
            throw SchemaError("unsupported model file version " + j.at("version").dump());
        }
        ModelFile f;
        f.train = train_config_from_json(j.at("train_config"));
        f.provenance_digest = j.at("provenance_digest").get<std::string>();
        const auto kind = j.at("kind").get<std::string>();
        if (kind == "dnn") {
            DnnModel m;
            m.schema = schema_from_json(j.at("schema"));
            m.options = options_from_json(j.at("options"));
            for (const auto& e : j.at("embeddings")) m.embeddings.emplace_back(param_from_json(e));
            m.stack = stack_from_json(j.at("layers"));
            f.model = std::move(m);
        } else if (kind == "autoencoder") {
            AutoencoderModel m;
            m.schema = schema_from_json(j.at("schema"));
            m.options = options_from_json(j.at("options"));
            m.stack = stack_from_json(j.at("layers"));
            m.l1_layer = j.at("l1_layer").get<std::size_t>();
            m.l1_lambda = j.at("l1_lambda").get<double>();
            f.model = std::move(m);
        } else {
            throw SchemaError("unknown model kind '" + kind + "'");
        }
        return f;
    } catch (const json::exception& e) {
        throw SchemaError(std::string("malformed model file: ") + e.what());
    }
}

inline ModelFile load_model(std::istream& in) {
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return load_model(text);
}

// FNV-1a over field names, values and labels of every record, as hex.
inline std::string dataset_digest(const LabeledDataset& d) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&](std::string_view s) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
        h ^= 0xff;
        h *= 0x100000001b3ULL;
    };
    const FieldLayout* last = nullptr;
    for (const auto& r : d.records) {
        if (&r.layout() != last) {
            for (const auto& n : r.layout().categorical) feed(n);
            for (const auto& n : r.layout().continuous) feed(n);
            last = &r.layout();
        }
        for (const auto& v : r.categorical_values()) feed(v);
        for (double v : r.continuous_values()) {
            std::array<char, 32> buf{};
            auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
            feed(std::string_view(buf.data(), static_cast<std::size_t>(res.ptr - buf.data())));
        }
        feed(r.label() == Label::Benign ? "0" : "1");
    }
    char out[17];
    std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h));
    return out;
}

}  // namespace nids
