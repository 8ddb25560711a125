#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nids/error.hpp"
#include "nids/flow.hpp"
#include "nids/nn.hpp"
#include "nids/preprocess.hpp"
#include "nids/rng.hpp"
#include "nids/tensor.hpp"

namespace nids {

struct TrainConfig {
    std::size_t epochs = 10;
    std::size_t batch_size = 512;
    std::uint64_t seed = 1;
    double learning_rate = 0.001;
    double rho = 0.9;
    double epsilon = 1e-8;
    double dropout = 0.40;
    double l1_lambda = 1e-5;
    double threshold = 0.5;
    IpMode ip_mode = IpMode::full;

    void validate() const {
        if (epochs == 0 || batch_size == 0) throw ConfigError("epochs and batch_size must be positive");
        if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
        if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0,1)");
        if (!(l1_lambda >= 0.0)) throw ConfigError("l1 lambda must be non-negative");
        if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("threshold must lie in (0,1)");
        if (!(rho >= 0.0 && rho < 1.0) || !(epsilon > 0.0)) throw ConfigError("invalid RMSProp rho/epsilon");
    }

    RmsPropConfig optimizer() const { return {learning_rate, rho, epsilon}; }
};

struct TrainHistory {
    std::vector<double> loss;
    std::vector<double> held_out_loss;
    // optimizer steps applied to each parameter block
    std::vector<std::size_t> steps;
};

namespace detail {

inline std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size, Rng& rng) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t s = 0; s < n; s += batch_size) {
        out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(s),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(n, s + batch_size)));
    }
    return out;
}

inline void zero_grads(std::vector<Param*>& ps) {
    for (auto* p : ps) p->zero_grad();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Supervised DNN

// Embedded categoricals concatenated with scaled continuous features, then
// hidden dense+ReLU+dropout blocks and a single sigmoid output unit.
class DnnModel {
public:
    FeatureSchema schema;
    EncodeOptions options;
    std::vector<Embedding> embeddings;  // one per schema categorical, in order
    Sequential stack;

    std::size_t continuous_width() const { return schema.of_kind(FeatureKind::Continuous).size(); }

    std::size_t input_width() const {
        std::size_t w = continuous_width();
        for (const auto& e : embeddings) w += e.dims();
        return w;
    }

    std::vector<std::size_t> layer_widths() const {
        std::vector<std::size_t> w{input_width()};
        for (const auto& l : stack.layers()) {
            if (const auto* d = std::get_if<Dense>(&l)) w.push_back(d->out());
        }
        return w;
    }

    void check_batch(const EncodedBatch& b) const {
        if (b.indices.size() != embeddings.size()) {
            throw SchemaError("batch has " + std::to_string(b.indices.size()) + " categorical columns, model expects " +
                              std::to_string(embeddings.size()));
        }
        if (b.dense.cols() != continuous_width()) {
            throw SchemaError("batch has " + std::to_string(b.dense.cols()) + " continuous columns, model expects " +
                              std::to_string(continuous_width()));
        }
    }

    // Probabilities, n x 1.
    Tensor2 forward(const EncodedBatch& b, Mode mode) {
        check_batch(b);
        std::vector<Tensor2> blocks;
        blocks.reserve(embeddings.size() + 1);
        for (std::size_t f = 0; f < embeddings.size(); ++f) blocks.push_back(embeddings[f].forward(b.indices[f]));
        blocks.push_back(b.dense);
        return stack.forward(hconcat(blocks), mode);
    }

    void backward(const Tensor2& grad_p) {
        const Tensor2 g = stack.backward(grad_p);
        std::vector<std::size_t> widths;
        for (const auto& e : embeddings) widths.push_back(e.dims());
        widths.push_back(continuous_width());
        auto parts = hsplit(g, widths);
        for (std::size_t f = 0; f < embeddings.size(); ++f) embeddings[f].backward(parts[f]);
    }

    std::vector<Param*> params() {
        std::vector<Param*> out;
        for (auto& e : embeddings) {
            for (auto* p : e.params()) out.push_back(p);
        }
        for (auto* p : stack.params()) out.push_back(p);
        return out;
    }

    std::uint64_t signature() const {
        std::uint64_t h = 0;
        stack.signature(h);
        return h;
    }

    // Mean BCE; fills parameter gradients when `with_grad`.
    double loss(const EncodedBatch& b, Mode mode, bool with_grad) {
        const Tensor2 p = forward(b, mode);
        auto r = bce_loss(p, b.labels);
        if (with_grad) {
            auto ps = params();
            detail::zero_grads(ps);
            backward(r.grad);
        }
        return r.loss;
    }
};

struct DnnArchitecture {
    std::vector<std::size_t> hidden{64, 64, 64};
    double dropout = 0.40;
};

inline DnnModel build_dnn(const FeatureSchema& schema, const EncodeOptions& options, std::uint64_t seed,
                          const DnnArchitecture& arch = {}) {
    if (!schema.fitted()) throw SchemaError("build_dnn needs a fitted schema");
    if (schema.empty()) throw SchemaError("build_dnn: schema has no features");
    DnnModel m;
    m.schema = schema;
    m.options = options;
    m.options.categorical_mode = CategoricalMode::index;
    Rng rng(seed);
    for (const auto* c : schema.of_kind(FeatureKind::Categorical)) {
        m.embeddings.emplace_back(c->vocabulary.cardinality() + 1, c->embedding_dims, rng, "embed." + c->name);
    }
    std::size_t width = m.input_width();
    if (width == 0) throw SchemaError("build_dnn: input width is zero");
    for (std::size_t i = 0; i < arch.hidden.size(); ++i) {
        m.stack.add(Dense(width, arch.hidden[i], rng, "hidden" + std::to_string(i)));
        m.stack.add(Relu{});
        m.stack.add(Dropout(arch.dropout));
        width = arch.hidden[i];
    }
    m.stack.add(Dense(width, 1, rng, "output"));
    m.stack.add(Sigmoid{});
    return m;
}

// Shuffled mini-batch RMSProp on binary cross-entropy, dropout active.
inline TrainHistory train_dnn(DnnModel& model, const EncodedBatch& train, const TrainConfig& config,
                              const EncodedBatch* held_out = nullptr) {
    config.validate();
    if (train.rows() == 0) throw ConfigError("train_dnn: empty training set");
    model.check_batch(train);
    Rng rng(config.seed);
    std::uint64_t salt = 1;
    for (auto* d : model.stack.dropouts()) d->reseed(rng.fork(salt++).next());

    OptimizerState opt{config.optimizer(), {}, {}};
    auto params = model.params();
    TrainHistory hist;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        double total = 0.0;
        for (const auto& idx : detail::epoch_batches(train.rows(), config.batch_size, rng)) {
            const EncodedBatch b = train.select(idx);
            total += model.loss(b, Mode::train, true) * static_cast<double>(b.rows());
            rmsprop_step(opt, params);
        }
        hist.loss.push_back(total / static_cast<double>(train.rows()));
        if (held_out && held_out->rows() > 0) hist.held_out_loss.push_back(model.loss(*held_out, Mode::infer, false));
    }
    hist.steps = opt.steps;
    return hist;
}

inline std::vector<double> predict_dnn(DnnModel& model, const EncodedBatch& rows) {
    const Tensor2 p = model.forward(rows, Mode::infer);
    return p.data();
}

// ---------------------------------------------------------------------------
// Autoencoder

// Dense stack input -> 140 -> 35 -> 16 -> 16 -> 35 -> input, sigmoid on the
// first and last layers, ReLU in between. An L1 activity penalty applies to
// the first (140-unit) layer's activations.
class AutoencoderModel {
public:
    FeatureSchema schema;
    EncodeOptions options;
    Sequential stack;
    // index in `stack` of the layer whose output carries the L1 penalty
    std::size_t l1_layer = 1;
    double l1_lambda = 1e-5;

    std::size_t width() const {
        if (stack.layers().empty()) return 0;
        return std::get<Dense>(stack.layers().front()).in();
    }

    std::vector<std::size_t> layer_widths() const {
        std::vector<std::size_t> w{width()};
        for (const auto& l : stack.layers()) {
            if (const auto* d = std::get_if<Dense>(&l)) w.push_back(d->out());
        }
        return w;
    }

    void check_batch(const EncodedBatch& b) const {
        if (b.dense.cols() != width()) {
            throw SchemaError("batch has " + std::to_string(b.dense.cols()) + " columns, autoencoder expects " +
                              std::to_string(width()));
        }
    }

    Tensor2 reconstruct(const Tensor2& x, Mode mode = Mode::infer) { return stack.forward(x, mode); }

    std::vector<Param*> params() { return stack.params(); }

    std::uint64_t signature() const {
        std::uint64_t h = 0;
        stack.signature(h);
        return h;
    }

    // (||X - X_hat||_F^2 + lambda * sum|A|) / n, A = activations of l1_layer.
    double loss(const Tensor2& x, bool with_grad) {
        const Tensor2 xh = stack.forward(x, Mode::train);
        auto se = sq_error_loss(x, xh);
        auto l1 = l1_penalty(stack.output(l1_layer), l1_lambda);
        const double inv_n = x.rows() ? 1.0 / static_cast<double>(x.rows()) : 0.0;
        if (with_grad) {
            auto ps = params();
            detail::zero_grads(ps);
            for (auto& v : se.grad.data()) v *= inv_n;
            for (auto& v : l1.grad.data()) v *= inv_n;
            stack.backward(se.grad, std::make_pair(l1_layer, std::move(l1.grad)));
        }
        return (se.loss + l1.loss) * inv_n;
    }
};

struct AutoencoderArchitecture {
    std::vector<std::size_t> hidden{140, 35, 16, 16, 35};
    double l1_lambda = 1e-5;
};

// Input width of the autoencoder for a fitted schema under one-hot encoding.
inline std::size_t onehot_width(const FeatureSchema& schema) {
    std::size_t w = 0;
    for (const auto& f : schema.features()) w += f.kind == FeatureKind::Continuous ? 1 : f.vocabulary.cardinality();
    return w;
}

inline AutoencoderModel build_autoencoder(const FeatureSchema& schema, const EncodeOptions& options,
                                          std::uint64_t seed, const AutoencoderArchitecture& arch = {}) {
    if (!schema.fitted()) throw SchemaError("build_autoencoder needs a fitted schema");
    const std::size_t w = onehot_width(schema);
    if (w == 0) throw SchemaError("build_autoencoder: input width is zero");
    if (arch.hidden.empty()) throw ConfigError("autoencoder needs at least one hidden layer");
    AutoencoderModel m;
    m.schema = schema;
    m.options = options;
    m.options.categorical_mode = CategoricalMode::onehot;
    m.l1_lambda = arch.l1_lambda;
    Rng rng(seed);
    std::size_t in = w;
    for (std::size_t i = 0; i < arch.hidden.size(); ++i) {
        m.stack.add(Dense(in, arch.hidden[i], rng, "ae" + std::to_string(i)));
        if (i == 0) {
            m.stack.add(Sigmoid{});
        } else {
            m.stack.add(Relu{});
        }
        in = arch.hidden[i];
    }
    m.stack.add(Dense(in, w, rng, "ae_out"));
    m.stack.add(Sigmoid{});
    m.l1_layer = 1;
    return m;
}

// RMSProp on squared reconstruction error plus L1 activity penalty. Training
// data must be benign only.
inline TrainHistory train_autoencoder(AutoencoderModel& model, const EncodedBatch& benign_only,
                                      const TrainConfig& config, const EncodedBatch* held_out = nullptr) {
    config.validate();
    if (benign_only.rows() == 0) throw ConfigError("train_autoencoder: empty training set");
    for (double y : benign_only.labels) {
        if (y != 0.0) throw ConfigError("train_autoencoder: training data contains malicious rows");
    }
    model.check_batch(benign_only);
    model.l1_lambda = config.l1_lambda;
    Rng rng(config.seed);
    OptimizerState opt{config.optimizer(), {}, {}};
    auto params = model.params();
    TrainHistory hist;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        double total = 0.0;
        for (const auto& idx : detail::epoch_batches(benign_only.rows(), config.batch_size, rng)) {
            const Tensor2 x = benign_only.dense.gather_rows(idx);
            total += model.loss(x, true) * static_cast<double>(x.rows());
            rmsprop_step(opt, params);
        }
        hist.loss.push_back(total / static_cast<double>(benign_only.rows()));
        if (held_out && held_out->rows() > 0) hist.held_out_loss.push_back(model.loss(held_out->dense, false));
    }
    hist.steps = opt.steps;
    return hist;
}

// Per-row mean over columns of (x - x_hat)^2.
inline std::vector<double> reconstruction_error(AutoencoderModel& model, const EncodedBatch& rows) {
    model.check_batch(rows);
    const Tensor2 xh = model.reconstruct(rows.dense);
    std::vector<double> err(rows.rows(), 0.0);
    const double inv_w = xh.cols() ? 1.0 / static_cast<double>(xh.cols()) : 0.0;
    for (std::size_t i = 0; i < err.size(); ++i) {
        double s = 0.0;
        const auto a = rows.dense.row(i);
        const auto b = xh.row(i);
        for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
        err[i] = s * inv_w;
    }
    return err;
}

}  // namespace nids
