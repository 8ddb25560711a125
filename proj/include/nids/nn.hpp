#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "nids/error.hpp"
#include "nids/rng.hpp"
#include "nids/tensor.hpp"

namespace nids {

enum class Mode { train, infer };

// A named trainable block and its gradient (same shape).
struct Param {
    std::string name;
    Tensor2 value;
    Tensor2 grad;

    Param() = default;
    Param(std::string n, Tensor2 v) : name(std::move(n)), value(std::move(v)), grad(value.rows(), value.cols()) {}

    void zero_grad() { grad.fill(0.0); }
};

inline void mix_hash(std::uint64_t& h, std::uint64_t v) {
    h ^= v + 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2);
}

// ---------------------------------------------------------------------------
// Layers

// y = x W + b, W[d_in x d_out], b[1 x d_out]
class Dense {
public:
    Dense() = default;
    Dense(std::size_t in, std::size_t out, Rng& rng, const std::string& name)
        : weight_(name + ".W", Tensor2(in, out)), bias_(name + ".b", Tensor2(1, out)) {
        // symmetric uniform scaled by fan-in; biases start at zero
        const double limit = std::sqrt(6.0 / static_cast<double>(std::max<std::size_t>(in, 1)));
        for (auto& w : weight_.value.data()) w = rng.uniform(-limit, limit);
    }
    Dense(Param weight, Param bias) : weight_(std::move(weight)), bias_(std::move(bias)) {
        if (bias_.value.rows() != 1 || bias_.value.cols() != weight_.value.cols()) {
            throw ShapeError("dense bias shape does not match weight");
        }
    }

    std::size_t in() const { return weight_.value.rows(); }
    std::size_t out() const { return weight_.value.cols(); }

    Tensor2 forward(const Tensor2& x, Mode) {
        if (x.cols() != in()) {
            throw ShapeError("dense " + weight_.name + ": input width " + std::to_string(x.cols()) + ", expected " +
                             std::to_string(in()));
        }
        input_ = x;
        Tensor2 y = matmul(x, weight_.value);
        const auto b = bias_.value.row(0);
        for (std::size_t i = 0; i < y.rows(); ++i) {
            auto r = y.row(i);
            for (std::size_t j = 0; j < r.size(); ++j) r[j] += b[j];
        }
        return y;
    }

    Tensor2 backward(const Tensor2& g) {
        const Tensor2 dw = matmul_tn(input_, g);
        for (std::size_t k = 0; k < dw.size(); ++k) weight_.grad.data()[k] += dw.data()[k];
        auto db = bias_.grad.row(0);
        for (std::size_t i = 0; i < g.rows(); ++i) {
            const auto r = g.row(i);
            for (std::size_t j = 0; j < r.size(); ++j) db[j] += r[j];
        }
        return matmul_nt(g, weight_.value);
    }

    std::vector<Param*> params() { return {&weight_, &bias_}; }
    const Param& weight() const { return weight_; }
    const Param& bias() const { return bias_; }
    Param& weight() { return weight_; }
    Param& bias() { return bias_; }

private:
    Param weight_;
    Param bias_;
    Tensor2 input_;
};

// R(z) = max(0, z); the subgradient at 0 is taken as 0.
class Relu {
public:
    Tensor2 forward(const Tensor2& x, Mode) {
        input_ = x;
        Tensor2 y = x;
        for (auto& v : y.data()) v = v > 0.0 ? v : 0.0;
        return y;
    }

    Tensor2 backward(const Tensor2& g) const {
        Tensor2 d = g;
        for (std::size_t k = 0; k < d.size(); ++k) {
            if (!(input_.data()[k] > 0.0)) d.data()[k] = 0.0;
        }
        return d;
    }

    void signature(std::uint64_t& h) const {
        for (double v : input_.data()) mix_hash(h, v > 0.0);
    }

private:
    Tensor2 input_;
};

// Logistic function, evaluated so that large |z| saturates towards 0 or 1
// without cancellation: for z >= 0 it returns 1 - t/(1+t) with t = e^-z.
inline double sigmoid(double z) {
    if (z >= 0.0) {
        const double t = std::exp(-z);
        return 1.0 - t / (1.0 + t);
    }
    const double t = std::exp(z);
    return t / (1.0 + t);
}

inline double relu(double z) { return z > 0.0 ? z : 0.0; }

class Sigmoid {
public:
    Tensor2 forward(const Tensor2& x, Mode) {
        output_ = x;
        for (auto& v : output_.data()) v = sigmoid(v);
        return output_;
    }

    Tensor2 backward(const Tensor2& g) const {
        Tensor2 d = g;
        for (std::size_t k = 0; k < d.size(); ++k) {
            const double s = output_.data()[k];
            d.data()[k] *= s * (1.0 - s);
        }
        return d;
    }

private:
    Tensor2 output_;
};

// Inverted dropout: in training each unit is zeroed with probability `rate`
// and survivors are scaled by 1/(1-rate); inference is the identity.
// A frozen layer reuses its last mask, which makes the training-mode
// function deterministic for gradient checks.
class Dropout {
public:
    Dropout() = default;
    explicit Dropout(double rate, std::uint64_t seed = 0) : rate_(rate), rng_(seed) {
        if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("dropout rate must lie in [0,1)");
    }

    double rate() const { return rate_; }
    void reseed(std::uint64_t seed) { rng_ = Rng(seed); }
    void freeze(bool on) { frozen_ = on; }

    Tensor2 forward(const Tensor2& x, Mode mode) {
        active_ = mode == Mode::train && rate_ > 0.0;
        if (!active_) return x;
        if (!frozen_ || !mask_.same_shape(x)) {
            mask_ = Tensor2(x.rows(), x.cols());
            const double keep_scale = 1.0 / (1.0 - rate_);
            for (auto& m : mask_.data()) m = rng_.uniform() < rate_ ? 0.0 : keep_scale;
        }
        Tensor2 y = x;
        for (std::size_t k = 0; k < y.size(); ++k) y.data()[k] *= mask_.data()[k];
        return y;
    }

    Tensor2 backward(const Tensor2& g) const {
        if (!active_) return g;
        Tensor2 d = g;
        for (std::size_t k = 0; k < d.size(); ++k) d.data()[k] *= mask_.data()[k];
        return d;
    }

    const Tensor2& mask() const { return mask_; }

private:
    double rate_ = 0.0;
    Rng rng_;
    Tensor2 mask_;
    bool active_ = false;
    bool frozen_ = false;
};

// Row gather from a [(n+1) x d] table; row 0 is the out-of-vocabulary row.
class Embedding {
public:
    Embedding() = default;
    Embedding(std::size_t rows, std::size_t dims, Rng& rng, const std::string& name)
        : table_(name + ".E", Tensor2(rows, dims)) {
        for (auto& w : table_.value.data()) w = rng.uniform(-0.05, 0.05);
    }
    explicit Embedding(Param table) : table_(std::move(table)) {}

    std::size_t rows() const { return table_.value.rows(); }
    std::size_t dims() const { return table_.value.cols(); }

    Tensor2 forward(std::span<const std::size_t> idx) {
        for (auto i : idx) {
            if (i >= rows()) {
                throw SchemaError("embedding " + table_.name + ": index " + std::to_string(i) + " out of range (" +
                                  std::to_string(rows()) + " rows)");
            }
        }
        indices_.assign(idx.begin(), idx.end());
        return table_.value.gather_rows(idx);
    }

    // Accumulates into the gathered rows only.
    void backward(const Tensor2& g) {
        for (std::size_t r = 0; r < indices_.size(); ++r) {
            auto dst = table_.grad.row(indices_[r]);
            const auto src = g.row(r);
            for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
        }
    }

    std::vector<Param*> params() { return {&table_}; }
    const Param& table() const { return table_; }
    Param& table() { return table_; }

private:
    Param table_;
    std::vector<std::size_t> indices_;
};

using Layer = std::variant<Dense, Relu, Sigmoid, Dropout>;

inline const char* layer_kind(const Layer& l) {
    return std::visit(
        [](const auto& x) -> const char* {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, Dense>) return "dense";
            else if constexpr (std::is_same_v<T, Relu>) return "relu";
            else if constexpr (std::is_same_v<T, Sigmoid>) return "sigmoid";
            else return "dropout";
        },
        l);
}

// Ordered stack of layers. Keeps every intermediate output of the last
// forward pass so callers can regularize hidden activations.
class Sequential {
public:
    Sequential() = default;
    explicit Sequential(std::vector<Layer> layers) : layers_(std::move(layers)) {}

    void add(Layer l) { layers_.push_back(std::move(l)); }
    std::vector<Layer>& layers() { return layers_; }
    const std::vector<Layer>& layers() const { return layers_; }

    Tensor2 forward(const Tensor2& x, Mode mode) {
        outputs_.clear();
        Tensor2 h = x;
        for (auto& l : layers_) {
            h = std::visit([&](auto& layer) { return layer.forward(h, mode); }, l);
            h.check_finite(layer_kind(l));
            outputs_.push_back(h);
        }
        return h;
    }

    // Output of layer i from the last forward pass.
    const Tensor2& output(std::size_t i) const { return outputs_.at(i); }

    // Backpropagates g through all layers. `extra` adds a gradient arriving
    // directly at the output of layer extra->first.
    Tensor2 backward(const Tensor2& g, const std::optional<std::pair<std::size_t, Tensor2>>& extra = std::nullopt) {
        Tensor2 d = g;
        for (std::size_t i = layers_.size(); i-- > 0;) {
            if (extra && extra->first == i) {
                require_same_shape(d, extra->second, "injected gradient");
                for (std::size_t k = 0; k < d.size(); ++k) d.data()[k] += extra->second.data()[k];
            }
            d = std::visit([&](auto& layer) { return layer.backward(d); }, layers_[i]);
        }
        return d;
    }

    std::vector<Param*> params() {
        std::vector<Param*> out;
        for (auto& l : layers_) {
            if (auto* d = std::get_if<Dense>(&l)) {
                for (auto* p : d->params()) out.push_back(p);
            }
        }
        return out;
    }

    std::vector<Dropout*> dropouts() {
        std::vector<Dropout*> out;
        for (auto& l : layers_) {
            if (auto* d = std::get_if<Dropout>(&l)) out.push_back(d);
        }
        return out;
    }

    void signature(std::uint64_t& h) const {
        for (const auto& l : layers_) {
            if (const auto* r = std::get_if<Relu>(&l)) r->signature(h);
        }
    }

private:
    std::vector<Layer> layers_;
    std::vector<Tensor2> outputs_;
};

// ---------------------------------------------------------------------------
// Losses and penalties

struct LossResult {
    double loss = 0.0;
    Tensor2 grad;
};

inline constexpr double probability_clamp = 1e-12;

// Mean binary cross-entropy over p[n x 1]. Probabilities are clamped to
// [1e-12, 1-1e-12] before taking logs; the gradient is taken at the clamped
// value: (p - y) / (p (1 - p)) / N.
inline LossResult bce_loss(const Tensor2& p, std::span<const double> y) {
    if (p.cols() != 1 || p.rows() != y.size()) throw ShapeError("bce_loss: expected n x 1 probabilities and n labels");
    LossResult r;
    r.grad = Tensor2(p.rows(), 1);
    const std::size_t n = p.rows();
    if (n == 0) return r;
    const double inv_n = 1.0 / static_cast<double>(n);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double pc = std::clamp(p(i, 0), probability_clamp, 1.0 - probability_clamp);
        sum += y[i] * std::log(pc) + (1.0 - y[i]) * std::log(1.0 - pc);
        r.grad(i, 0) = inv_n * (pc - y[i]) / (pc * (1.0 - pc));
    }
    r.loss = -sum * inv_n;
    return r;
}

// Squared Frobenius norm ||x - x_hat||^2; gradient with respect to x_hat.
inline LossResult sq_error_loss(const Tensor2& x, const Tensor2& x_hat) {
    require_same_shape(x, x_hat, "sq_error_loss");
    LossResult r;
    r.grad = Tensor2(x.rows(), x.cols());
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double d = x_hat.data()[k] - x.data()[k];
        r.loss += d * d;
        r.grad.data()[k] = 2.0 * d;
    }
    return r;
}

// lambda * sum |a|, subgradient lambda * sign(a) with sign(0) = 0.
inline LossResult l1_penalty(const Tensor2& a, double lambda) {
    if (lambda < 0.0) throw ConfigError("l1 lambda must be non-negative");
    LossResult r;
    r.grad = Tensor2(a.rows(), a.cols());
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double v = a.data()[k];
        s += std::abs(v);
        r.grad.data()[k] = v > 0.0 ? lambda : (v < 0.0 ? -lambda : 0.0);
    }
    r.loss = lambda * s;
    return r;
}

// ---------------------------------------------------------------------------
// RMSProp

struct RmsPropConfig {
    double learning_rate = 0.001;
    double rho = 0.9;
    double epsilon = 1e-8;
};

// Squared-gradient running averages, one per parameter block, allocated on
// the first step.
struct OptimizerState {
    RmsPropConfig config;
    std::vector<Tensor2> mean_square;
    std::vector<std::size_t> steps;
};

// v <- rho v + (1-rho) g^2 ;  theta <- theta - lr g / (sqrt(v) + eps)
inline void rmsprop_step(OptimizerState& state, std::span<Param* const> params) {
    if (state.mean_square.empty()) {
        for (const auto* p : params) state.mean_square.emplace_back(p->value.rows(), p->value.cols());
        state.steps.assign(params.size(), 0);
    }
    if (state.mean_square.size() != params.size()) throw ShapeError("rmsprop: parameter block count changed");
    const auto& c = state.config;
    for (std::size_t b = 0; b < params.size(); ++b) {
        auto& p = *params[b];
        auto& v = state.mean_square[b];
        require_same_shape(p.value, v, "rmsprop state");
        require_same_shape(p.value, p.grad, "rmsprop gradient");
        auto& th = p.value.data();
        const auto& g = p.grad.data();
        auto& ms = v.data();
        for (std::size_t k = 0; k < th.size(); ++k) {
            ms[k] = c.rho * ms[k] + (1.0 - c.rho) * g[k] * g[k];
            th[k] -= c.learning_rate * g[k] / (std::sqrt(ms[k]) + c.epsilon);
        }
        ++state.steps[b];
    }
}

// ---------------------------------------------------------------------------
// Finite-difference gradient check

// A scalar function of a set of parameter blocks, with its analytic gradient.
struct GradCheckTarget {
    std::vector<Param*> params;
    // Loss at the current parameter values. Must not modify parameters.
    std::function<double()> loss;
    // Fills every Param::grad with the analytic gradient at the current values.
    std::function<void()> gradients;
    // Pattern of non-differentiable branches (ReLU/L1 signs) taken by the
    // last loss() evaluation. Optional.
    std::function<std::uint64_t()> signature;
};

struct GradCheckOptions {
    double h = 1e-5;
    // Entries checked per block; 0 checks every entry.
    std::size_t max_per_block = 0;
    std::uint64_t seed = 7;
    // Test hook: multiplies every analytic gradient by (1 + corrupt).
    double corrupt = 0.0;
};

struct GradCheckReport {
    double max_relative_error = 0.0;
    std::string worst;
    std::size_t checked = 0;
    // Entries whose +-h perturbation crossed a kink and were not compared.
    std::size_t skipped = 0;
};

// Compares analytic gradients with central differences
// (L(t+h) - L(t-h)) / 2h; relative error |a-f| / max(|a|, |f|, 1e-8).
inline GradCheckReport grad_check(const GradCheckTarget& t, const GradCheckOptions& opt = {}) {
    GradCheckReport rep;
    t.gradients();
    std::vector<Tensor2> analytic;
    for (const auto* p : t.params) analytic.push_back(p->grad);
    t.loss();
    const std::uint64_t base_sig = t.signature ? t.signature() : 0;

    Rng rng(opt.seed);
    for (std::size_t b = 0; b < t.params.size(); ++b) {
        auto& p = *t.params[b];
        std::vector<std::size_t> idx(p.value.size());
        for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = k;
        if (opt.max_per_block && idx.size() > opt.max_per_block) {
            rng.shuffle(idx);
            idx.resize(opt.max_per_block);
            std::sort(idx.begin(), idx.end());
        }
        for (auto k : idx) {
            double& theta = p.value.data()[k];
            const double saved = theta;
            theta = saved + opt.h;
            const double lp = t.loss();
            const std::uint64_t sp = t.signature ? t.signature() : 0;
            theta = saved - opt.h;
            const double lm = t.loss();
            const std::uint64_t sm = t.signature ? t.signature() : 0;
            theta = saved;
            if (sp != base_sig || sm != base_sig) {
                ++rep.skipped;
                continue;
            }
            const double f = (lp - lm) / (2.0 * opt.h);
            const double a = analytic[b].data()[k] * (1.0 + opt.corrupt);
            const double rel = std::abs(a - f) / std::max({std::abs(a), std::abs(f), 1e-8});
            ++rep.checked;
            if (rep.worst.empty() || rel > rep.max_relative_error) {
                rep.max_relative_error = rel;
                rep.worst = p.name + "[" + std::to_string(k) + "]";
            }
        }
    }
    t.loss();
    return rep;
}

}  // namespace nids
