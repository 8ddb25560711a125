#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "nids/error.hpp"
#include "nids/models.hpp"
#include "nids/nn.hpp"
#include "nids/preprocess.hpp"
#include "nids/rng.hpp"
#include "nids/split.hpp"
#include "nids/synthetic.hpp"

// Small fixed networks used to verify analytic gradients against central
// differences, one per layer kind plus the two assembled models.
namespace nids::gradcheck {

inline constexpr double tolerance = 1e-4;

inline const std::vector<std::string>& kinds() {
    static const std::vector<std::string> k{"dense", "relu",  "sigmoid", "dropout", "embedding", "concat",
                                            "bce",   "l1",    "tied",    "dnn",     "autoencoder"};
    return k;
}

namespace detail {

inline Tensor2 random_tensor(std::size_t r, std::size_t c, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor2 t(r, c);
    for (auto& v : t.data()) v = rng.uniform(lo, hi);
    return t;
}

// Dense(in, hidden) -> middle -> Dense(hidden, out), squared error / n.
template <class Middle>
GradCheckReport sandwich(Middle middle, Mode mode, const GradCheckOptions& opt) {
    Rng rng(11);
    const Tensor2 x = random_tensor(8, 4, rng);
    const Tensor2 y = random_tensor(8, 2, rng, 0.0, 1.0);
    Sequential net;
    net.add(Dense(4, 6, rng, "d0"));
    net.add(std::move(middle));
    net.add(Dense(6, 2, rng, "d1"));
    for (auto* d : net.dropouts()) {
        d->reseed(3);
        net.forward(x, mode);  // draw one mask, then keep it
        d->freeze(true);
    }
    auto params = net.params();
    GradCheckTarget t;
    t.params = params;
    t.loss = [&] { return sq_error_loss(y, net.forward(x, mode)).loss / 8.0; };
    t.gradients = [&] {
        for (auto* p : params) p->zero_grad();
        auto r = sq_error_loss(y, net.forward(x, mode));
        for (auto& v : r.grad.data()) v /= 8.0;
        net.backward(r.grad);
    };
    t.signature = [&] {
        std::uint64_t h = 0;
        net.signature(h);
        return h;
    };
    return grad_check(t, opt);
}

inline GradCheckReport check_dense(const GradCheckOptions& opt) {
    Rng rng(5);
    const Tensor2 x = random_tensor(8, 3, rng);
    const Tensor2 y = random_tensor(8, 4, rng);
    Dense d(3, 4, rng, "dense");
    auto params = d.params();
    GradCheckTarget t;
    t.params = params;
    t.loss = [&] { return sq_error_loss(y, d.forward(x, Mode::infer)).loss; };
    t.gradients = [&] {
        for (auto* p : params) p->zero_grad();
        d.backward(sq_error_loss(y, d.forward(x, Mode::infer)).grad);
    };
    return grad_check(t, opt);
}

inline GradCheckReport check_embedding(const GradCheckOptions& opt) {
    Rng rng(6);
    Embedding e(6, 3, rng, "embed");
    Dense d(3, 2, rng, "dense");
    const std::vector<std::size_t> idx{0, 3, 3, 5, 1, 0, 2, 3};
    const Tensor2 y = random_tensor(8, 2, rng);
    std::vector<Param*> params{&e.table(), &d.weight(), &d.bias()};
    GradCheckTarget t;
    t.params = params;
    t.loss = [&] { return sq_error_loss(y, d.forward(e.forward(idx), Mode::infer)).loss; };
    t.gradients = [&] {
        for (auto* p : params) p->zero_grad();
        auto r = sq_error_loss(y, d.forward(e.forward(idx), Mode::infer));
        e.backward(d.backward(r.grad));
    };
    return grad_check(t, opt);
}

// Two embeddings concatenated with continuous inputs, dense, sigmoid, BCE.
inline GradCheckReport check_concat(const GradCheckOptions& opt) {
    Rng rng(8);
    Embedding e1(5, 2, rng, "e1"), e2(4, 3, rng, "e2");
    const std::vector<std::size_t> i1{1, 2, 0, 4, 4, 3, 1, 2}, i2{0, 1, 2, 3, 3, 2, 1, 0};
    const Tensor2 cont = random_tensor(8, 3, rng, 0.0, 1.0);
    const std::vector<double> y{1, 0, 0, 1, 1, 0, 1, 0};
    Dense d(8, 1, rng, "dense");
    Sigmoid s;
    std::vector<Param*> params{&e1.table(), &e2.table(), &d.weight(), &d.bias()};
    auto fwd = [&] {
        const std::array<Tensor2, 3> blocks{e1.forward(i1), e2.forward(i2), cont};
        return s.forward(d.forward(hconcat(blocks), Mode::infer), Mode::infer);
    };
    GradCheckTarget t;
    t.params = params;
    t.loss = [&] { return bce_loss(fwd(), y).loss; };
    t.gradients = [&] {
        for (auto* p : params) p->zero_grad();
        auto r = bce_loss(fwd(), y);
        const std::array<std::size_t, 3> widths{2, 3, 3};
        auto parts = hsplit(d.backward(s.backward(r.grad)), widths);
        e1.backward(parts[0]);
        e2.backward(parts[1]);
    };
    return grad_check(t, opt);
}

// One sigmoid neuron with BCE.
inline GradCheckReport check_bce(const GradCheckOptions& opt) {
    Rng rng(9);
    const Tensor2 x = random_tensor(8, 2, rng);
    const std::vector<double> y{1, 0, 1, 1, 0, 0, 1, 0};
    Dense d(2, 1, rng, "neuron");
    Sigmoid s;
    auto params = d.params();
    GradCheckTarget t;
    t.params = params;
    t.loss = [&] { return bce_loss(s.forward(d.forward(x, Mode::infer), Mode::infer), y).loss; };
    t.gradients = [&] {
        for (auto* p : params) p->zero_grad();
        auto r = bce_loss(s.forward(d.forward(x, Mode::infer), Mode::infer), y);
        d.backward(s.backward(r.grad));
    };
    return grad_check(t, opt);
}

// Dense layer with an L1 penalty on its outputs plus squared error.
inline GradCheckReport check_l1(const GradCheckOptions& opt) {
    Rng rng(10);
    const Tensor2 x = random_tensor(8, 3, rng);
    const Tensor2 y = random_tensor(8, 4, rng);
    Dense d(3, 4, rng, "dense");
    const double lambda = 0.05;
    auto params = d.params();
    GradCheckTarget t;
    t.params = params;
    t.loss = [&] {
        const Tensor2 a = d.forward(x, Mode::infer);
        return sq_error_loss(y, a).loss + l1_penalty(a, lambda).loss;
    };
    t.gradients = [&] {
        for (auto* p : params) p->zero_grad();
        const Tensor2 a = d.forward(x, Mode::infer);
        auto se = sq_error_loss(y, a);
        auto l1 = l1_penalty(a, lambda);
        for (std::size_t k = 0; k < se.grad.size(); ++k) se.grad.data()[k] += l1.grad.data()[k];
        d.backward(se.grad);
    };
    t.signature = [&] {
        std::uint64_t h = 0;
        for (double v : d.forward(x, Mode::infer).data()) mix_hash(h, v > 0.0 ? 1 : (v < 0.0 ? 2 : 0));
        return h;
    };
    return grad_check(t, opt);
}

// Tied-weight single-hidden-layer autoencoder:
// J = ||X - sigmoid(sigmoid(X W) W^T)||_F^2
inline GradCheckReport check_tied(const GradCheckOptions& opt) {
    Rng rng(12);
    const Tensor2 x = random_tensor(8, 5, rng, 0.0, 1.0);
    Param w("tied.W", random_tensor(5, 3, rng, -0.5, 0.5));
    auto forward = [&](Tensor2& h, Tensor2& xh) {
        h = matmul(x, w.value);
        for (auto& v : h.data()) v = sigmoid(v);
        xh = matmul_nt(h, w.value);
        for (auto& v : xh.data()) v = sigmoid(v);
    };
    GradCheckTarget t;
    t.params = {&w};
    t.loss = [&] {
        Tensor2 h, xh;
        forward(h, xh);
        return sq_error_loss(x, xh).loss;
    };
    t.gradients = [&] {
        Tensor2 h, xh;
        forward(h, xh);
        Tensor2 g = sq_error_loss(x, xh).grad;                                        // dJ/dxh
        for (std::size_t k = 0; k < g.size(); ++k) g.data()[k] *= xh.data()[k] * (1.0 - xh.data()[k]);  // dJ/dz2
        // z2 = h W^T: contributes g^T h to dW, and g W to dh
        Tensor2 dw = matmul_tn(g, h);
        Tensor2 dh = matmul(g, w.value);
        for (std::size_t k = 0; k < dh.size(); ++k) dh.data()[k] *= h.data()[k] * (1.0 - h.data()[k]);
        // z1 = X W: contributes X^T dz1
        const Tensor2 dw1 = matmul_tn(x, dh);
        w.grad = dw;
        for (std::size_t k = 0; k < dw1.size(); ++k) w.grad.data()[k] += dw1.data()[k];
    };
    return grad_check(t, opt);
}

inline LabeledDataset tiny_dataset() {
    SyntheticConfig c;
    c.n_flows = 40;
    c.malicious_fraction = 0.25;
    c.seed = 21;
    c.separation = 1.0;
    c.src_ips = 10;
    c.dst_ips = 6;
    c.src_ports = 12;
    c.dst_ports = 5;
    c.attacker_ips = 3;
    return generate_synthetic(c);
}

inline std::vector<std::size_t> first_rows(std::size_t n) {
    std::vector<std::size_t> r(n);
    for (std::size_t i = 0; i < n; ++i) r[i] = i;
    return r;
}

inline GradCheckReport check_dnn(const GradCheckOptions& opt) {
    const auto data = tiny_dataset();
    EncodeOptions eo;
    const auto schema = fit_schema(data, eo);
    const auto rows = first_rows(8);
    const EncodedBatch batch = encode_dataset(data, schema, CategoricalMode::index).select(rows);
    DnnModel m = build_dnn(schema, eo, 3);
    GradCheckTarget t;
    t.params = m.params();
    t.loss = [&] { return m.loss(batch, Mode::infer, false); };
    t.gradients = [&] { m.loss(batch, Mode::infer, true); };
    t.signature = [&] { return m.signature(); };
    return grad_check(t, opt);
}

inline GradCheckReport check_autoencoder(const GradCheckOptions& opt) {
    const auto data = filter_label(tiny_dataset(), Label::Benign);
    EncodeOptions eo;
    eo.ip_mode = IpMode::drop;
    eo.categorical_mode = CategoricalMode::onehot;
    eo.categorical_features = {"Protocol"};
    const auto schema = fit_schema(data, eo);
    const auto rows = first_rows(8);
    const Tensor2 x = encode_dataset(data, schema, CategoricalMode::onehot).select(rows).dense;
    AutoencoderArchitecture arch;
    arch.l1_lambda = 1e-2;  // large enough to matter in the check
    AutoencoderModel m = build_autoencoder(schema, eo, 4, arch);
    GradCheckTarget t;
    t.params = m.params();
    t.loss = [&] { return m.loss(x, false); };
    t.gradients = [&] { m.loss(x, true); };
    t.signature = [&] {
        std::uint64_t h = m.signature();
        for (double v : m.stack.output(m.l1_layer).data()) mix_hash(h, v > 0.0 ? 1 : (v < 0.0 ? 2 : 0));
        return h;
    };
    return grad_check(t, opt);
}

}  // namespace detail

// Runs the named check. Unknown kinds raise ConfigError.
inline GradCheckReport run(std::string_view kind, const GradCheckOptions& opt = {}) {
    using namespace detail;
    if (kind == "dense") return check_dense(opt);
    if (kind == "relu") return sandwich(Relu{}, Mode::infer, opt);
    if (kind == "sigmoid") return sandwich(Sigmoid{}, Mode::infer, opt);
    if (kind == "dropout") return sandwich(Dropout(0.4), Mode::train, opt);
    if (kind == "embedding") return check_embedding(opt);
    if (kind == "concat") return check_concat(opt);
    if (kind == "bce") return check_bce(opt);
    if (kind == "l1") return check_l1(opt);
    if (kind == "tied") return check_tied(opt);
    if (kind == "dnn") return check_dnn(opt);
    if (kind == "autoencoder") return check_autoencoder(opt);
    throw ConfigError("unknown gradcheck kind '" + std::string(kind) + "'");
}

}  // namespace nids::gradcheck
