#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "helpers.hpp"
#include "nids/gradcheck.hpp"
#include "nids/nn.hpp"

using namespace nids;

TEST(Tensor, ShapesAndErrors) {
    EXPECT_THROW(Tensor2(2, 2, std::vector<double>{1, 2, 3}), ShapeError);
    EXPECT_THROW(matmul(Tensor2(2, 3), Tensor2(2, 3)), ShapeError);
    Tensor2 t{{1, 2}, {3, 4}};
    EXPECT_EQ(t(1, 0), 3.0);
    t(0, 1) = std::numeric_limits<double>::infinity();
    EXPECT_THROW(t.check_finite("t"), NumericError);
    const Tensor2 a{{1, 2, 3}, {4, 5, 6}};
    const Tensor2 b{{1, 0}, {0, 1}, {1, 1}};
    EXPECT_EQ(matmul(a, b), (Tensor2{{4, 5}, {10, 11}}));
    EXPECT_EQ(matmul_tn(a, a), matmul(Tensor2{{1, 4}, {2, 5}, {3, 6}}, a));
    EXPECT_EQ(matmul_nt(a, a), (Tensor2{{14, 32}, {32, 77}}));
    std::vector<Tensor2> blocks{Tensor2{{1}, {2}}, Tensor2{{3, 4}, {5, 6}}};
    const auto h = hconcat(blocks);
    EXPECT_EQ(h, (Tensor2{{1, 3, 4}, {2, 5, 6}}));
    const std::vector<std::size_t> widths{1, 2};
    EXPECT_EQ(hsplit(h, widths)[1], blocks[1]);
}

TEST(Dense, Examples) {
    Dense id(Param("W", Tensor2{{1, 0}, {0, 1}}), Param("b", Tensor2{{0, 0}}));
    const Tensor2 x{{0.3, -7}, {2, 5}};
    EXPECT_EQ(id.forward(x, Mode::infer), x);

    Dense d(Param("W", Tensor2{{1}, {1}}), Param("b", Tensor2{{0.5}}));
    EXPECT_EQ(d.forward(Tensor2{{1, 2}}, Mode::infer), (Tensor2{{3.5}}));

    const auto empty = d.forward(Tensor2(0, 2), Mode::infer);
    EXPECT_EQ(empty.rows(), 0u);
    EXPECT_EQ(empty.cols(), 1u);
    EXPECT_THROW(d.forward(Tensor2(1, 3), Mode::infer), ShapeError);
    EXPECT_THROW(Dense(Param("W", Tensor2(2, 3)), Param("b", Tensor2(1, 2))), ShapeError);
}

TEST(Dense, InitIsSymmetricFanInScaled) {
    Rng rng(1);
    Dense d(50, 40, rng, "d");
    const double limit = std::sqrt(6.0 / 50.0);
    double sum = 0;
    for (double w : d.weight().value.data()) {
        ASSERT_LE(std::abs(w), limit);
        sum += w;
    }
    EXPECT_LT(std::abs(sum / 2000.0), 0.05);
    for (double b : d.bias().value.data()) EXPECT_EQ(b, 0.0);
}

TEST(Activations, Examples) {
    EXPECT_EQ(relu(-1.0), 0.0);
    EXPECT_EQ(relu(2.0), 2.0);
    EXPECT_EQ(sigmoid(0.0), 0.5);
    const double s = sigmoid(36.7);
    EXPECT_LT(s, 1.0);
    EXPECT_GT(s, 1.0 - 2e-16);
    EXPECT_GT(sigmoid(-800.0), 0.0 - 1e-300);
    EXPECT_EQ(sigmoid(-800.0) >= 0.0, true);
    Relu r;
    EXPECT_EQ(r.forward(Tensor2{{-1, 2}}, Mode::infer), (Tensor2{{0, 2}}));
}

TEST(SigmoidProperty, MatchesReferenceAndSymmetry) {
    Rng rng(3);
    for (int i = 0; i < 10000; ++i) {
        const double z = rng.uniform(-30, 30);
        ASSERT_NEAR(sigmoid(z), 1.0 / (1.0 + std::exp(-z)), 1e-15);
        ASSERT_NEAR(sigmoid(z) + sigmoid(-z), 1.0, 1e-15);
    }
}

TEST(Embedding, RepeatedIndexAccumulates) {
    Embedding e(Param("E", Tensor2{{1, 2}, {3, 4}, {5, 6}}));
    const std::vector<std::size_t> idx{0, 2, 0};
    EXPECT_EQ(e.forward(idx), (Tensor2{{1, 2}, {5, 6}, {1, 2}}));
    e.table().zero_grad();
    e.backward(Tensor2{{1, 10}, {7, 7}, {100, 1000}});
    EXPECT_EQ(e.table().grad, (Tensor2{{101, 1010}, {0, 0}, {7, 7}}));
}

TEST(Embedding, OneHotUpstreamSelectsRow) {
    Embedding e(Param("E", Tensor2{{1, 2}, {3, 4}, {5, 6}}));
    const std::vector<std::size_t> idx{1};
    const auto y = e.forward(idx);
    EXPECT_EQ(y, (Tensor2{{3, 4}}));
    e.table().zero_grad();
    e.backward(Tensor2{{1, 0}});
    EXPECT_EQ(e.table().grad, (Tensor2{{0, 0}, {1, 0}, {0, 0}}));
}

TEST(Embedding, InitBoundsAndRange) {
    Rng rng(5);
    Embedding e(1001, 8, rng, "e");
    for (double w : e.table().value.data()) {
        ASSERT_GE(w, -0.05);
        ASSERT_LE(w, 0.05);
    }
    const std::vector<std::size_t> bad{1001};
    EXPECT_THROW(e.forward(bad), SchemaError);
}

TEST(Dropout, InferAndZeroRateAreIdentity) {
    Rng rng(2);
    Tensor2 x(30, 7);
    for (auto& v : x.data()) v = rng.uniform(-3, 3);
    Dropout d(0.4, 1);
    EXPECT_EQ(d.forward(x, Mode::infer), x);
    Dropout z(0.0, 1);
    EXPECT_EQ(z.forward(x, Mode::train), x);
    EXPECT_EQ(z.forward(x, Mode::infer), x);
    EXPECT_THROW(Dropout(1.0), ConfigError);
    EXPECT_THROW(Dropout(-0.1), ConfigError);
}

TEST(Dropout, KeptFractionAtMillionUnits) {
    Dropout d(0.4, 12345);
    const Tensor2 x(1000, 1000, 1.0);
    const auto y = d.forward(x, Mode::train);
    std::size_t kept = 0;
    for (double v : y.data()) {
        if (v != 0.0) {
            ++kept;
            ASSERT_DOUBLE_EQ(v, 1.0 / 0.6);
        }
    }
    const double frac = static_cast<double>(kept) / 1e6;
    EXPECT_NEAR(frac, 0.6, 0.002);
}

TEST(Dropout, DeterministicInSeed) {
    const Tensor2 x(20, 20, 1.0);
    Dropout a(0.4, 9), b(0.4, 9), c(0.4, 10);
    const auto ya = a.forward(x, Mode::train);
    EXPECT_EQ(ya, b.forward(x, Mode::train));
    EXPECT_NE(ya, c.forward(x, Mode::train));
}

TEST(Bce, Examples) {
    EXPECT_LT(bce_loss(Tensor2{{1.0 - 1e-15}}, std::vector<double>{1.0}).loss, 1e-11);
    const auto r = bce_loss(Tensor2{{0.5}, {0.5}}, std::vector<double>{1, 0});
    EXPECT_NEAR(r.loss, 0.693147, 1e-6);
    EXPECT_DOUBLE_EQ(r.loss, std::log(2.0));
    const auto g = bce_loss(Tensor2{{0.5}}, std::vector<double>{1});
    EXPECT_DOUBLE_EQ(g.grad(0, 0), -2.0);
    // exact 0 and 1 are clamped, not infinite
    const auto c = bce_loss(Tensor2{{0.0}, {1.0}}, std::vector<double>{1, 0});
    EXPECT_TRUE(std::isfinite(c.loss));
    // 1 - 1e-12 is not exact in binary, so the y=0 term uses the rounded clamp
    EXPECT_NEAR(c.loss, (-std::log(1e-12) - std::log(1.0 - (1.0 - 1e-12))) / 2.0, 1e-12);
}

TEST(BceProperty, NonNegativeZeroOnlyAtMatch) {
    Rng rng(8);
    for (int i = 0; i < 10000; ++i) {
        const std::size_t n = 1 + rng.below(6);
        Tensor2 p(n, 1);
        std::vector<double> y(n);
        for (std::size_t k = 0; k < n; ++k) {
            p(k, 0) = rng.uniform();
            y[k] = rng.bernoulli(0.5) ? 1.0 : 0.0;
        }
        ASSERT_GE(bce_loss(p, y).loss, 0.0);
        Tensor2 exact(n, 1);
        for (std::size_t k = 0; k < n; ++k) exact(k, 0) = y[k];
        ASSERT_LT(bce_loss(exact, y).loss, 1e-11);
    }
}

TEST(SqError, Examples) {
    const Tensor2 x{{1, 0}}, xh{{0, 1}};
    EXPECT_EQ(sq_error_loss(x, x).loss, 0.0);
    const auto r = sq_error_loss(x, xh);
    EXPECT_EQ(r.loss, 2.0);
    EXPECT_EQ(r.grad, (Tensor2{{-2, 2}}));
    EXPECT_THROW(sq_error_loss(x, Tensor2(1, 3)), ShapeError);
}

TEST(SqErrorProperty, NonNegativeSymmetric) {
    Rng rng(4);
    for (int i = 0; i < 10000; ++i) {
        const std::size_t r = 1 + rng.below(4), c = 1 + rng.below(4);
        Tensor2 a(r, c), b(r, c);
        for (auto& v : a.data()) v = rng.uniform(-5, 5);
        for (auto& v : b.data()) v = rng.uniform(-5, 5);
        const double ab = sq_error_loss(a, b).loss;
        ASSERT_GE(ab, 0.0);
        ASSERT_EQ(ab, sq_error_loss(b, a).loss);
    }
}

TEST(L1, Examples) {
    const Tensor2 a{{1, -2}};
    EXPECT_EQ(l1_penalty(a, 0.0).loss, 0.0);
    const auto r = l1_penalty(a, 0.1);
    EXPECT_NEAR(r.loss, 0.3, 1e-15);
    EXPECT_EQ(r.grad, (Tensor2{{0.1, -0.1}}));
    EXPECT_EQ(l1_penalty(Tensor2{{0.0}}, 0.1).grad(0, 0), 0.0);
    EXPECT_THROW(l1_penalty(a, -1.0), ConfigError);
}

TEST(RmsProp, FirstStepValue) {
    Param p("p", Tensor2{{0.0}});
    p.grad(0, 0) = 1.0;
    OptimizerState s{{0.001, 0.9, 1e-8}, {}, {}};
    std::vector<Param*> ps{&p};
    rmsprop_step(s, ps);
    const double expected = -0.001 * 1.0 / (std::sqrt(0.1) + 1e-8);
    EXPECT_DOUBLE_EQ(p.value(0, 0), expected);
    EXPECT_NEAR(p.value(0, 0), -0.0031623, 1e-7);
    EXPECT_DOUBLE_EQ(s.mean_square[0](0, 0), 0.1);
}

TEST(RmsProp, ZeroGradientLeavesParams) {
    Param p("p", Tensor2{{1.5, -2}});
    OptimizerState s;
    std::vector<Param*> ps{&p};
    for (int i = 0; i < 5; ++i) rmsprop_step(s, ps);
    EXPECT_EQ(p.value, (Tensor2{{1.5, -2}}));
}

TEST(RmsProp, BlocksUpdateIndependently) {
    Param a("a", Tensor2{{1.0}}), b("b", Tensor2{{1.0}});
    a.grad(0, 0) = 1.0;
    b.grad(0, 0) = 0.0;
    OptimizerState s;
    std::vector<Param*> ps{&a, &b};
    rmsprop_step(s, ps);
    EXPECT_LT(a.value(0, 0), 1.0);
    EXPECT_EQ(b.value(0, 0), 1.0);
    EXPECT_EQ(s.steps, (std::vector<std::size_t>{1, 1}));
    Param c("c", Tensor2{{1.0}});
    std::vector<Param*> three{&a, &b, &c};
    EXPECT_THROW(rmsprop_step(s, three), ShapeError);
}

TEST(RmsPropProperty, UnchangedIffZeroGradient) {
    Rng rng(6);
    for (int i = 0; i < 10000; ++i) {
        Param p("p", Tensor2(1, 3));
        for (auto& v : p.value.data()) v = rng.uniform(-1, 1);
        const bool zero = rng.bernoulli(0.3);
        for (auto& g : p.grad.data()) g = zero ? 0.0 : (rng.bernoulli(0.5) ? 1.0 : -1.0) * rng.uniform(1e-3, 1.0);
        const Tensor2 before = p.value;
        OptimizerState s;
        std::vector<Param*> ps{&p};
        rmsprop_step(s, ps);
        ASSERT_EQ(p.value == before, zero);
        for (double v : s.mean_square[0].data()) ASSERT_GE(v, 0.0);
    }
}

TEST(GradCheck, SigmoidBceNeuronTight) {
    const auto r = gradcheck::run("bce");
    EXPECT_LT(r.max_relative_error, 1e-6);
    EXPECT_GT(r.checked, 0u);
}

TEST(GradCheck, EveryKindWithinTolerance) {
    for (const auto& k : gradcheck::kinds()) {
        const auto r = gradcheck::run(k);
        EXPECT_LE(r.max_relative_error, gradcheck::tolerance) << k << " worst " << r.worst;
        EXPECT_GT(r.checked, 0u) << k;
    }
}

TEST(GradCheck, CorruptedGradientDetected) {
    GradCheckOptions o;
    o.corrupt = 0.01;
    for (const char* k : {"dense", "dnn", "autoencoder"}) {
        EXPECT_GT(gradcheck::run(k, o).max_relative_error, gradcheck::tolerance) << k;
    }
    EXPECT_THROW(gradcheck::run("lstm"), ConfigError);
}

TEST(GradCheck, RelativeErrorDefinition) {
    // f(w) = w^2 at w = 3 with an analytic gradient deliberately off by one
    Param w("w", Tensor2{{3.0}});
    GradCheckTarget t;
    t.params = {&w};
    t.loss = [&] { return w.value(0, 0) * w.value(0, 0); };
    t.gradients = [&] { w.grad(0, 0) = 2.0 * w.value(0, 0) + 1.0; };
    const auto r = grad_check(t);
    EXPECT_NEAR(r.max_relative_error, 1.0 / 7.0, 1e-8);
    EXPECT_EQ(w.value(0, 0), 3.0);
}
