#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "zsretinex/optimizer.hpp"

using namespace zsretinex;

namespace {

Tensor scalar_param(double w) {
    Tensor t = Tensor::scalar(w);
    t.set_requires_grad(true);
    return t;
}

// Runs `steps` Adam updates on f(w) = (w - a)^2.
double minimize_quadratic(double w0, double a, int steps, const AdamConfig& cfg) {
    Tensor w = scalar_param(w0);
    AdamState state = adam_init({&w}, cfg);
    for (int s = 0; s < steps; ++s) {
        w.set_grad({2.0 * (w[0] - a)});
        adam_step({&w}, state);
    }
    return w[0];
}

}  // namespace

TEST(AdamInit, ZeroMomentsAndValidation) {
    NetConfig cfg;
    cfg.width = 4;
    const NetParams params = init_params(cfg);
    const AdamState s = adam_init(params);
    EXPECT_EQ(s.t, 0);
    ASSERT_EQ(s.m.size(), params.tensors().size());
    for (std::size_t k = 0; k < s.m.size(); ++k) {
        EXPECT_EQ(s.m[k].shape(), params.tensors()[k]->shape());
        for (double v : s.m[k].values()) EXPECT_EQ(v, 0.0);
        for (double v : s.v[k].values()) EXPECT_EQ(v, 0.0);
    }
    AdamConfig bad;
    bad.beta1 = 1.0;
    EXPECT_THROW(adam_init(params, bad), std::invalid_argument);
    bad = AdamConfig{};
    bad.lr = 0.0;
    EXPECT_THROW(adam_init(params, bad), std::invalid_argument);
    bad = AdamConfig{};
    bad.eps = 0.0;
    EXPECT_THROW(adam_init(params, bad), std::invalid_argument);
    bad = AdamConfig{};
    bad.beta2 = -0.1;
    EXPECT_THROW(adam_init(params, bad), std::invalid_argument);
}

TEST(AdamStep, ZeroGradientLeavesParameters) {
    Tensor w(Shape{4}, {0.1, -0.2, 0.3, 0.4});
    w.set_requires_grad(true);
    const Tensor before = w;
    AdamState s = adam_init({&w});
    w.set_grad({0.0, 0.0, 0.0, 0.0});
    adam_step({&w}, s);
    EXPECT_EQ(s.t, 1);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(w[i], before[i]);
}

TEST(AdamStep, MissingGradientThrows) {
    Tensor w = scalar_param(1.0);
    AdamState s = adam_init({&w});
    EXPECT_THROW(adam_step({&w}, s), std::logic_error);
    Tensor other = scalar_param(1.0);
    other.set_grad({1.0});
    EXPECT_THROW(adam_step({&w, &other}, s), std::logic_error);
}

TEST(AdamStep, FirstStepIsLearningRateInMagnitude) {
    Tensor w = scalar_param(0.0);
    AdamState s = adam_init({&w});
    w.set_grad({1.0});
    adam_step({&w}, s);
    EXPECT_NEAR(w[0], -1e-3 / (1.0 + 1e-8), 1e-18);

    // Any gradient scale: |update| = lr * |g| / (|g| + eps) <= lr on the first step.
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> dist(-8.0, 8.0);
    Tensor many(Shape{64});
    many.set_requires_grad(true);
    std::vector<double> g(64);
    for (double& v : g) v = std::pow(10.0, dist(rng)) * (dist(rng) < 0 ? -1.0 : 1.0);
    AdamState s2 = adam_init({&many});
    many.set_grad(g);
    adam_step({&many}, s2);
    for (std::size_t i = 0; i < 64; ++i) {
        EXPECT_LE(std::abs(many[i]), 1e-3 * (1.0 + 1e-12));
        EXPECT_EQ(std::signbit(many[i]), !std::signbit(g[i]));
    }
}

TEST(AdamStep, TwoStepsOnSquareMatchHandRecurrence) {
    Tensor w = scalar_param(1.0);
    AdamState s = adam_init({&w});
    for (int k = 0; k < 2; ++k) {
        w.set_grad({2.0 * w[0]});
        adam_step({&w}, s);
    }
    // Step 1: g = 2, m = 0.2, v = 0.004, m_hat = 2, v_hat = 4.
    const double w1 = 1.0 - 1e-3 * 2.0 / (2.0 + 1e-8);
    // Step 2.
    const double g2 = 2.0 * w1;
    const double m2 = 0.9 * 0.2 + 0.1 * g2;
    const double v2 = 0.999 * 0.004 + 0.001 * g2 * g2;
    const double m_hat = m2 / (1.0 - 0.81);
    const double v_hat = v2 / (1.0 - 0.998001);
    const double w2 = w1 - 1e-3 * m_hat / (std::sqrt(v_hat) + 1e-8);
    EXPECT_NEAR(w[0], w2, 1e-15);
    EXPECT_EQ(s.t, 2);
}

TEST(AdamStep, ConvergesOnShiftedQuadratic) {
    AdamConfig cfg;
    cfg.lr = 0.05;
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        const double w0 = dist(rng);
        const double a = dist(rng);
        EXPECT_LT(std::abs(minimize_quadratic(w0, a, 500, cfg) - a), 1e-2) << "w0=" << w0 << " a=" << a;
    }
}

TEST(AdamStep, BitReproducible) {
    NetConfig cfg;
    cfg.width = 4;
    NetParams a = init_params(cfg);
    NetParams b = init_params(cfg);
    AdamState sa = adam_init(a);
    AdamState sb = adam_init(b);
    for (int step = 0; step < 3; ++step) {
        for (NetParams* p : {&a, &b}) {
            std::mt19937_64 rng(static_cast<std::uint64_t>(step));
            std::normal_distribution<double> g;
            for (Tensor* t : p->tensors()) {
                std::vector<double> grad(t->numel());
                for (double& v : grad) v = g(rng);
                t->set_grad(grad);
            }
        }
        adam_step(a, sa);
        adam_step(b, sb);
    }
    const auto ta = a.tensors();
    const auto tb = b.tensors();
    for (std::size_t k = 0; k < ta.size(); ++k)
        EXPECT_TRUE(std::equal(ta[k]->values().begin(), ta[k]->values().end(), tb[k]->values().begin()));
}
