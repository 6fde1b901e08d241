#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>

#include "kan_oracle.hpp"
#include "pakan/error.hpp"
#include "pakan/kan.hpp"

using namespace pakan;
using testutil::random_tensor;

namespace {

const SplineBasisSpec kTriangular{BasisFamily::triangular, 5};

}  // namespace

TEST(KanConfig, ModeContracts) {
    EXPECT_NO_THROW(KanLayerConfig::one_to_one(4).validate());
    EXPECT_EQ(KanLayerConfig::two_to_one(4).c_in, 8u);
    EXPECT_THROW((KanLayerConfig{3, 4, {}, OperatorMode::one_to_one}.validate()), ConfigError);
    EXPECT_THROW((KanLayerConfig{4, 4, {}, OperatorMode::two_to_one}.validate()), ConfigError);
    EXPECT_THROW((KanLayerConfig{0, 0, {}, OperatorMode::one_to_one}.validate()), ConfigError);
}

TEST(StaticKan, ZeroWeightsGiveZero) {
    Rng rng(10);
    const auto cfg = KanLayerConfig::one_to_one(3);
    Var w = Var::constant(Tensor::zeros({3, 3, 8}));
    Tensor out = static_kan_forward(Var::constant(random_tensor({2, 3, 4, 4}, rng, -3, 3)), w, cfg).value();
    EXPECT_TRUE(testutil::all_equal(out, 0.0));
}

TEST(StaticKan, MatchesDirectFormula) {
    Rng rng(11);
    const auto cfg = KanLayerConfig::two_to_one(2, kTriangular);
    ParamStore store;
    auto w = make_static_kan(store, "s", cfg, rng);
    EXPECT_EQ(store.total_elements(), static_kan_param_count(cfg));
    Tensor u = random_tensor({1, 4, 3, 3}, rng, -2, 2);
    Tensor out = static_kan_forward(Var::constant(u), w.w, cfg).value();
    for (std::size_t j = 0; j < 2; ++j)
        for (std::size_t p = 0; p < 9; ++p) {
            double acc = 0.0;
            for (std::size_t i = 0; i < 4; ++i) {
                const auto b = basis_eval(std::tanh(u[i * 9 + p]), kTriangular);
                for (std::size_t k = 0; k < 5; ++k) acc += w.w.value()[(j * 4 + i) * 5 + k] * b[k];
            }
            EXPECT_NEAR(out[j * 9 + p], acc, 1e-12);
        }
}

TEST(StaticKan, LeastSquaresIdentityFit) {
    // Fit phi(t) = t on [-1,1]; the layer then computes tanh(u).
    const SplineBasisSpec spec{};
    const std::size_t k = spec.num_basis(), n = 1000;
    Eigen::MatrixXd a(n, k);
    Eigen::VectorXd rhs(n);
    for (std::size_t r = 0; r < n; ++r) {
        const double t = -1.0 + 2.0 * static_cast<double>(r) / static_cast<double>(n - 1);
        const auto b = basis_eval(t, spec);
        for (std::size_t c = 0; c < k; ++c) a(r, c) = b[c];
        rhs(r) = t;
    }
    const Eigen::VectorXd coef = a.colPivHouseholderQr().solve(rhs);
    Tensor w({1, 1, k});
    for (std::size_t c = 0; c < k; ++c) w[c] = coef(c);

    Rng rng(12);
    Tensor u = random_tensor({1, 1, 16, 16}, rng, -3, 3);
    Tensor out = static_kan_forward(Var::constant(u), Var::constant(w), KanLayerConfig::one_to_one(1)).value();
    for (std::size_t i = 0; i < u.numel(); ++i) EXPECT_NEAR(out[i], std::tanh(u[i]), 1e-3);
}

TEST(StaticKan, ConstantInputConstantOutput) {
    Rng rng(13);
    ParamStore store;
    const auto cfg = KanLayerConfig::one_to_one(2);
    auto w = make_static_kan(store, "s", cfg, rng);
    Tensor out = static_kan_forward(Var::constant(Tensor({1, 2, 5, 5}, 0.3)), w.w, cfg).value();
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t p = 0; p < 25; ++p) EXPECT_EQ(out[c * 25 + p], out[c * 25]);
}

// ---------------------------------------------------------------------------
// generators

TEST(Generator2D, ZeroInitGivesHalf) {
    Rng rng(14);
    ParamStore store;
    auto op = make_adaptive_kan2d(store, "g", KanLayerConfig::one_to_one(3), {}, Activation::spline, rng);
    Tensor c = gen2d_weights(Var::constant(random_tensor({2, 3, 4, 4}, rng)), op.gen).value();
    EXPECT_EQ(c.dims(), (Shape{2, 8, 4, 4}));
    EXPECT_TRUE(testutil::all_equal(c, 0.5));
}

TEST(Generator2D, PixelLocal) {
    Rng rng(15);
    ParamStore store;
    auto op = make_adaptive_kan2d(store, "g", KanLayerConfig::one_to_one(3), {true, 4}, Activation::spline, rng);
    testutil::randomize(store, rng, 1.0);
    Tensor c1 = gen2d_weights(Var::constant(Tensor({1, 3, 4, 4}, 0.2)), op.gen).value();
    for (std::size_t k = 0; k < 8; ++k)
        for (std::size_t p = 0; p < 16; ++p) EXPECT_EQ(c1[k * 16 + p], c1[k * 16]);

    Tensor f = random_tensor({1, 3, 4, 4}, rng);
    Tensor g = f;
    g[1 * 16 + 6] += 0.7;  // channel 1, pixel 6
    Tensor a = gen2d_weights(Var::constant(f), op.gen).value(), b = gen2d_weights(Var::constant(g), op.gen).value();
    for (std::size_t k = 0; k < 8; ++k)
        for (std::size_t p = 0; p < 16; ++p) {
            if (p == 6) {
                EXPECT_NE(a[k * 16 + p], b[k * 16 + p]);
            } else {
                EXPECT_EQ(a[k * 16 + p], b[k * 16 + p]);
            }
        }
}

TEST(Generator1D, ZeroInitGivesHalf) {
    Rng rng(16);
    ParamStore store;
    auto op = make_adaptive_kan1d(store, "g", KanLayerConfig::one_to_one(3), {}, Activation::spline, rng);
    Tensor c = gen1d_weights(Var::constant(random_tensor({2, 3, 4, 4}, rng)), op.gen).value();
    EXPECT_EQ(c.dims(), (Shape{2, 24, 1, 1}));
    EXPECT_TRUE(testutil::all_equal(c, 0.5));
}

TEST(Generator1D, PermutationInvariant) {
    Rng rng(17);
    for (std::size_t hidden : {0u, 5u}) {
        ParamStore store;
        auto op = make_adaptive_kan1d(store, "g", KanLayerConfig::one_to_one(2), {true, hidden}, Activation::spline, rng);
        testutil::randomize(store, rng, 1.0);
        Tensor f = random_tensor({1, 2, 4, 4}, rng);
        Tensor g(f.dims());
        // reverse pixel order within each channel
        for (std::size_t c = 0; c < 2; ++c)
            for (std::size_t p = 0; p < 16; ++p) g[c * 16 + p] = f[c * 16 + 15 - p];
        Tensor a = gen1d_weights(Var::constant(f), op.gen).value(), b = gen1d_weights(Var::constant(g), op.gen).value();
        for (std::size_t i = 0; i < a.numel(); ++i) EXPECT_NEAR(a[i], b[i], 1e-15);
    }
}

TEST(Generator1D, BatchItemsWithDifferentMeansDiffer) {
    Rng rng(18);
    ParamStore store;
    auto op = make_adaptive_kan1d(store, "g", KanLayerConfig::one_to_one(2), {}, Activation::spline, rng);
    op.gen.weight.mutable_value().fill(1.0);
    Tensor f({2, 2, 2, 2});
    for (std::size_t p = 0; p < 4; ++p) {
        f[0 * 8 + 0 * 4 + p] = 0.1;  // item 0: means (0.1, -0.2)
        f[0 * 8 + 1 * 4 + p] = -0.2;
        f[1 * 8 + 0 * 4 + p] = 0.6;  // item 1: means (0.6, 0.3)
        f[1 * 8 + 1 * 4 + p] = 0.3;
    }
    Tensor c = gen1d_weights(Var::constant(f), op.gen).value();
    for (std::size_t k = 0; k < 8; ++k) {
        EXPECT_NEAR(c[k], testutil::logistic(0.1), 1e-15);
        EXPECT_NEAR(c[16 + k], testutil::logistic(0.6), 1e-15);
        EXPECT_NE(c[k], c[16 + k]);
        EXPECT_NE(c[8 + k], c[24 + k]);
    }
}

TEST(Generator1D, RejectsWrongChannels) {
    Rng rng(19);
    ParamStore store;
    auto op = make_adaptive_kan1d(store, "g", KanLayerConfig::one_to_one(2), {}, Activation::spline, rng);
    EXPECT_THROW(gen1d_weights(Var::constant(Tensor({1, 3, 2, 2})), op.gen), ShapeError);
}

// ---------------------------------------------------------------------------
// adaptive operators

TEST(AdaptiveKan, FrozenGeneratorsEqualStaticLayer) {
    Rng rng(20);
    for (auto family : {BasisFamily::cubic_bspline, BasisFamily::triangular})
        for (auto mode : {OperatorMode::one_to_one, OperatorMode::two_to_one})
            for (std::size_t hidden : {0u, 3u}) {
                const SplineBasisSpec basis{family, 5};
                const auto cfg = mode == OperatorMode::one_to_one ? KanLayerConfig::one_to_one(3, basis)
                                                                  : KanLayerConfig::two_to_one(3, basis);
                ParamStore store;
                auto op2 = make_adaptive_kan2d(store, "a", cfg, {true, hidden}, Activation::spline, rng);
                auto op1 = make_adaptive_kan1d(store, "b", cfg, {true, hidden}, Activation::spline, rng);
                testutil::randomize(store, rng, 0.8);
                const Tensor w2 = testutil::freeze_generator(op2, rng), w1 = testutil::freeze_generator(op1, rng);
                for (int trial = 0; trial < 5; ++trial) {
                    Var f = Var::constant(random_tensor({2, cfg.c_in, 5, 5}, rng, -3, 3));
                    EXPECT_LT(max_abs_diff(adaptive_kan2d_forward(f, op2).value(),
                                           static_kan_forward(f, Var::constant(w2), cfg).value()),
                              1e-12);
                    EXPECT_LT(max_abs_diff(adaptive_kan1d_forward(f, op1).value(),
                                           static_kan_forward(f, Var::constant(w1), cfg).value()),
                              1e-12);
                }
            }
}

TEST(AdaptiveKan, NonAdaptiveGeneratorIsInputIndependentStaticLayer) {
    Rng rng(21);
    const auto cfg = KanLayerConfig::one_to_one(2);
    ParamStore store;
    auto op = make_adaptive_kan2d(store, "a", cfg, {false, 0}, Activation::spline, rng);
    testutil::randomize(store, rng, 0.8);
    // all-ones context: w_k = sigmoid(sum_i W[k,i] + b_k)
    const auto& gw = op.gen.weight.value();
    const auto& gb = op.gen.bias.value();
    Tensor w({2, 2, 8});
    for (std::size_t j = 0; j < 2; ++j)
        for (std::size_t i = 0; i < 2; ++i)
            for (std::size_t k = 0; k < 8; ++k)
                w[(j * 2 + i) * 8 + k] = op.edges.scales.value()[j * 2 + i] * testutil::logistic(gw[k * 2] + gw[k * 2 + 1] + gb[k]);
    Var f = Var::constant(random_tensor({1, 2, 4, 4}, rng, -2, 2));
    EXPECT_LT(max_abs_diff(adaptive_kan2d_forward(f, op).value(), static_kan_forward(f, Var::constant(w), cfg).value()), 1e-12);
}

TEST(AdaptiveKan, ZeroEdgeScalesGiveZero) {
    Rng rng(22);
    ParamStore store;
    const auto cfg = KanLayerConfig::two_to_one(2);
    auto op2 = make_adaptive_kan2d(store, "a", cfg, {}, Activation::spline, rng);
    auto op1 = make_adaptive_kan1d(store, "b", cfg, {}, Activation::spline, rng);
    testutil::randomize(store, rng, 1.0);
    op2.edges.scales.mutable_value().fill(0.0);
    op1.edges.scales.mutable_value().fill(0.0);
    Var f = Var::constant(random_tensor({1, 4, 3, 3}, rng));
    EXPECT_TRUE(testutil::all_equal(adaptive_kan2d_forward(f, op2).value(), 0.0));
    EXPECT_TRUE(testutil::all_equal(adaptive_kan1d_forward(f, op1).value(), 0.0));
}

TEST(AdaptiveKan, ShapeContracts) {
    Rng rng(23);
    ParamStore store;
    auto a = make_adaptive_kan2d(store, "a", KanLayerConfig::two_to_one(4), {}, Activation::spline, rng);
    auto b = make_adaptive_kan1d(store, "b", KanLayerConfig::one_to_one(4), {}, Activation::spline, rng);
    EXPECT_EQ(adaptive_kan2d_forward(Var::constant(Tensor({2, 8, 6, 6})), a).dims(), (Shape{2, 4, 6, 6}));
    EXPECT_EQ(adaptive_kan1d_forward(Var::constant(Tensor({2, 4, 6, 6})), b).dims(), (Shape{2, 4, 6, 6}));
    EXPECT_THROW(adaptive_kan2d_forward(Var::constant(Tensor({2, 4, 6, 6})), a), ShapeError);
}

TEST(AdaptiveKan, SpatiallyConstantInputGivesConstantOutput) {
    Rng rng(24);
    ParamStore store;
    auto op = make_adaptive_kan1d(store, "b", KanLayerConfig::one_to_one(3), {}, Activation::spline, rng);
    testutil::randomize(store, rng, 1.0);
    Tensor f({1, 3, 4, 4});
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t p = 0; p < 16; ++p) f[c * 16 + p] = 0.3 * static_cast<double>(c) - 0.4;
    Tensor out = adaptive_kan1d_forward(Var::constant(f), op).value();
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t p = 0; p < 16; ++p) EXPECT_EQ(out[c * 16 + p], out[c * 16]);
}

TEST(AdaptiveKan, ParamCountsMatchStore) {
    Rng rng(25);
    for (std::size_t hidden : {0u, 6u}) {
        const auto cfg = KanLayerConfig::two_to_one(4);
        ParamStore s2, s1;
        make_adaptive_kan2d(s2, "a", cfg, {true, hidden}, Activation::spline, rng);
        make_adaptive_kan1d(s1, "b", cfg, {true, hidden}, Activation::spline, rng);
        EXPECT_EQ(s2.total_elements(), adaptive_kan2d_param_count(cfg, hidden));
        EXPECT_EQ(s1.total_elements(), adaptive_kan1d_param_count(cfg, hidden));
    }
}

// ---------------------------------------------------------------------------
// the fused contraction against its materialized reference

TEST(ActivationContract, MatchesMaterializedStack) {
    Rng rng(26);
    struct Case {
        SplineBasisSpec basis;
        Activation act;
    };
    for (const Case& cs : {Case{{}, Activation::spline}, Case{kTriangular, Activation::spline}, Case{{}, Activation::gated_tanh}})
        for (bool per_pixel : {true, false}) {
            const auto cfg = KanLayerConfig::one_to_one(3, cs.basis);
            const std::size_t k = cfg.num_basis();
            Var f = Var::leaf(random_tensor({2, 3, 4, 5}, rng, -3, 3));
            Var coef = Var::leaf(per_pixel ? random_tensor({2, k, 4, 5}, rng) : random_tensor({2, 3 * k, 1, 1}, rng));
            Var readout = Var::constant(random_tensor({2, 3, 4, 5}, rng));

            Var fused = activation_contract(tanh(f), coef, cfg, cs.act);
            Var ref = basis_contract(activation_features(f, cfg, cs.act), coef, k);
            EXPECT_LT(max_abs_diff(fused.value(), ref.value()), 1e-12);

            backward(sum(mul(fused, readout)));
            const Tensor gf = f.grad(), gc = coef.grad();
            f.node().grad.fill(0.0);
            coef.node().grad.fill(0.0);
            backward(sum(mul(ref, readout)));
            EXPECT_LT(max_abs_diff(gf, f.grad()), 1e-12);
            EXPECT_LT(max_abs_diff(gc, coef.grad()), 1e-12);
        }
}

TEST(ActivationContract, RejectsMismatchedCoefficients) {
    const auto cfg = KanLayerConfig::one_to_one(2);
    Var t = Var::constant(Tensor({1, 2, 3, 3}));
    EXPECT_THROW(activation_contract(t, Var::constant(Tensor({1, 7, 3, 3})), cfg, Activation::spline), ShapeError);
}
