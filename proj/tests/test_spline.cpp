#include <gtest/gtest.h>

#include <cmath>

#include "pakan/error.hpp"
#include "pakan/spline.hpp"
#include "test_util.hpp"

using namespace pakan;

namespace {

// Textbook Cox-de Boor recursion on the clamped-free uniform knot vector
// t_i = -1 + (i - 3) * 2/G, i = 0 .. G+6. The knots extend past 1, so plain
// half-open intervals already cover u = 1.
std::vector<double> cox_de_boor(double u, std::size_t grid) {
    const double h = 2.0 / static_cast<double>(grid);
    const std::size_t nk = grid + 7;
    std::vector<double> t(nk);
    for (std::size_t i = 0; i < nk; ++i) t[i] = -1.0 + (static_cast<double>(i) - 3.0) * h;
    u = std::clamp(u, -1.0, 1.0);
    std::vector<double> b(nk - 1, 0.0);
    for (std::size_t i = 0; i + 1 < nk; ++i) {
        if (t[i] <= u && u < t[i + 1]) b[i] = 1.0;
    }
    for (std::size_t p = 1; p <= 3; ++p) {
        std::vector<double> nb(nk - 1 - p, 0.0);
        for (std::size_t i = 0; i < nb.size(); ++i) {
            const double left = (u - t[i]) / (t[i + p] - t[i]);
            const double right = (t[i + p + 1] - u) / (t[i + p + 1] - t[i + 1]);
            nb[i] = left * b[i] + right * b[i + 1];
        }
        b = std::move(nb);
    }
    return b;  // grid + 3 values
}

// Hat functions on G uniform centers in [-1, 1], divided by their sum.
std::vector<double> triangular_oracle(double u, std::size_t grid) {
    u = std::clamp(u, -1.0, 1.0);
    const double d = 2.0 / static_cast<double>(grid - 1);
    std::vector<double> v(grid);
    double s = 0.0;
    for (std::size_t k = 0; k < grid; ++k) {
        v[k] = std::max(0.0, 1.0 - std::abs(u - (-1.0 + d * static_cast<double>(k))) / d);
        s += v[k];
    }
    for (auto& x : v) x /= s;
    return v;
}

const SplineBasisSpec kCubic{BasisFamily::cubic_bspline, 5};
const SplineBasisSpec kTriangular{BasisFamily::triangular, 5};

}  // namespace

TEST(SplineSpec, Sizes) {
    EXPECT_EQ(kCubic.num_basis(), 8u);
    EXPECT_EQ(kCubic.degree(), 3u);
    EXPECT_EQ(kTriangular.num_basis(), 5u);
    EXPECT_EQ(kCubic.knots().size(), 12u);
    EXPECT_THROW((SplineBasisSpec{BasisFamily::cubic_bspline, 1}.validate()), ConfigError);
}

TEST(SplineEval, PartitionOfUnity) {
    for (const auto& spec : {kCubic, kTriangular}) {
        for (int i = 0; i <= 2000; ++i) {
            const double u = -1.0 + 1e-3 * i;
            double s = 0.0;
            for (double v : basis_eval(u, spec)) s += v;
            ASSERT_NEAR(s, 1.0, 1e-9) << "u=" << u;
        }
    }
}

TEST(SplineEval, MatchesCoxDeBoorOracle) {
    for (std::size_t grid : {2u, 3u, 5u, 8u}) {
        const SplineBasisSpec spec{BasisFamily::cubic_bspline, grid};
        for (int i = 0; i <= 2000; ++i) {
            const double u = -1.0 + 1e-3 * i;
            const auto got = basis_eval(u, spec), want = cox_de_boor(u, grid);
            ASSERT_EQ(got.size(), want.size());
            for (std::size_t k = 0; k < got.size(); ++k) ASSERT_NEAR(got[k], want[k], 1e-9) << "G=" << grid << " u=" << u;
        }
    }
}

TEST(SplineEval, MatchesTriangularOracle) {
    for (std::size_t grid : {3u, 5u, 9u}) {
        const SplineBasisSpec spec{BasisFamily::triangular, grid};
        for (int i = 0; i <= 2000; ++i) {
            const double u = -1.0 + 1e-3 * i;
            const auto got = basis_eval(u, spec), want = triangular_oracle(u, grid);
            for (std::size_t k = 0; k < got.size(); ++k) ASSERT_NEAR(got[k], want[k], 1e-9);
        }
    }
}

TEST(SplineEval, SumAtInteriorPoint) {
    double s = 0.0;
    for (double v : basis_eval(0.3, kCubic)) s += v;
    EXPECT_NEAR(s, 1.0, 1e-9);
}

TEST(SplineEval, TriangularCenterHit) {
    const auto v = basis_eval(0.0, SplineBasisSpec{BasisFamily::triangular, 3});
    EXPECT_EQ(v, (std::vector<double>{0.0, 1.0, 0.0}));
    const auto g = basis_grad(0.0, SplineBasisSpec{BasisFamily::triangular, 3});
    EXPECT_EQ(g[1], 0.0);
}

TEST(SplineEval, ClampedArguments) {
    for (const auto& spec : {kCubic, kTriangular}) {
        EXPECT_EQ(basis_eval(1.7, spec), basis_eval(1.0, spec));
        EXPECT_EQ(basis_eval(-3.0, spec), basis_eval(-1.0, spec));
        for (double g : basis_grad(-1.5, spec)) EXPECT_EQ(g, 0.0);
        for (double g : basis_grad(2.0, spec)) EXPECT_EQ(g, 0.0);
    }
}

TEST(SplineEval, NonNegativeWithCompactSupport) {
    for (int i = 0; i <= 200; ++i) {
        const auto v = basis_eval(-1.0 + 0.01 * i, kCubic);
        int nonzero = 0;
        for (double x : v) {
            EXPECT_GE(x, 0.0);
            nonzero += x > 0.0;
        }
        EXPECT_LE(nonzero, 4);
    }
}

TEST(SplineGrad, MatchesFiniteDifference) {
    const double eps = 1e-6;
    for (double u : {-0.9, 0.0, 0.42}) {
        const auto g = basis_grad(u, kCubic);
        const auto vp = basis_eval(u + eps, kCubic), vm = basis_eval(u - eps, kCubic);
        for (std::size_t k = 0; k < g.size(); ++k) EXPECT_NEAR(g[k], (vp[k] - vm[k]) / (2 * eps), 1e-6) << "u=" << u;
    }
}

TEST(SplineGrad, SumsToZeroInside) {
    for (const auto& spec : {kCubic, kTriangular}) {
        for (double u : {-0.77, -0.1, 0.33, 0.91}) {
            double s = 0.0;
            for (double g : basis_grad(u, spec)) s += g;
            EXPECT_NEAR(s, 0.0, 1e-9);
        }
    }
}

TEST(CubicSupport, AgreesWithFullEvaluation) {
    for (int i = -1100; i <= 1100; ++i) {
        const double u = 1e-3 * i;
        const auto cs = cubic_support(u, 5);
        const auto v = basis_eval(u, kCubic), g = basis_grad(u, kCubic);
        for (std::size_t j = 0; j < 4; ++j) {
            ASSERT_NEAR(cs.value[j], v[cs.first + j], 1e-12);
            ASSERT_NEAR(cs.grad[j], g[cs.first + j], 1e-12);
        }
    }
}

TEST(BasisStack, LayoutAndDegenerateShape) {
    Rng rng(9);
    Tensor u = testutil::random_tensor({2, 3, 4, 5}, rng, -1.2, 1.2);
    Tensor s = basis_stack(Var::constant(u), kCubic).value();
    ASSERT_EQ(s.dims(), (Shape{2, 24, 4, 5}));
    for (std::size_t b = 0; b < 2; ++b)
        for (std::size_t c = 0; c < 3; ++c)
            for (std::size_t y = 0; y < 4; ++y)
                for (std::size_t x = 0; x < 5; ++x) {
                    const auto v = basis_eval(u.at(b, c, y, x), kCubic);
                    for (std::size_t k = 0; k < 8; ++k) ASSERT_EQ(s.at(b, c * 8 + k, y, x), v[k]);
                }
    Tensor one = basis_stack(Var::constant(Tensor({1, 1, 1, 1}, 0.25)), kTriangular).value();
    EXPECT_EQ(std::vector<double>(one.data().begin(), one.data().end()), basis_eval(0.25, kTriangular));
}

TEST(BasisStack, ConstantInputAndPartition) {
    Tensor s = basis_stack(Var::constant(Tensor({1, 2, 3, 3}, -0.4)), kCubic).value();
    for (std::size_t c = 0; c < 2; ++c) {
        double total = 0.0;
        for (std::size_t k = 0; k < 8; ++k) {
            for (std::size_t p = 1; p < 9; ++p) EXPECT_EQ(s.at(0, c * 8 + k, p / 3, p % 3), s.at(0, c * 8 + k, 0, 0));
            total += s.at(0, c * 8 + k, 0, 0);
        }
        EXPECT_NEAR(total, 1.0, 1e-12);
    }
}
