#pragma once

// Static-layer construction for adaptive operators whose generators are frozen
// to constants: the generator's final weights are zeroed so its output is
// sigmoid(bias), and the equivalent static coefficients are a[j,i] * w_k.

#include <cmath>

#include "pakan/kan.hpp"
#include "test_util.hpp"

namespace testutil {

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline pakan::Tensor freeze_generator(pakan::AdaptiveKan2D& op, pakan::Rng& rng) {
    const auto& cfg = op.cfg;
    const std::size_t k = cfg.num_basis();
    op.gen.weight.mutable_value().fill(0.0);
    auto& bias = op.gen.bias.mutable_value();
    for (auto& v : bias.data()) v = rng.uniform(-2.0, 2.0);
    const auto& a = op.edges.scales.value();
    pakan::Tensor w({cfg.c_out, cfg.c_in, k});
    for (std::size_t j = 0; j < cfg.c_out; ++j)
        for (std::size_t i = 0; i < cfg.c_in; ++i)
            for (std::size_t q = 0; q < k; ++q) w[(j * cfg.c_in + i) * k + q] = a[j * cfg.c_in + i] * logistic(bias[q]);
    return w;
}

inline pakan::Tensor freeze_generator(pakan::AdaptiveKan1D& op, pakan::Rng& rng) {
    const auto& cfg = op.cfg;
    const std::size_t k = cfg.num_basis();
    op.gen.weight.mutable_value().fill(0.0);
    auto& bias = op.gen.bias.mutable_value();  // entry i*K+k
    for (auto& v : bias.data()) v = rng.uniform(-2.0, 2.0);
    const auto& a = op.edges.scales.value();
    pakan::Tensor w({cfg.c_out, cfg.c_in, k});
    for (std::size_t j = 0; j < cfg.c_out; ++j)
        for (std::size_t i = 0; i < cfg.c_in; ++i)
            for (std::size_t q = 0; q < k; ++q) w[(j * cfg.c_in + i) * k + q] = a[j * cfg.c_in + i] * logistic(bias[i * k + q]);
    return w;
}

}  // namespace testutil
