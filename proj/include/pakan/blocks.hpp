#pragma once

#include <optional>
#include <string>

#include "pakan/kan.hpp"

namespace pakan {

/// Construction options shared by both block types.
struct BlockOptions {
    SplineBasisSpec basis{};
    Activation activation = Activation::spline;
    bool adaptive = true;
    /// A disabled branch contributes the all-ones tensor to the product.
    bool use_2d = true;
    bool use_1d = true;
    std::size_t hidden_2d = 0;
    std::size_t hidden_1d = 0;
};

/// Refinement block: o = psi2d(x) * psi1d(x), C -> C.
struct Pakan1to1Block {
    std::size_t channels = 0;
    std::optional<AdaptiveKan2D> psi2d;
    std::optional<AdaptiveKan1D> psi1d;
};

/// Fusion block: u = [x, y], o = psi2d(u) * psi1d(u) + x + y, 2C -> C.
struct Pakan2to1Block {
    std::size_t channels = 0;
    std::optional<AdaptiveKan2D> psi2d;
    std::optional<AdaptiveKan1D> psi1d;
};

Pakan1to1Block make_pakan_1to1(ParamStore& store, const std::string& prefix, std::size_t channels,
                               const BlockOptions& opt, Rng& rng);
Pakan2to1Block make_pakan_2to1(ParamStore& store, const std::string& prefix, std::size_t channels,
                               const BlockOptions& opt, Rng& rng);

/// Spatial-spectral coupling psi2d(F) * psi1d(F) on C channels.
Var couple(const Var& features, const Pakan1to1Block& block);
Var pakan_1to1(const Var& x, const Pakan1to1Block& block);
Var pakan_2to1(const Var& x, const Var& y, const Pakan2to1Block& block);

std::size_t block_param_count(const Pakan1to1Block& block);
std::size_t block_param_count(const Pakan2to1Block& block);

}  // namespace pakan
