#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pakan/blocks.hpp"

namespace pakan {

/// Architecture and ablation switches of the compact pansharpening network.
struct NetworkConfig {
    std::size_t bands = 4;
    std::size_t width = 16;
    std::size_t depth = 2;
    bool pa = true;       // pixel-adaptive coefficient generation
    bool kan = true;      // spline activation (false: generator-gated tanh)
    bool use_1d = true;
    bool use_2d = true;
    SplineBasisSpec basis{};
    std::uint64_t seed = 0;

    void validate() const;
    std::string variant_name() const;

    /// One-line `key=value` encoding used as the checkpoint manifest.
    std::string to_manifest() const;
    static NetworkConfig from_manifest(const std::string& line);

    bool operator==(const NetworkConfig&) const = default;
};

/// MS stem and PAN stem (3x3 conv + ReLU each), one fusion block, `depth`
/// residual refinement stages (1to1 block + 3x3 conv), 3x3 head, and a global
/// residual from the bilinearly upsampled MS.
struct PansharpNet {
    NetworkConfig cfg;
    ParamStore params;
    std::size_t hidden_2d = 0;  // generator hidden widths chosen for parameter parity
    std::size_t hidden_1d = 0;
    Var stem_ms_w, stem_ms_b, stem_pan_w, stem_pan_b;
    Pakan2to1Block fuse;
    std::vector<Pakan1to1Block> refine_blocks;
    std::vector<Var> refine_w, refine_b;
    Var head_w, head_b;
};

inline constexpr std::size_t kScaleRatio = 4;
inline constexpr double kParamParityTolerance = 0.05;

/// Builds and initializes deterministically from cfg.seed. Single-branch
/// variants widen their generators so the parameter count stays within 5% of
/// the full model; the check is enforced here.
PansharpNet build_network(const NetworkConfig& cfg);

/// Parameter count of a configuration with explicit generator hidden widths.
std::size_t network_param_count(const NetworkConfig& cfg, std::size_t hidden_2d, std::size_t hidden_1d);
/// Parameter count of the full model with the same widths.
std::size_t reference_param_count(const NetworkConfig& cfg);

/// ms [B,C,h,w], pan [B,1,4h,4w] -> [B,C,4h,4w].
Var network_forward(const PansharpNet& net, const Var& ms, const Var& pan);
/// Same network applied to MS that is already at PAN resolution.
Var network_forward_upsampled(const PansharpNet& net, const Var& ms_up, const Var& pan);

/// Value-only convenience wrapper for inference.
Tensor predict(const PansharpNet& net, const Tensor& ms, const Tensor& pan);

}  // namespace pakan
