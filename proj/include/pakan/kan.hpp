#pragma once

#include <cstddef>
#include <string>

#include "pakan/graph.hpp"
#include "pakan/rng.hpp"
#include "pakan/spline.hpp"

namespace pakan {

enum class OperatorMode { one_to_one, two_to_one };

struct KanLayerConfig {
    std::size_t c_in = 1;
    std::size_t c_out = 1;
    SplineBasisSpec basis{};
    OperatorMode mode = OperatorMode::one_to_one;

    static KanLayerConfig one_to_one(std::size_t channels, SplineBasisSpec basis = {});
    static KanLayerConfig two_to_one(std::size_t out_channels, SplineBasisSpec basis = {});

    std::size_t num_basis() const { return basis.num_basis(); }
    /// one_to_one needs c_in == c_out; two_to_one needs c_in == 2*c_out.
    void validate() const;
};

/// Pointwise nonlinearity fed to the coefficient contraction.
enum class Activation {
    spline,      // B_k(tanh(u)), k = 1..K
    gated_tanh,  // K copies of tanh(u)/K: the generated weights act as a gate on tanh
};

/// Spline edge coefficients w[j,i,k] of a static KAN layer.
struct StaticKanWeights {
    Var w;  // [c_out, c_in, K]
};

StaticKanWeights make_static_kan(ParamStore& store, const std::string& prefix, const KanLayerConfig& cfg, Rng& rng);

/// z[b,j,p] = sum_i sum_k w[j,i,k] * B_k(tanh(u[b,i,p])).
Var static_kan_forward(const Var& u, const Var& weights, const KanLayerConfig& cfg);
std::size_t static_kan_param_count(const KanLayerConfig& cfg);

struct GeneratorOptions {
    /// false: the generator sees a constant all-ones context instead of the
    /// features, so its output becomes a trainable input-independent coefficient set.
    bool adaptive = true;
    /// Width of an optional tanh hidden layer (0 = single layer).
    std::size_t hidden = 0;
};

/// Pixel-wise coefficients: 1x1 conv(s) c_in -> K, sigmoid. Output [B,K,H,W].
struct WeightGenerator2D {
    GeneratorOptions options;
    Var hidden_weight, hidden_bias;  // [h,c_in,1,1], [h] when options.hidden > 0
    Var weight, bias;                // [K,c_in|h,1,1], [K]
};

/// Channel-wise coefficients from globally pooled context. Output [B,c_in*K,1,1],
/// entry i*K+k is the weight of basis k on input channel i.
struct WeightGenerator1D {
    GeneratorOptions options;
    std::size_t channels = 0, num_basis = 0;
    Var hidden_weight, hidden_bias;  // [h,c_in,1,1], [h] when options.hidden > 0
    Var weight, bias;                // per-(channel,k) affine [1,c_in*K,1,1] each, or [c_in*K,h,1,1] + [c_in*K]
};

/// Static edge scales a[j,i] of the rank-1 coefficient factorization w[j,i,k](F) = a[j,i] * w_k(F).
struct EdgeMixWeights {
    Var scales;  // [c_out, c_in, 1, 1]
};

struct AdaptiveKan2D {
    KanLayerConfig cfg;
    Activation activation = Activation::spline;
    EdgeMixWeights edges;
    WeightGenerator2D gen;
};

struct AdaptiveKan1D {
    KanLayerConfig cfg;
    Activation activation = Activation::spline;
    EdgeMixWeights edges;
    WeightGenerator1D gen;
};

AdaptiveKan2D make_adaptive_kan2d(ParamStore& store, const std::string& prefix, const KanLayerConfig& cfg,
                                  const GeneratorOptions& gen, Activation act, Rng& rng);
AdaptiveKan1D make_adaptive_kan1d(ParamStore& store, const std::string& prefix, const KanLayerConfig& cfg,
                                  const GeneratorOptions& gen, Activation act, Rng& rng);

Var gen2d_weights(const Var& features, const WeightGenerator2D& gen);
Var gen1d_weights(const Var& features, const WeightGenerator1D& gen);

/// The per-channel nonlinearity stack [B,c_in*K,H,W] (materialized reference form).
Var activation_features(const Var& features, const KanLayerConfig& cfg, Activation act);

/// Fused basis evaluation and contraction of squashed features t [B,C,H,W]:
/// out[b,c,p] = sum_k coef_k * phi_k(t[b,c,p]) with coef [B,K,H,W] (per pixel)
/// or [B,C*K,1,1] (per channel). Equals basis_contract(stack, coef, K) for the
/// stack of activation_features without storing it.
Var activation_contract(const Var& squashed, const Var& coef, const KanLayerConfig& cfg, Activation act);

/// out[b,j,p] = sum_i a[j,i] * sum_k w2d_k(b,p) * B_k(tanh(F[b,i,p])).
Var adaptive_kan2d_forward(const Var& features, const AdaptiveKan2D& op);
/// Same with t = tanh(features) supplied, so two operators can share it.
Var adaptive_kan2d_forward(const Var& features, const Var& squashed, const AdaptiveKan2D& op);

/// out[b,j,p] = sum_i a[j,i] * sum_k w1d_k(b,i) * B_k(tanh(F[b,i,p])).
Var adaptive_kan1d_forward(const Var& features, const AdaptiveKan1D& op);
Var adaptive_kan1d_forward(const Var& features, const Var& squashed, const AdaptiveKan1D& op);

std::size_t generator2d_param_count(std::size_t c_in, std::size_t k, std::size_t hidden);
std::size_t generator1d_param_count(std::size_t c_in, std::size_t k, std::size_t hidden);
std::size_t adaptive_kan2d_param_count(const KanLayerConfig& cfg, std::size_t hidden);
std::size_t adaptive_kan1d_param_count(const KanLayerConfig& cfg, std::size_t hidden);

}  // namespace pakan
