#include "pakan/blocks.hpp"

#include "pakan/error.hpp"

namespace pakan {

namespace {

template <class Block>
void build_branches(Block& block, ParamStore& store, const std::string& prefix, const KanLayerConfig& cfg,
                    const BlockOptions& opt, Rng& rng) {
    if (!opt.use_2d && !opt.use_1d) throw ConfigError("PAKAN block needs at least one of the 2D/1D branches");
    if (opt.use_2d) {
        block.psi2d = make_adaptive_kan2d(store, prefix + ".psi2d", cfg, {opt.adaptive, opt.hidden_2d}, opt.activation, rng);
    }
    if (opt.use_1d) {
        block.psi1d = make_adaptive_kan1d(store, prefix + ".psi1d", cfg, {opt.adaptive, opt.hidden_1d}, opt.activation, rng);
    }
}

// Product of the enabled branches; a disabled branch is the multiplicative identity.
template <class Block>
Var coupled_branches(const Var& u, const Block& block) {
    Var squashed = tanh(u);  // shared by both branches
    if (block.psi2d && block.psi1d) {
        Var spa = adaptive_kan2d_forward(u, squashed, *block.psi2d);
        Var spe = adaptive_kan1d_forward(u, squashed, *block.psi1d);
        if (spa.dims() != spe.dims()) {
            throw ShapeError("coupling: branch outputs disagree " + shape_str(spa.dims()) + " vs " + shape_str(spe.dims()));
        }
        return mul(spa, spe);
    }
    if (block.psi2d) return adaptive_kan2d_forward(u, squashed, *block.psi2d);
    return adaptive_kan1d_forward(u, squashed, *block.psi1d);
}

template <class Block>
std::size_t branch_params(const Block& block) {
    std::size_t n = 0;
    auto count = [&n](const Var& v) {
        if (v.valid()) n += v.value().numel();
    };
    if (block.psi2d) {
        count(block.psi2d->edges.scales);
        count(block.psi2d->gen.hidden_weight);
        count(block.psi2d->gen.hidden_bias);
        count(block.psi2d->gen.weight);
        count(block.psi2d->gen.bias);
    }
    if (block.psi1d) {
        count(block.psi1d->edges.scales);
        count(block.psi1d->gen.hidden_weight);
        count(block.psi1d->gen.hidden_bias);
        count(block.psi1d->gen.weight);
        count(block.psi1d->gen.bias);
    }
    return n;
}

}  // namespace

Pakan1to1Block make_pakan_1to1(ParamStore& store, const std::string& prefix, std::size_t channels,
                               const BlockOptions& opt, Rng& rng) {
    Pakan1to1Block block;
    block.channels = channels;
    build_branches(block, store, prefix, KanLayerConfig::one_to_one(channels, opt.basis), opt, rng);
    return block;
}

Pakan2to1Block make_pakan_2to1(ParamStore& store, const std::string& prefix, std::size_t channels,
                               const BlockOptions& opt, Rng& rng) {
    Pakan2to1Block block;
    block.channels = channels;
    build_branches(block, store, prefix, KanLayerConfig::two_to_one(channels, opt.basis), opt, rng);
    return block;
}

Var couple(const Var& features, const Pakan1to1Block& block) {
    if (features.dims().size() != 4 || features.dim(1) != block.channels) {
        throw ShapeError("couple: expected [B," + std::to_string(block.channels) + ",H,W], got " +
                         shape_str(features.dims()));
    }
    Var out = coupled_branches(features, block);
    if (out.dims() != features.dims()) throw ShapeError("couple: output " + shape_str(out.dims()) + " changed shape");
    return out;
}

Var pakan_1to1(const Var& x, const Pakan1to1Block& block) { return couple(x, block); }

Var pakan_2to1(const Var& x, const Var& y, const Pakan2to1Block& block) {
    if (x.dims() != y.dims()) {
        throw ShapeError("pakan_2to1: x " + shape_str(x.dims()) + " and y " + shape_str(y.dims()) + " differ");
    }
    if (x.dims().size() != 4 || x.dim(1) != block.channels) {
        throw ShapeError("pakan_2to1: expected [B," + std::to_string(block.channels) + ",H,W] inputs, got " +
                         shape_str(x.dims()));
    }
    Var u = concat_channels(x, y);
    Var fused = coupled_branches(u, block);
    Var out = add(add(fused, x), y);
    if (out.dims() != x.dims()) throw ShapeError("pakan_2to1: output " + shape_str(out.dims()) + " lost the input shape");
    return out;
}

std::size_t block_param_count(const Pakan1to1Block& block) { return branch_params(block); }
std::size_t block_param_count(const Pakan2to1Block& block) { return branch_params(block); }

}  // namespace pakan
