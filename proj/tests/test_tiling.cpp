#include <gtest/gtest.h>

#include <cmath>

#include "pakan/error.hpp"
#include "pakan/tiling.hpp"
#include "pakan/train.hpp"
#include "test_util.hpp"

using namespace pakan;
using testutil::random_tensor;

namespace {

Tensor upsample(const Tensor& ms) { return drop_batch(resample_value(as_batch(ms), Resample::bilinear_up, 4)); }

// Whole-image forward on the reflection-padded input, cropped back to the image.
Tensor padded_whole(const PansharpNet& net, const Tensor& ms, const Tensor& pan, std::size_t pad) {
    const Tensor up_p = reflect_pad(upsample(ms), pad), pan_p = reflect_pad(pan, pad);
    const Tensor full = drop_batch(
        network_forward_upsampled(net, Var::constant(as_batch(up_p)), Var::constant(as_batch(pan_p))).value());
    const std::size_t c = full.dim(0), H = pan.dim(1), W = pan.dim(2), PW = full.dim(2);
    Tensor out({c, H, W});
    for (std::size_t b = 0; b < c; ++b)
        for (std::size_t y = 0; y < H; ++y)
            for (std::size_t x = 0; x < W; ++x) out[(b * H + y) * W + x] = full[(b * full.dim(1) + y + pad) * PW + x + pad];
    return out;
}

double max_abs_inside(const Tensor& a, const Tensor& b, std::size_t border) {
    const std::size_t c = a.dim(0), H = a.dim(1), W = a.dim(2);
    double m = 0.0;
    for (std::size_t k = 0; k < c; ++k)
        for (std::size_t y = border; y < H - border; ++y)
            for (std::size_t x = border; x < W - border; ++x) {
                const std::size_t i = (k * H + y) * W + x;
                m = std::max(m, std::abs(a[i] - b[i]));
            }
    return m;
}

PansharpNet briefly_trained() {
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch_size = 2;
    cfg.width = 8;
    cfg.depth = 1;
    std::vector<SamplePair> tr, va;
    for (std::size_t i = 0; i < 4; ++i) tr.push_back(make_sample(11, i, 4));
    va.push_back(make_sample(11, 4, 4));
    return train_network(cfg, tr, va).net;
}

}  // namespace

TEST(ReflectPad, MirrorsWithoutEdgeRepeat) {
    Tensor row({1, 2, 4}, std::vector<double>{0, 1, 2, 3, 4, 5, 6, 7});
    const Tensor p = reflect_pad(row, 1);
    EXPECT_EQ(p.dims(), (Shape{1, 4, 6}));
    const std::vector<double> expect{5, 4, 5, 6, 7, 6, 1, 0, 1, 2, 3, 2, 5, 4, 5, 6, 7, 6, 1, 0, 1, 2, 3, 2};
    EXPECT_EQ(std::vector<double>(p.data().begin(), p.data().end()), expect);
    EXPECT_EQ(reflect_pad(row, 0), row);
    EXPECT_THROW(reflect_pad(row, 2), ShapeError);
}

TEST(TileOrigins, LastTileAlignedToFarEdge) {
    EXPECT_EQ(tile_origins(136, 64, 56), (std::vector<std::size_t>{0, 56, 72}));
    EXPECT_EQ(tile_origins(120, 64, 56), (std::vector<std::size_t>{0, 56}));
    EXPECT_EQ(tile_origins(64, 64, 56), (std::vector<std::size_t>{0}));
    EXPECT_EQ(tile_origins(40, 64, 56), (std::vector<std::size_t>{0}));
    // consecutive center crops abut or overlap, never leave a gap
    for (std::size_t n : {72u, 100u, 136u, 264u, 301u}) {
        const auto o = tile_origins(n, 64, 56);
        EXPECT_EQ(o.front(), 0u);
        EXPECT_EQ(o.back() + 64, n);
        for (std::size_t i = 1; i < o.size(); ++i) EXPECT_LE(o[i] - o[i - 1], 56u);
    }
}

TEST(TileSpec, Validation) {
    TileSpec s;
    EXPECT_EQ(s.stride(), 56u);
    EXPECT_EQ(s.lr_tile(), 16u);
    s.hr_tile = 62;
    EXPECT_THROW(s.validate(), ConfigError);
    s.hr_tile = 8;
    s.reflect_pad = 4;
    EXPECT_THROW(s.validate(), ConfigError);
}

TEST(TileInfer, SingleTileEqualsPaddedWholeImage) {
    Rng rng(80);
    auto net = build_network(NetworkConfig{});
    testutil::randomize(net.params, rng, 0.3);
    const Tensor ms = random_tensor({4, 16, 16}, rng, 0, 1), pan = random_tensor({1, 64, 64}, rng, 0, 1);
    EXPECT_EQ(tile_infer(net, ms, pan), padded_whole(net, ms, pan, 4));
}

TEST(TileInfer, SmallerThanOneTile) {
    Rng rng(81);
    auto net = build_network(NetworkConfig{});
    testutil::randomize(net.params, rng, 0.3);
    const Tensor ms = random_tensor({4, 10, 6}, rng, 0, 1), pan = random_tensor({1, 40, 24}, rng, 0, 1);
    EXPECT_EQ(tile_infer(net, ms, pan), padded_whole(net, ms, pan, 4));
}

TEST(TileInfer, FreshNetworkIsExactUpsampling) {
    Rng rng(82);
    const auto net = build_network(NetworkConfig{});
    const Tensor ms = random_tensor({4, 32, 40}, rng, 0, 1), pan = random_tensor({1, 128, 160}, rng, 0, 1);
    EXPECT_EQ(tile_infer(net, ms, pan), upsample(ms));
    const Tensor flat = tile_infer(net, Tensor({4, 32, 32}, 0.4), Tensor({1, 128, 128}, 0.7));
    for (double v : flat.data()) EXPECT_EQ(v, 0.4);
}

TEST(TileInfer, TrainedNetworkMatchesWholeImage) {
    const auto net = briefly_trained();
    for (std::uint64_t s = 0; s < 2; ++s) {
        const auto d = wald_degrade(synth_scene(200 + s, 4, 128, 128));
        const Tensor tiled = tile_infer(net, d.lr_ms, d.pan);
        EXPECT_LT(max_abs_inside(tiled, padded_whole(net, d.lr_ms, d.pan, 4), 4), 1e-4);
        EXPECT_LT(max_abs_inside(tiled, predict(net, d.lr_ms, d.pan), 4), 1e-4);
    }
}

TEST(TileInfer, ShapeErrors) {
    const auto net = build_network(NetworkConfig{});
    EXPECT_THROW(tile_infer(net, Tensor({4, 16, 16}), Tensor({1, 60, 64})), ShapeError);
    EXPECT_THROW(tile_infer(net, Tensor({4, 16, 16}), Tensor({2, 64, 64})), ShapeError);
}
