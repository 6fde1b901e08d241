#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "pakan/data.hpp"
#include "pakan/error.hpp"
#include "pakan/graph.hpp"
#include "test_util.hpp"

using namespace pakan;
namespace fs = std::filesystem;
using testutil::random_tensor;

namespace {

fs::path temp_dir(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("pakan_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

double sum_of(const Tensor& t) {
    double s = 0.0;
    for (double v : t.data()) s += v;
    return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// radiometry

TEST(Normalize, DigitalNumbers) {
    Tensor raw({3}, std::vector<double>{2047.0, 0.0, 1023.5});
    Tensor n = normalize(raw);
    EXPECT_EQ(n[0], 1.0);
    EXPECT_EQ(n[1], 0.0);
    EXPECT_EQ(n[2], 0.5);
    EXPECT_EQ(denormalize(n), raw);
}

TEST(Normalize, OutOfRangeReported) {
    try {
        normalize(Tensor({3}, std::vector<double>{-1.0, 5.0, 3000.0}));
        FAIL() << "expected ValidationError";
    } catch (const ValidationError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find('2'), std::string::npos);  // two offending values
        EXPECT_NE(msg.find("3000"), std::string::npos);
    }
}

// ---------------------------------------------------------------------------
// PKTN

TEST(Pktn, RoundTripBitExact) {
    Rng rng(50);
    Tensor t = round_to_f32(random_tensor({2, 3, 4, 5}, rng));
    Tensor s = Tensor::scalar(static_cast<double>(0.25f));
    const auto decoded = pktn_decode(pktn_encode({{"a", t}, {"scalar", s}}));
    ASSERT_EQ(decoded.size(), 2u);
    EXPECT_EQ(decoded[0].first, "a");
    EXPECT_EQ(decoded[0].second, t);
    EXPECT_EQ(decoded[1].second, s);
}

TEST(Pktn, RoundsToBinary32) {
    Tensor t({1}, std::vector<double>{0.1});
    EXPECT_EQ(pktn_decode(pktn_encode({{"x", t}}))[0].second[0], static_cast<double>(0.1f));
}

TEST(Pktn, EmptyContainer) {
    const auto bytes = pktn_encode({});
    EXPECT_EQ(bytes.size(), 9u);
    EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "PKTN");
    EXPECT_EQ(bytes[4], kPktnVersion);
    EXPECT_TRUE(pktn_decode(bytes).empty());
}

TEST(Pktn, ParseErrorsCarryOffsets) {
    auto bytes = pktn_encode({{"x", Tensor({2, 2}, 1.0)}});
    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    try {
        pktn_decode(bad_magic);
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.offset(), 0u);
    }
    auto bad_version = bytes;
    bad_version[4] = 9;
    try {
        pktn_decode(bad_version);
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.offset(), 4u);
    }
    auto truncated = bytes;
    truncated.resize(bytes.size() - 3);
    EXPECT_THROW(pktn_decode(truncated), ParseError);
    auto trailing = bytes;
    trailing.push_back(0);
    try {
        pktn_decode(trailing);
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.offset(), bytes.size());
    }
    // rank byte sits after magic, version, count, name length and the 1-byte name
    auto bad_rank = bytes;
    bad_rank[4 + 1 + 4 + 2 + 1] = 5;
    try {
        pktn_decode(bad_rank);
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.offset(), 12u);
    }
}

TEST(Pktn, DuplicateNamesRejected) {
    EXPECT_THROW(pktn_encode({{"a", Tensor({1})}, {"a", Tensor({1})}}), ValidationError);
}

TEST(Pktn, FileRoundTripAndLookup) {
    const fs::path dir = temp_dir("pktn");
    Tensor t({2, 2}, std::vector<double>{1, 2, 3, 4});
    pktn_write(dir / "t.pktn", {{"t", t}});
    const auto entries = pktn_read(dir / "t.pktn");
    EXPECT_EQ(find_entry(entries, "t"), t);
    EXPECT_THROW(find_entry(entries, "u"), ValidationError);
    EXPECT_THROW(pktn_read(dir / "missing.pktn"), Error);
}

// ---------------------------------------------------------------------------
// scenes and degradation

TEST(Synth, Deterministic) {
    EXPECT_EQ(synth_scene(7, 4, 64, 64), synth_scene(7, 4, 64, 64));
    EXPECT_NE(synth_scene(7, 4, 64, 64), synth_scene(8, 4, 64, 64));
    EXPECT_THROW(synth_scene(1, 4, 30, 32), ConfigError);
    EXPECT_THROW(synth_scene(1, 0, 32, 32), ConfigError);
}

TEST(Synth, ValuesInUnitRange) {
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        const Tensor s = synth_scene(seed, 4, 16, 16);
        const auto [lo, hi] = std::minmax_element(s.data().begin(), s.data().end());
        ASSERT_GE(*lo, 0.0) << seed;
        ASSERT_LE(*hi, 1.0) << seed;
    }
}

TEST(Synth, EdgesMakeGradientsHeavyTailed) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Tensor s = synth_scene(seed, 4, 64, 64);
        std::vector<double> mag;
        for (std::size_t y = 0; y + 1 < 64; ++y)
            for (std::size_t x = 0; x + 1 < 64; ++x) {
                const double gx = s[y * 64 + x + 1] - s[y * 64 + x], gy = s[(y + 1) * 64 + x] - s[y * 64 + x];
                mag.push_back(std::hypot(gx, gy));
            }
        std::nth_element(mag.begin(), mag.begin() + mag.size() / 2, mag.end());
        const double median = mag[mag.size() / 2];
        const double mx = *std::max_element(mag.begin(), mag.end());
        EXPECT_GT(mx, 5.0 * median) << seed;
    }
}

TEST(Degrade, GaussianKernel) {
    const auto k = gaussian_kernel(1.0);
    ASSERT_EQ(k.size(), 9u);
    double s = 0.0;
    for (double v : k) s += v;
    EXPECT_NEAR(s, 1.0, 1e-15);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(k[i], k[8 - i]);
    EXPECT_THROW(gaussian_kernel(0.0), ConfigError);
}

TEST(Degrade, ConstantImage) {
    const auto d = wald_degrade(Tensor({3, 64, 64}, 0.37));
    EXPECT_EQ(d.lr_ms.dims(), (Shape{3, 16, 16}));
    EXPECT_EQ(d.pan.dims(), (Shape{1, 64, 64}));
    for (double v : d.lr_ms.data()) EXPECT_NEAR(v, 0.37, 1e-15);
    for (double v : d.pan.data()) EXPECT_NEAR(v, 0.37, 1e-15);
}

TEST(Degrade, ImpulseMassPreserved) {
    Tensor imp({1, 64, 64});
    imp[32 * 64 + 32] = 1.0;
    EXPECT_NEAR(sum_of(gaussian_blur(imp, 1.0)), 1.0, 1e-6);
    const Tensor lr = blur_decimate(imp, 1.0, 4);
    EXPECT_EQ(lr.dims(), (Shape{1, 16, 16}));
    EXPECT_NEAR(sum_of(lr) * 16.0, 1.0, 1e-6);  // block means keep the mean
}

TEST(Degrade, PanIsBandMean) {
    Rng rng(51);
    Tensor gt = random_tensor({4, 8, 8}, rng, 0, 1);
    const auto d = wald_degrade(gt);
    for (std::size_t p = 0; p < 64; ++p) {
        const double m = (gt[p] + gt[64 + p] + gt[128 + p] + gt[192 + p]) / 4.0;
        EXPECT_NEAR(d.pan[p], m, 1e-15);
    }
    EXPECT_THROW(wald_degrade(Tensor({4, 10, 8})), ShapeError);
}

TEST(Samples, PatchDimsAndConsistency) {
    for (std::size_t i = 0; i < 6; ++i) {
        const auto s = make_sample(3, i, 4);
        EXPECT_EQ(s.lr_ms.dims(), (Shape{4, kLrPatch, kLrPatch}));
        EXPECT_EQ(s.pan.dims(), (Shape{1, kHrPatch, kHrPatch}));
        EXPECT_EQ(s.gt.dims(), (Shape{4, kHrPatch, kHrPatch}));
        const auto d = wald_degrade(s.gt);
        EXPECT_LE(max_abs_diff(d.lr_ms, s.lr_ms), 1e-6);
        EXPECT_LE(max_abs_diff(d.pan, s.pan), 1e-6);
    }
    EXPECT_EQ(kLrPatch, 16u);
    EXPECT_EQ(kHrPatch, 64u);
}

// ---------------------------------------------------------------------------
// dataset directories

TEST(Dataset, SplitSizes) {
    EXPECT_EQ(split_sizes(64), (std::array<std::size_t, 3>{48, 8, 8}));
    EXPECT_EQ(split_sizes(3), (std::array<std::size_t, 3>{1, 1, 1}));
    EXPECT_EQ(split_sizes(12), (std::array<std::size_t, 3>{8, 2, 2}));
    EXPECT_THROW(split_sizes(2), ConfigError);
    EXPECT_EQ(parse_split(split_name(Split::val)), Split::val);
    EXPECT_THROW(parse_split("holdout"), ValidationError);
}

TEST(Dataset, WriteReadAndStoredConsistency) {
    const fs::path dir = temp_dir("dataset");
    const auto written = write_dataset(dir, 11, 8, 3);
    const auto m = read_manifest(dir);
    EXPECT_EQ(m.count, 8u);
    EXPECT_EQ(m.bands, 3u);
    EXPECT_EQ(m.seed, 11u);
    ASSERT_EQ(m.rows.size(), 8u);
    EXPECT_EQ(m.rows_for(Split::train).size(), 6u);
    for (const auto& row : m.rows) {
        const auto s = load_sample(dir, row);
        const auto d = wald_degrade(s.gt);
        EXPECT_LE(max_abs_diff(d.lr_ms, s.lr_ms), 1e-6) << row.id;
        EXPECT_LE(max_abs_diff(d.pan, s.pan), 1e-6) << row.id;
    }
    EXPECT_EQ(load_split(dir, m, Split::test).size(), 1u);
    fs::remove(dir / m.rows[0].path);
    EXPECT_THROW(read_manifest(dir), ValidationError);
}

TEST(Dataset, DeterministicBytes) {
    const fs::path a = temp_dir("det_a"), b = temp_dir("det_b");
    write_dataset(a, 7, 4, 4);
    write_dataset(b, 7, 4, 4);
    for (const auto& entry : fs::directory_iterator(a)) {
        std::ifstream fa(entry.path(), std::ios::binary), fb(b / entry.path().filename(), std::ios::binary);
        const std::string ca((std::istreambuf_iterator<char>(fa)), {}), cb((std::istreambuf_iterator<char>(fb)), {});
        EXPECT_EQ(ca, cb) << entry.path();
    }
}

// ---------------------------------------------------------------------------
// PNG

TEST(Png, ConstantImageIsMidGray) {
    const fs::path dir = temp_dir("png_const");
    export_png(Tensor({3, 4, 5}, 0.3), {0, 1, 2}, dir / "c.png");
    const auto img = read_png(dir / "c.png");
    EXPECT_EQ(img.height, 4u);
    EXPECT_EQ(img.width, 5u);
    ASSERT_EQ(img.pixels.size(), 60u);
    for (auto v : img.pixels) EXPECT_EQ(v, 128);
}

TEST(Png, RampIsMonotone) {
    std::vector<double> ramp(256);
    for (std::size_t i = 0; i < 256; ++i) ramp[i] = static_cast<double>(i) / 255.0;
    const auto q = stretch_to_u8(ramp);
    EXPECT_EQ(q.front(), 0);
    EXPECT_EQ(q.back(), 255);
    for (std::size_t i = 1; i < q.size(); ++i) EXPECT_GE(q[i], q[i - 1]);
}

TEST(Png, CompositeAndResidual) {
    const fs::path dir = temp_dir("png_rgb");
    Rng rng(52);
    Tensor img = random_tensor({4, 6, 7}, rng, 0, 1);
    export_png(img, {2, 1, 0}, dir / "rgb.png");
    const auto rgb = read_png(dir / "rgb.png");
    EXPECT_EQ(rgb.height, 6u);
    EXPECT_EQ(rgb.width, 7u);
    EXPECT_EQ(rgb.pixels.size(), 6u * 7u * 3u);
    EXPECT_THROW(export_png(img, {0, 1, 4}, dir / "bad.png"), ConfigError);

    Tensor r({1, 1, 3}, std::vector<double>{-1.0, 0.0, 1.0});
    export_residual_png(r, dir / "res.png");
    const auto res = read_png(dir / "res.png");
    ASSERT_EQ(res.pixels.size(), 9u);
    EXPECT_EQ(res.pixels[2], 255);  // negative: blue
    EXPECT_LT(res.pixels[0], 255);
    EXPECT_EQ(res.pixels[3], 255);  // zero: white
    EXPECT_EQ(res.pixels[4], 255);
    EXPECT_EQ(res.pixels[5], 255);
    EXPECT_EQ(res.pixels[6], 255);  // positive: red
    EXPECT_LT(res.pixels[8], 255);
}
