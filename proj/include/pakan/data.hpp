#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "pakan/tensor.hpp"

namespace pakan {

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

// ---------------------------------------------------------------------------
// PKTN container
//
//   "PKTN" | u8 version (1) | u32 entry count
//   per entry: u16 name length | UTF-8 name | u8 rank | u32 dims[rank] | f32 payload (row-major)
//
// All integers and reals little-endian. Values are rounded to binary32 on write.

inline constexpr std::uint8_t kPktnVersion = 1;

std::vector<std::uint8_t> pktn_encode(const NamedTensors& entries);
NamedTensors pktn_decode(const std::vector<std::uint8_t>& bytes);
void pktn_write(const std::filesystem::path& path, const NamedTensors& entries);
NamedTensors pktn_read(const std::filesystem::path& path);

/// Entry lookup by name; throws ValidationError when absent.
const Tensor& find_entry(const NamedTensors& entries, const std::string& name);

/// Rounds every value to the nearest binary32, the precision stored on disk.
Tensor round_to_f32(const Tensor& t);

// ---------------------------------------------------------------------------
// Radiometry

inline constexpr double kDigitalNumberMax = 2047.0;

/// raw / 2047. Throws ValidationError listing the count and extrema of out-of-range values.
Tensor normalize(const Tensor& raw);
Tensor denormalize(const Tensor& x);

// ---------------------------------------------------------------------------
// Scenes and degradation

/// Deterministic synthetic multispectral scene [C,H,W] in [0,1]: a linear
/// gradient between two materials, Gaussian blobs, and sharp-edged rectangles
/// (some filled with checkerboards), each material a seeded spectral signature.
Tensor synth_scene(std::uint64_t seed, std::size_t bands, std::size_t height, std::size_t width);

inline constexpr double kDefaultBlurSigma = 1.0;

/// Normalized discrete Gaussian taps, radius round(4*sigma).
std::vector<double> gaussian_kernel(double sigma);
/// Separable Gaussian blur of every band of [C,H,W], mirrored (reflect-101) borders.
Tensor gaussian_blur(const Tensor& chw, double sigma);
/// Gaussian blur followed by box decimation by `ratio`.
Tensor blur_decimate(const Tensor& chw, double sigma, std::size_t ratio);

struct DegradedPair {
    Tensor lr_ms;  // [C,h,w]
    Tensor pan;    // [1,4h,4w]
};

/// Reduced-resolution pair: lr_ms = box_down4(blur(gt)), pan = band mean of gt, both clipped to [0,1].
DegradedPair wald_degrade(const Tensor& gt, double blur_sigma = kDefaultBlurSigma);

struct SamplePair {
    std::string id;
    Tensor lr_ms;  // [C,16,16]
    Tensor pan;    // [1,64,64]
    Tensor gt;     // [C,64,64]
};

inline constexpr std::size_t kHrPatch = 64;
inline constexpr std::size_t kLrPatch = 16;

/// One synthetic sample at binary32 precision; lr_ms/pan are degraded from the rounded gt.
SamplePair make_sample(std::uint64_t dataset_seed, std::size_t index, std::size_t bands);

// ---------------------------------------------------------------------------
// Dataset directory: manifest.txt + one <id>.pktn per sample (entries lr_ms, pan, gt).

enum class Split { train, val, test };
std::string split_name(Split s);
Split parse_split(const std::string& s);

struct ManifestRow {
    Split split;
    std::string id;
    std::string path;  // relative to the dataset directory
};

struct DatasetManifest {
    std::size_t count = 0;
    std::size_t bands = 0;
    std::uint64_t seed = 0;
    std::vector<ManifestRow> rows;

    std::vector<ManifestRow> rows_for(Split s) const;
};

/// Split sizes: val = test = max(1, round(count/8)), the rest train. Needs count >= 3.
std::array<std::size_t, 3> split_sizes(std::size_t count);

DatasetManifest write_dataset(const std::filesystem::path& dir, std::uint64_t seed, std::size_t count, std::size_t bands);
/// Parses manifest.txt and checks that every listed file exists.
DatasetManifest read_manifest(const std::filesystem::path& dir);
SamplePair load_sample(const std::filesystem::path& dir, const ManifestRow& row);
std::vector<SamplePair> load_split(const std::filesystem::path& dir, const DatasetManifest& m, Split s);

// ---------------------------------------------------------------------------
// PNG

/// 8-bit RGB composite of three bands of [C,H,W], each min-max stretched
/// independently; a constant band maps to 128.
void export_png(const Tensor& chw, std::array<std::size_t, 3> bands, const std::filesystem::path& path);
/// Signed residual map of a single band ([H,W] or [1,H,W]): blue for negative,
/// white for zero, red for positive, symmetric about zero.
void export_residual_png(const Tensor& band, const std::filesystem::path& path);

struct RgbImage {
    std::size_t height = 0, width = 0;
    std::vector<std::uint8_t> pixels;  // row-major RGB triplets
};
RgbImage read_png(const std::filesystem::path& path);

/// Min-max stretch of one band into 0..255 (constant input -> 128).
std::vector<std::uint8_t> stretch_to_u8(std::span<const double> band);

}  // namespace pakan
