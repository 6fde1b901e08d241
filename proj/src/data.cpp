#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "pakan/data.hpp"
#include "pakan/error.hpp"
#include "pakan/graph.hpp"
#include "pakan/rng.hpp"

namespace pakan {

namespace fs = std::filesystem;

Tensor normalize(const Tensor& raw) {
    std::size_t bad = 0;
    double lo = 0.0, hi = 0.0;
    for (double v : raw.data()) {
        if (!(v >= 0.0 && v <= kDigitalNumberMax)) {
            if (bad == 0) lo = hi = v;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
            ++bad;
        }
    }
    if (bad) {
        std::ostringstream os;
        os << bad << " raw values outside [0, 2047] (min " << lo << ", max " << hi << ")";
        throw ValidationError(os.str());
    }
    Tensor out = raw;
    for (auto& v : out.data()) v /= kDigitalNumberMax;
    return out;
}

Tensor denormalize(const Tensor& x) {
    Tensor out = x;
    for (auto& v : out.data()) v *= kDigitalNumberMax;
    return out;
}

// ---------------------------------------------------------------------------

namespace {

using Spectrum = std::vector<double>;

// Smooth band-correlated reflectance: a random level and slope plus small per-band jitter.
Spectrum random_material(Rng& rng, std::size_t bands) {
    const double level = rng.uniform(0.1, 0.8);
    const double slope = rng.uniform(-0.35, 0.35);
    const double curve = rng.uniform(-0.2, 0.2);
    Spectrum s(bands);
    for (std::size_t c = 0; c < bands; ++c) {
        const double t = bands > 1 ? static_cast<double>(c) / static_cast<double>(bands - 1) - 0.5 : 0.0;
        s[c] = std::clamp(level + slope * t + curve * (t * t - 1.0 / 12.0) + rng.uniform(-0.04, 0.04), 0.02, 0.98);
    }
    return s;
}

std::ptrdiff_t mirror(std::ptrdiff_t i, std::ptrdiff_t n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) i = i < 0 ? -i : 2 * (n - 1) - i;
    return i;
}

}  // namespace

Tensor synth_scene(std::uint64_t seed, std::size_t bands, std::size_t height, std::size_t width) {
    if (bands == 0) throw ConfigError("synth_scene: bands must be >= 1");
    if (height == 0 || width == 0 || height % 4 || width % 4) {
        throw ConfigError("synth_scene: height/width must be positive multiples of 4, got " + std::to_string(height) +
                          "x" + std::to_string(width));
    }
    Rng rng(seed);
    const std::size_t n_materials = 6;
    std::vector<Spectrum> materials;
    for (std::size_t m = 0; m < n_materials; ++m) materials.push_back(random_material(rng, bands));

    const std::size_t plane = height * width;
    std::vector<double> img(bands * plane);
    const double hh = static_cast<double>(height), ww = static_cast<double>(width);

    // Background: linear gradient between two materials along a random direction.
    {
        const auto& a = materials[rng.below(n_materials)];
        const auto& b = materials[rng.below(n_materials)];
        const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const double dx = std::cos(theta), dy = std::sin(theta);
        for (std::size_t y = 0; y < height; ++y)
            for (std::size_t x = 0; x < width; ++x) {
                const double u = ((static_cast<double>(x) / ww - 0.5) * dx + (static_cast<double>(y) / hh - 0.5) * dy) + 0.5;
                const double t = std::clamp(u, 0.0, 1.0);
                for (std::size_t c = 0; c < bands; ++c) img[c * plane + y * width + x] = (1 - t) * a[c] + t * b[c];
            }
    }

    // Soft Gaussian blobs.
    const std::size_t n_blobs = 3 + rng.below(5);
    for (std::size_t i = 0; i < n_blobs; ++i) {
        const auto& m = materials[rng.below(n_materials)];
        const double cy = rng.uniform(0, hh), cx = rng.uniform(0, ww);
        const double sigma = rng.uniform(hh / 16.0, hh / 4.0);
        const double amp = rng.uniform(0.4, 1.0);
        for (std::size_t y = 0; y < height; ++y)
            for (std::size_t x = 0; x < width; ++x) {
                const double r2 = (static_cast<double>(y) - cy) * (static_cast<double>(y) - cy) +
                                  (static_cast<double>(x) - cx) * (static_cast<double>(x) - cx);
                const double alpha = amp * std::exp(-r2 / (2 * sigma * sigma));
                for (std::size_t c = 0; c < bands; ++c) {
                    double& v = img[c * plane + y * width + x];
                    v = (1 - alpha) * v + alpha * m[c];
                }
            }
    }

    // Sharp-edged rectangles, some with checkerboard fill.
    const std::size_t n_rects = 3 + rng.below(4);
    for (std::size_t i = 0; i < n_rects; ++i) {
        const auto& m1 = materials[rng.below(n_materials)];
        const auto& m2 = materials[rng.below(n_materials)];
        const std::size_t rh = 4 + rng.below(height / 3), rw = 4 + rng.below(width / 3);
        const std::size_t y0 = rng.below(height - std::min(rh, height - 1)), x0 = rng.below(width - std::min(rw, width - 1));
        const bool checker = rng.uniform() < 0.5;
        const std::size_t cell = 2 + rng.below(6);
        for (std::size_t y = y0; y < std::min(height, y0 + rh); ++y)
            for (std::size_t x = x0; x < std::min(width, x0 + rw); ++x) {
                const bool alt = checker && (((y - y0) / cell + (x - x0) / cell) % 2 == 1);
                const auto& m = alt ? m2 : m1;
                for (std::size_t c = 0; c < bands; ++c) img[c * plane + y * width + x] = m[c];
            }
    }

    // Fine sensor-like texture.
    for (auto& v : img) v = std::clamp(v + 0.01 * rng.normal(), 0.0, 1.0);
    return Tensor({bands, height, width}, std::move(img));
}

std::vector<double> gaussian_kernel(double sigma) {
    if (!(sigma > 0)) throw ConfigError("blur sigma must be > 0");
    const auto radius = static_cast<std::ptrdiff_t>(std::lround(4.0 * sigma));
    std::vector<double> k;
    double s = 0.0;
    for (std::ptrdiff_t i = -radius; i <= radius; ++i) {
        k.push_back(std::exp(-static_cast<double>(i * i) / (2 * sigma * sigma)));
        s += k.back();
    }
    for (auto& v : k) v /= s;
    return k;
}

Tensor gaussian_blur(const Tensor& chw, double sigma) {
    if (chw.rank() != 3) throw ShapeError("gaussian_blur: expected [C,H,W], got " + shape_str(chw.dims()));
    const auto k = gaussian_kernel(sigma);
    const auto r = static_cast<std::ptrdiff_t>(k.size() / 2);
    const auto c = chw.dim(0);
    const auto h = static_cast<std::ptrdiff_t>(chw.dim(1)), w = static_cast<std::ptrdiff_t>(chw.dim(2));
    Tensor tmp(chw.dims()), out(chw.dims());
    for (std::size_t b = 0; b < c; ++b) {
        const double* src = chw.raw() + b * h * w;
        double* t = tmp.raw() + b * h * w;
        double* o = out.raw() + b * h * w;
        for (std::ptrdiff_t y = 0; y < h; ++y)
            for (std::ptrdiff_t x = 0; x < w; ++x) {
                double s = 0.0;
                for (std::ptrdiff_t i = -r; i <= r; ++i) s += k[i + r] * src[y * w + mirror(x + i, w)];
                t[y * w + x] = s;
            }
        for (std::ptrdiff_t y = 0; y < h; ++y)
            for (std::ptrdiff_t x = 0; x < w; ++x) {
                double s = 0.0;
                for (std::ptrdiff_t i = -r; i <= r; ++i) s += k[i + r] * t[mirror(y + i, h) * w + x];
                o[y * w + x] = s;
            }
    }
    return out;
}

Tensor blur_decimate(const Tensor& chw, double sigma, std::size_t ratio) {
    Tensor blurred = as_batch(gaussian_blur(chw, sigma));
    return drop_batch(resample_value(blurred, Resample::box_down, ratio));
}

DegradedPair wald_degrade(const Tensor& gt, double blur_sigma) {
    if (gt.rank() != 3) throw ShapeError("wald_degrade: expected [C,H,W], got " + shape_str(gt.dims()));
    if (gt.dim(1) % 4 || gt.dim(2) % 4) {
        throw ShapeError("wald_degrade: height/width " + shape_str(gt.dims()) + " not divisible by 4");
    }
    DegradedPair out;
    out.lr_ms = blur_decimate(gt, blur_sigma, 4);
    for (auto& v : out.lr_ms.data()) v = std::clamp(v, 0.0, 1.0);
    const std::size_t c = gt.dim(0), plane = gt.dim(1) * gt.dim(2);
    out.pan = Tensor({1, gt.dim(1), gt.dim(2)}, 0.0);
    const double alpha = 1.0 / static_cast<double>(c);
    for (std::size_t p = 0; p < plane; ++p) {
        double s = 0.0;
        for (std::size_t b = 0; b < c; ++b) s += alpha * gt[b * plane + p];
        out.pan[p] = std::clamp(s, 0.0, 1.0);
    }
    return out;
}

SamplePair make_sample(std::uint64_t dataset_seed, std::size_t index, std::size_t bands) {
    char id[32];
    std::snprintf(id, sizeof id, "s%04zu", index);
    SamplePair s;
    s.id = id;
    s.gt = round_to_f32(synth_scene(mix_seed(dataset_seed, index), bands, kHrPatch, kHrPatch));
    auto d = wald_degrade(s.gt);
    s.lr_ms = round_to_f32(d.lr_ms);
    s.pan = round_to_f32(d.pan);
    return s;
}

// ---------------------------------------------------------------------------

std::string split_name(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        default: return "test";
    }
}

Split parse_split(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "val") return Split::val;
    if (s == "test") return Split::test;
    throw ValidationError("unknown split tag '" + s + "'");
}

std::vector<ManifestRow> DatasetManifest::rows_for(Split s) const {
    std::vector<ManifestRow> out;
    for (const auto& r : rows)
        if (r.split == s) out.push_back(r);
    return out;
}

std::array<std::size_t, 3> split_sizes(std::size_t count) {
    if (count < 3) throw ConfigError("a dataset needs at least 3 samples (train/val/test), got " + std::to_string(count));
    const std::size_t held = std::max<std::size_t>(1, (count + 4) / 8);
    return {count - 2 * held, held, held};
}

DatasetManifest write_dataset(const fs::path& dir, std::uint64_t seed, std::size_t count, std::size_t bands) {
    const auto sizes = split_sizes(count);
    fs::create_directories(dir);
    DatasetManifest m{count, bands, seed, {}};
    for (std::size_t i = 0; i < count; ++i) {
        const Split split = i < sizes[0] ? Split::train : (i < sizes[0] + sizes[1] ? Split::val : Split::test);
        SamplePair s = make_sample(seed, i, bands);
        const std::string rel = s.id + ".pktn";
        pktn_write(dir / rel, {{"lr_ms", s.lr_ms}, {"pan", s.pan}, {"gt", s.gt}});
        m.rows.push_back({split, s.id, rel});
    }
    std::ofstream os(dir / "manifest.txt", std::ios::trunc);
    os << "# pakan-dataset count=" << count << " bands=" << bands << " seed=" << seed << '\n';
    for (const auto& r : m.rows) os << split_name(r.split) << '\t' << r.id << '\t' << r.path << '\n';
    if (!os) throw Error("failed writing manifest in '" + dir.string() + "'");
    return m;
}

DatasetManifest read_manifest(const fs::path& dir) {
    std::ifstream is(dir / "manifest.txt");
    if (!is) throw Error("missing manifest.txt in '" + dir.string() + "'");
    DatasetManifest m;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream hs(line.substr(1));
            std::string tok;
            while (hs >> tok) {
                const auto eq = tok.find('=');
                if (eq == std::string::npos) continue;
                const auto key = tok.substr(0, eq), val = tok.substr(eq + 1);
                if (key == "count") m.count = std::stoul(val);
                else if (key == "bands") m.bands = std::stoul(val);
                else if (key == "seed") m.seed = std::stoull(val);
            }
            continue;
        }
        std::istringstream ls(line);
        std::string split, id, path;
        if (!std::getline(ls, split, '\t') || !std::getline(ls, id, '\t') || !std::getline(ls, path)) {
            throw ValidationError("malformed manifest line: '" + line + "'");
        }
        if (!fs::exists(dir / path)) throw ValidationError("manifest lists missing file '" + path + "'");
        m.rows.push_back({parse_split(split), id, path});
    }
    if (m.count == 0) m.count = m.rows.size();
    return m;
}

SamplePair load_sample(const fs::path& dir, const ManifestRow& row) {
    const auto entries = pktn_read(dir / row.path);
    SamplePair s{row.id, find_entry(entries, "lr_ms"), find_entry(entries, "pan"), find_entry(entries, "gt")};
    if (s.pan.rank() != 3 || s.lr_ms.rank() != 3 || s.gt.rank() != 3 || s.pan.dim(1) != 4 * s.lr_ms.dim(1) ||
        s.pan.dim(2) != 4 * s.lr_ms.dim(2) || s.gt.dims() != Shape{s.lr_ms.dim(0), s.pan.dim(1), s.pan.dim(2)}) {
        throw ValidationError("sample '" + row.id + "' has inconsistent dims");
    }
    return s;
}

std::vector<SamplePair> load_split(const fs::path& dir, const DatasetManifest& m, Split s) {
    std::vector<SamplePair> out;
    for (const auto& r : m.rows_for(s)) out.push_back(load_sample(dir, r));
    return out;
}

}  // namespace pakan
