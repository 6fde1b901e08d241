#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include "pakan/data.hpp"
#include "pakan/error.hpp"

namespace pakan {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void write_rgb(const std::filesystem::path& path, std::size_t h, std::size_t w, const std::vector<std::uint8_t>& rgb) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw Error("cannot open '" + path.string() + "' for writing");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, nullptr);
        throw Error("libpng initialisation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error("libpng failed writing '" + path.string() + "'");
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (std::size_t y = 0; y < h; ++y) png_write_row(png, const_cast<png_bytep>(rgb.data() + y * w * 3));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace

std::vector<std::uint8_t> stretch_to_u8(std::span<const double> band) {
    std::vector<std::uint8_t> out(band.size(), 128);
    if (band.empty()) return out;
    const auto [lo, hi] = std::minmax_element(band.begin(), band.end());
    const double a = *lo, b = *hi;
    if (!(b > a)) return out;
    for (std::size_t i = 0; i < band.size(); ++i) {
        out[i] = static_cast<std::uint8_t>(std::lround(std::clamp((band[i] - a) / (b - a), 0.0, 1.0) * 255.0));
    }
    return out;
}

void export_png(const Tensor& chw, std::array<std::size_t, 3> bands, const std::filesystem::path& path) {
    if (chw.rank() != 3) throw ShapeError("export_png: expected [C,H,W], got " + shape_str(chw.dims()));
    const std::size_t c = chw.dim(0), h = chw.dim(1), w = chw.dim(2), plane = h * w;
    for (auto b : bands) {
        if (b >= c) throw ConfigError("export_png: band index " + std::to_string(b) + " out of range for " + std::to_string(c) + " bands");
    }
    std::vector<std::uint8_t> rgb(plane * 3);
    for (int k = 0; k < 3; ++k) {
        const auto q = stretch_to_u8(std::span<const double>(chw.raw() + bands[k] * plane, plane));
        for (std::size_t p = 0; p < plane; ++p) rgb[p * 3 + k] = q[p];
    }
    write_rgb(path, h, w, rgb);
}

void export_residual_png(const Tensor& band, const std::filesystem::path& path) {
    std::size_t h = 0, w = 0;
    if (band.rank() == 2) {
        h = band.dim(0), w = band.dim(1);
    } else if (band.rank() == 3 && band.dim(0) == 1) {
        h = band.dim(1), w = band.dim(2);
    } else {
        throw ShapeError("export_residual_png: expected [H,W] or [1,H,W], got " + shape_str(band.dims()));
    }
    double m = 0.0;
    for (double v : band.data()) m = std::max(m, std::abs(v));
    std::vector<std::uint8_t> rgb(h * w * 3, 255);
    for (std::size_t p = 0; p < h * w; ++p) {
        const double t = m > 0 ? band[p] / m : 0.0;
        const auto fade = static_cast<std::uint8_t>(std::lround(255.0 * (1.0 - std::abs(t))));
        // negative -> blue, positive -> red, both fading to white at zero
        if (t < 0) rgb[p * 3] = rgb[p * 3 + 1] = fade;
        else rgb[p * 3 + 1] = rgb[p * 3 + 2] = fade;
    }
    write_rgb(path, h, w, rgb);
}

RgbImage read_png(const std::filesystem::path& path) {
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&img, path.c_str())) {
        throw Error("cannot decode PNG '" + path.string() + "': " + img.message);
    }
    img.format = PNG_FORMAT_RGB;
    RgbImage out;
    out.height = img.height;
    out.width = img.width;
    out.pixels.resize(PNG_IMAGE_SIZE(img));
    if (!png_image_finish_read(&img, nullptr, out.pixels.data(), 0, nullptr)) {
        png_image_free(&img);
        throw Error("cannot decode PNG '" + path.string() + "': " + img.message);
    }
    return out;
}

}  // namespace pakan
