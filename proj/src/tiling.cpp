#include "pakan/tiling.hpp"

#include <algorithm>

#include "pakan/error.hpp"

namespace pakan {

namespace {

std::size_t mirror_index(std::ptrdiff_t i, std::ptrdiff_t n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) i = i < 0 ? -i : 2 * (n - 1) - i;
    return static_cast<std::size_t>(i);
}

Tensor crop(const Tensor& chw, std::size_t y0, std::size_t x0, std::size_t h, std::size_t w) {
    const std::size_t c = chw.dim(0), H = chw.dim(1), W = chw.dim(2);
    Tensor out({c, h, w});
    for (std::size_t b = 0; b < c; ++b)
        for (std::size_t y = 0; y < h; ++y)
            std::copy_n(chw.raw() + (b * H + y0 + y) * W + x0, w, out.raw() + (b * h + y) * w);
    return out;
}

}  // namespace

void TileSpec::validate() const {
    if (hr_tile == 0 || hr_tile % kScaleRatio) throw ConfigError("tile size must be a positive multiple of 4");
    if (2 * reflect_pad >= hr_tile) throw ConfigError("reflection pad leaves no tile center");
}

Tensor reflect_pad(const Tensor& chw, std::size_t pad) {
    if (chw.rank() != 3) throw ShapeError("reflect_pad: expected [C,H,W], got " + shape_str(chw.dims()));
    const std::size_t c = chw.dim(0), h = chw.dim(1), w = chw.dim(2);
    if (pad > 0 && (pad >= h || pad >= w)) {
        throw ShapeError("reflect_pad: pad " + std::to_string(pad) + " needs an image larger than " + shape_str(chw.dims()));
    }
    const std::size_t ph = h + 2 * pad, pw = w + 2 * pad;
    const auto sp = static_cast<std::ptrdiff_t>(pad);
    Tensor out({c, ph, pw});
    for (std::size_t b = 0; b < c; ++b)
        for (std::size_t y = 0; y < ph; ++y) {
            const std::size_t sy = mirror_index(static_cast<std::ptrdiff_t>(y) - sp, static_cast<std::ptrdiff_t>(h));
            for (std::size_t x = 0; x < pw; ++x) {
                const std::size_t sx = mirror_index(static_cast<std::ptrdiff_t>(x) - sp, static_cast<std::ptrdiff_t>(w));
                out[(b * ph + y) * pw + x] = chw[(b * h + sy) * w + sx];
            }
        }
    return out;
}

std::vector<std::size_t> tile_origins(std::size_t padded, std::size_t tile, std::size_t stride) {
    if (padded <= tile) return {0};
    std::vector<std::size_t> o;
    for (std::size_t s = 0; s + tile < padded; s += stride) o.push_back(s);
    o.push_back(padded - tile);
    return o;
}

Tensor tile_infer(const PansharpNet& net, const Tensor& ms, const Tensor& pan, const TileSpec& spec) {
    spec.validate();
    if (ms.rank() != 3 || pan.rank() != 3 || pan.dim(0) != 1) {
        throw ShapeError("tile_infer: expected ms [C,h,w] and pan [1,H,W], got " + shape_str(ms.dims()) + " and " +
                         shape_str(pan.dims()));
    }
    if (pan.dim(1) != kScaleRatio * ms.dim(1) || pan.dim(2) != kScaleRatio * ms.dim(2)) {
        throw ShapeError("tile_infer: PAN " + shape_str(pan.dims()) + " is not 4x MS " + shape_str(ms.dims()));
    }
    const std::size_t c = ms.dim(0), H = pan.dim(1), W = pan.dim(2), pad = spec.reflect_pad;
    const Tensor up = drop_batch(resample_value(as_batch(ms), Resample::bilinear_up, kScaleRatio));
    const Tensor up_p = reflect_pad(up, pad), pan_p = reflect_pad(pan, pad);
    const std::size_t PH = H + 2 * pad, PW = W + 2 * pad;

    // an axis no longer than one tile is covered by a single padded window
    const std::size_t th = H <= spec.hr_tile ? PH : spec.hr_tile, tw = W <= spec.hr_tile ? PW : spec.hr_tile;
    const auto ys = H <= spec.hr_tile ? std::vector<std::size_t>{0} : tile_origins(PH, th, spec.stride());
    const auto xs = W <= spec.hr_tile ? std::vector<std::size_t>{0} : tile_origins(PW, tw, spec.stride());

    Tensor out({c, H, W});
    for (std::size_t ty : ys) {
        for (std::size_t tx : xs) {
            const Tensor ms_t = crop(up_p, ty, tx, th, tw), pan_t = crop(pan_p, ty, tx, th, tw);
            const Tensor pred = network_forward_upsampled(net, Var::constant(as_batch(ms_t)), Var::constant(as_batch(pan_t))).value();
            // center region in padded coordinates is [t+pad, t+th-pad); image coordinate = padded - pad
            const std::size_t ch = th - 2 * pad, cw = tw - 2 * pad;
            for (std::size_t b = 0; b < c; ++b)
                for (std::size_t y = 0; y < ch; ++y)
                    std::copy_n(pred.raw() + (b * th + pad + y) * tw + pad, cw, out.raw() + (b * H + ty + y) * W + tx);
        }
    }
    return out;
}

}  // namespace pakan
