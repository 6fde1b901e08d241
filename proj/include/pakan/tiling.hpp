#pragma once

#include "pakan/network.hpp"

namespace pakan {

struct TileSpec {
    std::size_t hr_tile = 64;
    std::size_t reflect_pad = 4;

    std::size_t lr_tile() const { return hr_tile / kScaleRatio; }
    /// Adjacent center crops abut exactly.
    std::size_t stride() const { return hr_tile - 2 * reflect_pad; }
    void validate() const;
};

/// Mirror padding without edge repetition of every plane of [C,H,W].
Tensor reflect_pad(const Tensor& chw, std::size_t pad);

/// Tile origins along one padded axis of length `padded`; the last tile is
/// aligned to the far edge. Lengths below one tile give a single origin 0.
std::vector<std::size_t> tile_origins(std::size_t padded, std::size_t tile, std::size_t stride);

/// Sliding-window inference. The MS is upsampled once over the whole image,
/// then MS and PAN are reflection-padded at PAN resolution and cut into
/// hr_tile windows at stride(); each window's central stride() x stride()
/// region is written to the output. An axis no longer than one tile is run as
/// a single padded window along that axis, so a 64x64 image is one window.
Tensor tile_infer(const PansharpNet& net, const Tensor& ms, const Tensor& pan, const TileSpec& spec = {});

}  // namespace pakan
