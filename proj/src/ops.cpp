#include <Eigen/Core>
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "pakan/error.hpp"
#include "pakan/graph.hpp"

namespace pakan {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

void require_rank4(const Tensor& t, const char* op, const char* arg) {
    if (t.rank() != 4) {
        throw ShapeError(std::string(op) + ": " + arg + " must be [B,C,H,W], got " + shape_str(t.dims()));
    }
}

struct ConvGeom {
    std::size_t batch, cin, h, w, cout, kh, kw, pad, oh, ow;
    std::size_t col_rows() const { return cin * kh * kw; }
    std::size_t out_plane() const { return oh * ow; }
    bool pointwise() const { return kh == 1 && kw == 1 && pad == 0; }
};

ConvGeom conv_geometry(const Tensor& x, const Tensor& k, const Tensor* bias, std::size_t pad) {
    require_rank4(x, "conv2d", "input");
    if (k.rank() != 4) throw ShapeError("conv2d: kernel must be [Cout,Cin,kh,kw], got " + shape_str(k.dims()));
    ConvGeom g{x.dim(0), x.dim(1), x.dim(2), x.dim(3), k.dim(0), k.dim(2), k.dim(3), pad, 0, 0};
    if (k.dim(1) != g.cin) {
        throw ShapeError("conv2d: input channel axis (" + std::to_string(g.cin) + ") != kernel Cin axis (" +
                         std::to_string(k.dim(1)) + ")");
    }
    if (g.kh % 2 == 0 || g.kw % 2 == 0) throw ShapeError("conv2d: kernel height/width axes must be odd, got " + shape_str(k.dims()));
    if (g.h + 2 * pad < g.kh || g.w + 2 * pad < g.kw) {
        throw ShapeError("conv2d: kernel " + shape_str(k.dims()) + " larger than padded input " + shape_str(x.dims()));
    }
    if (bias && bias->numel() != g.cout) {
        throw ShapeError("conv2d: bias length " + std::to_string(bias->numel()) + " != kernel Cout axis " +
                         std::to_string(g.cout));
    }
    g.oh = g.h + 2 * pad - g.kh + 1;
    g.ow = g.w + 2 * pad - g.kw + 1;
    return g;
}

void im2col(const ConvGeom& g, const double* img, double* col) {
    const std::size_t plane = g.out_plane();
    for (std::size_t c = 0; c < g.cin; ++c) {
        const double* src = img + c * g.h * g.w;
        for (std::size_t ky = 0; ky < g.kh; ++ky) {
            for (std::size_t kx = 0; kx < g.kw; ++kx) {
                double* dst = col + ((c * g.kh + ky) * g.kw + kx) * plane;
                for (std::size_t oy = 0; oy < g.oh; ++oy) {
                    const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy + ky) - static_cast<std::ptrdiff_t>(g.pad);
                    double* row = dst + oy * g.ow;
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) {
                        std::fill(row, row + g.ow, 0.0);
                        continue;
                    }
                    const double* srow = src + iy * g.w;
                    for (std::size_t ox = 0; ox < g.ow; ++ox) {
                        const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox + kx) - static_cast<std::ptrdiff_t>(g.pad);
                        row[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) ? 0.0 : srow[ix];
                    }
                }
            }
        }
    }
}

void col2im_add(const ConvGeom& g, const double* col, double* img) {
    const std::size_t plane = g.out_plane();
    for (std::size_t c = 0; c < g.cin; ++c) {
        double* dst = img + c * g.h * g.w;
        for (std::size_t ky = 0; ky < g.kh; ++ky) {
            for (std::size_t kx = 0; kx < g.kw; ++kx) {
                const double* src = col + ((c * g.kh + ky) * g.kw + kx) * plane;
                for (std::size_t oy = 0; oy < g.oh; ++oy) {
                    const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy + ky) - static_cast<std::ptrdiff_t>(g.pad);
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
                    const double* row = src + oy * g.ow;
                    double* drow = dst + iy * g.w;
                    for (std::size_t ox = 0; ox < g.ow; ++ox) {
                        const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox + kx) - static_cast<std::ptrdiff_t>(g.pad);
                        if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(g.w)) drow[ix] += row[ox];
                    }
                }
            }
        }
    }
}

// `keep` (optional) receives the im2col matrices of every batch item for reuse in backward.
Tensor conv_forward(const ConvGeom& g, const Tensor& x, const Tensor& k, const Tensor* bias,
                    std::vector<double>* keep = nullptr) {
    Tensor out({g.batch, g.cout, g.oh, g.ow});
    const std::size_t plane = g.out_plane();
    const std::size_t col_size = g.pointwise() ? 0 : g.col_rows() * plane;
    CMapMat km(k.raw(), g.cout, g.col_rows());
    std::vector<double> scratch;
    if (keep) keep->resize(col_size * g.batch);
    else scratch.resize(col_size);
    for (std::size_t b = 0; b < g.batch; ++b) {
        const double* img = x.raw() + b * g.cin * g.h * g.w;
        const double* colp = img;
        if (!g.pointwise()) {
            double* col = keep ? keep->data() + b * col_size : scratch.data();
            im2col(g, img, col);
            colp = col;
        }
        MapMat om(out.raw() + b * g.cout * plane, g.cout, plane);
        om.noalias() = km * CMapMat(colp, g.col_rows(), plane);
        if (bias) {
            for (std::size_t o = 0; o < g.cout; ++o) om.row(o).array() += (*bias)[o];
        }
    }
    return out;
}

// Broadcast helpers for binary elementwise kinds.
struct Broadcast {
    std::array<std::size_t, 4> out{1, 1, 1, 1};
    std::array<std::size_t, 4> sx{}, sy{};  // strides, 0 on broadcast axes
    Shape dims;
};

Broadcast broadcast_plan(const Tensor& x, const Tensor& y, const char* op) {
    if (x.rank() != y.rank()) {
        throw ShapeError(std::string(op) + ": rank mismatch " + shape_str(x.dims()) + " vs " + shape_str(y.dims()));
    }
    Broadcast p;
    const std::size_t r = x.rank();
    std::array<std::size_t, 4> dx{1, 1, 1, 1}, dy{1, 1, 1, 1};
    for (std::size_t i = 0; i < r; ++i) {
        dx[4 - r + i] = x.dim(i);
        dy[4 - r + i] = y.dim(i);
    }
    for (std::size_t i = 0; i < 4; ++i) {
        if (dx[i] != dy[i] && dx[i] != 1 && dy[i] != 1) {
            throw ShapeError(std::string(op) + ": cannot broadcast axis " + std::to_string(i + r - 4) + " of " +
                             shape_str(x.dims()) + " against " + shape_str(y.dims()));
        }
        p.out[i] = std::max(dx[i], dy[i]);
    }
    std::size_t ax = 1, ay = 1;
    for (int i = 3; i >= 0; --i) {
        p.sx[i] = dx[i] == 1 ? 0 : ax;
        p.sy[i] = dy[i] == 1 ? 0 : ay;
        ax *= dx[i];
        ay *= dy[i];
    }
    for (std::size_t i = 4 - r; i < 4; ++i) p.dims.push_back(p.out[i]);
    return p;
}

template <class F>
void for_each_broadcast(const Broadcast& p, F&& f) {
    std::size_t o = 0;
    for (std::size_t a = 0; a < p.out[0]; ++a)
        for (std::size_t b = 0; b < p.out[1]; ++b)
            for (std::size_t c = 0; c < p.out[2]; ++c)
                for (std::size_t d = 0; d < p.out[3]; ++d, ++o)
                    f(o, a * p.sx[0] + b * p.sx[1] + c * p.sx[2] + d * p.sx[3],
                      a * p.sy[0] + b * p.sy[1] + c * p.sy[2] + d * p.sy[3]);
}

double stable_sigmoid(double v) {
    constexpr double hi = 1.0 - std::numeric_limits<double>::epsilon() / 2;
    const double s = v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
    return std::clamp(s, std::numeric_limits<double>::min(), hi);
}

Var binary(const Var& x, const Var& y, Elementwise kind) {
    const char* name = kind == Elementwise::add ? "add" : kind == Elementwise::sub ? "sub" : "mul";
    Broadcast plan = broadcast_plan(x.value(), y.value(), name);
    Tensor out(plan.dims);
    const double* xv = x.value().raw();
    const double* yv = y.value().raw();
    double* ov = out.raw();
    switch (kind) {
        case Elementwise::add: for_each_broadcast(plan, [&](auto o, auto i, auto j) { ov[o] = xv[i] + yv[j]; }); break;
        case Elementwise::sub: for_each_broadcast(plan, [&](auto o, auto i, auto j) { ov[o] = xv[i] - yv[j]; }); break;
        default: for_each_broadcast(plan, [&](auto o, auto i, auto j) { ov[o] = xv[i] * yv[j]; }); break;
    }
    return record(std::move(out), {x, y}, [plan, kind](Node& self) {
        Node& nx = *self.parents[0];
        Node& ny = *self.parents[1];
        const double* g = self.grad.raw();
        if (nx.requires_grad) {
            Tensor gx(nx.value.dims(), 0.0);
            double* d = gx.raw();
            const double* yv = ny.value.raw();
            if (kind == Elementwise::mul) {
                for_each_broadcast(plan, [&](auto o, auto i, auto j) { d[i] += g[o] * yv[j]; });
            } else {
                for_each_broadcast(plan, [&](auto o, auto i, auto) { d[i] += g[o]; });
            }
            accumulate_grad(nx, gx);
        }
        if (ny.requires_grad) {
            Tensor gy(ny.value.dims(), 0.0);
            double* d = gy.raw();
            const double* xv = nx.value.raw();
            if (kind == Elementwise::mul) {
                for_each_broadcast(plan, [&](auto o, auto i, auto j) { d[j] += g[o] * xv[i]; });
            } else if (kind == Elementwise::sub) {
                for_each_broadcast(plan, [&](auto o, auto, auto j) { d[j] -= g[o]; });
            } else {
                for_each_broadcast(plan, [&](auto o, auto, auto j) { d[j] += g[o]; });
            }
            accumulate_grad(ny, gy);
        }
    });
}

Var unary(const Var& x, Elementwise kind) {
    Tensor out(x.dims());
    const double* xv = x.value().raw();
    double* ov = out.raw();
    const std::size_t n = out.numel();
    switch (kind) {
        case Elementwise::sigmoid: for (std::size_t i = 0; i < n; ++i) ov[i] = stable_sigmoid(xv[i]); break;
        case Elementwise::tanh: for (std::size_t i = 0; i < n; ++i) ov[i] = std::tanh(xv[i]); break;
        default: for (std::size_t i = 0; i < n; ++i) ov[i] = xv[i] > 0 ? xv[i] : 0.0; break;
    }
    return record(std::move(out), {x}, [kind](Node& self) {
        Node& nx = *self.parents[0];
        const double* g = self.grad.raw();
        const double* y = self.value.raw();
        const double* xv = nx.value.raw();
        Tensor gx(nx.value.dims());
        double* d = gx.raw();
        const std::size_t n = gx.numel();
        switch (kind) {
            case Elementwise::sigmoid: for (std::size_t i = 0; i < n; ++i) d[i] = g[i] * y[i] * (1.0 - y[i]); break;
            case Elementwise::tanh: for (std::size_t i = 0; i < n; ++i) d[i] = g[i] * (1.0 - y[i] * y[i]); break;
            default: for (std::size_t i = 0; i < n; ++i) d[i] = xv[i] > 0 ? g[i] : 0.0; break;
        }
        accumulate_grad(nx, gx);
    });
}

// Separable bilinear taps, align-corners disabled (half-pixel centers, edge clamp).
struct Taps {
    std::vector<std::size_t> i0, i1;
    std::vector<double> w1;
};

Taps bilinear_taps(std::size_t in, std::size_t factor) {
    Taps t;
    const std::size_t out = in * factor;
    t.i0.resize(out);
    t.i1.resize(out);
    t.w1.resize(out);
    for (std::size_t o = 0; o < out; ++o) {
        double src = (static_cast<double>(o) + 0.5) / static_cast<double>(factor) - 0.5;
        if (src < 0) src = 0;
        std::size_t a = static_cast<std::size_t>(src);
        if (a > in - 1) a = in - 1;
        t.i0[o] = a;
        t.i1[o] = a + 1 < in ? a + 1 : a;
        t.w1[o] = src - static_cast<double>(a);
    }
    return t;
}

}  // namespace

// ---------------------------------------------------------------------------

Tensor conv2d_value(const Tensor& x, const Tensor& kernel, const Tensor* bias, std::size_t padding) {
    return conv_forward(conv_geometry(x, kernel, bias, padding), x, kernel, bias);
}

Var conv2d(const Var& x, const Var& kernel, const Var& bias, std::size_t padding) {
    const Tensor* bptr = bias.valid() ? &bias.value() : nullptr;
    ConvGeom g = conv_geometry(x.value(), kernel.value(), bptr, padding);
    auto cols = std::make_shared<std::vector<double>>();
    const bool keep = kernel.requires_grad() && !g.pointwise();
    Tensor out = conv_forward(g, x.value(), kernel.value(), bptr, keep ? cols.get() : nullptr);
    std::vector<Var> parents{x, kernel};
    if (bias.valid()) parents.push_back(bias);
    return record(std::move(out), std::move(parents), [g, cols](Node& self) {
        Node& nx = *self.parents[0];
        Node& nk = *self.parents[1];
        Node* nb = self.parents.size() > 2 ? self.parents[2].get() : nullptr;
        const std::size_t plane = g.out_plane();
        const std::size_t col_size = g.pointwise() ? 0 : g.col_rows() * plane;
        Tensor gx = nx.requires_grad ? Tensor(nx.value.dims(), 0.0) : Tensor();
        Tensor gk = nk.requires_grad ? Tensor(nk.value.dims(), 0.0) : Tensor();
        Tensor gb = (nb && nb->requires_grad) ? Tensor(nb->value.dims(), 0.0) : Tensor();
        std::vector<double> dcol(nx.requires_grad ? col_size : 0);
        CMapMat km(nk.value.raw(), g.cout, g.col_rows());
        for (std::size_t b = 0; b < g.batch; ++b) {
            CMapMat gm(self.grad.raw() + b * g.cout * plane, g.cout, plane);
            const double* img = nx.value.raw() + b * g.cin * g.h * g.w;
            if (nk.requires_grad) {
                const double* colp = g.pointwise() ? img : cols->data() + b * col_size;
                MapMat(gk.raw(), g.cout, g.col_rows()).noalias() += gm * CMapMat(colp, g.col_rows(), plane).transpose();
            }
            if (nx.requires_grad) {
                double* dimg = gx.raw() + b * g.cin * g.h * g.w;
                if (g.pointwise()) {
                    MapMat(dimg, g.cin, plane).noalias() += km.transpose() * gm;
                } else {
                    MapMat(dcol.data(), g.col_rows(), plane).noalias() = km.transpose() * gm;
                    col2im_add(g, dcol.data(), dimg);
                }
            }
            if (!gb.empty()) {
                // plain loop: Eigen's redux peels by pointer alignment, which breaks bit-reproducibility
                const double* gp = self.grad.raw() + b * g.cout * plane;
                for (std::size_t o = 0; o < g.cout; ++o) {
                    double acc = 0.0;
                    for (std::size_t i = 0; i < plane; ++i) acc += gp[o * plane + i];
                    gb[o] += acc;
                }
            }
        }
        if (nx.requires_grad) accumulate_grad(nx, gx);
        if (nk.requires_grad) accumulate_grad(nk, gk);
        if (!gb.empty()) accumulate_grad(*nb, gb);
    });
}

Var elementwise(const Var& x, Elementwise kind, const Var& y) {
    switch (kind) {
        case Elementwise::add:
        case Elementwise::sub:
        case Elementwise::mul:
            if (!y.valid()) throw ShapeError("binary elementwise kind needs a second operand");
            return binary(x, y, kind);
        default:
            return unary(x, kind);
    }
}

Var add(const Var& x, const Var& y) { return binary(x, y, Elementwise::add); }
Var sub(const Var& x, const Var& y) { return binary(x, y, Elementwise::sub); }
Var mul(const Var& x, const Var& y) { return binary(x, y, Elementwise::mul); }
Var sigmoid(const Var& x) { return unary(x, Elementwise::sigmoid); }
Var tanh(const Var& x) { return unary(x, Elementwise::tanh); }
Var relu(const Var& x) { return unary(x, Elementwise::relu); }

Var scale(const Var& x, double factor) {
    Tensor out = x.value();
    for (auto& v : out.data()) v *= factor;
    return record(std::move(out), {x}, [factor](Node& self) {
        Tensor g = self.grad;
        for (auto& v : g.data()) v *= factor;
        accumulate_grad(*self.parents[0], g);
    });
}

Tensor concat_channels_value(const Tensor& x, const Tensor& y) {
    require_rank4(x, "concat_channels", "x");
    require_rank4(y, "concat_channels", "y");
    if (x.dim(0) != y.dim(0) || x.dim(2) != y.dim(2) || x.dim(3) != y.dim(3)) {
        throw ShapeError("concat_channels: batch/height/width axes differ: " + shape_str(x.dims()) + " vs " +
                         shape_str(y.dims()));
    }
    const std::size_t plane = x.dim(2) * x.dim(3);
    const std::size_t c1 = x.dim(1), c2 = y.dim(1);
    Tensor out({x.dim(0), c1 + c2, x.dim(2), x.dim(3)});
    for (std::size_t b = 0; b < x.dim(0); ++b) {
        double* dst = out.raw() + b * (c1 + c2) * plane;
        std::copy_n(x.raw() + b * c1 * plane, c1 * plane, dst);
        std::copy_n(y.raw() + b * c2 * plane, c2 * plane, dst + c1 * plane);
    }
    return out;
}

Var concat_channels(const Var& x, const Var& y) {
    Tensor out = concat_channels_value(x.value(), y.value());
    return record(std::move(out), {x, y}, [](Node& self) {
        Node& nx = *self.parents[0];
        Node& ny = *self.parents[1];
        const std::size_t c1 = nx.value.dim(1);
        if (nx.requires_grad) accumulate_grad(nx, self.grad.slice_channels(0, c1));
        if (ny.requires_grad) accumulate_grad(ny, self.grad.slice_channels(c1, ny.value.dim(1)));
    });
}

Var global_avg_pool(const Var& x) {
    require_rank4(x.value(), "global_avg_pool", "input");
    const auto& d = x.dims();
    if (d[2] == 0 || d[3] == 0) throw ShapeError("global_avg_pool: empty spatial axes in " + shape_str(d));
    const std::size_t plane = d[2] * d[3];
    Tensor out({d[0], d[1], 1, 1});
    for (std::size_t bc = 0; bc < d[0] * d[1]; ++bc) {
        const double* src = x.value().raw() + bc * plane;
        double s = 0.0;
        for (std::size_t i = 0; i < plane; ++i) s += src[i];
        out[bc] = s / static_cast<double>(plane);
    }
    return record(std::move(out), {x}, [plane](Node& self) {
        Node& nx = *self.parents[0];
        Tensor gx(nx.value.dims());
        for (std::size_t bc = 0; bc < self.grad.numel(); ++bc) {
            std::fill_n(gx.raw() + bc * plane, plane, self.grad[bc] / static_cast<double>(plane));
        }
        accumulate_grad(nx, gx);
    });
}

Tensor resample_value(const Tensor& x, Resample mode, std::size_t factor) {
    require_rank4(x, "resample", "input");
    if (factor < 2) throw ShapeError("resample: factor must be >= 2, got " + std::to_string(factor));
    const std::size_t nb = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
    if (mode == Resample::box_down) {
        if (h % factor || w % factor) {
            throw ShapeError("resample(box_down): height/width axes " + shape_str(x.dims()) + " not divisible by " +
                             std::to_string(factor));
        }
        const std::size_t oh = h / factor, ow = w / factor;
        const double inv = 1.0 / static_cast<double>(factor * factor);
        Tensor out({x.dim(0), x.dim(1), oh, ow});
        for (std::size_t p = 0; p < nb; ++p) {
            const double* src = x.raw() + p * h * w;
            double* dst = out.raw() + p * oh * ow;
            for (std::size_t oy = 0; oy < oh; ++oy)
                for (std::size_t ox = 0; ox < ow; ++ox) {
                    double s = 0.0;
                    for (std::size_t dy = 0; dy < factor; ++dy)
                        for (std::size_t dx = 0; dx < factor; ++dx) s += src[(oy * factor + dy) * w + ox * factor + dx];
                    dst[oy * ow + ox] = s * inv;
                }
        }
        return out;
    }
    const Taps ty = bilinear_taps(h, factor), tx = bilinear_taps(w, factor);
    const std::size_t oh = h * factor, ow = w * factor;
    Tensor out({x.dim(0), x.dim(1), oh, ow});
    std::vector<double> rowbuf(ow);
    for (std::size_t p = 0; p < nb; ++p) {
        const double* src = x.raw() + p * h * w;
        double* dst = out.raw() + p * oh * ow;
        for (std::size_t oy = 0; oy < oh; ++oy) {
            const double* r0 = src + ty.i0[oy] * w;
            const double* r1 = src + ty.i1[oy] * w;
            const double wy = ty.w1[oy];
            for (std::size_t ox = 0; ox < ow; ++ox) {
                const double a = (1 - tx.w1[ox]) * r0[tx.i0[ox]] + tx.w1[ox] * r0[tx.i1[ox]];
                const double b = (1 - tx.w1[ox]) * r1[tx.i0[ox]] + tx.w1[ox] * r1[tx.i1[ox]];
                dst[oy * ow + ox] = (1 - wy) * a + wy * b;
            }
        }
    }
    return out;
}

Var resample(const Var& x, Resample mode, std::size_t factor) {
    Tensor out = resample_value(x.value(), mode, factor);
    return record(std::move(out), {x}, [mode, factor](Node& self) {
        Node& nx = *self.parents[0];
        const auto& d = nx.value.dims();
        const std::size_t nb = d[0] * d[1], h = d[2], w = d[3];
        Tensor gx(d, 0.0);
        if (mode == Resample::box_down) {
            const std::size_t oh = h / factor, ow = w / factor;
            const double inv = 1.0 / static_cast<double>(factor * factor);
            for (std::size_t p = 0; p < nb; ++p) {
                const double* g = self.grad.raw() + p * oh * ow;
                double* dst = gx.raw() + p * h * w;
                for (std::size_t y = 0; y < h; ++y)
                    for (std::size_t x = 0; x < w; ++x) dst[y * w + x] = g[(y / factor) * ow + x / factor] * inv;
            }
        } else {
            const Taps ty = bilinear_taps(h, factor), tx = bilinear_taps(w, factor);
            const std::size_t oh = h * factor, ow = w * factor;
            for (std::size_t p = 0; p < nb; ++p) {
                const double* g = self.grad.raw() + p * oh * ow;
                double* dst = gx.raw() + p * h * w;
                for (std::size_t oy = 0; oy < oh; ++oy) {
                    double* r0 = dst + ty.i0[oy] * w;
                    double* r1 = dst + ty.i1[oy] * w;
                    const double wy = ty.w1[oy];
                    for (std::size_t ox = 0; ox < ow; ++ox) {
                        const double v = g[oy * ow + ox];
                        const double wx = tx.w1[ox];
                        r0[tx.i0[ox]] += (1 - wy) * (1 - wx) * v;
                        r0[tx.i1[ox]] += (1 - wy) * wx * v;
                        r1[tx.i0[ox]] += wy * (1 - wx) * v;
                        r1[tx.i1[ox]] += wy * wx * v;
                    }
                }
            }
        }
        accumulate_grad(nx, gx);
    });
}

Var reshape(const Var& x, Shape dims) {
    Tensor out = x.value().reshaped(std::move(dims));
    return record(std::move(out), {x}, [](Node& self) {
        Node& nx = *self.parents[0];
        accumulate_grad(nx, self.grad.reshaped(nx.value.dims()));
    });
}

Var repeat_channels(const Var& x, std::size_t k) {
    require_rank4(x.value(), "repeat_channels", "input");
    const auto& d = x.dims();
    const std::size_t plane = d[2] * d[3];
    Tensor out({d[0], d[1] * k, d[2], d[3]});
    for (std::size_t bc = 0; bc < d[0] * d[1]; ++bc) {
        const double* src = x.value().raw() + bc * plane;
        for (std::size_t j = 0; j < k; ++j) std::copy_n(src, plane, out.raw() + (bc * k + j) * plane);
    }
    return record(std::move(out), {x}, [k, plane](Node& self) {
        Node& nx = *self.parents[0];
        Tensor gx(nx.value.dims(), 0.0);
        for (std::size_t bc = 0; bc < gx.numel() / plane; ++bc) {
            double* dst = gx.raw() + bc * plane;
            for (std::size_t j = 0; j < k; ++j) {
                const double* g = self.grad.raw() + (bc * k + j) * plane;
                for (std::size_t i = 0; i < plane; ++i) dst[i] += g[i];
            }
        }
        accumulate_grad(nx, gx);
    });
}

Var basis_contract(const Var& stack, const Var& coef, std::size_t k) {
    require_rank4(stack.value(), "basis_contract", "stack");
    require_rank4(coef.value(), "basis_contract", "coef");
    const auto& sd = stack.dims();
    const auto& cd = coef.dims();
    if (k == 0 || sd[1] % k) throw ShapeError("basis_contract: stack channels " + std::to_string(sd[1]) + " not a multiple of K");
    const std::size_t batch = sd[0], c = sd[1] / k, h = sd[2], w = sd[3], plane = h * w;
    const bool per_pixel = cd == Shape{batch, k, h, w};
    const bool per_channel = cd == Shape{batch, c * k, 1, 1};
    if (!per_pixel && !per_channel) {
        throw ShapeError("basis_contract: coef " + shape_str(cd) + " is neither [B,K,H,W] nor [B,C*K,1,1] for stack " +
                         shape_str(sd));
    }
    Tensor out({batch, c, h, w}, 0.0);
    const double* s = stack.value().raw();
    const double* cf = coef.value().raw();
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t i = 0; i < c; ++i) {
            double* o = out.raw() + (b * c + i) * plane;
            for (std::size_t j = 0; j < k; ++j) {
                const double* sp = s + ((b * c + i) * k + j) * plane;
                if (per_pixel) {
                    const double* cp = cf + (b * k + j) * plane;
                    for (std::size_t p = 0; p < plane; ++p) o[p] += cp[p] * sp[p];
                } else {
                    const double cv = cf[(b * c + i) * k + j];
                    for (std::size_t p = 0; p < plane; ++p) o[p] += cv * sp[p];
                }
            }
        }
    return record(std::move(out), {stack, coef}, [batch, c, k, plane, per_pixel](Node& self) {
        Node& ns = *self.parents[0];
        Node& nc = *self.parents[1];
        const double* g = self.grad.raw();
        const double* s = ns.value.raw();
        const double* cf = nc.value.raw();
        Tensor gs = ns.requires_grad ? Tensor(ns.value.dims()) : Tensor();
        Tensor gc = nc.requires_grad ? Tensor(nc.value.dims(), 0.0) : Tensor();
        for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t i = 0; i < c; ++i) {
                const double* gp = g + (b * c + i) * plane;
                for (std::size_t j = 0; j < k; ++j) {
                    const std::size_t off = ((b * c + i) * k + j) * plane;
                    if (per_pixel) {
                        const double* cp = cf + (b * k + j) * plane;
                        if (!gs.empty())
                            for (std::size_t p = 0; p < plane; ++p) gs[off + p] = gp[p] * cp[p];
                        if (!gc.empty()) {
                            double* gcp = gc.raw() + (b * k + j) * plane;
                            for (std::size_t p = 0; p < plane; ++p) gcp[p] += gp[p] * s[off + p];
                        }
                    } else {
                        const double cv = cf[(b * c + i) * k + j];
                        if (!gs.empty())
                            for (std::size_t p = 0; p < plane; ++p) gs[off + p] = gp[p] * cv;
                        if (!gc.empty()) {
                            double acc = 0.0;
                            for (std::size_t p = 0; p < plane; ++p) acc += gp[p] * s[off + p];
                            gc[(b * c + i) * k + j] += acc;
                        }
                    }
                }
            }
        if (!gs.empty()) accumulate_grad(ns, gs);
        if (!gc.empty()) accumulate_grad(nc, gc);
    });
}

Var sum(const Var& x) {
    double s = 0.0;
    for (double v : x.value().data()) s += v;
    return record(Tensor::scalar(s), {x}, [](Node& self) {
        Node& nx = *self.parents[0];
        accumulate_grad(nx, Tensor(nx.value.dims(), self.grad.item()));
    });
}

Var l1_loss(const Var& pred, const Var& target) {
    if (pred.dims() != target.dims()) {
        throw ShapeError("l1_loss: pred " + shape_str(pred.dims()) + " vs target " + shape_str(target.dims()));
    }
    const std::size_t n = pred.value().numel();
    if (n == 0) throw ShapeError("l1_loss: empty tensors");
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += std::abs(pred.value()[i] - target.value()[i]);
    return record(Tensor::scalar(s / static_cast<double>(n)), {pred, target}, [n](Node& self) {
        Node& np = *self.parents[0];
        Node& nt = *self.parents[1];
        const double g = self.grad.item() / static_cast<double>(n);
        Tensor gp(np.value.dims());
        for (std::size_t i = 0; i < n; ++i) {
            const double d = np.value[i] - nt.value[i];
            gp[i] = d > 0 ? g : (d < 0 ? -g : 0.0);
        }
        if (nt.requires_grad) {
            Tensor gt = gp;
            for (auto& v : gt.data()) v = -v;
            accumulate_grad(nt, gt);
        }
        accumulate_grad(np, gp);
    });
}

}  // namespace pakan
