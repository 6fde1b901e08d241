#include "pakan/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <sstream>

#include "pakan/data.hpp"
#include "pakan/error.hpp"

namespace pakan {

namespace {

void require_same(const Tensor& x, const Tensor& ref, const char* what) {
    if (x.dims() != ref.dims()) {
        throw ShapeError(std::string(what) + ": shape mismatch " + shape_str(x.dims()) + " vs " + shape_str(ref.dims()));
    }
}

void require_chw(const Tensor& x, const char* what) {
    if (x.rank() != 3) throw ShapeError(std::string(what) + ": expected [C,H,W], got " + shape_str(x.dims()));
}

// Views an [H,W] or [1,H,W] tensor as a plane.
std::pair<std::size_t, std::size_t> plane_dims(const Tensor& t, const char* what) {
    if (t.rank() == 2) return {t.dim(0), t.dim(1)};
    if (t.rank() == 3 && t.dim(0) == 1) return {t.dim(1), t.dim(2)};
    throw ShapeError(std::string(what) + ": expected [H,W] or [1,H,W], got " + shape_str(t.dims()));
}

struct BlockGrid {
    std::size_t bh, bw, ny, nx;
};

BlockGrid block_grid(std::size_t h, std::size_t w, std::size_t block) {
    if (block == 0) throw ConfigError("Q block size must be positive");
    const std::size_t bh = std::min(block, h), bw = std::min(block, w);
    return {bh, bw, h / bh, w / bw};
}

// The q_index formula with its degenerate rules. `cov` is signed for the real
// algebra and a modulus otherwise; `ma_mb` likewise.
double q_formula(double cov, double var_sum, double ma_mb, double mean_sq_sum) {
    if (var_sum == 0.0) return mean_sq_sum == 0.0 ? 1.0 : 2.0 * ma_mb / mean_sq_sum;
    if (mean_sq_sum == 0.0) return 2.0 * cov / var_sum;
    return 4.0 * cov * ma_mb / (var_sum * mean_sq_sum);
}

Tensor band(const Tensor& chw, std::size_t c) {
    const std::size_t plane = chw.dim(1) * chw.dim(2);
    std::vector<double> v(chw.raw() + c * plane, chw.raw() + (c + 1) * plane);
    return Tensor({1, chw.dim(1), chw.dim(2)}, std::move(v));
}

double check_unit(double v, const char* what) {
    if (!(v >= 0.0 && v <= 1.0)) throw ValidationError(std::string(what) + " must lie in [0,1], got " + format_real(v));
    return v;
}

}  // namespace

double psnr(const Tensor& x, const Tensor& ref, double peak) {
    require_same(x, ref, "psnr");
    if (!(peak > 0)) throw ConfigError("psnr: peak must be > 0");
    if (x.numel() == 0) throw ShapeError("psnr: empty tensors");
    double se = 0.0;
    for (std::size_t i = 0; i < x.numel(); ++i) se += (x[i] - ref[i]) * (x[i] - ref[i]);
    const double mse = se / static_cast<double>(x.numel());
    if (mse < peak * peak * 1e-10) return kPsnrCapDb;
    return std::min(kPsnrCapDb, 10.0 * std::log10(peak * peak / mse));
}

double sam(const Tensor& x, const Tensor& ref) {
    require_chw(x, "sam");
    require_same(x, ref, "sam");
    const std::size_t c = x.dim(0), plane = x.dim(1) * x.dim(2);
    if (c < 2) throw ConfigError("sam: needs at least 2 bands");
    double total = 0.0;
    for (std::size_t p = 0; p < plane; ++p) {
        double nx = 0.0, nr = 0.0;
        for (std::size_t b = 0; b < c; ++b) {
            nx += x[b * plane + p] * x[b * plane + p];
            nr += ref[b * plane + p] * ref[b * plane + p];
        }
        nx = std::sqrt(nx);
        nr = std::sqrt(nr);
        if (nx < 1e-12 || nr < 1e-12) continue;
        // 2 atan2(|a - b|, |a + b|) of the unit vectors; exact at 0 where acos of a rounded cosine is not
        double dm = 0.0, dp = 0.0;
        for (std::size_t b = 0; b < c; ++b) {
            const double u = x[b * plane + p] / nx, v = ref[b * plane + p] / nr;
            dm += (u - v) * (u - v);
            dp += (u + v) * (u + v);
        }
        total += 2.0 * std::atan2(std::sqrt(dm), std::sqrt(dp));
    }
    return total / static_cast<double>(plane) * 180.0 / std::numbers::pi;
}

double ergas(const Tensor& x, const Tensor& ref, std::size_t ratio) {
    require_chw(x, "ergas");
    require_same(x, ref, "ergas");
    if (ratio == 0) throw ConfigError("ergas: ratio must be positive");
    const std::size_t c = x.dim(0), plane = x.dim(1) * x.dim(2);
    double acc = 0.0;
    for (std::size_t b = 0; b < c; ++b) {
        double se = 0.0, mu = 0.0;
        for (std::size_t p = 0; p < plane; ++p) {
            const double d = x[b * plane + p] - ref[b * plane + p];
            se += d * d;
            mu += ref[b * plane + p];
        }
        mu /= static_cast<double>(plane);
        if (mu == 0.0) throw ValidationError("ergas: reference band " + std::to_string(b) + " has zero mean");
        acc += se / static_cast<double>(plane) / (mu * mu);
    }
    return 100.0 / static_cast<double>(ratio) * std::sqrt(acc / static_cast<double>(c));
}

double q_index(const Tensor& a, const Tensor& b, std::size_t block) {
    const auto [h, w] = plane_dims(a, "q_index");
    if (plane_dims(b, "q_index") != std::pair{h, w}) {
        throw ShapeError("q_index: shape mismatch " + shape_str(a.dims()) + " vs " + shape_str(b.dims()));
    }
    const auto g = block_grid(h, w, block);
    const double n = static_cast<double>(g.bh * g.bw);
    double total = 0.0;
    for (std::size_t by = 0; by < g.ny; ++by)
        for (std::size_t bx = 0; bx < g.nx; ++bx) {
            double sa = 0, sb = 0;
            for (std::size_t y = by * g.bh; y < (by + 1) * g.bh; ++y)
                for (std::size_t x = bx * g.bw; x < (bx + 1) * g.bw; ++x) {
                    sa += a[y * w + x];
                    sb += b[y * w + x];
                }
            const double ma = sa / n, mb = sb / n;
            double vaa = 0, vbb = 0, vab = 0;
            for (std::size_t y = by * g.bh; y < (by + 1) * g.bh; ++y)
                for (std::size_t x = bx * g.bw; x < (bx + 1) * g.bw; ++x) {
                    const double da = a[y * w + x] - ma, db = b[y * w + x] - mb;
                    vaa += da * da;
                    vbb += db * db;
                    vab += da * db;
                }
            total += q_formula(vab / n, (vaa + vbb) / n, ma * mb, ma * ma + mb * mb);
        }
    return total / static_cast<double>(g.ny * g.nx);
}

std::vector<double> cd_conjugate(const std::vector<double>& a) {
    std::vector<double> out(a.size());
    if (a.empty()) return out;
    out[0] = a[0];
    for (std::size_t i = 1; i < a.size(); ++i) out[i] = -a[i];
    return out;
}

// (a,b)(c,d) = (ac - d*b, da + bc*)
std::vector<double> cd_multiply(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    if (n != y.size() || n == 0 || (n & (n - 1))) throw ShapeError("cd_multiply: operands must share a power-of-two length");
    if (n == 1) return {x[0] * y[0]};
    const std::size_t m = n / 2;
    const std::vector<double> a(x.begin(), x.begin() + m), b(x.begin() + m, x.end());
    const std::vector<double> c(y.begin(), y.begin() + m), d(y.begin() + m, y.end());
    const auto ac = cd_multiply(a, c), dsb = cd_multiply(cd_conjugate(d), b);
    const auto da = cd_multiply(d, a), bcs = cd_multiply(b, cd_conjugate(c));
    std::vector<double> out(n);
    for (std::size_t i = 0; i < m; ++i) {
        out[i] = ac[i] - dsb[i];
        out[m + i] = da[i] + bcs[i];
    }
    return out;
}

double q2n(const Tensor& x, const Tensor& ref, std::size_t block) {
    require_chw(x, "q2n");
    require_same(x, ref, "q2n");
    const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2), plane = h * w;
    if (c > 8) throw ConfigError("q2n: " + std::to_string(c) + " bands unsupported (at most 8)");
    std::size_t dim = 1;
    while (dim < c) dim *= 2;
    const auto g = block_grid(h, w, block);
    const double n = static_cast<double>(g.bh * g.bw);
    auto norm = [](const std::vector<double>& v) {
        double s = 0;
        for (double e : v) s += e * e;
        return std::sqrt(s);
    };

    double total = 0.0;
    std::vector<double> zx(dim), zy(dim);
    for (std::size_t by = 0; by < g.ny; ++by)
        for (std::size_t bx = 0; bx < g.nx; ++bx) {
            std::vector<double> mx(dim, 0.0), my(dim, 0.0);
            for (std::size_t yy = by * g.bh; yy < (by + 1) * g.bh; ++yy)
                for (std::size_t xx = bx * g.bw; xx < (bx + 1) * g.bw; ++xx)
                    for (std::size_t b = 0; b < c; ++b) {
                        mx[b] += x[b * plane + yy * w + xx];
                        my[b] += ref[b * plane + yy * w + xx];
                    }
            for (std::size_t b = 0; b < dim; ++b) {
                mx[b] /= n;
                my[b] /= n;
            }
            std::vector<double> cov(dim, 0.0);
            double vx = 0, vy = 0;
            for (std::size_t yy = by * g.bh; yy < (by + 1) * g.bh; ++yy)
                for (std::size_t xx = bx * g.bw; xx < (bx + 1) * g.bw; ++xx) {
                    for (std::size_t b = 0; b < dim; ++b) {
                        zx[b] = (b < c ? x[b * plane + yy * w + xx] : 0.0) - mx[b];
                        zy[b] = (b < c ? ref[b * plane + yy * w + xx] : 0.0) - my[b];
                        vx += zx[b] * zx[b];
                        vy += zy[b] * zy[b];
                    }
                    const auto p = cd_multiply(zx, cd_conjugate(zy));
                    for (std::size_t b = 0; b < dim; ++b) cov[b] += p[b];
                }
            for (auto& v : cov) v /= n;
            const double nmx = norm(mx), nmy = norm(my);
            const double sigma = dim == 1 ? cov[0] : norm(cov);
            const double means = dim == 1 ? mx[0] * my[0] : nmx * nmy;
            total += q_formula(sigma, (vx + vy) / n, means, nmx * nmx + nmy * nmy);
        }
    return total / static_cast<double>(g.ny * g.nx);
}

double d_lambda(const Tensor& fused, const Tensor& ms, int p) {
    require_chw(fused, "d_lambda");
    require_chw(ms, "d_lambda");
    const std::size_t c = fused.dim(0);
    if (c < 2) throw ConfigError("d_lambda: needs at least 2 bands");
    if (ms.dim(0) != c || fused.dim(1) != 4 * ms.dim(1) || fused.dim(2) != 4 * ms.dim(2)) {
        throw ShapeError("d_lambda: fused " + shape_str(fused.dims()) + " is not 4x ms " + shape_str(ms.dims()));
    }
    if (p < 1) throw ConfigError("d_lambda: exponent must be >= 1");
    double acc = 0.0;
    for (std::size_t i = 0; i < c; ++i)
        for (std::size_t j = 0; j < c; ++j) {
            if (i == j) continue;
            const double d = std::abs(q_index(band(fused, i), band(fused, j)) - q_index(band(ms, i), band(ms, j)));
            acc += std::pow(d, p);
        }
    return std::pow(acc / static_cast<double>(c * (c - 1)), 1.0 / p);
}

double d_s(const Tensor& fused, const Tensor& ms, const Tensor& pan, int q) {
    require_chw(fused, "d_s");
    require_chw(ms, "d_s");
    const std::size_t c = fused.dim(0);
    if (ms.dim(0) != c || fused.dim(1) != 4 * ms.dim(1) || fused.dim(2) != 4 * ms.dim(2)) {
        throw ShapeError("d_s: fused " + shape_str(fused.dims()) + " is not 4x ms " + shape_str(ms.dims()));
    }
    if (pan.dims() != Shape{1, fused.dim(1), fused.dim(2)}) {
        throw ShapeError("d_s: pan " + shape_str(pan.dims()) + " does not match fused " + shape_str(fused.dims()));
    }
    if (q < 1) throw ConfigError("d_s: exponent must be >= 1");
    const Tensor pan_low = blur_decimate(pan, kDefaultBlurSigma, 4);
    double acc = 0.0;
    for (std::size_t i = 0; i < c; ++i) {
        acc += std::pow(std::abs(q_index(band(fused, i), pan) - q_index(band(ms, i), pan_low)), q);
    }
    return std::pow(acc / static_cast<double>(c), 1.0 / q);
}

double hqnr(double dl, double ds) { return (1.0 - check_unit(dl, "D_lambda")) * (1.0 - check_unit(ds, "D_s")); }

MetricValues reduced_metrics(const Tensor& pred, const Tensor& gt) {
    return {{"psnr", psnr(pred, gt)}, {"sam", sam(pred, gt)}, {"ergas", ergas(pred, gt)}, {"q2n", q2n(pred, gt)}};
}

MetricValues full_metrics(const Tensor& fused, const Tensor& ms, const Tensor& pan) {
    const double dl = d_lambda(fused, ms), ds = d_s(fused, ms, pan);
    // D_lambda can exceed 1 in principle (Q differences reach 2); HQNR is reported only inside the unit range.
    const double h = (dl <= 1.0 && ds <= 1.0) ? hqnr(dl, ds) : std::nan("");
    return {{"d_lambda", dl}, {"d_s", ds}, {"hqnr", h}};
}

// ---------------------------------------------------------------------------

void MetricReport::add(std::string id, MetricValues values) { samples.emplace_back(std::move(id), std::move(values)); }

std::vector<std::string> MetricReport::metric_names() const {
    std::vector<std::string> names;
    for (const auto& [id, vals] : samples)
        for (const auto& [name, v] : vals)
            if (std::find(names.begin(), names.end(), name) == names.end()) names.push_back(name);
    return names;
}

double MetricReport::mean(const std::string& metric) const {
    double s = 0.0;
    std::size_t n = 0;
    for (const auto& [id, vals] : samples)
        for (const auto& [name, v] : vals)
            if (name == metric) {
                s += v;
                ++n;
            }
    if (n == 0) throw ValidationError("metric '" + metric + "' not present in report");
    return s / static_cast<double>(n);
}

double MetricReport::stddev(const std::string& metric) const {
    const double m = mean(metric);
    double s = 0.0;
    std::size_t n = 0;
    for (const auto& [id, vals] : samples)
        for (const auto& [name, v] : vals)
            if (name == metric) {
                s += (v - m) * (v - m);
                ++n;
            }
    return std::sqrt(s / static_cast<double>(n));
}

std::string MetricReport::to_tsv() const {
    std::ostringstream os;
    os << "# resolution=" << (resolution == Resolution::reduced ? "reduced" : "full") << '\n';
    for (const auto& [id, vals] : samples)
        for (const auto& [name, v] : vals) os << id << '\t' << name << '\t' << format_real(v) << '\n';
    if (!samples.empty()) {
        os << "# aggregate\n";
        for (const auto& name : metric_names()) os << "mean\t" << name << '\t' << format_real(mean(name)) << '\n';
        for (const auto& name : metric_names()) os << "std\t" << name << '\t' << format_real(stddev(name)) << '\n';
    }
    return os.str();
}

std::string format_real(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

}  // namespace pakan
