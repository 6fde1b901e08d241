#include "pakan/spline.hpp"

#include <algorithm>
#include <cmath>

#include "pakan/error.hpp"

namespace pakan {

namespace {

double sgn(double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }

}  // namespace

void SplineBasisSpec::validate() const {
    if (grid_size < 2) throw ConfigError("spline grid size must be >= 2, got " + std::to_string(grid_size));
}

std::vector<double> SplineBasisSpec::knots() const {
    validate();
    std::vector<double> k;
    if (family == BasisFamily::cubic_bspline) {
        const double h = (hi - lo) / static_cast<double>(grid_size);
        for (std::size_t j = 0; j < grid_size + 7; ++j) k.push_back(lo + (static_cast<double>(j) - 3.0) * h);
    } else {
        const double h = (hi - lo) / static_cast<double>(grid_size - 1);
        for (std::size_t j = 0; j < grid_size; ++j) k.push_back(lo + static_cast<double>(j) * h);
    }
    return k;
}

void basis_eval_into(double u, const SplineBasisSpec& spec, double* out) {
    const std::size_t n = spec.num_basis();
    std::fill_n(out, n, 0.0);
    if (spec.family == BasisFamily::cubic_bspline) {
        const auto cs = cubic_support(u, spec.grid_size);
        std::copy(cs.value.begin(), cs.value.end(), out + cs.first);
        return;
    }
    u = std::clamp(u, SplineBasisSpec::lo, SplineBasisSpec::hi);
    const double h = (SplineBasisSpec::hi - SplineBasisSpec::lo) / static_cast<double>(n - 1);
    double total = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double c = SplineBasisSpec::lo + static_cast<double>(k) * h;
        out[k] = std::max(0.0, 1.0 - std::abs(u - c) / h);
        total += out[k];
    }
    for (std::size_t k = 0; k < n; ++k) out[k] /= total;
}

void basis_grad_into(double u, const SplineBasisSpec& spec, double* out) {
    const std::size_t n = spec.num_basis();
    std::fill_n(out, n, 0.0);
    if (spec.family == BasisFamily::cubic_bspline) {
        const auto cs = cubic_support(u, spec.grid_size);
        std::copy(cs.grad.begin(), cs.grad.end(), out + cs.first);
        return;
    }
    if (u < SplineBasisSpec::lo || u > SplineBasisSpec::hi) return;
    // Hat kinks use the mean of the one-sided slopes.
    const double h = (SplineBasisSpec::hi - SplineBasisSpec::lo) / static_cast<double>(n - 1);
    std::vector<double> raw(n), slope(n);
    double total = 0.0, dtotal = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double c = SplineBasisSpec::lo + static_cast<double>(k) * h;
        const double d = u - c;
        const double r = std::abs(d) / h;
        raw[k] = std::max(0.0, 1.0 - r);
        if (r < 1.0) {
            slope[k] = -sgn(d) / h;
        } else if (r == 1.0) {
            slope[k] = -0.5 * sgn(d) / h;
        } else {
            slope[k] = 0.0;
        }
        total += raw[k];
        dtotal += slope[k];
    }
    for (std::size_t k = 0; k < n; ++k) out[k] = (slope[k] * total - raw[k] * dtotal) / (total * total);
}

std::vector<double> basis_eval(double u, const SplineBasisSpec& spec) {
    spec.validate();
    std::vector<double> out(spec.num_basis());
    basis_eval_into(u, spec, out.data());
    return out;
}

std::vector<double> basis_grad(double u, const SplineBasisSpec& spec) {
    spec.validate();
    std::vector<double> out(spec.num_basis());
    basis_grad_into(u, spec, out.data());
    return out;
}

Var basis_stack(const Var& u, const SplineBasisSpec& spec) {
    spec.validate();
    const auto& d = u.dims();
    if (d.size() != 4) throw ShapeError("basis_stack: input must be [B,C,H,W], got " + shape_str(d));
    const std::size_t k = spec.num_basis();
    const std::size_t plane = d[2] * d[3];
    Tensor out({d[0], d[1] * k, d[2], d[3]});
    std::vector<double> buf(k);
    const double* src = u.value().raw();
    for (std::size_t bc = 0; bc < d[0] * d[1]; ++bc) {
        double* dst = out.raw() + bc * k * plane;
        for (std::size_t p = 0; p < plane; ++p) {
            basis_eval_into(src[bc * plane + p], spec, buf.data());
            for (std::size_t j = 0; j < k; ++j) dst[j * plane + p] = buf[j];
        }
    }
    return record(std::move(out), {u}, [spec, k, plane](Node& self) {
        Node& nu = *self.parents[0];
        Tensor gu(nu.value.dims());
        std::vector<double> buf(k);
        const double* src = nu.value.raw();
        const double* g = self.grad.raw();
        for (std::size_t bc = 0; bc < gu.numel() / plane; ++bc) {
            const double* gp = g + bc * k * plane;
            for (std::size_t p = 0; p < plane; ++p) {
                basis_grad_into(src[bc * plane + p], spec, buf.data());
                double acc = 0.0;
                for (std::size_t j = 0; j < k; ++j) acc += gp[j * plane + p] * buf[j];
                gu[bc * plane + p] = acc;
            }
        }
        accumulate_grad(nu, gu);
    });
}

}  // namespace pakan
