#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "pakan/graph.hpp"

namespace pakan {

enum class BasisFamily { cubic_bspline, triangular };

/// Univariate basis on the fixed range [-1, 1].
///
/// cubic_bspline: uniform knots with spacing 2/G, extended by three knots on
/// each side, giving K = G + 3 functions. triangular: K = G hat functions
/// centered uniformly on [-1, 1] with half-width equal to the center spacing,
/// divided by their sum at every point.
///
/// Arguments outside the range are clamped to the nearest boundary; the
/// derivative there is zero.
struct SplineBasisSpec {
    BasisFamily family = BasisFamily::cubic_bspline;
    std::size_t grid_size = 5;

    bool operator==(const SplineBasisSpec&) const = default;

    static constexpr double lo = -1.0;
    static constexpr double hi = 1.0;

    std::size_t degree() const { return family == BasisFamily::cubic_bspline ? 3 : 1; }
    std::size_t num_basis() const { return family == BasisFamily::cubic_bspline ? grid_size + 3 : grid_size; }

    /// Knot vector (cubic) or centers (triangular).
    std::vector<double> knots() const;

    /// Throws ConfigError when G < 2.
    void validate() const;
};

std::vector<double> basis_eval(double u, const SplineBasisSpec& spec);
std::vector<double> basis_grad(double u, const SplineBasisSpec& spec);

/// The four nonzero cubic B-splines at u: B_first .. B_first+3 and their derivatives.
struct CubicSupport {
    std::size_t first = 0;
    std::array<double, 4> value{}, grad{};
};
inline CubicSupport cubic_support(double u, std::size_t grid_size) {
    const double inv_h = static_cast<double>(grid_size) / (SplineBasisSpec::hi - SplineBasisSpec::lo);
    const bool inside = u >= SplineBasisSpec::lo && u <= SplineBasisSpec::hi;
    const double uc = u < SplineBasisSpec::lo ? SplineBasisSpec::lo : (u > SplineBasisSpec::hi ? SplineBasisSpec::hi : u);
    const double pos = (uc - SplineBasisSpec::lo) * inv_h;
    std::size_t m = pos <= 0 ? 0 : static_cast<std::size_t>(pos);
    if (m > grid_size - 1) m = grid_size - 1;
    const double t = pos - static_cast<double>(m), s = 1.0 - t, t2 = t * t, t3 = t2 * t;
    constexpr double sixth = 1.0 / 6.0;
    CubicSupport out;
    out.first = m;
    out.value = {s * s * s * sixth, (3.0 * t3 - 6.0 * t2 + 4.0) * sixth, (-3.0 * t3 + 3.0 * t2 + 3.0 * t + 1.0) * sixth,
                 t3 * sixth};
    if (inside) {
        out.grad = {-0.5 * s * s * inv_h, (1.5 * t2 - 2.0 * t) * inv_h, (-1.5 * t2 + t + 0.5) * inv_h, 0.5 * t2 * inv_h};
    }
    return out;
}

/// Allocation-free variants; `out` must hold num_basis() values.
void basis_eval_into(double u, const SplineBasisSpec& spec, double* out);
void basis_grad_into(double u, const SplineBasisSpec& spec, double* out);

/// Elementwise basis evaluation: [B,C,H,W] -> [B,C*K,H,W] with channel c*K+k
/// holding B_k(u[b,c,h,w]). Differentiable in `u`.
Var basis_stack(const Var& u, const SplineBasisSpec& spec);

}  // namespace pakan
