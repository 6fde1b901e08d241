#pragma once

#include <string>
#include <utility>
#include <vector>

#include "pakan/tensor.hpp"

namespace pakan {

inline constexpr double kPsnrCapDb = 100.0;
inline constexpr std::size_t kQBlock = 32;

/// 10*log10(peak^2/MSE), capped at 100 dB when MSE < peak^2 * 1e-10.
double psnr(const Tensor& x, const Tensor& ref, double peak = 1.0);

/// Mean spectral angle in degrees over all pixels of [C,H,W]. Pixels where
/// either vector has norm < 1e-12 contribute 0 but are still counted.
double sam(const Tensor& x, const Tensor& ref);

/// (100/ratio) * sqrt(mean_c (RMSE_c / mean(ref_c))^2).
double ergas(const Tensor& x, const Tensor& ref, std::size_t ratio = 4);

/// Universal image quality index of two [H,W] (or [1,H,W]) images averaged
/// over non-overlapping block x block tiles; trailing rows/columns that do not
/// fill a tile are ignored. An image smaller than the block is one tile.
///
/// Degenerate tiles: with zero variance sum the value is 2ab/(a^2+b^2) of the
/// means (1 when both means are zero too); with zero mean sum and nonzero
/// variances the luminance factor is dropped, leaving 2*cov/(var_a+var_b).
double q_index(const Tensor& a, const Tensor& b, std::size_t block = kQBlock);

/// Hypercomplex generalization of q_index over the Cayley-Dickson algebra of
/// dimension 2^n >= C (bands zero-padded). C > 8 is unsupported. The
/// one-dimensional algebra keeps the sign and so equals q_index.
double q2n(const Tensor& x, const Tensor& ref, std::size_t block = kQBlock);

/// Cayley-Dickson product of two hypercomplex numbers of equal power-of-two length.
std::vector<double> cd_multiply(const std::vector<double>& a, const std::vector<double>& b);
std::vector<double> cd_conjugate(const std::vector<double>& a);

/// Spectral distortion between the inter-band Q matrices of fused [C,4h,4w] and ms [C,h,w].
double d_lambda(const Tensor& fused, const Tensor& ms, int p = 1);
/// Spatial distortion: band-vs-PAN Q at full scale against band-vs-degraded-PAN Q at reduced scale.
double d_s(const Tensor& fused, const Tensor& ms, const Tensor& pan, int q = 1);
/// (1 - d_lambda)(1 - d_s); both inputs must lie in [0,1].
double hqnr(double d_lambda, double d_s);

using MetricValues = std::vector<std::pair<std::string, double>>;

/// psnr, sam, ergas, q2n of one prediction against its ground truth.
MetricValues reduced_metrics(const Tensor& pred, const Tensor& gt);
/// d_lambda, d_s, hqnr of one full-resolution fusion.
MetricValues full_metrics(const Tensor& fused, const Tensor& ms, const Tensor& pan);

enum class Resolution { reduced, full };

struct MetricReport {
    Resolution resolution = Resolution::reduced;
    std::vector<std::pair<std::string, MetricValues>> samples;

    void add(std::string id, MetricValues values);
    std::vector<std::string> metric_names() const;
    /// Mean over samples of one metric.
    double mean(const std::string& metric) const;
    /// Population standard deviation over samples of one metric.
    double stddev(const std::string& metric) const;

    /// `id<TAB>metric<TAB>value` per sample, then `mean`/`std` rows, values in
    /// shortest round-trip decimal.
    std::string to_tsv() const;
};

/// Shortest decimal string that parses back to the same double.
std::string format_real(double v);

}  // namespace pakan
