#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace pakan {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& dims);
std::string shape_str(const Shape& dims);

/// Dense row-major array of rank 0..4. Semantic axis order is
/// (batch, channel, height, width) for image-like data.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape dims, double fill = 0.0);
    Tensor(Shape dims, std::vector<double> data);

    static Tensor zeros(Shape dims) { return Tensor(std::move(dims), 0.0); }
    static Tensor ones(Shape dims) { return Tensor(std::move(dims), 1.0); }
    static Tensor scalar(double v) { return Tensor(Shape{}, std::vector<double>{v}); }

    const Shape& dims() const noexcept { return dims_; }
    std::size_t rank() const noexcept { return dims_.size(); }
    std::size_t dim(std::size_t axis) const;
    std::size_t numel() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    double* raw() noexcept { return data_.data(); }
    const double* raw() const noexcept { return data_.data(); }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    /// 4-D element access; the tensor must have rank 4.
    double& at(std::size_t b, std::size_t c, std::size_t h, std::size_t w);
    double at(std::size_t b, std::size_t c, std::size_t h, std::size_t w) const;

    double item() const;

    /// Same data, new dims. Element counts must agree.
    Tensor reshaped(Shape dims) const;

    void fill(double v);
    bool all_finite() const;

    /// Channel slice [c0, c0+count) of a rank-4 tensor.
    Tensor slice_channels(std::size_t c0, std::size_t count) const;

    bool operator==(const Tensor& other) const = default;

private:
    Shape dims_;
    std::vector<double> data_;
};

/// Max |a-b| over elements; shapes must match.
double max_abs_diff(const Tensor& a, const Tensor& b);

/// Expands a rank<4 image tensor [C,H,W] to [1,C,H,W]; rank-4 input is returned unchanged.
Tensor as_batch(const Tensor& chw);

/// Drops a leading batch axis of extent 1.
Tensor drop_batch(const Tensor& bchw);

}  // namespace pakan
