#include "pakan/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pakan/error.hpp"

namespace pakan {

std::size_t shape_numel(const Shape& dims) {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    return n;
}

std::string shape_str(const Shape& dims) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < dims.size(); ++i) {
        if (i) os << ',';
        os << dims[i];
    }
    os << ']';
    return os.str();
}

Tensor::Tensor(Shape dims, double fill) : dims_(std::move(dims)) {
    if (dims_.size() > 4) throw ShapeError("tensor rank " + std::to_string(dims_.size()) + " exceeds 4");
    data_.assign(shape_numel(dims_), fill);
}

Tensor::Tensor(Shape dims, std::vector<double> data) : dims_(std::move(dims)), data_(std::move(data)) {
    if (dims_.size() > 4) throw ShapeError("tensor rank " + std::to_string(dims_.size()) + " exceeds 4");
    if (shape_numel(dims_) != data_.size()) {
        throw ShapeError("dims " + shape_str(dims_) + " hold " + std::to_string(shape_numel(dims_)) +
                         " values, got " + std::to_string(data_.size()));
    }
}

std::size_t Tensor::dim(std::size_t axis) const {
    if (axis >= dims_.size()) throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_str(dims_));
    return dims_[axis];
}

double& Tensor::at(std::size_t b, std::size_t c, std::size_t h, std::size_t w) {
    return data_[((b * dims_[1] + c) * dims_[2] + h) * dims_[3] + w];
}

double Tensor::at(std::size_t b, std::size_t c, std::size_t h, std::size_t w) const {
    return data_[((b * dims_[1] + c) * dims_[2] + h) * dims_[3] + w];
}

double Tensor::item() const {
    if (data_.size() != 1) throw ShapeError("item() on tensor " + shape_str(dims_));
    return data_[0];
}

Tensor Tensor::reshaped(Shape dims) const {
    if (shape_numel(dims) != data_.size()) {
        throw ShapeError("cannot reshape " + shape_str(dims_) + " to " + shape_str(dims));
    }
    return Tensor(std::move(dims), data_);
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor Tensor::slice_channels(std::size_t c0, std::size_t count) const {
    if (rank() != 4) throw ShapeError("slice_channels needs rank 4, got " + shape_str(dims_));
    if (c0 + count > dims_[1]) throw ShapeError("channel slice out of range for " + shape_str(dims_));
    const std::size_t plane = dims_[2] * dims_[3];
    Tensor out({dims_[0], count, dims_[2], dims_[3]});
    for (std::size_t b = 0; b < dims_[0]; ++b) {
        const double* src = data_.data() + (b * dims_[1] + c0) * plane;
        std::copy(src, src + count * plane, out.raw() + b * count * plane);
    }
    return out;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    if (a.dims() != b.dims()) throw ShapeError("max_abs_diff: " + shape_str(a.dims()) + " vs " + shape_str(b.dims()));
    double m = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

Tensor as_batch(const Tensor& chw) {
    if (chw.rank() == 4) return chw;
    if (chw.rank() != 3) throw ShapeError("expected [C,H,W], got " + shape_str(chw.dims()));
    return chw.reshaped({1, chw.dim(0), chw.dim(1), chw.dim(2)});
}

Tensor drop_batch(const Tensor& bchw) {
    if (bchw.rank() != 4 || bchw.dim(0) != 1) throw ShapeError("expected [1,C,H,W], got " + shape_str(bchw.dims()));
    return bchw.reshaped({bchw.dim(1), bchw.dim(2), bchw.dim(3)});
}

}  // namespace pakan
