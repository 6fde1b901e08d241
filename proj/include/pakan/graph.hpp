#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "pakan/tensor.hpp"

namespace pakan {

struct Node;
using NodePtr = std::shared_ptr<Node>;

/// One recorded value on the tape. `backward` reads `grad` and accumulates
/// into the parents' grads using the analytic rule of the producing primitive.
struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool is_leaf = true;
    bool touched = false;  // leaf received a gradient since the last reset
    std::vector<NodePtr> parents;
    std::function<void(Node&)> backward;
};

/// Handle to a node of the computation graph.
class Var {
public:
    Var() = default;
    explicit Var(NodePtr node) : node_(std::move(node)) {}

    /// Constant input: no gradient is tracked.
    static Var constant(Tensor value);
    /// Leaf whose gradient is accumulated by backward().
    static Var leaf(Tensor value);

    const Tensor& value() const { return node_->value; }
    Tensor& mutable_value() { return node_->value; }
    const Tensor& grad() const { return node_->grad; }
    const Shape& dims() const { return node_->value.dims(); }
    std::size_t dim(std::size_t axis) const { return node_->value.dim(axis); }
    bool requires_grad() const { return node_ && node_->requires_grad; }
    bool valid() const { return static_cast<bool>(node_); }

    Node& node() const { return *node_; }
    const NodePtr& ptr() const { return node_; }

private:
    NodePtr node_;
};

/// Records a new non-leaf node. `fn` is only kept when some parent needs a gradient.
Var record(Tensor value, std::vector<Var> parents, std::function<void(Node&)> fn);

/// Adds `g` into the node's gradient buffer, allocating it on first use.
void accumulate_grad(Node& node, const Tensor& g);

/// Reverse-mode sweep from a rank-0 loss. Intermediate gradients are released
/// once propagated; leaf gradients accumulate until explicitly cleared.
void backward(const Var& loss);

/// Named trainable parameters in insertion order, each with a gradient buffer of the same dims.
class ParamStore {
public:
    Var add(const std::string& name, Tensor init);

    const Var& get(const std::string& name) const;
    bool contains(const std::string& name) const;
    std::size_t size() const noexcept { return entries_.size(); }
    std::size_t total_elements() const;

    const std::vector<std::pair<std::string, Var>>& entries() const noexcept { return entries_; }

    void zero_grad();
    /// True when backward() has written into at least one parameter since zero_grad().
    bool has_fresh_gradients() const;

    /// Copies values from `other` for every name present in both stores; dims must match.
    void load_values(const std::vector<std::pair<std::string, Tensor>>& named);
    std::vector<std::pair<std::string, Tensor>> snapshot() const;

private:
    std::vector<std::pair<std::string, Var>> entries_;
};

// ---------------------------------------------------------------------------
// Differentiable primitives. Each has an explicit analytic backward rule.

enum class Elementwise { add, sub, mul, sigmoid, tanh, relu };
enum class Resample { bilinear_up, box_down };

/// Stride-1 zero-padded 2-D convolution. `bias` may be an invalid Var (no bias).
Var conv2d(const Var& x, const Var& kernel, const Var& bias, std::size_t padding);

/// Binary kinds broadcast any operand axis of extent 1 against the other.
Var elementwise(const Var& x, Elementwise kind, const Var& y = Var());
Var add(const Var& x, const Var& y);
Var sub(const Var& x, const Var& y);
Var mul(const Var& x, const Var& y);
Var sigmoid(const Var& x);
Var tanh(const Var& x);
Var relu(const Var& x);
Var scale(const Var& x, double factor);

Var concat_channels(const Var& x, const Var& y);
Var global_avg_pool(const Var& x);
Var resample(const Var& x, Resample mode, std::size_t factor);
Var reshape(const Var& x, Shape dims);

/// [B,C,H,W] -> [B,C*k,H,W] with channel c copied to c*k .. c*k+k-1.
Var repeat_channels(const Var& x, std::size_t k);

/// Weighted sum over groups of `k` channels of a basis stack [B,C*k,H,W].
/// `coef` is either [B,k,H,W] (one weight set per pixel shared by all channels)
/// or [B,C*k,1,1] (one weight set per channel shared by all pixels). Result is [B,C,H,W].
Var basis_contract(const Var& stack, const Var& coef, std::size_t k);

Var sum(const Var& x);
/// Mean absolute difference over all elements.
Var l1_loss(const Var& pred, const Var& target);

// Value-only helpers (no graph).
Tensor conv2d_value(const Tensor& x, const Tensor& kernel, const Tensor* bias, std::size_t padding);
Tensor resample_value(const Tensor& x, Resample mode, std::size_t factor);
Tensor concat_channels_value(const Tensor& x, const Tensor& y);

}  // namespace pakan
