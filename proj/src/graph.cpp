#include "pakan/graph.hpp"

#include <algorithm>
#include <unordered_set>

#include "pakan/error.hpp"

namespace pakan {

Var Var::constant(Tensor value) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    return Var(std::move(n));
}

Var Var::leaf(Tensor value) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = true;
    return Var(std::move(n));
}

Var record(Tensor value, std::vector<Var> parents, std::function<void(Node&)> fn) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->is_leaf = false;
    for (const auto& p : parents) {
        if (p.requires_grad()) n->requires_grad = true;
    }
    if (n->requires_grad) {
        n->parents.reserve(parents.size());
        for (auto& p : parents) n->parents.push_back(p.ptr());
        n->backward = std::move(fn);
    }
    return Var(std::move(n));
}

void accumulate_grad(Node& node, const Tensor& g) {
    if (!node.requires_grad) return;
    if (g.dims() != node.value.dims()) {
        throw ShapeError("gradient dims " + shape_str(g.dims()) + " do not match value dims " +
                         shape_str(node.value.dims()));
    }
    if (node.grad.empty() || node.grad.dims() != node.value.dims()) {
        node.grad = g;
    } else {
        double* dst = node.grad.raw();
        const double* src = g.raw();
        for (std::size_t i = 0; i < g.numel(); ++i) dst[i] += src[i];
    }
    if (node.is_leaf) node.touched = true;
}

void backward(const Var& loss) {
    if (!loss.valid() || loss.value().rank() != 0) {
        throw ContractError("backward() needs a rank-0 loss, got " +
                            (loss.valid() ? shape_str(loss.dims()) : std::string("<null>")));
    }
    if (!loss.requires_grad()) return;

    // Iterative post-order DFS gives a topological order (parents before children).
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(&loss.node(), 0);
    seen.insert(&loss.node());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* p = node->parents[next++].get();
            if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    for (Node* n : order) {
        if (!n->is_leaf) n->grad = Tensor();
    }
    accumulate_grad(loss.node(), Tensor::scalar(1.0));
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->is_leaf || n->grad.empty() || !n->backward) continue;
        n->backward(*n);
        n->grad = Tensor();  // consumed; lets the allocator reuse the buffer
    }
}

// ---------------------------------------------------------------------------

Var ParamStore::add(const std::string& name, Tensor init) {
    if (contains(name)) throw ConfigError("duplicate parameter name '" + name + "'");
    Var v = Var::leaf(std::move(init));
    v.node().grad = Tensor(v.dims(), 0.0);
    entries_.emplace_back(name, v);
    return v;
}

const Var& ParamStore::get(const std::string& name) const {
    for (const auto& [n, v] : entries_) {
        if (n == name) return v;
    }
    throw ConfigError("unknown parameter '" + name + "'");
}

bool ParamStore::contains(const std::string& name) const {
    return std::any_of(entries_.begin(), entries_.end(), [&](const auto& e) { return e.first == name; });
}

std::size_t ParamStore::total_elements() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.second.value().numel();
    return n;
}

void ParamStore::zero_grad() {
    for (auto& [name, v] : entries_) {
        v.node().grad.fill(0.0);
        v.node().touched = false;
    }
}

bool ParamStore::has_fresh_gradients() const {
    return std::any_of(entries_.begin(), entries_.end(), [](const auto& e) { return e.second.node().touched; });
}

void ParamStore::load_values(const std::vector<std::pair<std::string, Tensor>>& named) {
    for (const auto& [name, t] : named) {
        if (!contains(name)) continue;
        Var v = get(name);
        if (v.value().numel() != t.numel()) {
            throw ShapeError("parameter '" + name + "' expects " + shape_str(v.dims()) + ", got " + shape_str(t.dims()));
        }
        v.mutable_value() = t.reshaped(v.dims());
    }
}

std::vector<std::pair<std::string, Tensor>> ParamStore::snapshot() const {
    std::vector<std::pair<std::string, Tensor>> out;
    out.reserve(entries_.size());
    for (const auto& [name, v] : entries_) out.emplace_back(name, v.value());
    return out;
}

}  // namespace pakan
