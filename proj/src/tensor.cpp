/*
 * SPDX-License-Identifier: Apache-2.0
 */
#include "cdan/tensor.hpp"

#include <unordered_set>

#include "cdan/error.hpp"

namespace cdan {

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    std::vector<double> data(shape_numel(shape), value);
    return from_data(std::move(shape), std::move(data), requires_grad);
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
    for (std::size_t d : shape) {
        if (d == 0) throw ShapeError("tensor extents must be positive, got " + shape_str(shape));
    }
    if (shape_numel(shape) != data.size()) {
        throw ShapeError("shape " + shape_str(shape) + " needs " + std::to_string(shape_numel(shape)) +
                         " values, got " + std::to_string(data.size()));
    }
    auto node = std::make_shared<detail::Node>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from_data({1}, {value}, requires_grad); }

const Shape& Tensor::shape() const {
    if (!node_) throw Error("use of undefined tensor");
    return node_->shape;
}

std::size_t Tensor::dim(std::size_t axis) const {
    const Shape& s = shape();
    if (axis >= s.size()) throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_str(s));
    return s[axis];
}

std::size_t Tensor::numel() const { return shape_numel(shape()); }

std::span<const double> Tensor::data() const {
    shape();
    return node_->data;
}

std::span<double> Tensor::mutable_data() {
    shape();
    return node_->data;
}

double Tensor::item() const {
    if (numel() != 1) throw ShapeError("item() on non-scalar tensor " + shape_str(shape()));
    return node_->data[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

void Tensor::set_requires_grad(bool flag) {
    if (!is_leaf()) throw Error("requires_grad can only be changed on leaf tensors");
    node_->requires_grad = flag;
}

bool Tensor::is_leaf() const {
    shape();
    return !node_->backward_fn;
}

bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

std::span<const double> Tensor::grad() const {
    if (!has_grad()) throw Error("tensor has no gradient");
    return node_->grad;
}

std::span<double> Tensor::mutable_grad() {
    if (!has_grad()) throw Error("tensor has no gradient");
    return node_->grad;
}

void Tensor::zero_grad() {
    if (node_) node_->grad.clear();
}

Tensor Tensor::detach() const { return from_data(shape(), node_->data, false); }

namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool NoGradGuard::grad_enabled() { return g_grad_enabled; }

Tensor Tensor::make_result(Shape shape, std::vector<double> data, std::vector<Tensor> operands,
                           std::function<void(detail::Node&)> backward_fn) {
    Tensor out = from_data(std::move(shape), std::move(data), false);
    bool needs_grad = false;
    if (g_grad_enabled)
        for (const Tensor& t : operands) needs_grad = needs_grad || t.requires_grad();
    if (needs_grad) {
        out.node_->requires_grad = true;
        out.node_->parents.reserve(operands.size());
        for (Tensor& t : operands) {
            if (t.defined()) out.node_->parents.push_back(std::move(t.node_));
        }
        out.node_->backward_fn = std::move(backward_fn);
    }
    return out;
}

void Tensor::backward() const {
    if (numel() != 1) throw ShapeError("backward() needs a scalar loss, got " + shape_str(shape()));
    if (!node_->requires_grad) throw Error("backward() on a tensor that does not require grad");

    // Iterative post-order DFS gives a topological order; reversed, every
    // node is processed after all of its consumers.
    // Owning pointers: clearing a node's edges below may drop the last
    // reference to a parent that is still queued.
    std::vector<std::shared_ptr<detail::Node>> order;
    std::unordered_set<detail::Node*> seen;
    std::vector<std::pair<std::shared_ptr<detail::Node>, std::size_t>> stack{{node_, 0}};
    seen.insert(node_.get());
    while (!stack.empty()) {
        auto& top = stack.back();
        if (top.second < top.first->parents.size()) {
            std::shared_ptr<detail::Node> parent = top.first->parents[top.second++];
            if (parent->requires_grad && seen.insert(parent.get()).second) stack.emplace_back(std::move(parent), 0);
        } else {
            order.push_back(std::move(top.first));
            stack.pop_back();
        }
    }

    node_->grad_buffer()[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        detail::Node* node = it->get();
        if (!node->backward_fn) continue;
        node->grad_buffer();
        node->backward_fn(*node);
        node->backward_fn = nullptr;
        node->parents.clear();
        node->grad.clear();
        node->grad.shrink_to_fit();
    }
}

}  // namespace cdan
