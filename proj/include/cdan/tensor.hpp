/*
 * SPDX-License-Identifier: Apache-2.0
 */
#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace cdan {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

/// One vertex of the dynamic autodiff graph.
///
/// Leaves have no backward rule. Interior nodes keep their operands alive
/// through `parents` until backward() runs, after which the edges are dropped.
struct Node {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;  // empty until a gradient is accumulated
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;

    std::vector<double>& grad_buffer() {
        if (grad.empty()) grad.assign(data.size(), 0.0);
        return grad;
    }
};

}  // namespace detail

/// Dense row-major tensor of doubles with reverse-mode gradient support.
///
/// Copies share storage (handle semantics). Values of non-leaf tensors are
/// never modified after construction; leaves may be updated in place by an
/// optimizer through mutable_data().
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    std::size_t dim(std::size_t axis) const;
    std::size_t ndim() const { return shape().size(); }
    std::size_t numel() const;

    std::span<const double> data() const;
    std::span<double> mutable_data();
    double item() const;
    double operator[](std::size_t i) const { return data()[i]; }

    bool requires_grad() const;
    void set_requires_grad(bool flag);
    bool is_leaf() const;

    bool has_grad() const;
    std::span<const double> grad() const;
    std::span<double> mutable_grad();
    void zero_grad();

    /// New leaf holding a copy of the values, cut from the graph.
    Tensor detach() const;

    /// Reverse-mode sweep from this scalar. Leaf gradients accumulate;
    /// interior edges are released afterwards.
    void backward() const;

    bool same_storage(const Tensor& other) const { return node_ == other.node_; }

    /// Graph plumbing for op implementations.
    static Tensor make_result(Shape shape, std::vector<double> data,
                              std::vector<Tensor> operands,
                              std::function<void(detail::Node&)> backward_fn);
    const std::shared_ptr<detail::Node>& node() const { return node_; }

private:
    explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
    std::shared_ptr<detail::Node> node_;
};

/// While alive, ops on the current thread record no graph. Used for inference.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

    static bool grad_enabled();

private:
    bool previous_;
};

}  // namespace cdan
