#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "eafpmed/shape.hpp"

namespace eafpmed {

template <typename T>
struct TensorNode {
    Shape shape;
    std::vector<T> value;
    std::vector<T> grad;  // allocated lazily, same length as value
    bool requires_grad = false;
    std::vector<std::shared_ptr<TensorNode<T>>> parents;
    std::function<void(TensorNode<T>&)> backward_fn;  // pushes this->grad into parents

    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), T(0));
    }
};

// Shared-handle dense tensor. Copies alias the same storage and graph node;
// ops never mutate operand values, so aliasing is safe outside of explicit
// values_mut() parameter updates.
template <typename T>
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(const Shape& shape, bool requires_grad = false) {
        return full(shape, T(0), requires_grad);
    }
    static Tensor full(const Shape& shape, T v, bool requires_grad = false);
    static Tensor from(const Shape& shape, std::vector<T> values, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::int64_t numel() const { return node_->shape.numel(); }

    std::span<const T> values() const { return node_->value; }
    std::span<T> values_mut() { return node_->value; }

    bool requires_grad() const { return node_ && node_->requires_grad; }
    void set_requires_grad(bool rg) { node_->requires_grad = rg; }

    std::span<const T> grad() const;
    std::span<T> grad_mut();
    void zero_grad() { if (node_) node_->grad.assign(node_->value.size(), T(0)); }

    // Reverse-mode accumulation from a scalar. Grads accumulate across calls
    // until zero_grad(); non-scalar tensors are rejected.
    void backward() const;

    T item() const;

    // Value copy detached from any graph.
    Tensor detach() const;

    std::shared_ptr<TensorNode<T>> node() const { return node_; }

    static Tensor adopt(std::shared_ptr<TensorNode<T>> node) {
        Tensor t;
        t.node_ = std::move(node);
        return t;
    }

private:
    std::shared_ptr<TensorNode<T>> node_;
};

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace eafpmed
