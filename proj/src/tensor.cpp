#include "eafpmed/tensor.hpp"

#include <algorithm>
#include <unordered_set>

#include "eafpmed/errors.hpp"

namespace eafpmed {

template <typename T>
Tensor<T> Tensor<T>::full(const Shape& shape, T v, bool requires_grad) {
    auto node = std::make_shared<TensorNode<T>>();
    node->shape = shape;
    node->value.assign(static_cast<std::size_t>(shape.numel()), v);
    node->requires_grad = requires_grad;
    return adopt(std::move(node));
}

template <typename T>
Tensor<T> Tensor<T>::from(const Shape& shape, std::vector<T> values, bool requires_grad) {
    if (static_cast<std::int64_t>(values.size()) != shape.numel()) {
        throw ShapeError("tensor: value count " + std::to_string(values.size()) +
                         " does not match shape " + shape.str() + " numel " +
                         std::to_string(shape.numel()));
    }
    auto node = std::make_shared<TensorNode<T>>();
    node->shape = shape;
    node->value = std::move(values);
    node->requires_grad = requires_grad;
    return adopt(std::move(node));
}

template <typename T>
std::span<const T> Tensor<T>::grad() const {
    if (!node_ || node_->grad.empty()) return {};
    return node_->grad;
}

template <typename T>
std::span<T> Tensor<T>::grad_mut() {
    node_->ensure_grad();
    return node_->grad;
}

template <typename T>
T Tensor<T>::item() const {
    if (numel() != 1) {
        throw ShapeError("tensor: item() on non-scalar shape " + shape().str());
    }
    return node_->value[0];
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
    auto node = std::make_shared<TensorNode<T>>();
    node->shape = node_->shape;
    node->value = node_->value;
    node->requires_grad = false;
    return adopt(std::move(node));
}

template <typename T>
void Tensor<T>::backward() const {
    if (!node_) throw ShapeError("backward: undefined tensor");
    if (numel() != 1) {
        throw ShapeError("backward: tensor shape " + shape().str() + " is not scalar");
    }

    // Iterative post-order DFS; backward functions fire in reverse topological
    // order so every node's grad is complete before it is pushed to parents.
    std::vector<TensorNode<T>*> order;
    std::unordered_set<TensorNode<T>*> visited;
    std::vector<std::pair<TensorNode<T>*, std::size_t>> stack;
    stack.emplace_back(node_.get(), 0);
    visited.insert(node_.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            TensorNode<T>* parent = node->parents[next++].get();
            if (parent->requires_grad && visited.insert(parent).second) {
                stack.emplace_back(parent, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    // Interior grads are scratch for this pass; only leaves accumulate
    // across calls.
    for (auto* node : order) {
        if (node->backward_fn) node->grad.assign(node->value.size(), T(0));
    }
    node_->ensure_grad();
    node_->grad[0] += T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        if ((*it)->backward_fn) (*it)->backward_fn(**it);
    }
}

template class Tensor<float>;
template class Tensor<double>;

}  // namespace eafpmed
