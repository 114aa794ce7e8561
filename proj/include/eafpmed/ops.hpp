#pragma once

#include <utility>
#include <vector>

#include "eafpmed/tensor.hpp"

namespace eafpmed {

// Convolution geometry. Cross-correlation, no kernel flip.
struct ConvSpec {
    int in_channels = 1;
    int out_channels = 1;
    int kernel = 3;  // square, odd
    int stride = 1;
    int padding = 0;
    int dilation = 1;

    void validate() const;
    int out_extent(int in) const {
        return (in + 2 * padding - dilation * (kernel - 1) - 1) / stride + 1;
    }
    // Padding that preserves spatial extents at stride 1.
    static int same_padding(int kernel, int dilation) { return dilation * (kernel - 1) / 2; }
};

enum class BnMode { Training, Inference };

// Per-channel batch normalization state. gamma/beta are trainable leaves;
// running statistics are buffers updated as a side effect of training-mode
// forward passes (EMA with the stated momentum, unbiased variance).
template <typename T>
struct BnState {
    Tensor<T> gamma;  // (C)
    Tensor<T> beta;   // (C)
    std::vector<T> running_mean;
    std::vector<T> running_var;
    T momentum = T(0.1);
    T eps = T(1e-5);
    BnMode mode = BnMode::Training;

    static BnState init(int channels, bool requires_grad = true);
    int channels() const { return gamma.shape()[0]; }
    void validate() const;
};

// While a scope is alive on this thread, leaky_relu backward additionally
// zeroes the upstream gradient where the forward input or the upstream
// gradient itself is negative (guided backpropagation rule).
class GuidedBackpropScope {
public:
    GuidedBackpropScope();
    ~GuidedBackpropScope();
    GuidedBackpropScope(const GuidedBackpropScope&) = delete;
    GuidedBackpropScope& operator=(const GuidedBackpropScope&) = delete;
    static bool active();

private:
    bool previous_;
};

// input (N,C,H,W), weight (O,I,K,K), bias (O).
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                 const ConvSpec& spec);

template <typename T>
Tensor<T> batch_norm2d(const Tensor<T>& input, BnState<T>& state);

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& input, T negative_slope = T(0.01));

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> scale(const Tensor<T>& input, T factor);

// (N,Ca,H,W) + (N,Cb,H,W) -> (N,Ca+Cb,H,W)
template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b);

// (N,C,H,W) -> (N,C,1,1), arithmetic mean over H*W.
template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& input);

// Same numel, new extents; grads pass through unchanged.
template <typename T>
Tensor<T> reshape(const Tensor<T>& input, const Shape& shape);

// input (N,C), weight (K,C), bias (K) -> (N,K).
template <typename T>
Tensor<T> linear(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias);

template <typename T>
struct CrossEntropyResult {
    Tensor<T> loss;   // scalar, mean over batch
    Tensor<T> probs;  // (N,K), detached softmax probabilities
};

template <typename T>
CrossEntropyResult<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const int> labels);

// Reduce to a rank-0 scalar.
template <typename T>
Tensor<T> sum(const Tensor<T>& input);

// Select one element of a rank-2 tensor as a scalar.
template <typename T>
Tensor<T> pick(const Tensor<T>& input, int row, int col);

}  // namespace eafpmed
