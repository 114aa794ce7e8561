#pragma once

#include <string>
#include <vector>

#include "eafpmed/tensor.hpp"

namespace eafpmed::harness {

enum class OptimizerKind { Sgd, Adam };

OptimizerKind optimizer_kind_from_string(const std::string& s);
std::string to_string(OptimizerKind kind);

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::Adam;
    double learning_rate = 1e-3;
    double momentum = 0.9;  // SGD
    double beta1 = 0.9;     // Adam
    double beta2 = 0.999;
    double eps = 1e-8;

    void validate() const;
};

// Per-parameter state: SGD keeps velocity, Adam keeps first/second moments
// plus the shared step counter.
struct OptimizerState {
    std::vector<std::vector<float>> m;
    std::vector<std::vector<float>> v;
    std::int64_t step = 0;
};

// SGD with momentum: v <- mu*v + g; theta <- theta - lr*v.
// Adam: standard update with bias correction.
void optimizer_step(std::span<Tensor<float>> params, OptimizerState& state,
                    const OptimizerConfig& config);

void zero_grads(std::span<Tensor<float>> params);

}  // namespace eafpmed::harness
