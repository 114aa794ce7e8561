#include "eafpmed/optimizer.hpp"

#include <cmath>

#include "eafpmed/errors.hpp"

namespace eafpmed::harness {

OptimizerKind optimizer_kind_from_string(const std::string& s) {
    if (s == "sgd") return OptimizerKind::Sgd;
    if (s == "adam") return OptimizerKind::Adam;
    throw FormatError("optimizer: unknown kind '" + s + "' (sgd|adam)");
}

std::string to_string(OptimizerKind kind) {
    return kind == OptimizerKind::Sgd ? "sgd" : "adam";
}

void OptimizerConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ShapeError("optimizer: learning rate must be positive");
    if (momentum < 0.0 || momentum >= 1.0) throw ShapeError("optimizer: momentum must lie in [0,1)");
    if (beta1 <= 0.0 || beta1 >= 1.0 || beta2 <= 0.0 || beta2 >= 1.0) {
        throw ShapeError("optimizer: adam betas must lie in (0,1)");
    }
    if (!(eps > 0.0)) throw ShapeError("optimizer: eps must be positive");
}

void optimizer_step(std::span<Tensor<float>> params, OptimizerState& state,
                    const OptimizerConfig& config) {
    config.validate();
    if (state.m.empty()) {
        state.m.resize(params.size());
        state.v.resize(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            state.m[i].assign(static_cast<std::size_t>(params[i].numel()), 0.0f);
            state.v[i].assign(static_cast<std::size_t>(params[i].numel()), 0.0f);
        }
    }
    if (state.m.size() != params.size()) {
        throw ShapeError("optimizer: state tracks " + std::to_string(state.m.size()) +
                         " parameters, got " + std::to_string(params.size()));
    }
    ++state.step;

    const auto lr = static_cast<float>(config.learning_rate);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto values = params[i].values_mut();
        auto grad = params[i].grad();
        if (grad.empty()) continue;  // parameter untouched by the last backward
        if (grad.size() != values.size()) {
            throw ShapeError("optimizer: parameter " + std::to_string(i) + " grad size mismatch");
        }
        if (state.m[i].size() != values.size()) {
            throw ShapeError("optimizer: parameter " + std::to_string(i) + " state size mismatch");
        }
        if (config.kind == OptimizerKind::Sgd) {
            const auto mu = static_cast<float>(config.momentum);
            auto& velocity = state.m[i];
            for (std::size_t j = 0; j < values.size(); ++j) {
                velocity[j] = mu * velocity[j] + grad[j];
                values[j] -= lr * velocity[j];
            }
        } else {
            const auto b1 = static_cast<float>(config.beta1);
            const auto b2 = static_cast<float>(config.beta2);
            const auto eps = static_cast<float>(config.eps);
            const float bias1 = 1.0f - std::pow(b1, static_cast<float>(state.step));
            const float bias2 = 1.0f - std::pow(b2, static_cast<float>(state.step));
            auto& m = state.m[i];
            auto& v = state.v[i];
            for (std::size_t j = 0; j < values.size(); ++j) {
                m[j] = b1 * m[j] + (1.0f - b1) * grad[j];
                v[j] = b2 * v[j] + (1.0f - b2) * grad[j] * grad[j];
                const float m_hat = m[j] / bias1;
                const float v_hat = v[j] / bias2;
                values[j] -= lr * m_hat / (std::sqrt(v_hat) + eps);
            }
        }
    }
}

void zero_grads(std::span<Tensor<float>> params) {
    for (auto& p : params) p.zero_grad();
}

}  // namespace eafpmed::harness
