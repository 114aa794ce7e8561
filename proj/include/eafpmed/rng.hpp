#pragma once

#include <cstdint>
#include <random>

#include "eafpmed/tensor.hpp"

namespace eafpmed {

// Seeded generator; every stochastic choice in the toolkit draws from one of
// these so identical seeds give identical runs.
class Rng {
public:
    explicit Rng(std::uint32_t seed) : engine_(seed) {}

    std::mt19937& engine() { return engine_; }

    template <typename T>
    T normal(T mean, T stddev) {
        std::normal_distribution<T> dist(mean, stddev);
        return dist(engine_);
    }

    template <typename T>
    T uniform(T lo, T hi) {
        std::uniform_real_distribution<T> dist(lo, hi);
        return dist(engine_);
    }

    int uniform_int(int lo, int hi) {  // inclusive bounds
        std::uniform_int_distribution<int> dist(lo, hi);
        return dist(engine_);
    }

    // Derive an independent stream, e.g. one per pipeline stage.
    Rng fork() { return Rng(static_cast<std::uint32_t>(engine_())); }

private:
    std::mt19937 engine_;
};

// Kaiming fan-in normal init matched to the leaky-relu gain
// sqrt(2 / (1 + slope^2)).
template <typename T>
Tensor<T> kaiming_normal(Rng& rng, const Shape& shape, int fan_in, T negative_slope,
                         bool requires_grad = true) {
    const T gain = std::sqrt(T(2) / (T(1) + negative_slope * negative_slope));
    const T stddev = gain / std::sqrt(static_cast<T>(fan_in));
    auto t = Tensor<T>::zeros(shape, requires_grad);
    for (auto& v : t.values_mut()) v = rng.normal(T(0), stddev);
    return t;
}

}  // namespace eafpmed
