#include "eafpmed/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "eafpmed/errors.hpp"

namespace eafpmed {

template <typename T>
double finite_difference_check(const std::function<Tensor<T>()>& fn,
                               std::span<Tensor<T>> params, T eps) {
    if (!(eps > T(0))) throw ShapeError("finite_difference_check: eps must be positive");

    for (auto& p : params) p.zero_grad();
    Tensor<T> loss = fn();
    loss.backward();

    std::vector<std::vector<T>> analytic;
    analytic.reserve(params.size());
    for (auto& p : params) {
        auto g = p.grad();
        analytic.emplace_back(g.begin(), g.end());
        if (analytic.back().empty()) analytic.back().assign(static_cast<std::size_t>(p.numel()), T(0));
    }

    double worst = 0.0;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto vals = params[pi].values_mut();
        for (std::size_t i = 0; i < vals.size(); ++i) {
            const T saved = vals[i];
            vals[i] = saved + eps;
            const double f_plus = static_cast<double>(fn().item());
            vals[i] = saved - eps;
            const double f_minus = static_cast<double>(fn().item());
            vals[i] = saved;
            const double numeric = (f_plus - f_minus) / (2.0 * static_cast<double>(eps));
            const double a = static_cast<double>(analytic[pi][i]);
            const double rel = std::abs(a - numeric) / std::max(1.0, std::abs(a));
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

template double finite_difference_check<float>(const std::function<Tensor<float>()>&,
                                               std::span<Tensor<float>>, float);
template double finite_difference_check<double>(const std::function<Tensor<double>()>&,
                                                std::span<Tensor<double>>, double);

}  // namespace eafpmed
