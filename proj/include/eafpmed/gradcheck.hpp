#pragma once

#include <functional>
#include <span>

#include "eafpmed/tensor.hpp"

namespace eafpmed {

// Central finite-difference verification of reverse-mode gradients.
//
// `fn` must rebuild its graph on every call and return a scalar loss that is
// a deterministic, twice-differentiable function of `params`. Returns the
// maximum over all parameter elements of
//   |analytic - (f(p+eps) - f(p-eps)) / (2 eps)| / max(1, |analytic|).
template <typename T>
double finite_difference_check(const std::function<Tensor<T>()>& fn,
                               std::span<Tensor<T>> params, T eps);

extern template double finite_difference_check<float>(const std::function<Tensor<float>()>&,
                                                      std::span<Tensor<float>>, float);
extern template double finite_difference_check<double>(const std::function<Tensor<double>()>&,
                                                       std::span<Tensor<double>>, double);

}  // namespace eafpmed
