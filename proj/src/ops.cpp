#include "eafpmed/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>

#include "eafpmed/errors.hpp"

namespace eafpmed {

namespace {

thread_local bool g_guided_backprop = false;

int ceil_div(int a, int b) { return (a + b - 1) / b; }

// Valid output range [lo,hi) such that 0 <= ow*stride + off < extent.
std::pair<int, int> valid_range(int out_extent, int stride, int off, int in_extent) {
    int lo = off < 0 ? ceil_div(-off, stride) : 0;
    int hi = in_extent > off ? std::min(out_extent, ceil_div(in_extent - off, stride)) : lo;
    return {lo, std::max(lo, hi)};
}

template <typename T>
Tensor<T> make_op(const Shape& shape, std::vector<T> value,
                  std::vector<Tensor<T>> parents,
                  std::function<void(TensorNode<T>&)> backward_fn) {
    auto out = Tensor<T>::from(shape, std::move(value));
    bool rg = false;
    for (const auto& p : parents) rg = rg || p.requires_grad();
    if (rg) {
        out.node()->requires_grad = true;
        for (const auto& p : parents) out.node()->parents.push_back(p.node());
        out.node()->backward_fn = std::move(backward_fn);
    }
    return out;
}

template <typename T>
void accumulate(TensorNode<T>& node, std::span<const T> delta) {
    node.ensure_grad();
    T* g = node.grad.data();
    for (std::size_t i = 0; i < delta.size(); ++i) g[i] += delta[i];
}

}  // namespace

GuidedBackpropScope::GuidedBackpropScope() : previous_(g_guided_backprop) {
    g_guided_backprop = true;
}
GuidedBackpropScope::~GuidedBackpropScope() { g_guided_backprop = previous_; }
bool GuidedBackpropScope::active() { return g_guided_backprop; }

void ConvSpec::validate() const {
    if (in_channels <= 0) throw ShapeError("conv spec: in_channels " + std::to_string(in_channels) + " must be positive");
    if (out_channels <= 0) throw ShapeError("conv spec: out_channels " + std::to_string(out_channels) + " must be positive");
    if (kernel <= 0 || kernel % 2 == 0) {
        throw ShapeError("conv spec: kernel " + std::to_string(kernel) + " must be odd and positive");
    }
    if (stride <= 0) throw ShapeError("conv spec: stride " + std::to_string(stride) + " must be positive");
    if (padding < 0) throw ShapeError("conv spec: padding " + std::to_string(padding) + " must be nonnegative");
    if (dilation <= 0) throw ShapeError("conv spec: dilation " + std::to_string(dilation) + " must be positive");
}

template <typename T>
BnState<T> BnState<T>::init(int channels, bool requires_grad) {
    BnState<T> s;
    s.gamma = Tensor<T>::full(Shape{channels}, T(1), requires_grad);
    s.beta = Tensor<T>::zeros(Shape{channels}, requires_grad);
    s.running_mean.assign(static_cast<std::size_t>(channels), T(0));
    s.running_var.assign(static_cast<std::size_t>(channels), T(1));
    return s;
}

template <typename T>
void BnState<T>::validate() const {
    if (eps <= T(0)) throw ShapeError("batch norm: eps must be positive");
    if (momentum <= T(0) || momentum >= T(1)) throw ShapeError("batch norm: momentum must lie in (0,1)");
    const int c = channels();
    if (beta.shape() != Shape{c} || static_cast<int>(running_mean.size()) != c ||
        static_cast<int>(running_var.size()) != c) {
        throw ShapeError("batch norm: per-channel vectors disagree on channel count " + std::to_string(c));
    }
    for (T v : running_var) {
        if (v < T(0)) throw ShapeError("batch norm: running variance must be nonnegative");
    }
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                 const ConvSpec& spec) {
    spec.validate();
    if (input.shape().rank() != 4) {
        throw ShapeError("conv2d: input rank " + std::to_string(input.shape().rank()) + " must be 4 (NCHW)");
    }
    const int n_batch = input.shape()[0], ch_in = input.shape()[1];
    const int h_in = input.shape()[2], w_in = input.shape()[3];
    if (ch_in != spec.in_channels) {
        throw ShapeError("conv2d: input channels " + std::to_string(ch_in) +
                         " != spec.in_channels " + std::to_string(spec.in_channels));
    }
    const Shape want_w{spec.out_channels, spec.in_channels, spec.kernel, spec.kernel};
    if (weight.shape() != want_w) {
        throw ShapeError("conv2d: weight shape " + weight.shape().str() + " != expected " + want_w.str());
    }
    if (bias.shape() != Shape{spec.out_channels}) {
        throw ShapeError("conv2d: bias shape " + bias.shape().str() + " != expected (" +
                         std::to_string(spec.out_channels) + ")");
    }
    const int h_out = spec.out_extent(h_in), w_out = spec.out_extent(w_in);
    if (h_out <= 0 || w_out <= 0) {
        throw ShapeError("conv2d: output extent " + std::to_string(h_out) + "x" + std::to_string(w_out) +
                         " collapses for input " + input.shape().str());
    }

    const int ch_out = spec.out_channels, k = spec.kernel;
    const int stride = spec.stride, pad = spec.padding, dil = spec.dilation;
    const Shape out_shape{n_batch, ch_out, h_out, w_out};
    std::vector<T> out(static_cast<std::size_t>(out_shape.numel()));

    const T* x = input.values().data();
    const T* w = weight.values().data();
    const T* b = bias.values().data();
    const std::size_t in_plane = static_cast<std::size_t>(h_in) * w_in;
    const std::size_t out_plane = static_cast<std::size_t>(h_out) * w_out;

    for (int n = 0; n < n_batch; ++n) {
        for (int oc = 0; oc < ch_out; ++oc) {
            T* out_map = out.data() + (static_cast<std::size_t>(n) * ch_out + oc) * out_plane;
            std::fill(out_map, out_map + out_plane, b[oc]);
            for (int ic = 0; ic < ch_in; ++ic) {
                const T* in_map = x + (static_cast<std::size_t>(n) * ch_in + ic) * in_plane;
                const T* w_tap = w + ((static_cast<std::size_t>(oc) * ch_in + ic) * k) * k;
                for (int kh = 0; kh < k; ++kh) {
                    const int h_off = kh * dil - pad;
                    const auto [oh_lo, oh_hi] = valid_range(h_out, stride, h_off, h_in);
                    for (int kw = 0; kw < k; ++kw) {
                        const int w_off = kw * dil - pad;
                        const auto [ow_lo, ow_hi] = valid_range(w_out, stride, w_off, w_in);
                        const T wv = w_tap[kh * k + kw];
                        for (int oh = oh_lo; oh < oh_hi; ++oh) {
                            const T* in_row = in_map + static_cast<std::size_t>(oh * stride + h_off) * w_in + w_off;
                            T* out_row = out_map + static_cast<std::size_t>(oh) * w_out;
                            if (stride == 1) {
                                for (int ow = ow_lo; ow < ow_hi; ++ow) out_row[ow] += wv * in_row[ow];
                            } else {
                                for (int ow = ow_lo; ow < ow_hi; ++ow) {
                                    out_row[ow] += wv * in_row[static_cast<std::size_t>(ow) * stride];
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    auto in_node = input.node();
    auto w_node = weight.node();
    auto b_node = bias.node();
    auto backward = [in_node, w_node, b_node, spec, n_batch, ch_in, h_in, w_in, h_out,
                     w_out](TensorNode<T>& node) {
        const int ch_out = spec.out_channels, k = spec.kernel;
        const int stride = spec.stride, pad = spec.padding, dil = spec.dilation;
        const std::size_t in_plane = static_cast<std::size_t>(h_in) * w_in;
        const std::size_t out_plane = static_cast<std::size_t>(h_out) * w_out;
        const T* g = node.grad.data();
        const T* x = in_node->value.data();
        const T* w = w_node->value.data();
        const bool need_dx = in_node->requires_grad;
        const bool need_dw = w_node->requires_grad;
        const bool need_db = b_node->requires_grad;
        if (need_dx) in_node->ensure_grad();
        if (need_dw) w_node->ensure_grad();
        if (need_db) b_node->ensure_grad();

        if (need_db) {
            for (int n = 0; n < n_batch; ++n) {
                for (int oc = 0; oc < ch_out; ++oc) {
                    const T* g_map = g + (static_cast<std::size_t>(n) * ch_out + oc) * out_plane;
                    T acc = 0;
                    for (std::size_t i = 0; i < out_plane; ++i) acc += g_map[i];
                    b_node->grad[static_cast<std::size_t>(oc)] += acc;
                }
            }
        }
        if (!need_dx && !need_dw) return;

        for (int n = 0; n < n_batch; ++n) {
            for (int oc = 0; oc < ch_out; ++oc) {
                const T* g_map = g + (static_cast<std::size_t>(n) * ch_out + oc) * out_plane;
                for (int ic = 0; ic < ch_in; ++ic) {
                    const T* in_map = x + (static_cast<std::size_t>(n) * ch_in + ic) * in_plane;
                    T* dx_map = need_dx
                        ? in_node->grad.data() + (static_cast<std::size_t>(n) * ch_in + ic) * in_plane
                        : nullptr;
                    const std::size_t w_base = (static_cast<std::size_t>(oc) * ch_in + ic) * k * k;
                    for (int kh = 0; kh < k; ++kh) {
                        const int h_off = kh * dil - pad;
                        const auto [oh_lo, oh_hi] = valid_range(h_out, stride, h_off, h_in);
                        for (int kw = 0; kw < k; ++kw) {
                            const int w_off = kw * dil - pad;
                            const auto [ow_lo, ow_hi] = valid_range(w_out, stride, w_off, w_in);
                            const T wv = w[w_base + static_cast<std::size_t>(kh) * k + kw];
                            T dw_acc = 0;
                            for (int oh = oh_lo; oh < oh_hi; ++oh) {
                                const std::size_t in_row =
                                    static_cast<std::size_t>(oh * stride + h_off) * w_in + w_off;
                                const T* g_row = g_map + static_cast<std::size_t>(oh) * w_out;
                                if (stride == 1) {
                                    if (need_dw) {
                                        const T* x_row = in_map + in_row;
                                        for (int ow = ow_lo; ow < ow_hi; ++ow) dw_acc += g_row[ow] * x_row[ow];
                                    }
                                    if (need_dx) {
                                        T* dx_row = dx_map + in_row;
                                        for (int ow = ow_lo; ow < ow_hi; ++ow) dx_row[ow] += g_row[ow] * wv;
                                    }
                                } else {
                                    for (int ow = ow_lo; ow < ow_hi; ++ow) {
                                        const std::size_t idx = in_row + static_cast<std::size_t>(ow) * stride;
                                        if (need_dw) dw_acc += g_row[ow] * in_map[idx];
                                        if (need_dx) dx_map[idx] += g_row[ow] * wv;
                                    }
                                }
                            }
                            if (need_dw) w_node->grad[w_base + static_cast<std::size_t>(kh) * k + kw] += dw_acc;
                        }
                    }
                }
            }
        }
    };

    return make_op<T>(out_shape, std::move(out), {input, weight, bias}, std::move(backward));
}

template <typename T>
Tensor<T> batch_norm2d(const Tensor<T>& input, BnState<T>& state) {
    state.validate();
    if (input.shape().rank() != 4) {
        throw ShapeError("batch_norm2d: input rank " + std::to_string(input.shape().rank()) + " must be 4 (NCHW)");
    }
    const int n_batch = input.shape()[0], channels = input.shape()[1];
    const int h = input.shape()[2], w = input.shape()[3];
    if (channels != state.channels()) {
        throw ShapeError("batch_norm2d: input channels " + std::to_string(channels) +
                         " != state channels " + std::to_string(state.channels()));
    }

    const std::size_t plane = static_cast<std::size_t>(h) * w;
    const std::size_t per_channel = static_cast<std::size_t>(n_batch) * plane;
    const T* x = input.values().data();
    const T* gamma = state.gamma.values().data();
    const T* beta = state.beta.values().data();

    std::vector<T> mean(static_cast<std::size_t>(channels));
    std::vector<T> inv_std(static_cast<std::size_t>(channels));
    std::vector<T> out(input.values().size());
    const bool training = state.mode == BnMode::Training;

    for (int c = 0; c < channels; ++c) {
        T mu, var;
        if (training) {
            T acc = 0, acc2 = 0;
            for (int n = 0; n < n_batch; ++n) {
                const T* map = x + (static_cast<std::size_t>(n) * channels + c) * plane;
                for (std::size_t i = 0; i < plane; ++i) acc += map[i];
            }
            mu = acc / static_cast<T>(per_channel);
            for (int n = 0; n < n_batch; ++n) {
                const T* map = x + (static_cast<std::size_t>(n) * channels + c) * plane;
                for (std::size_t i = 0; i < plane; ++i) {
                    const T d = map[i] - mu;
                    acc2 += d * d;
                }
            }
            var = acc2 / static_cast<T>(per_channel);  // biased, used for normalization
            const T unbiased = per_channel > 1
                ? acc2 / static_cast<T>(per_channel - 1)
                : var;
            state.running_mean[static_cast<std::size_t>(c)] =
                (T(1) - state.momentum) * state.running_mean[static_cast<std::size_t>(c)] + state.momentum * mu;
            state.running_var[static_cast<std::size_t>(c)] =
                (T(1) - state.momentum) * state.running_var[static_cast<std::size_t>(c)] + state.momentum * unbiased;
        } else {
            mu = state.running_mean[static_cast<std::size_t>(c)];
            var = state.running_var[static_cast<std::size_t>(c)];
        }
        mean[static_cast<std::size_t>(c)] = mu;
        const T istd = T(1) / std::sqrt(var + state.eps);
        inv_std[static_cast<std::size_t>(c)] = istd;
        const T g_istd = gamma[c] * istd;
        const T shift = beta[c] - mu * g_istd;
        for (int n = 0; n < n_batch; ++n) {
            const std::size_t base = (static_cast<std::size_t>(n) * channels + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) out[base + i] = x[base + i] * g_istd + shift;
        }
    }

    auto in_node = input.node();
    auto gamma_node = state.gamma.node();
    auto beta_node = state.beta.node();
    auto backward = [in_node, gamma_node, beta_node, mean = std::move(mean),
                     inv_std = std::move(inv_std), n_batch, channels, plane, per_channel,
                     training](TensorNode<T>& node) {
        const T* g = node.grad.data();
        const T* x = in_node->value.data();
        const T* gamma = gamma_node->value.data();
        const bool need_dx = in_node->requires_grad;
        const bool need_dg = gamma_node->requires_grad;
        const bool need_db = beta_node->requires_grad;
        if (need_dx) in_node->ensure_grad();
        if (need_dg) gamma_node->ensure_grad();
        if (need_db) beta_node->ensure_grad();

        for (int c = 0; c < channels; ++c) {
            const T mu = mean[static_cast<std::size_t>(c)];
            const T istd = inv_std[static_cast<std::size_t>(c)];
            T sum_g = 0, sum_g_xhat = 0;
            for (int n = 0; n < n_batch; ++n) {
                const std::size_t base = (static_cast<std::size_t>(n) * channels + c) * plane;
                for (std::size_t i = 0; i < plane; ++i) {
                    const T gv = g[base + i];
                    sum_g += gv;
                    sum_g_xhat += gv * (x[base + i] - mu) * istd;
                }
            }
            if (need_dg) gamma_node->grad[static_cast<std::size_t>(c)] += sum_g_xhat;
            if (need_db) beta_node->grad[static_cast<std::size_t>(c)] += sum_g;
            if (!need_dx) continue;
            const T gam = gamma[c];
            if (training) {
                const T inv_n = T(1) / static_cast<T>(per_channel);
                for (int n = 0; n < n_batch; ++n) {
                    const std::size_t base = (static_cast<std::size_t>(n) * channels + c) * plane;
                    for (std::size_t i = 0; i < plane; ++i) {
                        const T xhat = (x[base + i] - mu) * istd;
                        in_node->grad[base + i] +=
                            gam * istd * (g[base + i] - inv_n * sum_g - xhat * inv_n * sum_g_xhat);
                    }
                }
            } else {
                const T k = gam * istd;
                for (int n = 0; n < n_batch; ++n) {
                    const std::size_t base = (static_cast<std::size_t>(n) * channels + c) * plane;
                    for (std::size_t i = 0; i < plane; ++i) in_node->grad[base + i] += k * g[base + i];
                }
            }
        }
    };

    return make_op<T>(input.shape(), std::move(out), {input, state.gamma, state.beta},
                      std::move(backward));
}

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& input, T negative_slope) {
    if (!(negative_slope > T(0) && negative_slope < T(1))) {
        throw ShapeError("leaky_relu: negative slope must lie in (0,1)");
    }
    std::vector<T> out(input.values().size());
    const T* x = input.values().data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] >= T(0) ? x[i] : negative_slope * x[i];

    auto in_node = input.node();
    auto backward = [in_node, negative_slope](TensorNode<T>& node) {
        if (!in_node->requires_grad) return;
        in_node->ensure_grad();
        const T* g = node.grad.data();
        const T* x = in_node->value.data();
        T* dx = in_node->grad.data();
        if (GuidedBackpropScope::active()) {
            for (std::size_t i = 0; i < node.grad.size(); ++i) {
                if (x[i] >= T(0) && g[i] >= T(0)) dx[i] += g[i];
            }
        } else {
            for (std::size_t i = 0; i < node.grad.size(); ++i) {
                dx[i] += x[i] >= T(0) ? g[i] : negative_slope * g[i];
            }
        }
    };
    return make_op<T>(input.shape(), std::move(out), {input}, std::move(backward));
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape() != b.shape()) {
        throw ShapeError("add: shape " + a.shape().str() + " != shape " + b.shape().str());
    }
    std::vector<T> out(a.values().size());
    const T* pa = a.values().data();
    const T* pb = b.values().data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = pa[i] + pb[i];

    auto a_node = a.node();
    auto b_node = b.node();
    auto backward = [a_node, b_node](TensorNode<T>& node) {
        if (a_node->requires_grad) accumulate(*a_node, std::span<const T>(node.grad));
        if (b_node->requires_grad) accumulate(*b_node, std::span<const T>(node.grad));
    };
    return make_op<T>(a.shape(), std::move(out), {a, b}, std::move(backward));
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape() != b.shape()) {
        throw ShapeError("mul: shape " + a.shape().str() + " != shape " + b.shape().str());
    }
    std::vector<T> out(a.values().size());
    const T* pa = a.values().data();
    const T* pb = b.values().data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = pa[i] * pb[i];

    auto a_node = a.node();
    auto b_node = b.node();
    auto backward = [a_node, b_node](TensorNode<T>& node) {
        const T* g = node.grad.data();
        if (a_node->requires_grad) {
            a_node->ensure_grad();
            for (std::size_t i = 0; i < node.grad.size(); ++i) a_node->grad[i] += g[i] * b_node->value[i];
        }
        if (b_node->requires_grad) {
            b_node->ensure_grad();
            for (std::size_t i = 0; i < node.grad.size(); ++i) b_node->grad[i] += g[i] * a_node->value[i];
        }
    };
    return make_op<T>(a.shape(), std::move(out), {a, b}, std::move(backward));
}

template <typename T>
Tensor<T> scale(const Tensor<T>& input, T factor) {
    std::vector<T> out(input.values().size());
    const T* x = input.values().data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = factor * x[i];

    auto in_node = input.node();
    auto backward = [in_node, factor](TensorNode<T>& node) {
        if (!in_node->requires_grad) return;
        in_node->ensure_grad();
        for (std::size_t i = 0; i < node.grad.size(); ++i) in_node->grad[i] += factor * node.grad[i];
    };
    return make_op<T>(input.shape(), std::move(out), {input}, std::move(backward));
}

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape().rank() != 4 || b.shape().rank() != 4) {
        throw ShapeError("concat_channels: both inputs must be rank 4 (NCHW)");
    }
    for (int axis : {0, 2, 3}) {
        if (a.shape()[axis] != b.shape()[axis]) {
            throw ShapeError("concat_channels: axis " + std::to_string(axis) + " mismatch, " +
                             a.shape().str() + " vs " + b.shape().str());
        }
    }
    const int n_batch = a.shape()[0], ca = a.shape()[1], cb = b.shape()[1];
    const int h = a.shape()[2], w = a.shape()[3];
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    const Shape out_shape{n_batch, ca + cb, h, w};
    std::vector<T> out(static_cast<std::size_t>(out_shape.numel()));
    for (int n = 0; n < n_batch; ++n) {
        std::copy_n(a.values().data() + static_cast<std::size_t>(n) * ca * plane, ca * plane,
                    out.data() + static_cast<std::size_t>(n) * (ca + cb) * plane);
        std::copy_n(b.values().data() + static_cast<std::size_t>(n) * cb * plane, cb * plane,
                    out.data() + (static_cast<std::size_t>(n) * (ca + cb) + ca) * plane);
    }

    auto a_node = a.node();
    auto b_node = b.node();
    auto backward = [a_node, b_node, n_batch, ca, cb, plane](TensorNode<T>& node) {
        const T* g = node.grad.data();
        if (a_node->requires_grad) {
            a_node->ensure_grad();
            for (int n = 0; n < n_batch; ++n) {
                const T* src = g + static_cast<std::size_t>(n) * (ca + cb) * plane;
                T* dst = a_node->grad.data() + static_cast<std::size_t>(n) * ca * plane;
                for (std::size_t i = 0; i < static_cast<std::size_t>(ca) * plane; ++i) dst[i] += src[i];
            }
        }
        if (b_node->requires_grad) {
            b_node->ensure_grad();
            for (int n = 0; n < n_batch; ++n) {
                const T* src = g + (static_cast<std::size_t>(n) * (ca + cb) + ca) * plane;
                T* dst = b_node->grad.data() + static_cast<std::size_t>(n) * cb * plane;
                for (std::size_t i = 0; i < static_cast<std::size_t>(cb) * plane; ++i) dst[i] += src[i];
            }
        }
    };
    return make_op<T>(out_shape, std::move(out), {a, b}, std::move(backward));
}

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& input) {
    if (input.shape().rank() != 4) {
        throw ShapeError("global_avg_pool: input rank " + std::to_string(input.shape().rank()) +
                         " must be 4 (NCHW)");
    }
    const int n_batch = input.shape()[0], channels = input.shape()[1];
    const int h = input.shape()[2], w = input.shape()[3];
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    std::vector<T> out(static_cast<std::size_t>(n_batch) * channels);
    const T* x = input.values().data();
    for (std::size_t m = 0; m < out.size(); ++m) {
        T acc = 0;
        const T* map = x + m * plane;
        for (std::size_t i = 0; i < plane; ++i) acc += map[i];
        out[m] = acc / static_cast<T>(plane);
    }

    auto in_node = input.node();
    auto backward = [in_node, plane](TensorNode<T>& node) {
        if (!in_node->requires_grad) return;
        in_node->ensure_grad();
        const T inv = T(1) / static_cast<T>(plane);
        for (std::size_t m = 0; m < node.grad.size(); ++m) {
            const T gv = node.grad[m] * inv;
            T* dst = in_node->grad.data() + m * plane;
            for (std::size_t i = 0; i < plane; ++i) dst[i] += gv;
        }
    };
    return make_op<T>(Shape{n_batch, channels, 1, 1}, std::move(out), {input}, std::move(backward));
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& input, const Shape& shape) {
    if (shape.numel() != input.numel()) {
        throw ShapeError("reshape: numel " + std::to_string(input.numel()) + " of " +
                         input.shape().str() + " != numel of " + shape.str());
    }
    std::vector<T> out(input.values().begin(), input.values().end());
    auto in_node = input.node();
    auto backward = [in_node](TensorNode<T>& node) {
        if (in_node->requires_grad) accumulate(*in_node, std::span<const T>(node.grad));
    };
    return make_op<T>(shape, std::move(out), {input}, std::move(backward));
}

template <typename T>
Tensor<T> linear(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias) {
    if (input.shape().rank() != 2) {
        throw ShapeError("linear: input rank " + std::to_string(input.shape().rank()) + " must be 2 (NC)");
    }
    if (weight.shape().rank() != 2) {
        throw ShapeError("linear: weight rank " + std::to_string(weight.shape().rank()) + " must be 2 (KC)");
    }
    const int n_batch = input.shape()[0], features = input.shape()[1];
    const int out_features = weight.shape()[0];
    if (weight.shape()[1] != features) {
        throw ShapeError("linear: weight inner extent " + std::to_string(weight.shape()[1]) +
                         " != input features " + std::to_string(features));
    }
    if (bias.shape() != Shape{out_features}) {
        throw ShapeError("linear: bias shape " + bias.shape().str() + " != expected (" +
                         std::to_string(out_features) + ")");
    }
    std::vector<T> out(static_cast<std::size_t>(n_batch) * out_features);
    const T* x = input.values().data();
    const T* w = weight.values().data();
    const T* b = bias.values().data();
    for (int n = 0; n < n_batch; ++n) {
        const T* xr = x + static_cast<std::size_t>(n) * features;
        for (int k = 0; k < out_features; ++k) {
            const T* wr = w + static_cast<std::size_t>(k) * features;
            T acc = b[k];
            for (int c = 0; c < features; ++c) acc += xr[c] * wr[c];
            out[static_cast<std::size_t>(n) * out_features + k] = acc;
        }
    }

    auto in_node = input.node();
    auto w_node = weight.node();
    auto b_node = bias.node();
    auto backward = [in_node, w_node, b_node, n_batch, features, out_features](TensorNode<T>& node) {
        const T* g = node.grad.data();
        const T* x = in_node->value.data();
        const T* w = w_node->value.data();
        if (in_node->requires_grad) in_node->ensure_grad();
        if (w_node->requires_grad) w_node->ensure_grad();
        if (b_node->requires_grad) b_node->ensure_grad();
        for (int n = 0; n < n_batch; ++n) {
            const T* gr = g + static_cast<std::size_t>(n) * out_features;
            const T* xr = x + static_cast<std::size_t>(n) * features;
            for (int k = 0; k < out_features; ++k) {
                const T gv = gr[k];
                const T* wr = w + static_cast<std::size_t>(k) * features;
                if (b_node->requires_grad) b_node->grad[static_cast<std::size_t>(k)] += gv;
                if (in_node->requires_grad) {
                    T* dx = in_node->grad.data() + static_cast<std::size_t>(n) * features;
                    for (int c = 0; c < features; ++c) dx[c] += gv * wr[c];
                }
                if (w_node->requires_grad) {
                    T* dw = w_node->grad.data() + static_cast<std::size_t>(k) * features;
                    for (int c = 0; c < features; ++c) dw[c] += gv * xr[c];
                }
            }
        }
    };
    return make_op<T>(Shape{n_batch, out_features}, std::move(out), {input, weight, bias},
                      std::move(backward));
}

template <typename T>
CrossEntropyResult<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const int> labels) {
    if (logits.shape().rank() != 2) {
        throw ShapeError("softmax_cross_entropy: logits rank " +
                         std::to_string(logits.shape().rank()) + " must be 2 (NK)");
    }
    const int n_batch = logits.shape()[0], classes = logits.shape()[1];
    if (static_cast<int>(labels.size()) != n_batch) {
        throw ShapeError("softmax_cross_entropy: label count " + std::to_string(labels.size()) +
                         " != batch size " + std::to_string(n_batch));
    }
    for (int n = 0; n < n_batch; ++n) {
        if (labels[static_cast<std::size_t>(n)] < 0 || labels[static_cast<std::size_t>(n)] >= classes) {
            throw ShapeError("softmax_cross_entropy: label " +
                             std::to_string(labels[static_cast<std::size_t>(n)]) + " at sample " +
                             std::to_string(n) + " outside [0," + std::to_string(classes) + ")");
        }
    }

    std::vector<T> probs(logits.values().size());
    const T* z = logits.values().data();
    T loss_acc = 0;
    for (int n = 0; n < n_batch; ++n) {
        const T* zr = z + static_cast<std::size_t>(n) * classes;
        T* pr = probs.data() + static_cast<std::size_t>(n) * classes;
        T zmax = zr[0];
        for (int k = 1; k < classes; ++k) zmax = std::max(zmax, zr[k]);
        T denom = 0;
        for (int k = 0; k < classes; ++k) {
            pr[k] = std::exp(zr[k] - zmax);
            denom += pr[k];
        }
        const T log_denom = std::log(denom);
        for (int k = 0; k < classes; ++k) pr[k] /= denom;
        const int y = labels[static_cast<std::size_t>(n)];
        loss_acc += log_denom - (zr[y] - zmax);  // -log softmax(z)[y]
    }
    const T loss_value = loss_acc / static_cast<T>(n_batch);

    auto logits_node = logits.node();
    std::vector<int> labels_copy(labels.begin(), labels.end());
    auto backward = [logits_node, probs, labels_copy, n_batch, classes](TensorNode<T>& node) {
        if (!logits_node->requires_grad) return;
        logits_node->ensure_grad();
        const T g = node.grad[0] / static_cast<T>(n_batch);
        for (int n = 0; n < n_batch; ++n) {
            const std::size_t base = static_cast<std::size_t>(n) * classes;
            for (int k = 0; k < classes; ++k) {
                const T indicator = k == labels_copy[static_cast<std::size_t>(n)] ? T(1) : T(0);
                logits_node->grad[base + k] += g * (probs[base + k] - indicator);
            }
        }
    };
    CrossEntropyResult<T> result;
    result.probs = Tensor<T>::from(logits.shape(), probs);
    result.loss = make_op<T>(Shape::scalar(), {loss_value}, {logits}, std::move(backward));
    return result;
}

template <typename T>
Tensor<T> sum(const Tensor<T>& input) {
    T acc = 0;
    for (T v : input.values()) acc += v;
    auto in_node = input.node();
    auto backward = [in_node](TensorNode<T>& node) {
        if (!in_node->requires_grad) return;
        in_node->ensure_grad();
        const T g = node.grad[0];
        for (auto& dv : in_node->grad) dv += g;
    };
    return make_op<T>(Shape::scalar(), {acc}, {input}, std::move(backward));
}

template <typename T>
Tensor<T> pick(const Tensor<T>& input, int row, int col) {
    if (input.shape().rank() != 2) {
        throw ShapeError("pick: input rank " + std::to_string(input.shape().rank()) + " must be 2");
    }
    const int rows = input.shape()[0], cols = input.shape()[1];
    if (row < 0 || row >= rows || col < 0 || col >= cols) {
        throw ShapeError("pick: index (" + std::to_string(row) + "," + std::to_string(col) +
                         ") outside " + input.shape().str());
    }
    const std::size_t idx = static_cast<std::size_t>(row) * cols + col;
    auto in_node = input.node();
    auto backward = [in_node, idx](TensorNode<T>& node) {
        if (!in_node->requires_grad) return;
        in_node->ensure_grad();
        in_node->grad[idx] += node.grad[0];
    };
    return make_op<T>(Shape::scalar(), {input.values()[idx]}, {input}, std::move(backward));
}

#define EAFPMED_INSTANTIATE_OPS(T)                                                              \
    template struct BnState<T>;                                                                 \
    template Tensor<T> conv2d<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,          \
                                 const ConvSpec&);                                              \
    template Tensor<T> batch_norm2d<T>(const Tensor<T>&, BnState<T>&);                          \
    template Tensor<T> leaky_relu<T>(const Tensor<T>&, T);                                      \
    template Tensor<T> add<T>(const Tensor<T>&, const Tensor<T>&);                              \
    template Tensor<T> mul<T>(const Tensor<T>&, const Tensor<T>&);                              \
    template Tensor<T> scale<T>(const Tensor<T>&, T);                                           \
    template Tensor<T> concat_channels<T>(const Tensor<T>&, const Tensor<T>&);                  \
    template Tensor<T> global_avg_pool<T>(const Tensor<T>&);                                    \
    template Tensor<T> reshape<T>(const Tensor<T>&, const Shape&);                              \
    template Tensor<T> linear<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);         \
    template CrossEntropyResult<T> softmax_cross_entropy<T>(const Tensor<T>&,                   \
                                                            std::span<const int>);              \
    template Tensor<T> sum<T>(const Tensor<T>&);                                                \
    template Tensor<T> pick<T>(const Tensor<T>&, int, int);

EAFPMED_INSTANTIATE_OPS(float)
EAFPMED_INSTANTIATE_OPS(double)

#undef EAFPMED_INSTANTIATE_OPS

}  // namespace eafpmed
