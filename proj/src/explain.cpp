#include "eafpmed/explain.hpp"

#include <algorithm>
#include <cmath>

#include "eafpmed/errors.hpp"
#include "eafpmed/netpbm.hpp"

namespace eafpmed::explain {

namespace {

Tensor<float> as_batch(const Tensor<float>& image, bool requires_grad) {
    Shape shape;
    if (image.shape().rank() == 3) {
        shape = Shape{1, image.shape()[0], image.shape()[1], image.shape()[2]};
    } else if (image.shape().rank() == 4 && image.shape()[0] == 1) {
        shape = image.shape();
    } else {
        throw ShapeError("explain: image shape " + image.shape().str() +
                         " must be (C,H,W) or (1,C,H,W)");
    }
    auto batch = Tensor<float>::from(shape,
                                     {image.values().begin(), image.values().end()});
    batch.set_requires_grad(requires_grad);
    return batch;
}

std::vector<float> min_max_normalize(std::vector<float> v) {
    float lo = v.empty() ? 0.0f : v[0], hi = lo;
    for (float x : v) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    if (hi == lo) {
        // flat map: all zero stays zero, any other constant saturates
        std::fill(v.begin(), v.end(), hi == 0.0f ? 0.0f : 1.0f);
        return v;
    }
    // divide so the maximum lands on exactly 1
    const float range = hi - lo;
    for (float& x : v) x = (x - lo) / range;
    return v;
}

}  // namespace

int CamResult::argmax_row() const {
    const auto it = std::max_element(heatmap.begin(), heatmap.end());
    return static_cast<int>((it - heatmap.begin()) / width);
}

int CamResult::argmax_col() const {
    const auto it = std::max_element(heatmap.begin(), heatmap.end());
    return static_cast<int>((it - heatmap.begin()) % width);
}

CamResult grad_campp(model::Classifier<float>& classifier, const Tensor<float>& image,
                     int category, const std::string& target_layer_name) {
    classifier.set_mode(BnMode::Inference);
    Tensor<float> batch = as_batch(image, true);
    const int img_h = batch.shape()[2], img_w = batch.shape()[3];

    model::ActivationTrace<float> trace;
    Tensor<float> logits = model::st_forward(classifier, batch, &trace);
    if (category < 0 || category >= logits.shape()[1]) {
        throw ShapeError("explain: category " + std::to_string(category) + " outside [0," +
                         std::to_string(logits.shape()[1]) + ")");
    }

    const std::string layer = target_layer_name.empty()
                                  ? classifier.backbone.default_target_layer()
                                  : target_layer_name;
    const Tensor<float>* activation = trace.find(layer);
    if (activation == nullptr) {
        std::string available;
        for (const auto& [n, _] : trace.entries) {
            if (!available.empty()) available += ", ";
            available += n;
        }
        throw ShapeError("explain: no layer named '" + layer + "'; traced layers: [" + available +
                         "]");
    }
    if (activation->shape().rank() != 4 || activation->shape()[2] < 1 ||
        activation->shape()[3] < 1) {
        throw ShapeError("explain: layer '" + layer + "' has no spatial feature maps, shape " +
                         activation->shape().str());
    }

    Tensor<float> score = pick(logits, 0, category);
    score.backward();

    const int channels = activation->shape()[1];
    const int h = activation->shape()[2], w = activation->shape()[3];
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    const auto grads = activation->grad();
    const auto acts = activation->values();
    if (grads.empty()) {
        throw ShapeError("explain: layer '" + layer + "' received no gradient");
    }

    std::vector<float> raw(plane, 0.0f);
    for (int c = 0; c < channels; ++c) {
        const float* g = grads.data() + static_cast<std::size_t>(c) * plane;
        const float* a = acts.data() + static_cast<std::size_t>(c) * plane;
        float sum_act = 0.0f;
        for (std::size_t i = 0; i < plane; ++i) sum_act += a[i];

        float weight = 0.0f;
        for (std::size_t i = 0; i < plane; ++i) {
            const float g2 = g[i] * g[i];
            const float denom = 2.0f * g2 + sum_act * g2 * g[i];
            const float alpha = denom != 0.0f ? g2 / denom : 0.0f;
            weight += alpha * std::max(g[i], 0.0f);
        }
        for (std::size_t i = 0; i < plane; ++i) raw[i] += weight * a[i];
    }
    for (float& v : raw) v = std::max(v, 0.0f);

    const Tensor<float> upsampled = data::resize_bilinear(
        Tensor<float>::from(Shape{1, h, w}, std::move(raw)), img_h, img_w);

    CamResult result;
    result.height = img_h;
    result.width = img_w;
    result.heatmap = min_max_normalize({upsampled.values().begin(), upsampled.values().end()});
    result.category = category;
    result.target_layer = layer;
    return result;
}

Tensor<float> guided_backprop(model::Classifier<float>& classifier, const Tensor<float>& image,
                              int category) {
    classifier.set_mode(BnMode::Inference);
    Tensor<float> batch = as_batch(image, true);

    GuidedBackpropScope scope;
    Tensor<float> logits = model::st_forward(classifier, batch);
    if (category < 0 || category >= logits.shape()[1]) {
        throw ShapeError("explain: category " + std::to_string(category) + " outside [0," +
                         std::to_string(logits.shape()[1]) + ")");
    }
    Tensor<float> score = pick(logits, 0, category);
    score.backward();

    const auto g = batch.grad();
    std::vector<float> values(g.begin(), g.end());
    return Tensor<float>::from(Shape{batch.shape()[1], batch.shape()[2], batch.shape()[3]},
                               std::move(values));
}

CamResult cam_gb(const CamResult& cam, const Tensor<float>& gb) {
    if (gb.shape().rank() != 3) {
        throw ShapeError("cam_gb: gradient image rank must be 3 (CHW)");
    }
    const int channels = gb.shape()[0], h = gb.shape()[1], w = gb.shape()[2];
    if (h != cam.height || w != cam.width) {
        throw ShapeError("cam_gb: gradient image " + gb.shape().str() + " does not match heatmap " +
                         std::to_string(cam.height) + "x" + std::to_string(cam.width));
    }
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    std::vector<float> merged(plane, 0.0f);
    const float* g = gb.values().data();
    for (int c = 0; c < channels; ++c) {
        for (std::size_t i = 0; i < plane; ++i) {
            merged[i] += std::abs(g[static_cast<std::size_t>(c) * plane + i]);
        }
    }
    for (std::size_t i = 0; i < plane; ++i) merged[i] *= cam.heatmap[i];

    CamResult result;
    result.height = h;
    result.width = w;
    result.heatmap = min_max_normalize(std::move(merged));
    result.category = cam.category;
    result.target_layer = cam.target_layer;
    return result;
}

void render_heatmap(const std::vector<float>& values, int height, int width,
                    const std::filesystem::path& path, const Tensor<float>* underlay, float alpha) {
    if (static_cast<std::size_t>(height) * width != values.size()) {
        throw ShapeError("render: value count " + std::to_string(values.size()) + " != " +
                         std::to_string(height) + "x" + std::to_string(width));
    }
    for (float v : values) {
        if (!(v >= 0.0f && v <= 1.0f)) {
            throw ShapeError("render: heatmap value " + std::to_string(v) + " outside [0,1]");
        }
    }
    const std::size_t plane = values.size();

    std::vector<float> gray;
    if (underlay != nullptr) {
        if (underlay->shape().rank() != 3 || underlay->shape()[1] != height ||
            underlay->shape()[2] != width) {
            throw ShapeError("render: underlay " + underlay->shape().str() +
                             " does not match heatmap extents");
        }
        gray.assign(plane, 0.0f);
        const int channels = underlay->shape()[0];
        const float* u = underlay->values().data();
        for (int c = 0; c < channels; ++c) {
            for (std::size_t i = 0; i < plane; ++i) gray[i] += u[static_cast<std::size_t>(c) * plane + i];
        }
        for (float& v : gray) v /= static_cast<float>(channels);
    }

    // 0 -> blue, 0.5 -> green, 1 -> red, linear between.
    std::vector<float> rgb(3 * plane);
    for (std::size_t i = 0; i < plane; ++i) {
        const float v = values[i];
        float r, g, b;
        if (v <= 0.5f) {
            const float t = v / 0.5f;
            r = 0.0f;
            g = t;
            b = 1.0f - t;
        } else {
            const float t = (v - 0.5f) / 0.5f;
            r = t;
            g = 1.0f - t;
            b = 0.0f;
        }
        if (underlay != nullptr) {
            r = alpha * r + (1.0f - alpha) * gray[i];
            g = alpha * g + (1.0f - alpha) * gray[i];
            b = alpha * b + (1.0f - alpha) * gray[i];
        }
        rgb[i] = r;
        rgb[plane + i] = g;
        rgb[2 * plane + i] = b;
    }
    data::write_ppm(path, Tensor<float>::from(Shape{3, height, width}, std::move(rgb)));
}

void render_signed_gray(const Tensor<float>& gb, const std::filesystem::path& path) {
    if (gb.shape().rank() != 3) throw ShapeError("render: gradient image rank must be 3 (CHW)");
    const int channels = gb.shape()[0], h = gb.shape()[1], w = gb.shape()[2];
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    std::vector<float> gray(plane, 0.0f);
    const float* g = gb.values().data();
    for (int c = 0; c < channels; ++c) {
        for (std::size_t i = 0; i < plane; ++i) gray[i] += g[static_cast<std::size_t>(c) * plane + i];
    }
    gray = min_max_normalize(std::move(gray));
    data::write_pgm(path, Tensor<float>::from(Shape{1, h, w}, std::move(gray)));
}

}  // namespace eafpmed::explain
