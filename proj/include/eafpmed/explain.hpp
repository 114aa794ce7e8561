#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "eafpmed/model.hpp"

namespace eafpmed::explain {

struct CamResult {
    int height = 0;
    int width = 0;
    std::vector<float> heatmap;  // row-major, values in [0,1]
    int category = 0;
    std::string target_layer;

    int argmax_row() const;
    int argmax_col() const;
};

// Grad-CAM++ saliency for one image ((C,H,W) or (1,C,H,W)) and category.
// Empty target layer selects the last feature layer before global pooling.
// Higher-order derivatives follow the exponential-head reduction: they are
// powers of the first derivative of the class score.
CamResult grad_campp(model::Classifier<float>& classifier, const Tensor<float>& image,
                     int category, const std::string& target_layer = {});

// Signed input gradient of the class score with the guided rule applied at
// every leaky-relu. Returns a (C,H,W) tensor.
Tensor<float> guided_backprop(model::Classifier<float>& classifier, const Tensor<float>& image,
                              int category);

// Elementwise product of the heatmap with the channel-summed |gb| image,
// min-max normalized.
CamResult cam_gb(const CamResult& cam, const Tensor<float>& gb);

// Blue -> green -> red colormap; optional alpha overlay on a grayscale or RGB
// source image. Writes binary PPM.
void render_heatmap(const std::vector<float>& values, int height, int width,
                    const std::filesystem::path& path, const Tensor<float>* underlay = nullptr,
                    float alpha = 0.5f);

// Grayscale PGM of a signed gradient image, min-max normalized per image.
void render_signed_gray(const Tensor<float>& gb, const std::filesystem::path& path);

}  // namespace eafpmed::explain
