#pragma once

#include <filesystem>

#include "eafpmed/tensor.hpp"

namespace eafpmed::data {

// Binary netpbm only: P5 (grayscale) and P6 (RGB), 8-bit maxval. Decoded
// pixels are scaled to [0,1]; tensors are (C,H,W) with C = 1 or 3.
Tensor<float> decode_image(const std::filesystem::path& path);

// Values are clamped to [0,1] and quantized to maxval 255.
void write_pgm(const std::filesystem::path& path, const Tensor<float>& image);  // (1,H,W)
void write_ppm(const std::filesystem::path& path, const Tensor<float>& image);  // (3,H,W)

// Corner-aligned bilinear resampling of a (C,H,W) image.
Tensor<float> resize_bilinear(const Tensor<float>& image, int out_height, int out_width);

}  // namespace eafpmed::data
