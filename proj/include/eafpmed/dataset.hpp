#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "eafpmed/netpbm.hpp"
#include "eafpmed/rng.hpp"

namespace eafpmed::data {

// Inclusive pixel bounding box (rows r0..r1, columns c0..c1).
struct Box {
    int r0 = 0, c0 = 0, r1 = 0, c1 = 0;

    bool contains(int r, int c) const { return r >= r0 && r <= r1 && c >= c0 && c <= c1; }
};

struct Sample {
    Tensor<float> image;  // (C,H,W), values in [0,1]
    int category = 0;
    std::string source;       // file path or synthetic tag
    std::optional<Box> box;   // lesion bounds for synthetic fixtures
};

struct Dataset {
    std::vector<std::string> categories;
    std::vector<Sample> samples;
};

// Folder-per-category manifest. Category order is lexicographic so label
// indices are deterministic; undecodable files are skipped with a warning.
struct DatasetManifest {
    std::filesystem::path root;
    std::vector<std::string> categories;
    std::vector<std::vector<std::string>> files;  // per category, relative paths, sorted
    std::vector<std::string> skipped;

    std::size_t total() const;
    nlohmann::json to_json() const;
};

DatasetManifest load_manifest(const std::filesystem::path& root);

// Decode + resize every manifest entry to working resolution.
Dataset load_dataset(const DatasetManifest& manifest, int size);

// Stratified split: per-category seeded shuffle, first ceil(ratio*n) samples
// to train. Categories need >= 2 samples.
std::pair<DatasetManifest, DatasetManifest> split(const DatasetManifest& manifest, double ratio,
                                                  std::uint32_t seed);
std::pair<Dataset, Dataset> split(const Dataset& dataset, double ratio, std::uint32_t seed);

struct AugmentSpec {
    std::vector<int> rotations{0, 90, 180, 270};  // quarter turns, sampled uniformly
    bool horizontal_flip = true;
    bool vertical_flip = false;
    double crop_fraction = 1.0;  // random crop of this fraction, resized back
    std::uint32_t seed = 0;

    void validate(int height, int width) const;
};

// rotation, then flips, then crop+resize, all drawn from `draw`.
Sample augment(const Sample& sample, const AugmentSpec& spec, Rng& draw);

// Exact quarter-turn rotation, clockwise; (r,c) lands at (c, n-1-r) for 90.
Tensor<float> rotate_quarter(const Tensor<float>& image, int degrees);
Tensor<float> flip_horizontal(const Tensor<float>& image);
Tensor<float> flip_vertical(const Tensor<float>& image);

struct Batch {
    Tensor<float> images;  // (N,C,H,W)
    std::vector<int> labels;
    std::vector<std::size_t> indices;  // positions within the dataset
};

// Seeded epoch order; the final partial batch is kept.
std::vector<Batch> batches(const Dataset& dataset, int batch_size, std::uint32_t shuffle_seed);

// Stack (C,H,W) samples into one (N,C,H,W) tensor.
Tensor<float> stack_images(std::span<const Sample> samples);

}  // namespace eafpmed::data
