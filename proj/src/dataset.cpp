#include "eafpmed/dataset.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "eafpmed/errors.hpp"
#include "eafpmed/util.hpp"

namespace eafpmed::data {

std::size_t DatasetManifest::total() const {
    std::size_t n = 0;
    for (const auto& f : files) n += f.size();
    return n;
}

nlohmann::json DatasetManifest::to_json() const {
    nlohmann::json per_category;
    for (std::size_t k = 0; k < categories.size(); ++k) {
        per_category[categories[k]] = {{"count", files[k].size()}, {"files", files[k]}};
    }
    return {{"root", root.string()},
            {"categories", categories},
            {"entries", per_category},
            {"total", total()},
            {"skipped", skipped}};
}

DatasetManifest load_manifest(const std::filesystem::path& root) {
    if (!std::filesystem::is_directory(root)) {
        throw FormatError("manifest: " + root.string() + " is not a directory");
    }
    DatasetManifest m;
    m.root = root;
    for (const auto& entry : std::filesystem::directory_iterator(root)) {
        if (entry.is_directory()) m.categories.push_back(entry.path().filename().string());
    }
    std::sort(m.categories.begin(), m.categories.end());
    if (m.categories.size() < 2) {
        throw FormatError("manifest: " + root.string() + " has " +
                          std::to_string(m.categories.size()) + " category folders, need >= 2");
    }
    for (const auto& category : m.categories) {
        std::vector<std::string> files;
        for (const auto& entry : std::filesystem::directory_iterator(root / category)) {
            if (!entry.is_regular_file()) continue;
            const auto ext = to_lower(entry.path().extension().string());
            const auto rel = category + "/" + entry.path().filename().string();
            if (ext == ".pgm" || ext == ".ppm" || ext == ".ckpt" || ext == ".bin") {
                files.push_back(rel);
            } else {
                m.skipped.push_back(rel);
            }
        }
        std::sort(files.begin(), files.end());
        if (files.empty()) {
            throw FormatError("manifest: category '" + category + "' has no decodable images");
        }
        m.files.push_back(std::move(files));
    }
    std::sort(m.skipped.begin(), m.skipped.end());
    return m;
}

Dataset load_dataset(const DatasetManifest& manifest, int size) {
    Dataset ds;
    ds.categories = manifest.categories;
    for (std::size_t k = 0; k < manifest.categories.size(); ++k) {
        for (const auto& rel : manifest.files[k]) {
            Sample s;
            s.image = resize_bilinear(decode_image(manifest.root / rel), size, size);
            s.category = static_cast<int>(k);
            s.source = rel;
            ds.samples.push_back(std::move(s));
        }
    }
    return ds;
}

namespace {

// Shared stratified-split core: per-category index shuffle, first
// ceil(ratio*n) to train.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(
    const std::vector<std::vector<std::size_t>>& per_category, double ratio, std::uint32_t seed,
    const std::vector<std::string>& category_names) {
    if (!(ratio > 0.0 && ratio < 1.0)) {
        throw ShapeError("split: ratio must lie in (0,1)");
    }
    Rng rng(seed);
    std::vector<std::size_t> train, test;
    for (std::size_t k = 0; k < per_category.size(); ++k) {
        auto indices = per_category[k];
        if (indices.size() < 2) {
            throw FormatError("split: category '" + category_names[k] + "' has " +
                              std::to_string(indices.size()) + " samples, need >= 2");
        }
        std::shuffle(indices.begin(), indices.end(), rng.engine());
        const auto n_train = static_cast<std::size_t>(
            std::ceil(ratio * static_cast<double>(indices.size()) - 1e-9));
        for (std::size_t i = 0; i < indices.size(); ++i) {
            (i < n_train ? train : test).push_back(indices[i]);
        }
    }
    return {std::move(train), std::move(test)};
}

}  // namespace

std::pair<DatasetManifest, DatasetManifest> split(const DatasetManifest& manifest, double ratio,
                                                  std::uint32_t seed) {
    std::vector<std::vector<std::size_t>> per_category;
    std::vector<std::pair<std::size_t, std::size_t>> flat;  // (category, position)
    for (std::size_t k = 0; k < manifest.files.size(); ++k) {
        std::vector<std::size_t> indices;
        for (std::size_t i = 0; i < manifest.files[k].size(); ++i) {
            indices.push_back(flat.size());
            flat.emplace_back(k, i);
        }
        per_category.push_back(std::move(indices));
    }
    auto [train_idx, test_idx] = split_indices(per_category, ratio, seed, manifest.categories);

    auto build = [&](const std::vector<std::size_t>& idx) {
        DatasetManifest out;
        out.root = manifest.root;
        out.categories = manifest.categories;
        out.files.assign(manifest.categories.size(), {});
        for (auto i : idx) {
            const auto [k, pos] = flat[i];
            out.files[k].push_back(manifest.files[k][pos]);
        }
        for (auto& f : out.files) std::sort(f.begin(), f.end());
        return out;
    };
    return {build(train_idx), build(test_idx)};
}

std::pair<Dataset, Dataset> split(const Dataset& dataset, double ratio, std::uint32_t seed) {
    std::vector<std::vector<std::size_t>> per_category(dataset.categories.size());
    for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
        const int k = dataset.samples[i].category;
        if (k < 0 || k >= static_cast<int>(dataset.categories.size())) {
            throw ShapeError("split: sample " + std::to_string(i) + " category " +
                             std::to_string(k) + " out of range");
        }
        per_category[static_cast<std::size_t>(k)].push_back(i);
    }
    auto [train_idx, test_idx] = split_indices(per_category, ratio, seed, dataset.categories);

    auto build = [&](const std::vector<std::size_t>& idx) {
        Dataset out;
        out.categories = dataset.categories;
        for (auto i : idx) out.samples.push_back(dataset.samples[i]);
        return out;
    };
    return {build(train_idx), build(test_idx)};
}

void AugmentSpec::validate(int height, int width) const {
    if (!(crop_fraction > 0.0 && crop_fraction <= 1.0)) {
        throw ShapeError("augment: crop_fraction must lie in (0,1]");
    }
    for (int extent : {height, width}) {
        if (static_cast<int>(std::lround(crop_fraction * extent)) < 8) {
            throw ShapeError("augment: crop_fraction " + std::to_string(crop_fraction) +
                             " keeps fewer than 8 pixels of extent " + std::to_string(extent));
        }
    }
    if (rotations.empty()) throw ShapeError("augment: rotation set must not be empty");
    for (int r : rotations) {
        if (r != 0 && r != 90 && r != 180 && r != 270) {
            throw ShapeError("augment: rotation " + std::to_string(r) + " not a quarter turn");
        }
    }
}

namespace {

Tensor<float> rotate90cw(const Tensor<float>& image) {
    const int channels = image.shape()[0], h = image.shape()[1], w = image.shape()[2];
    std::vector<float> out(image.values().size());
    const float* src = image.values().data();
    // source (r,c) lands at (c, h-1-r)
    for (int c = 0; c < channels; ++c) {
        const float* in_plane = src + static_cast<std::size_t>(c) * h * w;
        float* out_plane = out.data() + static_cast<std::size_t>(c) * h * w;
        for (int r = 0; r < h; ++r) {
            for (int col = 0; col < w; ++col) {
                out_plane[static_cast<std::size_t>(col) * h + (h - 1 - r)] =
                    in_plane[static_cast<std::size_t>(r) * w + col];
            }
        }
    }
    return Tensor<float>::from(Shape{channels, w, h}, std::move(out));
}

}  // namespace

Tensor<float> rotate_quarter(const Tensor<float>& image, int degrees) {
    if (image.shape().rank() != 3) {
        throw ShapeError("rotate: image rank must be 3 (CHW)");
    }
    switch (((degrees % 360) + 360) % 360) {
        case 0: return image.detach();
        case 90: return rotate90cw(image);
        case 180: return rotate90cw(rotate90cw(image));
        case 270: return rotate90cw(rotate90cw(rotate90cw(image)));
        default:
            throw ShapeError("rotate: " + std::to_string(degrees) + " is not a quarter turn");
    }
}

Tensor<float> flip_horizontal(const Tensor<float>& image) {
    const int channels = image.shape()[0], h = image.shape()[1], w = image.shape()[2];
    std::vector<float> out(image.values().size());
    const float* src = image.values().data();
    for (int c = 0; c < channels; ++c) {
        for (int r = 0; r < h; ++r) {
            const std::size_t base = (static_cast<std::size_t>(c) * h + r) * w;
            for (int col = 0; col < w; ++col) out[base + col] = src[base + (w - 1 - col)];
        }
    }
    return Tensor<float>::from(image.shape(), std::move(out));
}

Tensor<float> flip_vertical(const Tensor<float>& image) {
    const int channels = image.shape()[0], h = image.shape()[1], w = image.shape()[2];
    std::vector<float> out(image.values().size());
    const float* src = image.values().data();
    for (int c = 0; c < channels; ++c) {
        for (int r = 0; r < h; ++r) {
            const std::size_t dst_base = (static_cast<std::size_t>(c) * h + r) * w;
            const std::size_t src_base = (static_cast<std::size_t>(c) * h + (h - 1 - r)) * w;
            std::copy_n(src + src_base, w, out.data() + dst_base);
        }
    }
    return Tensor<float>::from(image.shape(), std::move(out));
}

Sample augment(const Sample& sample, const AugmentSpec& spec, Rng& draw) {
    const int h = sample.image.shape()[1], w = sample.image.shape()[2];
    spec.validate(h, w);

    const int rotation = spec.rotations[static_cast<std::size_t>(
        draw.uniform_int(0, static_cast<int>(spec.rotations.size()) - 1))];
    Tensor<float> img = rotate_quarter(sample.image, rotation);
    if (spec.horizontal_flip && draw.uniform_int(0, 1) == 1) img = flip_horizontal(img);
    if (spec.vertical_flip && draw.uniform_int(0, 1) == 1) img = flip_vertical(img);

    if (spec.crop_fraction < 1.0) {
        const int ch = img.shape()[1], cw = img.shape()[2];
        const int crop_h = static_cast<int>(std::lround(spec.crop_fraction * ch));
        const int crop_w = static_cast<int>(std::lround(spec.crop_fraction * cw));
        const int r0 = draw.uniform_int(0, ch - crop_h);
        const int c0 = draw.uniform_int(0, cw - crop_w);
        const int channels = img.shape()[0];
        std::vector<float> cropped(static_cast<std::size_t>(channels) * crop_h * crop_w);
        const float* src = img.values().data();
        for (int c = 0; c < channels; ++c) {
            for (int r = 0; r < crop_h; ++r) {
                std::copy_n(src + (static_cast<std::size_t>(c) * ch + r0 + r) * cw + c0, crop_w,
                            cropped.data() + (static_cast<std::size_t>(c) * crop_h + r) * crop_w);
            }
        }
        img = resize_bilinear(Tensor<float>::from(Shape{channels, crop_h, crop_w}, std::move(cropped)),
                              ch, cw);
    }

    Sample out;
    out.image = std::move(img);
    out.category = sample.category;
    out.source = sample.source;
    return out;
}

std::vector<Batch> batches(const Dataset& dataset, int batch_size, std::uint32_t shuffle_seed) {
    if (batch_size < 1) throw ShapeError("batches: batch_size must be >= 1");
    std::vector<std::size_t> order(dataset.samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(shuffle_seed);
    std::shuffle(order.begin(), order.end(), rng.engine());

    std::vector<Batch> out;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
        const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
        Batch b;
        std::vector<Sample> members;
        for (std::size_t i = start; i < end; ++i) {
            const auto& s = dataset.samples[order[i]];
            members.push_back(s);
            b.labels.push_back(s.category);
            b.indices.push_back(order[i]);
        }
        b.images = stack_images(members);
        out.push_back(std::move(b));
    }
    return out;
}

Tensor<float> stack_images(std::span<const Sample> samples) {
    if (samples.empty()) throw ShapeError("stack: empty sample list");
    const Shape& s0 = samples[0].image.shape();
    if (s0.rank() != 3) throw ShapeError("stack: samples must be rank-3 (CHW)");
    const int channels = s0[0], h = s0[1], w = s0[2];
    std::vector<float> values(static_cast<std::size_t>(samples.size()) * channels * h * w);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples[i].image.shape() != s0) {
            throw ShapeError("stack: sample " + std::to_string(i) + " shape " +
                             samples[i].image.shape().str() + " != " + s0.str());
        }
        std::copy_n(samples[i].image.values().data(), samples[i].image.values().size(),
                    values.data() + i * static_cast<std::size_t>(channels) * h * w);
    }
    return Tensor<float>::from(Shape{static_cast<int>(samples.size()), channels, h, w},
                               std::move(values));
}

}  // namespace eafpmed::data
