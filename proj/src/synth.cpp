#include "eafpmed/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "eafpmed/errors.hpp"

namespace eafpmed::data {

namespace {

constexpr float kBackgroundLevel = 0.35f;
constexpr float kBackgroundSigma = 0.05f;

struct LesionRecipe {
    const char* name;
    float radius_lo_frac, radius_hi_frac;  // of image size; absolute when <= 0
    float radius_lo_px, radius_hi_px;
    float amplitude;
};

// One lesion scale per category, smallest radius clearly above the next
// category's largest.
const LesionRecipe kRecipes[3] = {
    {"c0_global", 0.24f, 0.32f, 0.0f, 0.0f, 0.35f},
    {"c1_regional", 0.08f, 0.14f, 0.0f, 0.0f, 0.55f},
    {"c2_local", 0.0f, 0.0f, 1.5f, 3.0f, 0.90f},
};

}  // namespace

Dataset synth_fixture(int categories, int per_category, int size, std::uint32_t seed) {
    if (categories < 2 || categories > 3) {
        throw FormatError("synth: generator supports 2 or 3 categories, got " +
                          std::to_string(categories));
    }
    if (per_category < 1) throw FormatError("synth: per_category must be >= 1");
    if (size < 32) throw FormatError("synth: size must be >= 32, got " + std::to_string(size));

    Rng rng(seed);
    Dataset ds;
    for (int k = 0; k < categories; ++k) ds.categories.emplace_back(kRecipes[k].name);

    for (int k = 0; k < categories; ++k) {
        const auto& recipe = kRecipes[k];
        const float r_lo = recipe.radius_lo_frac > 0.0f ? recipe.radius_lo_frac * static_cast<float>(size)
                                                        : recipe.radius_lo_px;
        const float r_hi = recipe.radius_hi_frac > 0.0f ? recipe.radius_hi_frac * static_cast<float>(size)
                                                        : recipe.radius_hi_px;
        for (int i = 0; i < per_category; ++i) {
            std::vector<float> pixels(static_cast<std::size_t>(size) * size);
            for (auto& p : pixels) p = kBackgroundLevel + rng.normal(0.0f, kBackgroundSigma);

            const float radius = rng.uniform(r_lo, r_hi);
            const float margin = radius + 2.0f;
            const float cy = rng.uniform(margin, static_cast<float>(size) - margin);
            const float cx = rng.uniform(margin, static_cast<float>(size) - margin);

            // Paraboloid bump with exact support radius; the box tracks the
            // pixels actually raised.
            Box box{size, size, -1, -1};
            for (int r = 0; r < size; ++r) {
                for (int c = 0; c < size; ++c) {
                    const float dy = static_cast<float>(r) - cy;
                    const float dx = static_cast<float>(c) - cx;
                    const float d2 = (dy * dy + dx * dx) / (radius * radius);
                    if (d2 >= 1.0f) continue;
                    pixels[static_cast<std::size_t>(r) * size + c] += recipe.amplitude * (1.0f - d2);
                    box.r0 = std::min(box.r0, r);
                    box.c0 = std::min(box.c0, c);
                    box.r1 = std::max(box.r1, r);
                    box.c1 = std::max(box.c1, c);
                }
            }
            for (auto& p : pixels) p = std::clamp(p, 0.0f, 1.0f);

            Sample s;
            s.image = Tensor<float>::from(Shape{1, size, size}, std::move(pixels));
            s.category = k;
            s.source = std::string(recipe.name) + "/s" +
                       (i < 10 ? "00" : i < 100 ? "0" : "") + std::to_string(i);
            s.box = box;
            ds.samples.push_back(std::move(s));
        }
    }
    return ds;
}

void write_synth_dataset(const Dataset& dataset, const std::filesystem::path& root) {
    std::filesystem::create_directories(root);
    for (const auto& name : dataset.categories) std::filesystem::create_directories(root / name);

    nlohmann::json samples = nlohmann::json::array();
    for (const auto& s : dataset.samples) {
        const std::string rel = s.source + ".pgm";
        write_pgm(root / rel, s.image);
        nlohmann::json entry = {{"file", rel}, {"category", s.category}};
        if (s.box) entry["box"] = {s.box->r0, s.box->c0, s.box->r1, s.box->c1};
        samples.push_back(entry);
    }
    nlohmann::json j = {{"categories", dataset.categories}, {"samples", samples}};
    std::ofstream out(root / "boxes.json", std::ios::trunc);
    if (!out) throw FormatError("synth: cannot write " + (root / "boxes.json").string());
    out << j.dump(2) << "\n";
}

}  // namespace eafpmed::data
