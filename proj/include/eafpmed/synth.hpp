#pragma once

#include "eafpmed/dataset.hpp"

namespace eafpmed::data {

// Synthetic lesion fixtures: one planted lesion per image on a noisy
// background, one lesion scale per category.
//   category 0: large low-contrast blob (diameter tens of pixels and up)
//   category 1: medium blob (diameter in the tens)
//   category 2: small high-contrast speck (a few pixels)
// Lesions lie fully inside the image; recorded boxes are tight.
Dataset synth_fixture(int categories, int per_category, int size, std::uint32_t seed);

// Folder-per-category PGM tree plus boxes.json with the recorded bounds.
void write_synth_dataset(const Dataset& dataset, const std::filesystem::path& root);

}  // namespace eafpmed::data
