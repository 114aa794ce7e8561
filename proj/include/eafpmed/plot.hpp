#pragma once

#include <filesystem>
#include <vector>

#include "eafpmed/train.hpp"

namespace eafpmed::harness {

// curves.csv: epoch,train_loss,train_accuracy,test_loss,test_accuracy
void write_curves_csv(const std::vector<EpochRecord>& records, const std::filesystem::path& path);

// Rendered line plots (PPM): train series blue, test series red.
void render_loss_plot(const std::vector<EpochRecord>& records, const std::filesystem::path& path);
void render_accuracy_plot(const std::vector<EpochRecord>& records,
                          const std::filesystem::path& path);

// manifest.json listing produced files with their content hashes.
void write_run_manifest(const std::filesystem::path& out_dir,
                        const std::vector<std::filesystem::path>& files);

}  // namespace eafpmed::harness
