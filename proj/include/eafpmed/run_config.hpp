#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "eafpmed/eafp.hpp"
#include "eafpmed/model.hpp"
#include "eafpmed/optimizer.hpp"

namespace eafpmed::harness {

struct SynthSpec {
    int categories = 3;
    int per_category = 40;
    int size = 64;
};

// One training/evaluation run, JSON-loadable and mirrored by CLI flags
// (flags win). The seed is mandatory; there is no entropy-source default.
struct RunConfig {
    std::optional<std::string> data_root;  // folder-per-category dataset
    std::optional<SynthSpec> synth;        // in-memory fixture instead
    std::string prompt;
    std::string pool_path;
    int epochs = 30;
    int batch_size = 16;
    OptimizerConfig optimizer;
    std::optional<std::uint32_t> seed;
    bool freeze_eafp = true;
    std::string out_dir;
    model::EafpMode mode = model::EafpMode::On;
    int input_size = 64;
    double split_ratio = 0.8;
    std::optional<eafp::EafpConfig> eafp_config;        // defaults when absent
    std::optional<model::BackboneConfig> backbone_config;

    void validate_for_training() const;
    std::uint32_t required_seed() const;

    nlohmann::json to_json() const;
    static RunConfig from_json(const nlohmann::json& j);
    static RunConfig from_json_file(const std::filesystem::path& path);
};

}  // namespace eafpmed::harness
