#include "eafpmed/run_config.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "eafpmed/errors.hpp"

namespace eafpmed::harness {

void RunConfig::validate_for_training() const {
    if (!seed.has_value()) throw FormatError("run config: seed is mandatory");
    if (epochs < 1) throw FormatError("run config: epochs must be >= 1");
    if (batch_size < 1) throw FormatError("run config: batch_size must be >= 1");
    if (!(split_ratio > 0.0 && split_ratio < 1.0)) {
        throw FormatError("run config: split_ratio must lie in (0,1)");
    }
    if (input_size < 8) throw FormatError("run config: input_size must be >= 8");
    if (data_root.has_value() == synth.has_value()) {
        throw FormatError("run config: exactly one of a dataset root or a synthetic spec is required");
    }
    optimizer.validate();
}

std::uint32_t RunConfig::required_seed() const {
    if (!seed.has_value()) throw FormatError("run config: seed is mandatory");
    return *seed;
}

nlohmann::json RunConfig::to_json() const {
    nlohmann::json j;
    if (data_root) j["data"] = *data_root;
    if (synth) {
        j["synth"] = {{"categories", synth->categories},
                      {"per_category", synth->per_category},
                      {"size", synth->size}};
    }
    j["prompt"] = prompt;
    j["pool"] = pool_path;
    j["epochs"] = epochs;
    j["batch_size"] = batch_size;
    j["optimizer"] = {{"kind", to_string(optimizer.kind)},
                      {"learning_rate", optimizer.learning_rate},
                      {"momentum", optimizer.momentum},
                      {"beta1", optimizer.beta1},
                      {"beta2", optimizer.beta2},
                      {"eps", optimizer.eps}};
    if (seed) j["seed"] = *seed;
    j["freeze_eafp"] = freeze_eafp;
    j["out"] = out_dir;
    j["mode"] = mode == model::EafpMode::On ? "eafp-on" : "eafp-off";
    j["input_size"] = input_size;
    j["split_ratio"] = split_ratio;
    if (eafp_config) j["eafp"] = eafp_config->to_json();
    if (backbone_config) j["backbone"] = backbone_config->to_json();
    return j;
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
    RunConfig c;
    try {
        if (j.contains("data")) c.data_root = j.at("data").get<std::string>();
        if (j.contains("synth")) {
            SynthSpec s;
            const auto& sj = j.at("synth");
            s.categories = sj.value("categories", s.categories);
            s.per_category = sj.value("per_category", s.per_category);
            s.size = sj.value("size", s.size);
            c.synth = s;
        }
        c.prompt = j.value("prompt", c.prompt);
        c.pool_path = j.value("pool", c.pool_path);
        c.epochs = j.value("epochs", c.epochs);
        c.batch_size = j.value("batch_size", c.batch_size);
        if (j.contains("optimizer")) {
            const auto& oj = j.at("optimizer");
            if (oj.contains("kind")) {
                c.optimizer.kind = optimizer_kind_from_string(oj.at("kind").get<std::string>());
            }
            c.optimizer.learning_rate = oj.value("learning_rate", c.optimizer.learning_rate);
            c.optimizer.momentum = oj.value("momentum", c.optimizer.momentum);
            c.optimizer.beta1 = oj.value("beta1", c.optimizer.beta1);
            c.optimizer.beta2 = oj.value("beta2", c.optimizer.beta2);
            c.optimizer.eps = oj.value("eps", c.optimizer.eps);
        }
        if (j.contains("seed")) c.seed = j.at("seed").get<std::uint32_t>();
        c.freeze_eafp = j.value("freeze_eafp", c.freeze_eafp);
        c.out_dir = j.value("out", c.out_dir);
        if (j.contains("mode")) {
            const auto m = j.at("mode").get<std::string>();
            if (m == "eafp-on") {
                c.mode = model::EafpMode::On;
            } else if (m == "eafp-off") {
                c.mode = model::EafpMode::Off;
            } else {
                throw FormatError("run config: mode must be eafp-on or eafp-off, got '" + m + "'");
            }
        }
        c.input_size = j.value("input_size", c.input_size);
        c.split_ratio = j.value("split_ratio", c.split_ratio);
        if (j.contains("eafp")) c.eafp_config = eafp::EafpConfig::from_json(j.at("eafp"));
        if (j.contains("backbone")) {
            c.backbone_config = model::BackboneConfig::from_json(j.at("backbone"));
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("run config: malformed JSON: ") + e.what());
    }
    return c;
}

RunConfig RunConfig::from_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("run config: cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("run config: malformed JSON in " + path.string() + ": " + e.what());
    }
    return from_json(j);
}

}  // namespace eafpmed::harness
