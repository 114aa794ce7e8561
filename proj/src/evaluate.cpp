#include "eafpmed/evaluate.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "eafpmed/errors.hpp"

namespace eafpmed::harness {

EvalResult evaluate(model::Classifier<float>& model, const data::Dataset& dataset, int batch_size) {
    if (dataset.samples.empty()) throw FormatError("evaluate: dataset is empty");
    model.set_mode(BnMode::Inference);

    metrics::ConfusionMatrix cm(dataset.categories);
    std::vector<int> labels, predicted;
    std::vector<std::vector<double>> probs;

    for (std::size_t start = 0; start < dataset.samples.size();
         start += static_cast<std::size_t>(batch_size)) {
        const std::size_t end =
            std::min(dataset.samples.size(), start + static_cast<std::size_t>(batch_size));
        std::vector<data::Sample> members(dataset.samples.begin() + static_cast<std::ptrdiff_t>(start),
                                          dataset.samples.begin() + static_cast<std::ptrdiff_t>(end));
        const auto images = data::stack_images(members);
        const auto pred = model::predict(model, images);
        for (std::size_t i = 0; i < members.size(); ++i) {
            const int actual = members[i].category;
            const int guess = pred.category[i];
            cm.accumulate(actual, guess);
            labels.push_back(actual);
            predicted.push_back(guess);
            probs.push_back(pred.probs[i]);
        }
    }

    EvalResult result{std::move(cm), {}, std::move(labels), std::move(predicted), std::move(probs)};
    result.report = metrics::report(result.cm);
    return result;
}

std::vector<std::filesystem::path> write_roc_csvs(const EvalResult& result,
                                                  const std::vector<std::string>& categories,
                                                  const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    std::vector<std::filesystem::path> written;
    for (std::size_t k = 0; k < categories.size(); ++k) {
        std::vector<double> scores;
        scores.reserve(result.probs.size());
        for (const auto& p : result.probs) scores.push_back(p[k]);
        const auto curve =
            metrics::roc_points(scores, result.labels, static_cast<int>(k));
        const auto path = out_dir / ("roc_" + categories[k] + ".csv");
        std::ofstream out(path, std::ios::trunc);
        if (!out) throw FormatError("roc: cannot write " + path.string());
        curve.to_csv(out);
        written.push_back(path);
    }
    return written;
}

void save_model(const model::Classifier<float>& model, const std::vector<NamedArray>& arrays,
                const std::filesystem::path& dir, const std::string& stem) {
    std::filesystem::create_directories(dir);
    const std::string ckpt_name = stem + ".ckpt";
    save_checkpoint(dir / ckpt_name, arrays);

    bool eafp_embedded = false;
    for (const auto& a : arrays) {
        if (a.name.starts_with("eafp.")) {
            eafp_embedded = true;
            break;
        }
    }
    nlohmann::json j = {{"checkpoint", ckpt_name},
                        {"backbone", model.backbone.config.to_json()},
                        {"mode", model.mode == model::EafpMode::On ? "eafp-on" : "eafp-off"},
                        {"prompt_key", model.prompt_key},
                        {"eafp_embedded", eafp_embedded}};
    if (model.eafp_params) j["eafp"] = model.eafp_params->config.to_json();
    std::ofstream out(dir / (stem + ".json"), std::ios::trunc);
    if (!out) throw FormatError("model: cannot write " + (dir / (stem + ".json")).string());
    out << j.dump(2) << "\n";
}

model::Classifier<float> load_model(const std::filesystem::path& config_json_path,
                                    const eafp::ParamPool* pool) {
    std::ifstream in(config_json_path);
    if (!in) throw FormatError("model: cannot open " + config_json_path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("model: malformed config " + config_json_path.string() + ": " + e.what());
    }

    model::Classifier<float> m;
    const auto bb_cfg = model::BackboneConfig::from_json(j.at("backbone"));
    const auto arrays =
        load_checkpoint(config_json_path.parent_path() / j.at("checkpoint").get<std::string>());

    std::vector<NamedArray> backbone_arrays, eafp_arrays;
    for (const auto& a : arrays) {
        if (a.name.starts_with("eafp.")) {
            NamedArray stripped = a;
            stripped.name = a.name.substr(5);
            eafp_arrays.push_back(std::move(stripped));
        } else {
            backbone_arrays.push_back(a);
        }
    }
    m.backbone = model::Backbone<float>::from_arrays(bb_cfg, backbone_arrays);

    const auto mode = j.at("mode").get<std::string>();
    if (mode == "eafp-off") {
        m.mode = model::EafpMode::Off;
    } else if (mode == "eafp-on") {
        m.mode = model::EafpMode::On;
        m.prompt_key = j.at("prompt_key").get<std::string>();
        const auto eafp_cfg = eafp::EafpConfig::from_json(j.at("eafp"));
        if (j.at("eafp_embedded").get<bool>()) {
            m.eafp_params = eafp::EafpParams<float>::from_arrays(eafp_cfg, eafp_arrays);
        } else {
            if (pool == nullptr) {
                throw FormatError("model: eafp-on checkpoint needs the parameter pool it was"
                                  " trained against");
            }
            model::bind_prompt(m, *pool, m.prompt_key);
            if (m.eafp_params->fingerprint != eafp_cfg.fingerprint()) {
                throw FormatError("model: pool params fingerprint " + m.eafp_params->fingerprint +
                                  " does not match the checkpoint's eafp config " +
                                  eafp_cfg.fingerprint());
            }
        }
        m.eafp_params->set_requires_grad(false);
    } else {
        throw FormatError("model: unknown mode '" + mode + "'");
    }
    m.set_mode(BnMode::Inference);
    return m;
}

}  // namespace eafpmed::harness
