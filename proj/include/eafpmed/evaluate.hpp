#pragma once

#include "eafpmed/metrics.hpp"
#include "eafpmed/train.hpp"

namespace eafpmed::harness {

struct EvalResult {
    metrics::ConfusionMatrix cm;
    metrics::MetricReport report;
    std::vector<int> labels;
    std::vector<int> predicted;
    std::vector<std::vector<double>> probs;  // per sample, per category
};

// Single deterministic inference pass in dataset order.
EvalResult evaluate(model::Classifier<float>& model, const data::Dataset& dataset,
                    int batch_size = 16);

// One-vs-rest ROC CSV per category under out_dir (roc_<name>.csv).
std::vector<std::filesystem::path> write_roc_csvs(const EvalResult& result,
                                                  const std::vector<std::string>& categories,
                                                  const std::filesystem::path& out_dir);

// Model persistence: checkpoint plus a config JSON describing the backbone,
// mode and bound prompt. Fine-tuned EAFP parameters are embedded in the
// checkpoint; frozen ones are re-bound from the pool at load time.
void save_model(const model::Classifier<float>& model, const std::vector<NamedArray>& arrays,
                const std::filesystem::path& dir, const std::string& stem);
model::Classifier<float> load_model(const std::filesystem::path& config_json_path,
                                    const eafp::ParamPool* pool);

}  // namespace eafpmed::harness
