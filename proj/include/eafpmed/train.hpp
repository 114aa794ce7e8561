#pragma once

#include "eafpmed/run_config.hpp"
#include "eafpmed/synth.hpp"

namespace eafpmed::harness {

struct EpochRecord {
    int epoch = 0;  // 1-based
    double train_loss = 0.0;
    double train_accuracy = 0.0;
    double test_loss = 0.0;
    double test_accuracy = 0.0;
};

// Resolve the configured data source (folder tree or synthetic fixture).
data::Dataset build_dataset(const RunConfig& config);

struct PretrainResult {
    eafp::EafpParams<float> params;
    std::vector<EpochRecord> records;
    double best_test_accuracy = 0.0;
};

// Trains EAFP plus a throwaway global-average-pool + linear head end to end,
// then registers the EAFP parameters in the pool under the prompt key.
PretrainResult pretrain(const RunConfig& config, eafp::ParamPool& pool);

struct TrainResult {
    model::Classifier<float> model;        // final-epoch weights
    std::vector<NamedArray> best_arrays;   // best-test-accuracy model snapshot
    int best_epoch = 0;                    // 1-based
    double best_test_accuracy = 0.0;
    std::vector<EpochRecord> records;
};

// Composed training: backbone always optimized, EAFP joined only when
// freeze_eafp is false. Frozen EAFP runs batch norm in inference mode (its
// running statistics belong to the pretrained parameter set).
TrainResult train(const RunConfig& config, const eafp::ParamPool* pool);

}  // namespace eafpmed::harness
