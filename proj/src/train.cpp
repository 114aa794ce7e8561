#include "eafpmed/train.hpp"

#include <algorithm>
#include <cmath>

#include "eafpmed/errors.hpp"

namespace eafpmed::harness {

namespace {

int dataset_channels(const data::Dataset& ds) {
    if (ds.samples.empty()) throw FormatError("train: dataset is empty");
    return ds.samples[0].image.shape()[0];
}

double batch_accuracy(const Tensor<float>& probs, std::span<const int> labels) {
    const int n = probs.shape()[0], k = probs.shape()[1];
    int correct = 0;
    const float* p = probs.values().data();
    for (int i = 0; i < n; ++i) {
        const float* row = p + static_cast<std::size_t>(i) * k;
        int best = 0;
        for (int j = 1; j < k; ++j) {
            if (row[j] > row[best]) best = j;
        }
        if (best == labels[static_cast<std::size_t>(i)]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(n);
}

// In-order, non-shuffled batches for deterministic evaluation passes.
std::vector<data::Batch> ordered_batches(const data::Dataset& ds, int batch_size) {
    std::vector<data::Batch> out;
    for (std::size_t start = 0; start < ds.samples.size();
         start += static_cast<std::size_t>(batch_size)) {
        const std::size_t end =
            std::min(ds.samples.size(), start + static_cast<std::size_t>(batch_size));
        data::Batch b;
        std::vector<data::Sample> members(ds.samples.begin() + static_cast<std::ptrdiff_t>(start),
                                          ds.samples.begin() + static_cast<std::ptrdiff_t>(end));
        for (std::size_t i = start; i < end; ++i) {
            b.labels.push_back(ds.samples[i].category);
            b.indices.push_back(i);
        }
        b.images = data::stack_images(members);
        out.push_back(std::move(b));
    }
    return out;
}

}  // namespace

data::Dataset build_dataset(const RunConfig& config) {
    if (config.synth) {
        return data::synth_fixture(config.synth->categories, config.synth->per_category,
                                   config.synth->size, config.required_seed());
    }
    if (!config.data_root) {
        throw FormatError("train: run config names neither a dataset root nor a synthetic spec");
    }
    const auto manifest = data::load_manifest(*config.data_root);
    return data::load_dataset(manifest, config.input_size);
}

PretrainResult pretrain(const RunConfig& config, eafp::ParamPool& pool) {
    config.validate_for_training();
    if (config.prompt.empty()) throw FormatError("pretrain: prompt key is required");

    const data::Dataset dataset = build_dataset(config);
    const auto [train_ds, test_ds] = data::split(dataset, config.split_ratio, config.required_seed());
    const int channels = dataset_channels(dataset);
    const int classes = static_cast<int>(dataset.categories.size());

    eafp::EafpConfig eafp_cfg =
        config.eafp_config ? *config.eafp_config : eafp::EafpConfig::defaults(channels);
    if (eafp_cfg.in_channels != channels) {
        throw FormatError("pretrain: eafp config expects " + std::to_string(eafp_cfg.in_channels) +
                          " channels but dataset has " + std::to_string(channels));
    }

    Rng run_rng(config.required_seed());
    Rng init_rng = run_rng.fork();
    Rng shuffle_rng = run_rng.fork();

    PretrainResult result;
    result.params = eafp::EafpParams<float>::init(eafp_cfg, init_rng);
    const auto slope = static_cast<float>(eafp_cfg.negative_slope);
    Tensor<float> head_weight =
        kaiming_normal<float>(init_rng, Shape{classes, channels}, channels, slope);
    Tensor<float> head_bias = Tensor<float>::zeros(Shape{classes}, true);

    std::vector<Tensor<float>> trainable = result.params.parameters();
    trainable.push_back(head_weight);
    trainable.push_back(head_bias);

    auto forward = [&](const Tensor<float>& images) {
        Tensor<float> enhanced = eafp::eafp_forward(images, result.params);
        Tensor<float> pooled = global_avg_pool(enhanced);
        Tensor<float> flat = reshape(pooled, Shape{pooled.shape()[0], pooled.shape()[1]});
        return linear(flat, head_weight, head_bias);
    };

    OptimizerState opt_state;
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        result.params.set_mode(BnMode::Training);
        double loss_sum = 0.0, acc_sum = 0.0;
        std::size_t seen = 0;
        const auto epoch_seed = static_cast<std::uint32_t>(shuffle_rng.engine()());
        for (const auto& batch : data::batches(train_ds, config.batch_size, epoch_seed)) {
            zero_grads(trainable);
            auto ce = softmax_cross_entropy(forward(batch.images), batch.labels);
            const double loss = ce.loss.item();
            if (!std::isfinite(loss)) {
                throw DivergenceError("pretrain: loss became non-finite at epoch " +
                                      std::to_string(epoch), epoch);
            }
            ce.loss.backward();
            optimizer_step(trainable, opt_state, config.optimizer);
            const auto n = static_cast<std::size_t>(batch.images.shape()[0]);
            loss_sum += loss * static_cast<double>(n);
            acc_sum += batch_accuracy(ce.probs, batch.labels) * static_cast<double>(n);
            seen += n;
        }

        result.params.set_mode(BnMode::Inference);
        double test_loss_sum = 0.0, test_acc_sum = 0.0;
        std::size_t test_seen = 0;
        for (const auto& batch : ordered_batches(test_ds, config.batch_size)) {
            auto ce = softmax_cross_entropy(forward(batch.images), batch.labels);
            const auto n = static_cast<std::size_t>(batch.images.shape()[0]);
            test_loss_sum += ce.loss.item() * static_cast<double>(n);
            test_acc_sum += batch_accuracy(ce.probs, batch.labels) * static_cast<double>(n);
            test_seen += n;
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(seen);
        rec.train_accuracy = acc_sum / static_cast<double>(seen);
        rec.test_loss = test_loss_sum / static_cast<double>(test_seen);
        rec.test_accuracy = test_acc_sum / static_cast<double>(test_seen);
        result.records.push_back(rec);
        result.best_test_accuracy = std::max(result.best_test_accuracy, rec.test_accuracy);
    }

    result.params.set_mode(BnMode::Inference);
    pool.register_params(eafp::PromptKey::from_text(config.prompt), result.params);
    return result;
}

TrainResult train(const RunConfig& config, const eafp::ParamPool* pool) {
    config.validate_for_training();

    const data::Dataset dataset = build_dataset(config);
    const auto [train_ds, test_ds] = data::split(dataset, config.split_ratio, config.required_seed());
    const int channels = dataset_channels(dataset);
    const int classes = static_cast<int>(dataset.categories.size());

    model::BackboneConfig bb_cfg;
    if (config.backbone_config) {
        bb_cfg = *config.backbone_config;
    } else {
        bb_cfg.in_channels = channels;
        bb_cfg.classes = classes;
    }
    if (bb_cfg.in_channels != channels || bb_cfg.classes != classes) {
        throw FormatError("train: backbone config (" + std::to_string(bb_cfg.in_channels) + " ch, " +
                          std::to_string(bb_cfg.classes) + " classes) does not match dataset (" +
                          std::to_string(channels) + " ch, " + std::to_string(classes) + " classes)");
    }
    bb_cfg.check_input_extents(dataset.samples[0].image.shape()[1],
                               dataset.samples[0].image.shape()[2]);

    Rng run_rng(config.required_seed());
    Rng init_rng = run_rng.fork();
    Rng shuffle_rng = run_rng.fork();

    TrainResult result;
    result.model.backbone = model::Backbone<float>::init(bb_cfg, init_rng);
    result.model.mode = config.mode;
    const bool train_eafp = config.mode == model::EafpMode::On && !config.freeze_eafp;
    if (config.mode == model::EafpMode::On) {
        if (config.prompt.empty()) throw FormatError("train: eafp-on mode requires a prompt");
        if (pool == nullptr) throw FormatError("train: eafp-on mode requires a parameter pool");
        model::bind_prompt(result.model, *pool, config.prompt);
        if (train_eafp) {
            result.model.eafp_params = result.model.eafp_params->clone();
            result.model.eafp_params->set_requires_grad(true);
        } else {
            result.model.eafp_params->set_requires_grad(false);
        }
    }

    std::vector<Tensor<float>> trainable = result.model.parameters(train_eafp);

    auto snapshot_arrays = [&]() {
        std::vector<NamedArray> arrays = result.model.backbone.to_arrays();
        if (train_eafp) {
            for (auto a : result.model.eafp_params->to_arrays()) {
                a.name = "eafp." + a.name;
                arrays.push_back(std::move(a));
            }
        }
        return arrays;
    };

    OptimizerState opt_state;
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        result.model.backbone.set_mode(BnMode::Training);
        if (result.model.eafp_params) {
            // Frozen EAFP keeps its pretrained statistics active.
            result.model.eafp_params->set_mode(train_eafp ? BnMode::Training : BnMode::Inference);
        }
        double loss_sum = 0.0, acc_sum = 0.0;
        std::size_t seen = 0;
        const auto epoch_seed = static_cast<std::uint32_t>(shuffle_rng.engine()());
        for (const auto& batch : data::batches(train_ds, config.batch_size, epoch_seed)) {
            zero_grads(trainable);
            auto ce = softmax_cross_entropy(model::st_forward(result.model, batch.images),
                                            batch.labels);
            const double loss = ce.loss.item();
            if (!std::isfinite(loss)) {
                throw DivergenceError("train: loss became non-finite at epoch " +
                                      std::to_string(epoch), epoch);
            }
            ce.loss.backward();
            optimizer_step(trainable, opt_state, config.optimizer);
            const auto n = static_cast<std::size_t>(batch.images.shape()[0]);
            loss_sum += loss * static_cast<double>(n);
            acc_sum += batch_accuracy(ce.probs, batch.labels) * static_cast<double>(n);
            seen += n;
        }

        result.model.set_mode(BnMode::Inference);
        double test_loss_sum = 0.0, test_acc_sum = 0.0;
        std::size_t test_seen = 0;
        for (const auto& batch : ordered_batches(test_ds, config.batch_size)) {
            auto ce = softmax_cross_entropy(model::st_forward(result.model, batch.images),
                                            batch.labels);
            const auto n = static_cast<std::size_t>(batch.images.shape()[0]);
            test_loss_sum += ce.loss.item() * static_cast<double>(n);
            test_acc_sum += batch_accuracy(ce.probs, batch.labels) * static_cast<double>(n);
            test_seen += n;
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(seen);
        rec.train_accuracy = acc_sum / static_cast<double>(seen);
        rec.test_loss = test_loss_sum / static_cast<double>(test_seen);
        rec.test_accuracy = test_acc_sum / static_cast<double>(test_seen);
        result.records.push_back(rec);
        if (rec.test_accuracy > result.best_test_accuracy || result.best_epoch == 0) {
            result.best_test_accuracy = rec.test_accuracy;
            result.best_epoch = epoch;
            result.best_arrays = snapshot_arrays();
        }
    }
    result.model.set_mode(BnMode::Inference);
    return result;
}

}  // namespace eafpmed::harness
