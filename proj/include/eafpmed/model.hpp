#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "eafpmed/pool.hpp"

namespace eafpmed::model {

// Compact convolutional backbone: stem, stages of conv/bn/leaky-relu blocks
// with stride-2 downsampling between stages, global average pool, linear
// head.
struct BackboneConfig {
    int in_channels = 1;
    int stem_channels = 16;
    std::vector<int> stage_widths{16, 32, 64};
    std::vector<int> blocks_per_stage{2, 2, 2};
    std::vector<int> downsample{1, 2, 2};  // spatial reduction entering each stage
    int head_width = 0;                    // 0 = single linear layer
    int classes = 3;
    double negative_slope = 0.01;

    void validate() const;
    int total_downsample() const;
    // Spatial extents must divide by the cumulative downsample factor.
    void check_input_extents(int height, int width) const;

    nlohmann::json to_json() const;
    static BackboneConfig from_json(const nlohmann::json& j);
};

// Records intermediate feature maps by layer name during a forward pass.
template <typename T>
struct ActivationTrace {
    std::vector<std::pair<std::string, Tensor<T>>> entries;

    void record(const std::string& name, const Tensor<T>& t) { entries.emplace_back(name, t); }
    const Tensor<T>* find(const std::string& name) const {
        for (const auto& [n, t] : entries) {
            if (n == name) return &t;
        }
        return nullptr;
    }
};

template <typename T>
struct Backbone {
    BackboneConfig config;
    ConvBnBlock<T> stem;
    std::vector<ConvBnBlock<T>> downsamples;  // one per stage (kernel 3, stride per config)
    std::vector<std::vector<ConvBnBlock<T>>> stages;
    Tensor<T> hidden_weight, hidden_bias;  // present when head_width > 0
    Tensor<T> head_weight, head_bias;

    static Backbone init(const BackboneConfig& config, Rng& rng);

    std::vector<Tensor<T>> parameters();
    void set_mode(BnMode mode);
    void set_requires_grad(bool rg);
    // Name of the last feature layer before global pooling.
    std::string default_target_layer() const;

    std::vector<NamedArray> to_arrays() const;
    static Backbone from_arrays(const BackboneConfig& config, const std::vector<NamedArray>& arrays);
};

template <typename T>
Tensor<T> backbone_forward(Backbone<T>& backbone, const Tensor<T>& image,
                           ActivationTrace<T>* trace = nullptr);

enum class EafpMode { On, Off };

// Fig-3 style composition: optional EAFP preprocessing bound to a prompt key,
// followed by the backbone.
template <typename T>
struct Classifier {
    EafpMode mode = EafpMode::Off;
    Backbone<T> backbone;
    std::optional<eafp::EafpParams<T>> eafp_params;
    std::string prompt_key;

    std::vector<Tensor<T>> parameters(bool include_eafp);
    void set_mode(BnMode bn_mode);
};

// Resolves the prompt in the pool and binds that parameter set to the model.
template <typename T>
void bind_prompt(Classifier<T>& model, const eafp::ParamPool& pool, std::string_view prompt_text);

// eafp-on: backbone(eafp(image)); eafp-off: backbone(image).
template <typename T>
Tensor<T> st_forward(Classifier<T>& model, const Tensor<T>& image,
                     ActivationTrace<T>* trace = nullptr);
template <typename T>
Tensor<T> st_forward(Classifier<T>& model, const eafp::ParamPool& pool, const Tensor<T>& image,
                     std::string_view prompt_text);

struct Prediction {
    std::vector<int> category;                 // argmax, ties to the lowest index
    std::vector<std::vector<double>> probs;    // per-sample softmax
};

template <typename T>
Prediction predict(Classifier<T>& model, const Tensor<T>& batch);

extern template struct Backbone<float>;
extern template struct Backbone<double>;
extern template struct Classifier<float>;
extern template struct Classifier<double>;

}  // namespace eafpmed::model
