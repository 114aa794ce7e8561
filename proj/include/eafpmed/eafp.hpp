#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "eafpmed/blocks.hpp"

namespace eafpmed::eafp {

enum class FeatureScale { Global, Regional, Local };

std::string to_string(FeatureScale scale);
FeatureScale feature_scale_from_string(const std::string& s);

// One scale-specialized extractor: a stack of conv->bn->leaky-relu blocks,
// all stride 1 with shape-preserving padding.
struct ExtractorConfig {
    FeatureScale scale = FeatureScale::Local;
    int depth = 1;
    int channels = 16;
    std::vector<ConvSpec> blocks;  // one per depth level

    // Uniform kernel with per-block dilations; in_channels feeds block 0.
    static ExtractorConfig stack(FeatureScale scale, int in_channels, int channels, int kernel,
                                 const std::vector<int>& dilations);

    // 1 + sum over blocks of dilation*(kernel-1); all strides are 1.
    int receptive_field() const;
    void validate(int expected_in_channels) const;
};

struct EafpConfig {
    int in_channels = 1;
    ExtractorConfig global;
    ExtractorConfig regional;
    ExtractorConfig local;
    double overlay_gain = 1.0;    // scale on the enhancement term added to the image
    double negative_slope = 0.01;

    // local=2x3x3, regional=2x5x5, global=3x5x5 with dilations 1,2,4
    // (receptive fields 5 < 9 < 29).
    static EafpConfig defaults(int in_channels = 1, int channels = 16);

    void validate() const;
    std::string fingerprint() const;  // stable hash of the parameter topology

    nlohmann::json to_json() const;
    static EafpConfig from_json(const nlohmann::json& j);
};

// The complete learnable state of one EAFP instance: three extractor block
// chains plus the three 1x1 feature adaptors projecting back to image
// channels.
template <typename T>
struct EafpParams {
    EafpConfig config;
    std::string fingerprint;
    std::vector<ConvBnBlock<T>> global_blocks;
    std::vector<ConvBnBlock<T>> regional_blocks;
    std::vector<ConvBnBlock<T>> local_blocks;
    Conv1x1<T> adapt_global;
    Conv1x1<T> adapt_regional;
    Conv1x1<T> adapt_local;

    static EafpParams init(const EafpConfig& config, Rng& rng);

    std::vector<Tensor<T>> parameters();
    void set_mode(BnMode mode);
    void zero_adaptors();
    void set_requires_grad(bool rg);
    EafpParams clone() const;

    std::vector<NamedArray> to_arrays() const;
    static EafpParams from_arrays(const EafpConfig& config, const std::vector<NamedArray>& arrays);
};

template <typename T>
Tensor<T> extract_global(const Tensor<T>& image, EafpParams<T>& params);
template <typename T>
Tensor<T> extract_regional(const Tensor<T>& image, EafpParams<T>& params);
// Consumes the other two extractors' outputs, channel-concatenated.
template <typename T>
Tensor<T> extract_local(const Tensor<T>& global_features, const Tensor<T>& regional_features,
                        EafpParams<T>& params);
// 1x1 projection of a feature map to image channels.
template <typename T>
Tensor<T> adapt(const Tensor<T>& features, Conv1x1<T>& adaptor);

// out = image + gain * (adapt_g(G(x)) + adapt_r(R(x)) + adapt_l(L(G(x),R(x))));
// output shape always equals input shape.
template <typename T>
Tensor<T> eafp_forward(const Tensor<T>& image, EafpParams<T>& params);

extern template struct EafpParams<float>;
extern template struct EafpParams<double>;

}  // namespace eafpmed::eafp
