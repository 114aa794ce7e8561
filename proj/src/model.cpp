#include "eafpmed/model.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "eafpmed/errors.hpp"

namespace eafpmed::model {

void BackboneConfig::validate() const {
    if (in_channels <= 0) throw ShapeError("backbone config: in_channels must be positive");
    if (stem_channels <= 0) throw ShapeError("backbone config: stem_channels must be positive");
    if (classes < 2) throw ShapeError("backbone config: classes " + std::to_string(classes) + " must be >= 2");
    if (head_width < 0) throw ShapeError("backbone config: head_width must be nonnegative");
    if (stage_widths.empty()) throw ShapeError("backbone config: at least one stage required");
    if (stage_widths.size() != blocks_per_stage.size() || stage_widths.size() != downsample.size()) {
        throw ShapeError("backbone config: stage_widths, blocks_per_stage and downsample must agree"
                         " on stage count");
    }
    for (std::size_t i = 0; i < stage_widths.size(); ++i) {
        if (stage_widths[i] <= 0) throw ShapeError("backbone config: stage " + std::to_string(i) + " width must be positive");
        if (blocks_per_stage[i] <= 0) throw ShapeError("backbone config: stage " + std::to_string(i) + " needs >= 1 block");
        if (downsample[i] != 1 && downsample[i] != 2) {
            throw ShapeError("backbone config: stage " + std::to_string(i) +
                             " downsample factor must be 1 or 2");
        }
    }
    if (!(negative_slope > 0.0 && negative_slope < 1.0)) {
        throw ShapeError("backbone config: negative_slope must lie in (0,1)");
    }
}

int BackboneConfig::total_downsample() const {
    int f = 1;
    for (int d : downsample) f *= d;
    return f;
}

void BackboneConfig::check_input_extents(int height, int width) const {
    const int f = total_downsample();
    for (auto [name, extent] : {std::pair{"height", height}, std::pair{"width", width}}) {
        if (extent % f != 0) {
            throw ShapeError(std::string("backbone: input ") + name + " " + std::to_string(extent) +
                             " not divisible by cumulative downsample factor " + std::to_string(f));
        }
        if (extent / f < 1) {
            throw ShapeError(std::string("backbone: input ") + name + " " + std::to_string(extent) +
                             " collapses below 1 after downsampling by " + std::to_string(f));
        }
    }
}

nlohmann::json BackboneConfig::to_json() const {
    return {{"in_channels", in_channels},
            {"stem_channels", stem_channels},
            {"stage_widths", stage_widths},
            {"blocks_per_stage", blocks_per_stage},
            {"downsample", downsample},
            {"head_width", head_width},
            {"classes", classes},
            {"negative_slope", negative_slope}};
}

BackboneConfig BackboneConfig::from_json(const nlohmann::json& j) {
    BackboneConfig c;
    c.in_channels = j.at("in_channels").get<int>();
    c.stem_channels = j.at("stem_channels").get<int>();
    c.stage_widths = j.at("stage_widths").get<std::vector<int>>();
    c.blocks_per_stage = j.at("blocks_per_stage").get<std::vector<int>>();
    c.downsample = j.at("downsample").get<std::vector<int>>();
    c.head_width = j.at("head_width").get<int>();
    c.classes = j.at("classes").get<int>();
    c.negative_slope = j.at("negative_slope").get<double>();
    c.validate();
    return c;
}

template <typename T>
Backbone<T> Backbone<T>::init(const BackboneConfig& config, Rng& rng) {
    config.validate();
    const T slope = static_cast<T>(config.negative_slope);
    Backbone<T> b;
    b.config = config;
    b.stem = ConvBnBlock<T>::init(ConvSpec{config.in_channels, config.stem_channels, 3, 1, 1, 1},
                                  rng, slope);
    int channels = config.stem_channels;
    for (std::size_t s = 0; s < config.stage_widths.size(); ++s) {
        const int width = config.stage_widths[s];
        b.downsamples.push_back(ConvBnBlock<T>::init(
            ConvSpec{channels, width, 3, config.downsample[s], 1, 1}, rng, slope));
        channels = width;
        std::vector<ConvBnBlock<T>> blocks;
        for (int i = 0; i < config.blocks_per_stage[s]; ++i) {
            blocks.push_back(ConvBnBlock<T>::init(ConvSpec{width, width, 3, 1, 1, 1}, rng, slope));
        }
        b.stages.push_back(std::move(blocks));
    }
    const int features = channels;
    if (config.head_width > 0) {
        b.hidden_weight = kaiming_normal<T>(rng, Shape{config.head_width, features}, features, slope);
        b.hidden_bias = Tensor<T>::zeros(Shape{config.head_width}, true);
        b.head_weight = kaiming_normal<T>(rng, Shape{config.classes, config.head_width},
                                          config.head_width, slope);
    } else {
        b.head_weight = kaiming_normal<T>(rng, Shape{config.classes, features}, features, slope);
    }
    b.head_bias = Tensor<T>::zeros(Shape{config.classes}, true);
    return b;
}

template <typename T>
std::vector<Tensor<T>> Backbone<T>::parameters() {
    std::vector<Tensor<T>> out;
    stem.collect_parameters(out);
    for (std::size_t s = 0; s < stages.size(); ++s) {
        downsamples[s].collect_parameters(out);
        for (auto& b : stages[s]) b.collect_parameters(out);
    }
    if (config.head_width > 0) {
        out.push_back(hidden_weight);
        out.push_back(hidden_bias);
    }
    out.push_back(head_weight);
    out.push_back(head_bias);
    return out;
}

template <typename T>
void Backbone<T>::set_mode(BnMode mode) {
    stem.set_mode(mode);
    for (std::size_t s = 0; s < stages.size(); ++s) {
        downsamples[s].set_mode(mode);
        for (auto& b : stages[s]) b.set_mode(mode);
    }
}

template <typename T>
void Backbone<T>::set_requires_grad(bool rg) {
    for (auto& t : parameters()) t.set_requires_grad(rg);
}

template <typename T>
std::string Backbone<T>::default_target_layer() const {
    const auto s = stages.size() - 1;
    return "stage" + std::to_string(s) + ".block" + std::to_string(stages[s].size() - 1);
}

template <typename T>
std::vector<NamedArray> Backbone<T>::to_arrays() const {
    std::vector<NamedArray> out;
    stem.collect_arrays("stem", out);
    for (std::size_t s = 0; s < stages.size(); ++s) {
        downsamples[s].collect_arrays("stage" + std::to_string(s) + ".down", out);
        for (std::size_t i = 0; i < stages[s].size(); ++i) {
            stages[s][i].collect_arrays("stage" + std::to_string(s) + ".block" + std::to_string(i), out);
        }
    }
    if (config.head_width > 0) {
        out.push_back(tensor_to_array("head.hidden.weight", hidden_weight));
        out.push_back(tensor_to_array("head.hidden.bias", hidden_bias));
    }
    out.push_back(tensor_to_array("head.weight", head_weight));
    out.push_back(tensor_to_array("head.bias", head_bias));
    return out;
}

template <typename T>
Backbone<T> Backbone<T>::from_arrays(const BackboneConfig& config,
                                     const std::vector<NamedArray>& arrays) {
    Rng rng(0);  // values are overwritten below
    Backbone<T> b = init(config, rng);
    const auto idx = index_arrays(arrays);
    b.stem.load_arrays("stem", idx);
    for (std::size_t s = 0; s < b.stages.size(); ++s) {
        b.downsamples[s].load_arrays("stage" + std::to_string(s) + ".down", idx);
        for (std::size_t i = 0; i < b.stages[s].size(); ++i) {
            b.stages[s][i].load_arrays("stage" + std::to_string(s) + ".block" + std::to_string(i), idx);
        }
    }
    if (config.head_width > 0) {
        array_into_tensor(idx, "head.hidden.weight", b.hidden_weight);
        array_into_tensor(idx, "head.hidden.bias", b.hidden_bias);
    }
    array_into_tensor(idx, "head.weight", b.head_weight);
    array_into_tensor(idx, "head.bias", b.head_bias);
    return b;
}

template <typename T>
Tensor<T> backbone_forward(Backbone<T>& backbone, const Tensor<T>& image,
                           ActivationTrace<T>* trace) {
    if (image.shape().rank() != 4) {
        throw ShapeError("backbone: image rank " + std::to_string(image.shape().rank()) +
                         " must be 4 (NCHW)");
    }
    if (image.shape()[1] != backbone.config.in_channels) {
        throw ShapeError("backbone: image channels " + std::to_string(image.shape()[1]) +
                         " != configured in_channels " + std::to_string(backbone.config.in_channels));
    }
    backbone.config.check_input_extents(image.shape()[2], image.shape()[3]);

    Tensor<T> h = backbone.stem.forward(image);
    if (trace) trace->record("stem", h);
    for (std::size_t s = 0; s < backbone.stages.size(); ++s) {
        h = backbone.downsamples[s].forward(h);
        if (trace) trace->record("stage" + std::to_string(s) + ".down", h);
        for (std::size_t i = 0; i < backbone.stages[s].size(); ++i) {
            h = backbone.stages[s][i].forward(h);
            if (trace) trace->record("stage" + std::to_string(s) + ".block" + std::to_string(i), h);
        }
    }
    Tensor<T> pooled = global_avg_pool(h);
    Tensor<T> flat = reshape(pooled, Shape{pooled.shape()[0], pooled.shape()[1]});
    if (backbone.config.head_width > 0) {
        flat = leaky_relu(linear(flat, backbone.hidden_weight, backbone.hidden_bias),
                          static_cast<T>(backbone.config.negative_slope));
    }
    return linear(flat, backbone.head_weight, backbone.head_bias);
}

template <typename T>
std::vector<Tensor<T>> Classifier<T>::parameters(bool include_eafp) {
    std::vector<Tensor<T>> out = backbone.parameters();
    if (include_eafp && eafp_params.has_value()) {
        auto extra = eafp_params->parameters();
        out.insert(out.end(), extra.begin(), extra.end());
    }
    return out;
}

template <typename T>
void Classifier<T>::set_mode(BnMode bn_mode) {
    backbone.set_mode(bn_mode);
    if (eafp_params.has_value()) eafp_params->set_mode(bn_mode);
}

template <typename T>
void bind_prompt(Classifier<T>& model, const eafp::ParamPool& pool, std::string_view prompt_text) {
    const auto key = pool.resolve(prompt_text);
    if constexpr (std::is_same_v<T, float>) {
        model.eafp_params = pool.lookup(key);
    } else {
        // Double-precision classifiers re-init from arrays for verification runs.
        const auto params = pool.lookup(key);
        model.eafp_params = eafp::EafpParams<T>::from_arrays(params.config, params.to_arrays());
    }
    model.prompt_key = key.str();
    model.mode = EafpMode::On;
}

template <typename T>
Tensor<T> st_forward(Classifier<T>& model, const Tensor<T>& image, ActivationTrace<T>* trace) {
    if (model.mode == EafpMode::Off) return backbone_forward(model.backbone, image, trace);
    if (!model.eafp_params.has_value()) {
        throw PromptError("classifier: eafp-on mode requires a bound prompt key before inference");
    }
    Tensor<T> enhanced = eafp::eafp_forward(image, *model.eafp_params);
    if (trace) trace->record("eafp.out", enhanced);
    return backbone_forward(model.backbone, enhanced, trace);
}

template <typename T>
Tensor<T> st_forward(Classifier<T>& model, const eafp::ParamPool& pool, const Tensor<T>& image,
                     std::string_view prompt_text) {
    bind_prompt(model, pool, prompt_text);
    return st_forward(model, image);
}

template <typename T>
Prediction predict(Classifier<T>& model, const Tensor<T>& batch) {
    Tensor<T> logits = st_forward(model, batch);
    const int n = logits.shape()[0], k = logits.shape()[1];
    Prediction pred;
    pred.category.resize(static_cast<std::size_t>(n));
    pred.probs.assign(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(k)));
    const T* z = logits.values().data();
    for (int i = 0; i < n; ++i) {
        const T* row = z + static_cast<std::size_t>(i) * k;
        int best = 0;
        T zmax = row[0];
        for (int j = 1; j < k; ++j) {
            if (row[j] > zmax) {  // strict: ties keep the lowest index
                zmax = row[j];
                best = j;
            }
        }
        pred.category[static_cast<std::size_t>(i)] = best;
        double denom = 0.0;
        auto& p = pred.probs[static_cast<std::size_t>(i)];
        for (int j = 0; j < k; ++j) {
            p[static_cast<std::size_t>(j)] = std::exp(static_cast<double>(row[j] - zmax));
            denom += p[static_cast<std::size_t>(j)];
        }
        for (int j = 0; j < k; ++j) p[static_cast<std::size_t>(j)] /= denom;
    }
    return pred;
}

#define EAFPMED_INSTANTIATE_MODEL(T)                                                           \
    template struct Backbone<T>;                                                               \
    template struct Classifier<T>;                                                             \
    template Tensor<T> backbone_forward<T>(Backbone<T>&, const Tensor<T>&, ActivationTrace<T>*); \
    template void bind_prompt<T>(Classifier<T>&, const eafp::ParamPool&, std::string_view);    \
    template Tensor<T> st_forward<T>(Classifier<T>&, const Tensor<T>&, ActivationTrace<T>*);   \
    template Tensor<T> st_forward<T>(Classifier<T>&, const eafp::ParamPool&, const Tensor<T>&, \
                                     std::string_view);                                        \
    template Prediction predict<T>(Classifier<T>&, const Tensor<T>&);

EAFPMED_INSTANTIATE_MODEL(float)
EAFPMED_INSTANTIATE_MODEL(double)

#undef EAFPMED_INSTANTIATE_MODEL

}  // namespace eafpmed::model
