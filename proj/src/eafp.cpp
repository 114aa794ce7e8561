#include "eafpmed/eafp.hpp"

#include <nlohmann/json.hpp>

#include "eafpmed/errors.hpp"
#include "eafpmed/util.hpp"

namespace eafpmed::eafp {

std::string to_string(FeatureScale scale) {
    switch (scale) {
        case FeatureScale::Global: return "global";
        case FeatureScale::Regional: return "regional";
        case FeatureScale::Local: return "local";
    }
    return "?";
}

FeatureScale feature_scale_from_string(const std::string& s) {
    if (s == "global") return FeatureScale::Global;
    if (s == "regional") return FeatureScale::Regional;
    if (s == "local") return FeatureScale::Local;
    throw FormatError("eafp config: unknown feature scale '" + s + "'");
}

ExtractorConfig ExtractorConfig::stack(FeatureScale scale, int in_channels, int channels,
                                       int kernel, const std::vector<int>& dilations) {
    ExtractorConfig cfg;
    cfg.scale = scale;
    cfg.depth = static_cast<int>(dilations.size());
    cfg.channels = channels;
    int in = in_channels;
    for (int d : dilations) {
        ConvSpec spec{in, channels, kernel, 1, ConvSpec::same_padding(kernel, d), d};
        cfg.blocks.push_back(spec);
        in = channels;
    }
    return cfg;
}

int ExtractorConfig::receptive_field() const {
    int rf = 1;
    for (const auto& b : blocks) rf += b.dilation * (b.kernel - 1);
    return rf;
}

void ExtractorConfig::validate(int expected_in_channels) const {
    const std::string tag = "eafp " + to_string(scale) + " extractor: ";
    if (depth <= 0 || depth != static_cast<int>(blocks.size())) {
        throw ShapeError(tag + "depth " + std::to_string(depth) + " != block count " +
                         std::to_string(blocks.size()));
    }
    if (channels <= 0) throw ShapeError(tag + "channels must be positive");
    int in = expected_in_channels;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        const auto& b = blocks[i];
        b.validate();
        if (b.in_channels != in) {
            throw ShapeError(tag + "block " + std::to_string(i) + " in_channels " +
                             std::to_string(b.in_channels) + " != expected " + std::to_string(in));
        }
        if (b.stride != 1 || b.padding != ConvSpec::same_padding(b.kernel, b.dilation)) {
            throw ShapeError(tag + "block " + std::to_string(i) +
                             " must be stride 1 with shape-preserving padding");
        }
        in = b.out_channels;
    }
    if (in != channels) {
        throw ShapeError(tag + "final block out_channels " + std::to_string(in) +
                         " != configured channels " + std::to_string(channels));
    }
}

EafpConfig EafpConfig::defaults(int in_channels, int channels) {
    EafpConfig cfg;
    cfg.in_channels = in_channels;
    cfg.global = ExtractorConfig::stack(FeatureScale::Global, in_channels, channels, 5, {1, 2, 4});
    cfg.regional = ExtractorConfig::stack(FeatureScale::Regional, in_channels, channels, 5, {1, 1});
    cfg.local = ExtractorConfig::stack(FeatureScale::Local, 2 * channels, channels, 3, {1, 1});
    cfg.validate();
    return cfg;
}

void EafpConfig::validate() const {
    if (in_channels <= 0) throw ShapeError("eafp config: in_channels must be positive");
    if (!(negative_slope > 0.0 && negative_slope < 1.0)) {
        throw ShapeError("eafp config: negative_slope must lie in (0,1)");
    }
    if (!std::isfinite(overlay_gain)) throw ShapeError("eafp config: overlay_gain must be finite");
    global.validate(in_channels);
    regional.validate(in_channels);
    local.validate(global.channels + regional.channels);
    const int rf_g = global.receptive_field();
    const int rf_r = regional.receptive_field();
    const int rf_l = local.receptive_field();
    if (!(rf_g > rf_r && rf_r > rf_l)) {
        throw ShapeError("eafp config: receptive fields must be strictly ordered global > regional"
                         " > local, got " + std::to_string(rf_g) + "/" + std::to_string(rf_r) + "/" +
                         std::to_string(rf_l));
    }
}

std::string EafpConfig::fingerprint() const {
    std::string canon = "in=" + std::to_string(in_channels);
    auto append = [&canon](const ExtractorConfig& e) {
        canon += "|" + to_string(e.scale) + ":c" + std::to_string(e.channels);
        for (const auto& b : e.blocks) {
            canon += ";" + std::to_string(b.in_channels) + "-" + std::to_string(b.out_channels) +
                     "-k" + std::to_string(b.kernel) + "-s" + std::to_string(b.stride) + "-p" +
                     std::to_string(b.padding) + "-d" + std::to_string(b.dilation);
        }
    };
    append(global);
    append(regional);
    append(local);
    return fnv1a64_hex(canon);
}

namespace {

nlohmann::json extractor_to_json(const ExtractorConfig& e) {
    nlohmann::json blocks = nlohmann::json::array();
    for (const auto& b : e.blocks) {
        blocks.push_back({{"in_channels", b.in_channels},
                          {"out_channels", b.out_channels},
                          {"kernel", b.kernel},
                          {"stride", b.stride},
                          {"padding", b.padding},
                          {"dilation", b.dilation}});
    }
    return {{"scale", to_string(e.scale)},
            {"depth", e.depth},
            {"channels", e.channels},
            {"blocks", blocks}};
}

ExtractorConfig extractor_from_json(const nlohmann::json& j) {
    ExtractorConfig e;
    e.scale = feature_scale_from_string(j.at("scale").get<std::string>());
    e.depth = j.at("depth").get<int>();
    e.channels = j.at("channels").get<int>();
    for (const auto& bj : j.at("blocks")) {
        ConvSpec b;
        b.in_channels = bj.at("in_channels").get<int>();
        b.out_channels = bj.at("out_channels").get<int>();
        b.kernel = bj.at("kernel").get<int>();
        b.stride = bj.at("stride").get<int>();
        b.padding = bj.at("padding").get<int>();
        b.dilation = bj.at("dilation").get<int>();
        e.blocks.push_back(b);
    }
    return e;
}

}  // namespace

nlohmann::json EafpConfig::to_json() const {
    return {{"in_channels", in_channels},
            {"overlay_gain", overlay_gain},
            {"negative_slope", negative_slope},
            {"global", extractor_to_json(global)},
            {"regional", extractor_to_json(regional)},
            {"local", extractor_to_json(local)}};
}

EafpConfig EafpConfig::from_json(const nlohmann::json& j) {
    EafpConfig cfg;
    cfg.in_channels = j.at("in_channels").get<int>();
    cfg.overlay_gain = j.at("overlay_gain").get<double>();
    cfg.negative_slope = j.at("negative_slope").get<double>();
    cfg.global = extractor_from_json(j.at("global"));
    cfg.regional = extractor_from_json(j.at("regional"));
    cfg.local = extractor_from_json(j.at("local"));
    cfg.validate();
    return cfg;
}

template <typename T>
EafpParams<T> EafpParams<T>::init(const EafpConfig& config, Rng& rng) {
    config.validate();
    EafpParams<T> p;
    p.config = config;
    p.fingerprint = config.fingerprint();
    const T slope = static_cast<T>(config.negative_slope);
    for (const auto& spec : config.global.blocks) {
        p.global_blocks.push_back(ConvBnBlock<T>::init(spec, rng, slope));
    }
    for (const auto& spec : config.regional.blocks) {
        p.regional_blocks.push_back(ConvBnBlock<T>::init(spec, rng, slope));
    }
    for (const auto& spec : config.local.blocks) {
        p.local_blocks.push_back(ConvBnBlock<T>::init(spec, rng, slope));
    }
    p.adapt_global = Conv1x1<T>::init(config.global.channels, config.in_channels, rng, slope);
    p.adapt_regional = Conv1x1<T>::init(config.regional.channels, config.in_channels, rng, slope);
    p.adapt_local = Conv1x1<T>::init(config.local.channels, config.in_channels, rng, slope);
    return p;
}

template <typename T>
std::vector<Tensor<T>> EafpParams<T>::parameters() {
    std::vector<Tensor<T>> out;
    for (auto& b : global_blocks) b.collect_parameters(out);
    for (auto& b : regional_blocks) b.collect_parameters(out);
    for (auto& b : local_blocks) b.collect_parameters(out);
    adapt_global.collect_parameters(out);
    adapt_regional.collect_parameters(out);
    adapt_local.collect_parameters(out);
    return out;
}

template <typename T>
void EafpParams<T>::set_mode(BnMode mode) {
    for (auto& b : global_blocks) b.set_mode(mode);
    for (auto& b : regional_blocks) b.set_mode(mode);
    for (auto& b : local_blocks) b.set_mode(mode);
}

template <typename T>
void EafpParams<T>::zero_adaptors() {
    for (auto* a : {&adapt_global, &adapt_regional, &adapt_local}) {
        for (auto& v : a->weight.values_mut()) v = T(0);
        for (auto& v : a->bias.values_mut()) v = T(0);
    }
}

template <typename T>
void EafpParams<T>::set_requires_grad(bool rg) {
    for (auto& t : parameters()) t.set_requires_grad(rg);
}

template <typename T>
EafpParams<T> EafpParams<T>::clone() const {
    return from_arrays(config, to_arrays());
}

template <typename T>
std::vector<NamedArray> EafpParams<T>::to_arrays() const {
    std::vector<NamedArray> out;
    for (std::size_t i = 0; i < global_blocks.size(); ++i) {
        global_blocks[i].collect_arrays("global.b" + std::to_string(i), out);
    }
    for (std::size_t i = 0; i < regional_blocks.size(); ++i) {
        regional_blocks[i].collect_arrays("regional.b" + std::to_string(i), out);
    }
    for (std::size_t i = 0; i < local_blocks.size(); ++i) {
        local_blocks[i].collect_arrays("local.b" + std::to_string(i), out);
    }
    adapt_global.collect_arrays("adapt.global", out);
    adapt_regional.collect_arrays("adapt.regional", out);
    adapt_local.collect_arrays("adapt.local", out);
    return out;
}

template <typename T>
EafpParams<T> EafpParams<T>::from_arrays(const EafpConfig& config,
                                         const std::vector<NamedArray>& arrays) {
    Rng rng(0);  // values are overwritten below
    EafpParams<T> p = init(config, rng);
    const auto idx = index_arrays(arrays);
    for (std::size_t i = 0; i < p.global_blocks.size(); ++i) {
        p.global_blocks[i].load_arrays("global.b" + std::to_string(i), idx);
    }
    for (std::size_t i = 0; i < p.regional_blocks.size(); ++i) {
        p.regional_blocks[i].load_arrays("regional.b" + std::to_string(i), idx);
    }
    for (std::size_t i = 0; i < p.local_blocks.size(); ++i) {
        p.local_blocks[i].load_arrays("local.b" + std::to_string(i), idx);
    }
    p.adapt_global.load_arrays("adapt.global", idx);
    p.adapt_regional.load_arrays("adapt.regional", idx);
    p.adapt_local.load_arrays("adapt.local", idx);
    return p;
}

namespace {

template <typename T>
void check_params(const EafpParams<T>& params) {
    const std::string want = params.config.fingerprint();
    if (params.fingerprint != want) {
        throw ShapeError("eafp: parameter fingerprint " + params.fingerprint +
                         " does not match config fingerprint " + want +
                         "; refusing to apply parameters trained under a different topology");
    }
}

template <typename T>
void check_image(const Tensor<T>& image, const EafpConfig& config) {
    if (image.shape().rank() != 4) {
        throw ShapeError("eafp: image rank " + std::to_string(image.shape().rank()) +
                         " must be 4 (NCHW)");
    }
    if (image.shape()[1] != config.in_channels) {
        throw ShapeError("eafp: image channels " + std::to_string(image.shape()[1]) +
                         " != configured in_channels " + std::to_string(config.in_channels));
    }
}

template <typename T>
Tensor<T> run_chain(const Tensor<T>& x, std::vector<ConvBnBlock<T>>& blocks) {
    Tensor<T> h = x;
    for (auto& b : blocks) h = b.forward(h);
    return h;
}

}  // namespace

template <typename T>
Tensor<T> extract_global(const Tensor<T>& image, EafpParams<T>& params) {
    check_params(params);
    check_image(image, params.config);
    return run_chain(image, params.global_blocks);
}

template <typename T>
Tensor<T> extract_regional(const Tensor<T>& image, EafpParams<T>& params) {
    check_params(params);
    check_image(image, params.config);
    return run_chain(image, params.regional_blocks);
}

template <typename T>
Tensor<T> extract_local(const Tensor<T>& global_features, const Tensor<T>& regional_features,
                        EafpParams<T>& params) {
    check_params(params);
    return run_chain(concat_channels(global_features, regional_features), params.local_blocks);
}

template <typename T>
Tensor<T> adapt(const Tensor<T>& features, Conv1x1<T>& adaptor) {
    return adaptor.forward(features);
}

template <typename T>
Tensor<T> eafp_forward(const Tensor<T>& image, EafpParams<T>& params) {
    check_params(params);
    check_image(image, params.config);
    Tensor<T> g = run_chain(image, params.global_blocks);
    Tensor<T> r = run_chain(image, params.regional_blocks);
    Tensor<T> l = run_chain(concat_channels(g, r), params.local_blocks);
    Tensor<T> enhancement = add(add(adapt(g, params.adapt_global), adapt(r, params.adapt_regional)),
                                adapt(l, params.adapt_local));
    if (params.config.overlay_gain != 1.0) {
        enhancement = scale(enhancement, static_cast<T>(params.config.overlay_gain));
    }
    return add(image, enhancement);
}

#define EAFPMED_INSTANTIATE_EAFP(T)                                                          \
    template struct EafpParams<T>;                                                           \
    template Tensor<T> extract_global<T>(const Tensor<T>&, EafpParams<T>&);                  \
    template Tensor<T> extract_regional<T>(const Tensor<T>&, EafpParams<T>&);                \
    template Tensor<T> extract_local<T>(const Tensor<T>&, const Tensor<T>&, EafpParams<T>&); \
    template Tensor<T> adapt<T>(const Tensor<T>&, Conv1x1<T>&);                              \
    template Tensor<T> eafp_forward<T>(const Tensor<T>&, EafpParams<T>&);

EAFPMED_INSTANTIATE_EAFP(float)
EAFPMED_INSTANTIATE_EAFP(double)

#undef EAFPMED_INSTANTIATE_EAFP

}  // namespace eafpmed::eafp
