#include "eafpmed/blocks.hpp"

#include "eafpmed/errors.hpp"

namespace eafpmed {

template <typename T>
NamedArray tensor_to_array(const std::string& name, const Tensor<T>& t) {
    NamedArray a;
    a.name = name;
    a.shape = t.shape();
    a.values.reserve(t.values().size());
    for (T v : t.values()) a.values.push_back(static_cast<float>(v));
    return a;
}

template <typename T>
NamedArray vector_to_array(const std::string& name, const std::vector<T>& v) {
    NamedArray a;
    a.name = name;
    a.shape = Shape{static_cast<int>(v.size())};
    a.values.reserve(v.size());
    for (T x : v) a.values.push_back(static_cast<float>(x));
    return a;
}

std::map<std::string, const NamedArray*> index_arrays(const std::vector<NamedArray>& arrays) {
    std::map<std::string, const NamedArray*> idx;
    for (const auto& a : arrays) {
        if (!idx.emplace(a.name, &a).second) {
            throw FormatError("checkpoint: duplicate array name " + a.name);
        }
    }
    return idx;
}

namespace {

const NamedArray& find_array(const std::map<std::string, const NamedArray*>& arrays,
                             const std::string& name) {
    auto it = arrays.find(name);
    if (it == arrays.end()) throw FormatError("checkpoint: missing array " + name);
    return *it->second;
}

}  // namespace

template <typename T>
void array_into_tensor(const std::map<std::string, const NamedArray*>& arrays,
                       const std::string& name, Tensor<T>& t) {
    const NamedArray& a = find_array(arrays, name);
    if (a.shape != t.shape()) {
        throw FormatError("checkpoint: array " + name + " shape " + a.shape.str() +
                          " != expected " + t.shape().str());
    }
    auto dst = t.values_mut();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<T>(a.values[i]);
}

template <typename T>
void array_into_vector(const std::map<std::string, const NamedArray*>& arrays,
                       const std::string& name, std::vector<T>& v) {
    const NamedArray& a = find_array(arrays, name);
    if (a.values.size() != v.size()) {
        throw FormatError("checkpoint: array " + name + " length " + std::to_string(a.values.size()) +
                          " != expected " + std::to_string(v.size()));
    }
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<T>(a.values[i]);
}

template <typename T>
ConvBnBlock<T> ConvBnBlock<T>::init(const ConvSpec& spec, Rng& rng, T negative_slope) {
    spec.validate();
    ConvBnBlock<T> b;
    b.spec = spec;
    const int fan_in = spec.in_channels * spec.kernel * spec.kernel;
    b.weight = kaiming_normal<T>(rng, Shape{spec.out_channels, spec.in_channels, spec.kernel, spec.kernel},
                                 fan_in, negative_slope);
    b.bias = Tensor<T>::zeros(Shape{spec.out_channels}, true);
    b.bn = BnState<T>::init(spec.out_channels);
    b.negative_slope = negative_slope;
    return b;
}

template <typename T>
void ConvBnBlock<T>::collect_parameters(std::vector<Tensor<T>>& out) {
    out.push_back(weight);
    out.push_back(bias);
    out.push_back(bn.gamma);
    out.push_back(bn.beta);
}

template <typename T>
void ConvBnBlock<T>::collect_arrays(const std::string& prefix, std::vector<NamedArray>& out) const {
    out.push_back(tensor_to_array(prefix + ".weight", weight));
    out.push_back(tensor_to_array(prefix + ".bias", bias));
    out.push_back(tensor_to_array(prefix + ".bn.gamma", bn.gamma));
    out.push_back(tensor_to_array(prefix + ".bn.beta", bn.beta));
    out.push_back(vector_to_array(prefix + ".bn.running_mean", bn.running_mean));
    out.push_back(vector_to_array(prefix + ".bn.running_var", bn.running_var));
}

template <typename T>
void ConvBnBlock<T>::load_arrays(const std::string& prefix,
                                 const std::map<std::string, const NamedArray*>& arrays) {
    array_into_tensor(arrays, prefix + ".weight", weight);
    array_into_tensor(arrays, prefix + ".bias", bias);
    array_into_tensor(arrays, prefix + ".bn.gamma", bn.gamma);
    array_into_tensor(arrays, prefix + ".bn.beta", bn.beta);
    array_into_vector(arrays, prefix + ".bn.running_mean", bn.running_mean);
    array_into_vector(arrays, prefix + ".bn.running_var", bn.running_var);
}

template <typename T>
Conv1x1<T> Conv1x1<T>::init(int in_channels, int out_channels, Rng& rng, T negative_slope) {
    Conv1x1<T> a;
    a.spec = ConvSpec{in_channels, out_channels, 1, 1, 0, 1};
    a.weight = kaiming_normal<T>(rng, Shape{out_channels, in_channels, 1, 1}, in_channels,
                                 negative_slope);
    a.bias = Tensor<T>::zeros(Shape{out_channels}, true);
    return a;
}

template <typename T>
void Conv1x1<T>::collect_parameters(std::vector<Tensor<T>>& out) {
    out.push_back(weight);
    out.push_back(bias);
}

template <typename T>
void Conv1x1<T>::collect_arrays(const std::string& prefix, std::vector<NamedArray>& out) const {
    out.push_back(tensor_to_array(prefix + ".weight", weight));
    out.push_back(tensor_to_array(prefix + ".bias", bias));
}

template <typename T>
void Conv1x1<T>::load_arrays(const std::string& prefix,
                             const std::map<std::string, const NamedArray*>& arrays) {
    array_into_tensor(arrays, prefix + ".weight", weight);
    array_into_tensor(arrays, prefix + ".bias", bias);
}

#define EAFPMED_INSTANTIATE_BLOCKS(T)                                                      \
    template struct ConvBnBlock<T>;                                                       \
    template struct Conv1x1<T>;                                                           \
    template NamedArray tensor_to_array<T>(const std::string&, const Tensor<T>&);         \
    template NamedArray vector_to_array<T>(const std::string&, const std::vector<T>&);    \
    template void array_into_tensor<T>(const std::map<std::string, const NamedArray*>&,   \
                                       const std::string&, Tensor<T>&);                   \
    template void array_into_vector<T>(const std::map<std::string, const NamedArray*>&,   \
                                       const std::string&, std::vector<T>&);

EAFPMED_INSTANTIATE_BLOCKS(float)
EAFPMED_INSTANTIATE_BLOCKS(double)

#undef EAFPMED_INSTANTIATE_BLOCKS

}  // namespace eafpmed
