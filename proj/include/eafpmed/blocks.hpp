#pragma once

#include <map>
#include <string>
#include <vector>

#include "eafpmed/checkpoint.hpp"
#include "eafpmed/ops.hpp"
#include "eafpmed/rng.hpp"

namespace eafpmed {

// conv -> batch norm -> leaky relu, the building unit of every extractor and
// backbone stage.
template <typename T>
struct ConvBnBlock {
    ConvSpec spec;
    Tensor<T> weight;  // (O,I,K,K)
    Tensor<T> bias;    // (O)
    BnState<T> bn;
    T negative_slope = T(0.01);

    static ConvBnBlock init(const ConvSpec& spec, Rng& rng, T negative_slope);

    Tensor<T> forward(const Tensor<T>& x) {
        return leaky_relu(batch_norm2d(conv2d(x, weight, bias, spec), bn), negative_slope);
    }

    void set_mode(BnMode mode) { bn.mode = mode; }
    void collect_parameters(std::vector<Tensor<T>>& out);
    void collect_arrays(const std::string& prefix, std::vector<NamedArray>& out) const;
    void load_arrays(const std::string& prefix, const std::map<std::string, const NamedArray*>& arrays);
};

// Bias-carrying 1x1 convolution (a feature adaptor / channel projector).
template <typename T>
struct Conv1x1 {
    ConvSpec spec;
    Tensor<T> weight;  // (O,I,1,1)
    Tensor<T> bias;    // (O)

    static Conv1x1 init(int in_channels, int out_channels, Rng& rng, T negative_slope);

    Tensor<T> forward(const Tensor<T>& x) { return conv2d(x, weight, bias, spec); }

    void collect_parameters(std::vector<Tensor<T>>& out);
    void collect_arrays(const std::string& prefix, std::vector<NamedArray>& out) const;
    void load_arrays(const std::string& prefix, const std::map<std::string, const NamedArray*>& arrays);
};

// Checkpoint array helpers shared by anything with named tensors.
template <typename T>
NamedArray tensor_to_array(const std::string& name, const Tensor<T>& t);
template <typename T>
NamedArray vector_to_array(const std::string& name, const std::vector<T>& v);
template <typename T>
void array_into_tensor(const std::map<std::string, const NamedArray*>& arrays,
                       const std::string& name, Tensor<T>& t);
template <typename T>
void array_into_vector(const std::map<std::string, const NamedArray*>& arrays,
                       const std::string& name, std::vector<T>& v);
std::map<std::string, const NamedArray*> index_arrays(const std::vector<NamedArray>& arrays);

extern template struct ConvBnBlock<float>;
extern template struct ConvBnBlock<double>;
extern template struct Conv1x1<float>;
extern template struct Conv1x1<double>;

}  // namespace eafpmed
