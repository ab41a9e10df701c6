#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "neurogrow/tensor.hpp"

namespace neurogrow {

enum class Activation { None, Relu };

std::string activation_name(Activation a);
Activation activation_from_name(const std::string& name);

struct DenseLayer {
    Tensor weights;  // [C_out x C_in]
    Tensor bias;     // [C_out]
    Activation activation = Activation::Relu;

    std::size_t out_features() const { return weights.extent(0); }
    std::size_t in_features() const { return weights.extent(1); }
};

struct Conv2dLayer {
    Tensor weights;  // [C_out x C_in x kh x kw]
    Tensor bias;     // [C_out]
    std::size_t stride = 1;
    std::size_t pad = 0;
    Activation activation = Activation::Relu;

    std::size_t out_channels() const { return weights.extent(0); }
    std::size_t in_channels() const { return weights.extent(1); }
    std::size_t kh() const { return weights.extent(2); }
    std::size_t kw() const { return weights.extent(3); }
};

/// One growable hidden layer plus the weight-sum snapshot the regularizer's
/// penalty term compares against. The snapshot is refreshed at every growth
/// event.
struct Layer {
    std::variant<DenseLayer, Conv2dLayer> impl;
    std::optional<double> weight_sum_previous;

    bool is_dense() const { return std::holds_alternative<DenseLayer>(impl); }
    std::size_t width() const;   // C_out
    std::size_t fan_in() const;  // C_in (dense) or C_in*kh*kw (conv)
    std::size_t parameter_count() const;
};

/// Ordered hidden layers followed by a linear classifier. Conv layers must
/// precede dense ones; activations are flattened channel-major before the
/// first dense layer.
struct Network {
    std::vector<Layer> hidden;
    DenseLayer classifier;               // activation always None
    std::vector<std::size_t> input_shape;  // [features] or [C x H x W]

    std::size_t parameter_count() const;
    std::size_t class_count() const { return classifier.out_features(); }
};

/// Per-layer intermediates kept by forward for the backward pass.
struct ForwardCache {
    Tensor input;                        // batch as given
    std::vector<Tensor> layer_inputs;    // input to each hidden layer (+ classifier at end)
    std::vector<Tensor> pre_activations; // hidden pre-activation outputs
    std::uint64_t network_stamp = 0;     // guards against stale caches
};

struct Gradients {
    std::vector<Tensor> weight_grads;  // per hidden layer
    std::vector<Tensor> bias_grads;
    Tensor classifier_weight_grad;
    Tensor classifier_bias_grad;
};

/// Structural fingerprint of a network (shapes only); used to detect stale
/// caches and stale growth plans.
std::uint64_t network_stamp(const Network& net);

Tensor forward(const Network& net, const Tensor& x);
Tensor forward(const Network& net, const Tensor& x, ForwardCache& cache);
Gradients backward(const Network& net, const ForwardCache& cache, const Tensor& grad_logits);

struct LossAndGrad {
    double loss;
    Tensor grad_logits;
};

LossAndGrad softmax_cross_entropy(const Tensor& logits, const std::vector<std::size_t>& labels);

/// C_out x fan_in matrix view of a layer's neurons; conv filters are
/// flattened per output channel. Write back with set_neuron_matrix.
Tensor neuron_matrix(const Layer& layer);
void set_neuron_matrix(Layer& layer, const Tensor& m);

/// Spatial output extents (H', W') a conv layer produces for a given input.
std::pair<std::size_t, std::size_t> conv_output_hw(const Conv2dLayer& layer, std::size_t h,
                                                   std::size_t w);

void validate_network(const Network& net);

// Checkpoint I/O: versioned binary header + raw little-endian doubles;
// round-trips bit-exactly.
void save_checkpoint(const Network& net, const std::string& path);
Network load_checkpoint(const std::string& path);

}  // namespace neurogrow
