#include "neurogrow/optimizer.hpp"

#include <cmath>
#include <numbers>

#include "neurogrow/errors.hpp"

namespace neurogrow {

namespace {

const Tensor& layer_weights(const Layer& l) {
    return l.is_dense() ? std::get<DenseLayer>(l.impl).weights
                        : std::get<Conv2dLayer>(l.impl).weights;
}

const Tensor& layer_bias(const Layer& l) {
    return l.is_dense() ? std::get<DenseLayer>(l.impl).bias : std::get<Conv2dLayer>(l.impl).bias;
}

Tensor& layer_weights_mut(Layer& l) {
    return l.is_dense() ? std::get<DenseLayer>(l.impl).weights
                        : std::get<Conv2dLayer>(l.impl).weights;
}

Tensor& layer_bias_mut(Layer& l) {
    return l.is_dense() ? std::get<DenseLayer>(l.impl).bias : std::get<Conv2dLayer>(l.impl).bias;
}

void momentum_update(Tensor& param, Tensor& velocity, const Tensor& grad, double momentum,
                     double lr) {
    if (!param.same_shape(grad) || !param.same_shape(velocity))
        throw UsageError("sgd_step shape mismatch between parameters, velocity, and gradient");
    for (std::size_t i = 0; i < param.size(); ++i) {
        velocity[i] = momentum * velocity[i] + grad[i];
        param[i] -= lr * velocity[i];
    }
}

/// Zero tensor of `new_shape` with `old`'s entries copied at their original
/// index tuples. Every new extent must be >= the old one.
Tensor zero_pad_keep_indices(const Tensor& old, const std::vector<std::size_t>& new_shape) {
    if (old.shape() == new_shape) return old;
    if (old.rank() != new_shape.size())
        throw UsageError("resize_state: rank changed during growth");
    Tensor out(new_shape);
    // Iterate old index tuples; supports the ranks parameters use (1, 2, 4).
    std::vector<std::size_t> idx(old.rank(), 0);
    for (std::size_t flat = 0; flat < old.size(); ++flat) {
        std::size_t new_flat = 0;
        for (std::size_t d = 0; d < old.rank(); ++d) new_flat = new_flat * new_shape[d] + idx[d];
        out[new_flat] = old[flat];
        for (std::size_t d = old.rank(); d-- > 0;) {
            if (++idx[d] < old.extent(d)) break;
            idx[d] = 0;
        }
    }
    return out;
}

}  // namespace

SgdState make_sgd_state(const Network& net, double base_lr, double momentum,
                        std::size_t total_steps) {
    if (total_steps < 1) throw ConfigError("optimizer total_steps must be >= 1");
    SgdState state;
    state.base_lr = base_lr;
    state.momentum = momentum;
    state.total_steps = total_steps;
    for (const auto& l : net.hidden) {
        state.weight_velocity.emplace_back(layer_weights(l).shape());
        state.bias_velocity.emplace_back(layer_bias(l).shape());
    }
    state.classifier_weight_velocity = Tensor(net.classifier.weights.shape());
    state.classifier_bias_velocity = Tensor(net.classifier.bias.shape());
    return state;
}

double lr_at(std::size_t step, const SgdState& state) {
    if (step >= state.total_steps) return 0.0;
    return state.base_lr * 0.5 *
           (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) /
                           static_cast<double>(state.total_steps)));
}

void sgd_step(Network& net, const Gradients& grads, SgdState& state, std::size_t step) {
    if (grads.weight_grads.size() != net.hidden.size())
        throw UsageError("sgd_step gradient count does not match layer count");
    const double lr = lr_at(step, state);
    for (std::size_t li = 0; li < net.hidden.size(); ++li) {
        momentum_update(layer_weights_mut(net.hidden[li]), state.weight_velocity[li],
                        grads.weight_grads[li], state.momentum, lr);
        momentum_update(layer_bias_mut(net.hidden[li]), state.bias_velocity[li],
                        grads.bias_grads[li], state.momentum, lr);
    }
    momentum_update(net.classifier.weights, state.classifier_weight_velocity,
                    grads.classifier_weight_grad, state.momentum, lr);
    momentum_update(net.classifier.bias, state.classifier_bias_velocity,
                    grads.classifier_bias_grad, state.momentum, lr);
}

void resize_state(SgdState& state, const Network& net) {
    if (state.weight_velocity.size() != net.hidden.size())
        throw UsageError("resize_state: layer count changed");
    for (std::size_t li = 0; li < net.hidden.size(); ++li) {
        state.weight_velocity[li] =
            zero_pad_keep_indices(state.weight_velocity[li], layer_weights(net.hidden[li]).shape());
        state.bias_velocity[li] =
            zero_pad_keep_indices(state.bias_velocity[li], layer_bias(net.hidden[li]).shape());
    }
    state.classifier_weight_velocity =
        zero_pad_keep_indices(state.classifier_weight_velocity, net.classifier.weights.shape());
    state.classifier_bias_velocity =
        zero_pad_keep_indices(state.classifier_bias_velocity, net.classifier.bias.shape());
}

}  // namespace neurogrow
