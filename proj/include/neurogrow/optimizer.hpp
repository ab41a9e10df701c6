#pragma once

#include <cstddef>
#include <vector>

#include "neurogrow/network.hpp"

namespace neurogrow {

/// SGD with classic momentum (v <- m*v + g; p <- p - lr*v) and a cosine
/// learning-rate schedule over total_steps.
struct SgdState {
    double momentum = 0.9;
    double base_lr = 0.1;
    std::size_t total_steps = 1;
    std::vector<Tensor> weight_velocity;  // per hidden layer
    std::vector<Tensor> bias_velocity;
    Tensor classifier_weight_velocity;
    Tensor classifier_bias_velocity;
};

SgdState make_sgd_state(const Network& net, double base_lr, double momentum,
                        std::size_t total_steps);

/// base_lr * 0.5 * (1 + cos(pi * step / T)); steps past T clamp to 0.
double lr_at(std::size_t step, const SgdState& state);

void sgd_step(Network& net, const Gradients& grads, SgdState& state, std::size_t step);

/// Pad velocity buffers with zeros to the grown network's shapes; existing
/// entries keep their positions. Call immediately after apply_growth.
void resize_state(SgdState& state, const Network& net);

}  // namespace neurogrow
