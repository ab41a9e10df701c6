#pragma once

#include <cstddef>
#include <functional>
#include <string>

#include "neurogrow/tensor.hpp"

namespace neurogrow {

/// n x n cosine-similarity map between a layer's neuron weight rows.
/// Symmetric, entries in [-1, 1], unit diagonal for nonzero rows; zero rows
/// have zero similarity against everything.
struct SimilarityMap {
    Tensor values;
    std::size_t n() const { return values.extent(0); }
};

/// Regularizer configuration: the similarity-mean term, the weight-sum
/// stability penalty, and the post-growth iteration schedule. The two enable
/// flags realize the ablation grid.
struct RegConfig {
    double lambda = 0.1;
    std::size_t n_iters = 15;
    double step_size = 1e-2;
    bool enable_sim_loss = true;
    bool enable_weight_penalty = true;
    // When set, the penalty is the raw (signed) log-ratio as printed rather
    // than the symmetric absolute-deviation form.
    bool literal_eq5 = false;
    double epsilon = 1e-12;

    void validate() const;
};

/// Layer weight sum captured immediately after a growth event; reference
/// point for the weight-change penalty.
struct LayerSnapshot {
    double weight_sum_previous = 0.0;
};

struct ScalarAndGrad {
    double value = 0.0;
    Tensor grad;
};

SimilarityMap similarity_map(const Tensor& neuron_matrix);

/// Mean absolute off-diagonal similarity; 0 for n == 1 (no pairs).
double mean_offdiag_abs(const SimilarityMap& map);

/// mu_sim and its analytic gradient w.r.t. the raw (unnormalized) weight
/// rows. Handles the row-normalization Jacobian; the |.| subgradient at a
/// zero similarity is taken as 0, and zero rows receive zero gradient.
ScalarAndGrad similarity_loss_grad(const Tensor& neuron_matrix);

/// Weight-sum stability penalty. Default form |log(|s_cur| / (|s_prev| + eps))|
/// penalizes deviation symmetrically; literal_eq5 keeps the signed log-ratio.
/// Degenerate snapshots (|s_prev| <= eps) disable the penalty; the flag is
/// surfaced so callers can log it.
struct PenaltyResult {
    double value = 0.0;
    Tensor grad;
    bool disabled_degenerate_snapshot = false;
};

PenaltyResult weight_change_penalty(const Tensor& w_current, const LayerSnapshot& snap,
                                    const RegConfig& cfg);

/// value = [sim flag] * mu_sim + [penalty flag] * lambda * penalty, with the
/// matching gradient sum.
ScalarAndGrad combined_reg_loss(const Tensor& w, const LayerSnapshot& snap, const RegConfig& cfg);

/// One descent step on combined_reg_loss: a gradient step on mu_sim plus a
/// uniform weight-sum shift toward the snapshot target, clamped so it never
/// overshoots the penalty's kink (literal_eq5 falls back to a plain gradient
/// step). Returns the new weights and the loss value before the step.
struct RegStepResult {
    Tensor weights;
    double loss_before = 0.0;
};

RegStepResult reg_step(const Tensor& w, const LayerSnapshot& snap, const RegConfig& cfg);

}  // namespace neurogrow
