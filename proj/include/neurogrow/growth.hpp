#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "neurogrow/network.hpp"

namespace neurogrow {

enum class GrowthOperator { Random, Split, Hybrid };

std::string growth_operator_name(GrowthOperator op);
GrowthOperator growth_operator_from_name(const std::string& name);

struct GrowthPolicy {
    GrowthOperator op = GrowthOperator::Hybrid;
    double fraction = 0.35;         // target relative parameter increase per event
    double split_epsilon = 0.01;    // perturbation magnitude for split duplicates
    double random_init_std = 1.0;   // multiplier on the He scale for new random rows
    double hybrid_split_share = 0.5;

    void validate() const;
};

struct LayerGrowth {
    std::size_t layer_index = 0;
    std::size_t neurons_to_add = 0;
    std::size_t width_after = 0;
};

struct GrowthPlan {
    std::vector<LayerGrowth> layers;
    std::size_t predicted_param_count = 0;
    std::uint64_t source_stamp = 0;  // stamp of the net the plan was made for
    bool is_noop() const;
};

struct GrowthEventRecord {
    std::size_t param_count_before = 0;
    std::size_t param_count_after = 0;
    GrowthOperator op = GrowthOperator::Hybrid;
    std::uint64_t seed = 0;
    struct PerLayer {
        std::size_t layer_index;
        std::size_t width_before;
        std::size_t width_after;
        std::size_t neurons_added;
    };
    std::vector<PerLayer> layers;
};

using Rng = std::mt19937_64;

/// Scale every growable hidden width by a common factor r >= 1 (bisection)
/// so the rounded integer widths bring the total parameter count as close to
/// (1 + fraction) * current as rounding permits.
GrowthPlan plan_growth(const Network& net, const GrowthPolicy& policy);

/// Append k random He-initialized neurons to the layer; successor gains
/// matching random input weights. Not function-preserving.
void grow_random(Network& net, std::size_t layer_index, std::size_t k, const GrowthPolicy& policy,
                 Rng& rng);

/// Duplicate the k largest-norm neurons (ties to the lower index); parent and
/// copy get -/+ split_epsilon perturbations and the parent's outgoing weights
/// are halved between them. Exactly function-preserving at split_epsilon = 0.
void grow_split(Network& net, std::size_t layer_index, std::size_t k, const GrowthPolicy& policy,
                Rng& rng);

/// round(k * hybrid_split_share) neurons via split, the remainder via random;
/// split first.
void grow_hybrid(Network& net, std::size_t layer_index, std::size_t k, const GrowthPolicy& policy,
                 Rng& rng);

/// Execute the plan layer by layer and refresh each grown layer's
/// weight-sum snapshot.
GrowthEventRecord apply_growth(Network& net, const GrowthPlan& plan, const GrowthPolicy& policy,
                               std::uint64_t seed);

}  // namespace neurogrow
