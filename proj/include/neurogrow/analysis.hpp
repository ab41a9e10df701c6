#pragma once

#include <string>
#include <vector>

#include "neurogrow/network.hpp"
#include "neurogrow/similarity.hpp"

namespace neurogrow {

/// Pairwise-cosine histogram over unordered neuron pairs of one layer.
struct SimilarityHistogram {
    std::size_t layer_index = 0;
    std::vector<double> bin_edges;      // size bins+1, covers [-1, 1]
    std::vector<std::size_t> counts;    // size bins
    std::size_t total_pairs = 0;        // n*(n-1)/2
};

/// Boundary values go to the lower bin except at the final edge.
SimilarityHistogram similarity_histogram(const Network& net, std::size_t layer_index,
                                         std::size_t bins);

/// Fraction of unordered pairs with |cos| <= threshold, computed from raw
/// pair values rather than bins.
double near_zero_fraction(const Network& net, std::size_t layer_index, double threshold);

void write_histogram_csv(const SimilarityHistogram& hist, const std::string& path);

/// One sweep/run result used by the comparison table.
struct RunSummary {
    std::string label;
    std::vector<double> final_test_accuracies;  // one per seed
    std::vector<double> training_seconds;
    std::size_t n_iters = 0;
    double lambda = 0.0;
};

struct ComparisonRow {
    std::string label;
    double mean_accuracy = 0.0;
    double std_accuracy = 0.0;
    double mean_seconds = 0.0;
    std::size_t n_iters = 0;
    double lambda = 0.0;
    bool best = false;
};

/// Aggregate per-cell summaries; the argmax-accuracy row is flagged best,
/// ties broken by smaller N then label.
std::vector<ComparisonRow> compare_runs(const std::vector<RunSummary>& summaries);

void write_comparison_csv(const std::vector<ComparisonRow>& rows, const std::string& path);

}  // namespace neurogrow
