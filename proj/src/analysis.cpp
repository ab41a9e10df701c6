#include "neurogrow/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "neurogrow/errors.hpp"

namespace neurogrow {

namespace {

std::vector<double> pair_values(const Network& net, std::size_t layer_index) {
    if (layer_index >= net.hidden.size())
        throw UsageError("invalid layer index " + std::to_string(layer_index));
    const Tensor nm = neuron_matrix(net.hidden[layer_index]);
    const std::size_t n = nm.extent(0);
    if (n < 2)
        throw UsageError("layer " + std::to_string(layer_index) +
                         " has fewer than 2 neurons; no similarity pairs");
    SimilarityMap map = similarity_map(nm);
    std::vector<double> values;
    values.reserve(n * (n - 1) / 2);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) values.push_back(map.values.at(i, j));
    return values;
}

}  // namespace

SimilarityHistogram similarity_histogram(const Network& net, std::size_t layer_index,
                                         std::size_t bins) {
    if (bins < 1) throw UsageError("histogram needs at least one bin");
    const auto values = pair_values(net, layer_index);

    SimilarityHistogram hist;
    hist.layer_index = layer_index;
    hist.total_pairs = values.size();
    hist.counts.assign(bins, 0);
    for (std::size_t b = 0; b <= bins; ++b)
        hist.bin_edges.push_back(-1.0 + 2.0 * static_cast<double>(b) / static_cast<double>(bins));

    for (double v : values) {
        // Boundary values belong to the lower bin, except the final edge.
        std::size_t b = 0;
        while (b + 1 < bins && v > hist.bin_edges[b + 1]) ++b;
        ++hist.counts[b];
    }
    return hist;
}

double near_zero_fraction(const Network& net, std::size_t layer_index, double threshold) {
    if (threshold <= 0.0 || threshold > 1.0) throw UsageError("threshold must be in (0, 1]");
    const auto values = pair_values(net, layer_index);
    std::size_t count = 0;
    for (double v : values)
        if (std::abs(v) <= threshold) ++count;
    return static_cast<double>(count) / static_cast<double>(values.size());
}

void write_histogram_csv(const SimilarityHistogram& hist, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw DataError("cannot write histogram CSV: " + path);
    os << "bin_lo,bin_hi,count\n";
    for (std::size_t b = 0; b < hist.counts.size(); ++b)
        os << hist.bin_edges[b] << "," << hist.bin_edges[b + 1] << "," << hist.counts[b] << "\n";
}

std::vector<ComparisonRow> compare_runs(const std::vector<RunSummary>& summaries) {
    if (summaries.empty()) throw UsageError("compare_runs needs at least one run");
    std::vector<ComparisonRow> rows;
    for (const auto& s : summaries) {
        if (s.final_test_accuracies.empty())
            throw UsageError("run '" + s.label + "' has no results");
        ComparisonRow row;
        row.label = s.label;
        row.n_iters = s.n_iters;
        row.lambda = s.lambda;
        const double n = static_cast<double>(s.final_test_accuracies.size());
        for (double a : s.final_test_accuracies) row.mean_accuracy += a;
        row.mean_accuracy /= n;
        for (double a : s.final_test_accuracies) {
            const double d = a - row.mean_accuracy;
            row.std_accuracy += d * d;
        }
        row.std_accuracy = std::sqrt(row.std_accuracy / n);
        for (double t : s.training_seconds) row.mean_seconds += t;
        if (!s.training_seconds.empty())
            row.mean_seconds /= static_cast<double>(s.training_seconds.size());
        rows.push_back(std::move(row));
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& a = rows[i];
        const auto& b = rows[best];
        if (a.mean_accuracy > b.mean_accuracy ||
            (a.mean_accuracy == b.mean_accuracy &&
             (a.n_iters < b.n_iters || (a.n_iters == b.n_iters && a.label < b.label))))
            best = i;
    }
    rows[best].best = true;
    return rows;
}

void write_comparison_csv(const std::vector<ComparisonRow>& rows, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw DataError("cannot write comparison CSV: " + path);
    os << "label,mean_test_accuracy,std_test_accuracy,mean_training_seconds,n_iters,lambda,"
          "best\n";
    for (const auto& r : rows)
        os << r.label << "," << r.mean_accuracy << "," << r.std_accuracy << "," << r.mean_seconds
           << "," << r.n_iters << "," << r.lambda << "," << (r.best ? 1 : 0) << "\n";
}

}  // namespace neurogrow
