#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "neurogrow/tensor.hpp"

namespace neurogrow {

/// Per-feature z-normalization statistics; computed on a training split and
/// reused verbatim for the test split.
struct NormStats {
    std::vector<double> mean;
    std::vector<double> stddev;  // 0 is guarded: the feature maps to 0
};

struct Dataset {
    Tensor inputs;  // [N x features] or [N x C x H x W]
    std::vector<std::size_t> labels;
    std::size_t class_count = 0;
    NormStats normalization;  // empty for image data ([0,1] scaled instead)

    std::size_t size() const { return inputs.rank() == 0 ? 0 : inputs.extent(0); }
    std::vector<std::size_t> sample_shape() const;
};

/// IDX (big-endian) image + label pair; pixels scaled to [0, 1].
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

/// Numeric CSV with a header row. Features are z-normalized; labels get dense
/// 0-based ids in first-appearance order. The overload with stats reuses a
/// training split's normalization.
Dataset load_csv(const std::string& path, const std::string& label_column);
Dataset load_csv(const std::string& path, const std::string& label_column,
                 const NormStats& stats);

NormStats compute_norm_stats(const Tensor& features);
void apply_normalization(Tensor& features, const NormStats& stats);

/// Two interleaved 2-D spirals (r = theta parametric form), 2 classes,
/// deterministic under seed.
Dataset make_two_spirals(std::size_t n_per_class, double noise_std, std::uint64_t seed);

/// Deterministic split into train/test by a seeded permutation.
struct TrainTestSplit {
    Dataset train;
    Dataset test;
};
TrainTestSplit split_dataset(const Dataset& ds, double test_fraction, std::uint64_t seed);

/// Parse a CSV, split it, then z-normalize both splits with the training
/// split's statistics only (leakage guard).
TrainTestSplit load_csv_split(const std::string& path, const std::string& label_column,
                              double test_fraction, std::uint64_t seed);

struct Batch {
    Tensor inputs;
    std::vector<std::size_t> labels;
};

/// Seeded per-epoch shuffle; the final short batch is included.
class BatchIterator {
public:
    BatchIterator(const Dataset& ds, std::size_t batch_size, std::uint64_t epoch_seed);
    bool next(Batch& out);
    std::size_t batch_count() const;

private:
    const Dataset& ds_;
    std::size_t batch_size_;
    std::vector<std::size_t> order_;
    std::size_t cursor_ = 0;
};

}  // namespace neurogrow
