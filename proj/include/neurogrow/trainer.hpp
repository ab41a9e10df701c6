#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "neurogrow/data.hpp"
#include "neurogrow/growth.hpp"
#include "neurogrow/network.hpp"
#include "neurogrow/optimizer.hpp"
#include "neurogrow/similarity.hpp"

namespace neurogrow {

struct OptimizerConfig {
    double base_lr = 0.1;
    double momentum = 0.9;
    bool restart_schedule_on_growth = false;
};

struct GrowthConfig {
    bool enabled = true;
    std::size_t every_epochs = 20;
    GrowthPolicy policy;
};

struct DatasetConfig {
    std::string type;  // "two_spirals" | "idx" | "csv"
    // two_spirals
    std::size_t n_per_class = 500;
    double noise_std = 0.2;
    std::uint64_t data_seed = 7;
    // idx
    std::string images_path, labels_path, test_images_path, test_labels_path;
    // csv
    std::string csv_path, label_column;
    // shared
    double test_fraction = 0.2;
};

struct ArchitectureConfig {
    std::string type = "mlp";  // "mlp" | "conv"
    std::vector<std::size_t> hidden_widths;  // mlp dense widths
    struct ConvSpec {
        std::size_t out_channels, kernel, stride, pad;
    };
    std::vector<ConvSpec> conv_layers;  // conv type: conv stack, then classifier
};

struct TrainConfig {
    std::uint64_t seed = 1;
    std::size_t epochs = 100;
    std::size_t batch_size = 128;
    DatasetConfig dataset;
    ArchitectureConfig architecture;
    OptimizerConfig optimizer;
    GrowthConfig growth;
    RegConfig reg;
    bool reg_include_task_loss = false;
    // Empty means all growable hidden layers; classifier is never included.
    std::optional<std::vector<std::size_t>> regularized_layers;

    void validate() const;
};

struct EpochRow {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double train_acc = 0.0;
    double test_acc = 0.0;
    std::size_t param_count = 0;
    double lr = 0.0;
    std::vector<double> mu_sim;  // one per hidden layer
};

struct GrowthEvent {
    std::size_t epoch = 0;
    GrowthEventRecord record;
};

struct RegTraceEntry {
    std::size_t layer_index = 0;
    std::size_t iteration = 0;
    double mu_sim = 0.0;
    double penalty = 0.0;
    double combined = 0.0;
};

struct RunReport {
    std::vector<EpochRow> rows;
    std::vector<GrowthEvent> events;
    std::vector<RegTraceEntry> reg_trace;
    double wall_seconds = 0.0;
    std::string checkpoint_path;
};

struct RunResult {
    RunReport report;
    Network net;
};

/// Build a seeded He-initialized network for the configured architecture and
/// dataset sample shape.
Network build_network(const ArchitectureConfig& arch,
                      const std::vector<std::size_t>& sample_shape, std::size_t class_count,
                      std::uint64_t seed);

/// Load or synthesize the configured dataset and split it.
TrainTestSplit load_dataset(const DatasetConfig& cfg);

/// N iterations of reg_step on each selected layer; snapshots must be fresh
/// from the growth event. Returns the per-iteration trace.
std::vector<RegTraceEntry> post_growth_regularize(Network& net, const RegConfig& reg,
                                                  const std::vector<std::size_t>& layers);

double evaluate(const Network& net, const Dataset& ds);

/// Full training loop: per-epoch task training, growth at epoch boundaries,
/// post-growth regularization, metrics. When out_dir is nonempty, writes
/// metrics.csv, events.csv, and checkpoint.ngck there.
RunResult run_training(const TrainConfig& cfg, const std::string& out_dir = "");

void write_metrics_csv(const RunReport& report, const std::string& path);
void write_events_csv(const RunReport& report, const std::string& path);

}  // namespace neurogrow
