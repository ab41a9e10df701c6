#include "neurogrow/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include "CLI11.hpp"
#include "json.hpp"
#include "neurogrow/analysis.hpp"
#include "neurogrow/config.hpp"
#include "neurogrow/errors.hpp"
#include "neurogrow/growth.hpp"
#include "neurogrow/trainer.hpp"

namespace neurogrow::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

json resolved_config_from_args(const std::string& config_path,
                               const std::vector<std::string>& overrides) {
    json cfg = load_config_file(config_path);
    for (const auto& o : overrides) apply_override(cfg, o);
    if (const char* env_seed = std::getenv("NEUROGROW_SEED")) {
        try {
            cfg["seed"] = std::stoull(env_seed);
        } catch (const std::exception&) {
            throw ConfigError("NEUROGROW_SEED is not an integer: " + std::string(env_seed));
        }
    }
    return resolve_config(cfg);
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot write " + path);
    os << text;
}

int cmd_train(const std::string& config_path, const std::string& out_dir,
              const std::vector<std::string>& overrides) {
    const json resolved = resolved_config_from_args(config_path, overrides);
    const TrainConfig cfg = parse_train_config(resolved);
    fs::create_directories(out_dir);
    write_text(out_dir + "/config.frozen.json", resolved.dump(2) + "\n");
    RunResult result = run_training(cfg, out_dir);
    std::cout << "epochs=" << result.report.rows.size()
              << " final_params=" << result.net.parameter_count();
    if (!result.report.rows.empty())
        std::cout << " final_test_acc=" << result.report.rows.back().test_acc;
    std::cout << " seconds=" << result.report.wall_seconds << "\n";
    return kExitOk;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& config_path,
             const std::vector<std::string>& overrides) {
    const json resolved = resolved_config_from_args(config_path, overrides);
    const TrainConfig cfg = parse_train_config(resolved);
    Network net = load_checkpoint(checkpoint_path);
    TrainTestSplit data = load_dataset(cfg.dataset);
    const Dataset& ds = data.test.size() > 0 ? data.test : data.train;
    std::cout << "accuracy=" << evaluate(net, ds) << " samples=" << ds.size() << "\n";
    return kExitOk;
}

int cmd_grow(const std::string& checkpoint_in, const std::string& checkpoint_out,
             const std::string& op_name, double fraction, double split_epsilon,
             double random_init_std, double hybrid_split_share, std::uint64_t seed) {
    Network net = load_checkpoint(checkpoint_in);
    GrowthPolicy policy;
    policy.op = growth_operator_from_name(op_name);
    policy.fraction = fraction;
    policy.split_epsilon = split_epsilon;
    policy.random_init_std = random_init_std;
    policy.hybrid_split_share = hybrid_split_share;
    const std::size_t before = net.parameter_count();
    GrowthPlan plan = plan_growth(net, policy);
    GrowthEventRecord record = apply_growth(net, plan, policy, seed);
    save_checkpoint(net, checkpoint_out);
    std::cout << "params_before=" << before << " params_after=" << record.param_count_after
              << " operator=" << growth_operator_name(policy.op) << "\n";
    return kExitOk;
}

int cmd_analyze(const std::string& checkpoint_path, const std::string& out_dir, int layer,
                std::size_t bins, double threshold) {
    Network net = load_checkpoint(checkpoint_path);
    fs::create_directories(out_dir);
    std::vector<std::size_t> layers;
    if (layer > 0) {
        layers.push_back(static_cast<std::size_t>(layer - 1));  // 1-based on the CLI
    } else {
        for (std::size_t li = 0; li < net.hidden.size(); ++li)
            if (net.hidden[li].width() >= 2) layers.push_back(li);
    }
    std::ofstream frac(out_dir + "/near_zero.csv", std::ios::binary);
    if (!frac) throw DataError("cannot write " + out_dir + "/near_zero.csv");
    frac << "layer,threshold,fraction\n";
    for (std::size_t li : layers) {
        SimilarityHistogram hist = similarity_histogram(net, li, bins);
        write_histogram_csv(hist, out_dir + "/histogram_l" + std::to_string(li + 1) + ".csv");
        frac << (li + 1) << "," << threshold << "," << near_zero_fraction(net, li, threshold)
             << "\n";
    }
    std::cout << "layers_analyzed=" << layers.size() << "\n";
    return kExitOk;
}

std::string json_scalar_to_string(const json& v) {
    return v.is_string() ? v.get<std::string>() : v.dump();
}

int cmd_sweep(const std::string& config_path, const std::string& sweep_path,
              const std::string& out_dir, const std::vector<std::string>& overrides) {
    const json sweep = load_config_file(sweep_path);
    for (const auto& [key, value] : sweep.items())
        if (key != "grid" && key != "seeds")
            throw ConfigError("unknown sweep key '" + key + "'");
    if (!sweep.contains("grid") || !sweep.at("grid").is_object() || sweep.at("grid").empty())
        throw ConfigError("sweep spec needs a nonempty 'grid' object");
    std::vector<std::uint64_t> seeds =
        sweep.contains("seeds") ? sweep.at("seeds").get<std::vector<std::uint64_t>>()
                                : std::vector<std::uint64_t>{1};
    if (seeds.empty()) throw ConfigError("sweep 'seeds' must be nonempty");

    // Cross product of the grid, in key order.
    std::vector<std::pair<std::string, std::vector<json>>> axes;
    for (const auto& [key, values] : sweep.at("grid").items()) {
        if (!values.is_array() || values.empty())
            throw ConfigError("sweep grid entry '" + key + "' must be a nonempty array");
        axes.emplace_back(key, std::vector<json>(values.begin(), values.end()));
    }
    std::size_t cells = 1;
    for (const auto& [key, values] : axes) cells *= values.size();

    fs::create_directories(out_dir);
    std::vector<RunSummary> summaries;
    std::vector<std::string> failures;
    for (std::size_t cell = 0; cell < cells; ++cell) {
        std::string label;
        std::vector<std::string> cell_overrides = overrides;
        std::size_t rest = cell;
        for (const auto& [key, values] : axes) {
            const json& v = values[rest % values.size()];
            rest /= values.size();
            if (!label.empty()) label += ",";
            label += key + "=" + json_scalar_to_string(v);
            cell_overrides.push_back(key + "=" + v.dump());
        }

        RunSummary summary;
        summary.label = label;
        for (std::uint64_t seed : seeds) {
            const std::string cell_dir =
                out_dir + "/cell" + std::to_string(cell) + "_seed" + std::to_string(seed);
            try {
                json resolved = resolved_config_from_args(config_path, cell_overrides);
                resolved["seed"] = seed;
                const TrainConfig cfg = parse_train_config(resolved);
                summary.n_iters = cfg.reg.n_iters;
                summary.lambda = cfg.reg.lambda;
                fs::create_directories(cell_dir);
                write_text(cell_dir + "/config.frozen.json", resolved.dump(2) + "\n");
                RunResult r = run_training(cfg, cell_dir);
                summary.final_test_accuracies.push_back(
                    r.report.rows.empty() ? 0.0 : r.report.rows.back().test_acc);
                summary.training_seconds.push_back(r.report.wall_seconds);
            } catch (const std::exception& e) {
                // A failed cell is recorded; the sweep continues.
                failures.push_back(label + " seed=" + std::to_string(seed) + ": " + e.what());
                std::cerr << "sweep cell failed: " << failures.back() << "\n";
            }
        }
        if (!summary.final_test_accuracies.empty()) summaries.push_back(std::move(summary));
    }
    if (summaries.empty()) throw UsageError("every sweep cell failed");

    const auto rows = compare_runs(summaries);
    write_comparison_csv(rows, out_dir + "/comparison.csv");
    if (!failures.empty()) {
        std::string text;
        for (const auto& f : failures) text += f + "\n";
        write_text(out_dir + "/failures.txt", text);
    }
    for (const auto& row : rows)
        if (row.best)
            std::cout << "best=" << row.label << " mean_test_acc=" << row.mean_accuracy << "\n";
    return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args) {
    CLI::App app{"Width-growing neural network trainer with a neuron-similarity regularizer"};
    app.require_subcommand(1);

    std::string config_path, out_dir, checkpoint, checkpoint_out, sweep_path;
    std::vector<std::string> overrides;
    std::string op_name = "hybrid";
    double fraction = 0.35, split_epsilon = 0.01, random_init_std = 1.0, hybrid_split_share = 0.5;
    std::uint64_t grow_seed = 1;
    int layer = 0;
    std::size_t bins = 40;
    double threshold = 0.5;

    auto* train = app.add_subcommand("train", "Train a network from a JSON config");
    train->add_option("--config", config_path, "JSON config path")->required();
    train->add_option("--out", out_dir, "Output directory")->required();
    train->add_option("--set", overrides, "Override, e.g. reg.n_iters=10 (repeatable)");

    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on the configured dataset");
    eval->add_option("--checkpoint", checkpoint, "Checkpoint path")->required();
    eval->add_option("--config", config_path, "JSON config path (dataset section)")->required();
    eval->add_option("--set", overrides, "Config override (repeatable)");

    auto* grow = app.add_subcommand("grow", "Grow a checkpoint offline");
    grow->add_option("--checkpoint", checkpoint, "Input checkpoint")->required();
    grow->add_option("--out-checkpoint", checkpoint_out, "Grown checkpoint path")->required();
    grow->add_option("--operator", op_name, "random | split | hybrid");
    grow->add_option("--fraction", fraction, "Target relative parameter increase");
    grow->add_option("--split-epsilon", split_epsilon, "Split perturbation magnitude");
    grow->add_option("--random-init-std", random_init_std, "Scale for new random neurons");
    grow->add_option("--hybrid-split-share", hybrid_split_share, "Split share for hybrid");
    grow->add_option("--seed", grow_seed, "Growth RNG seed");

    auto* analyze = app.add_subcommand("analyze", "Similarity histograms for a checkpoint");
    analyze->add_option("--checkpoint", checkpoint, "Checkpoint path")->required();
    analyze->add_option("--out", out_dir, "Output directory")->required();
    analyze->add_option("--layer", layer, "1-based layer index (default: all eligible)");
    analyze->add_option("--bins", bins, "Histogram bin count");
    analyze->add_option("--threshold", threshold, "Near-zero |cos| threshold");

    auto* sweep = app.add_subcommand("sweep", "Run a parameter grid and compare runs");
    sweep->add_option("--config", config_path, "Base JSON config")->required();
    sweep->add_option("--sweep", sweep_path, "Sweep spec JSON (grid + seeds)")->required();
    sweep->add_option("--out", out_dir, "Output directory")->required();
    sweep->add_option("--set", overrides, "Config override applied to every cell (repeatable)");

    std::vector<std::string> argv = args;
    try {
        std::vector<const char*> cargv;
        cargv.push_back("neurogrow");
        for (const auto& a : argv) cargv.push_back(a.c_str());
        app.parse(static_cast<int>(cargv.size()), cargv.data());
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (train->parsed()) return cmd_train(config_path, out_dir, overrides);
        if (eval->parsed()) return cmd_eval(checkpoint, config_path, overrides);
        if (grow->parsed())
            return cmd_grow(checkpoint, checkpoint_out, op_name, fraction, split_epsilon,
                            random_init_std, hybrid_split_share, grow_seed);
        if (analyze->parsed()) return cmd_analyze(checkpoint, out_dir, layer, bins, threshold);
        if (sweep->parsed()) return cmd_sweep(config_path, sweep_path, out_dir, overrides);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitConfig;
}

}  // namespace neurogrow::cli
