#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "json.hpp"
#include "neurogrow/analysis.hpp"
#include "neurogrow/cli.hpp"
#include "neurogrow/network.hpp"

using namespace neurogrow;
namespace fs = std::filesystem;

namespace {

struct CliOutput {
    int code = 0;
    std::string out, err;
};

// Run the CLI with captured stdout/stderr so assertions can inspect messages.
CliOutput run_cli(const std::vector<std::string>& args) {
    std::stringstream out, err;
    std::streambuf* old_out = std::cout.rdbuf(out.rdbuf());
    std::streambuf* old_err = std::cerr.rdbuf(err.rdbuf());
    CliOutput r;
    r.code = cli::run(args);
    std::cout.rdbuf(old_out);
    std::cerr.rdbuf(old_err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    os << text;
}

std::string read_text(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

const char* kMinimalConfig = R"({
  "seed": 3,
  "epochs": 2,
  "batch_size": 16,
  "dataset": {"type": "two_spirals", "n_per_class": 30, "noise_std": 0.1,
              "seed": 5, "test_fraction": 0.25},
  "architecture": {"type": "mlp", "hidden": [8]},
  "growth": {"enabled": false},
  "reg": {"enable_sim_loss": false, "enable_weight_penalty": false}
})";

}  // namespace

TEST_CASE("train writes four artifacts and exits 0") {
    TempDir dir("tmp_cli_train");
    write_text(dir.path / "config.json", kMinimalConfig);
    CliOutput r = run_cli({"train", "--config", (dir.path / "config.json").string(), "--out",
                           (dir.path / "run").string()});
    CHECK(r.code == cli::kExitOk);
    CHECK(fs::exists(dir.path / "run" / "config.frozen.json"));
    CHECK(fs::exists(dir.path / "run" / "metrics.csv"));
    CHECK(fs::exists(dir.path / "run" / "events.csv"));
    CHECK(fs::exists(dir.path / "run" / "checkpoint.ngck"));
    CHECK(r.out.find("epochs=2") != std::string::npos);
}

TEST_CASE("unknown config key exits 2 and names the key") {
    TempDir dir("tmp_cli_badkey");
    nlohmann::json cfg = nlohmann::json::parse(kMinimalConfig);
    cfg["reg"]["n_itres"] = 10;  // deliberate typo
    write_text(dir.path / "config.json", cfg.dump());
    CliOutput r = run_cli({"train", "--config", (dir.path / "config.json").string(), "--out",
                           (dir.path / "run").string()});
    CHECK(r.code == cli::kExitConfig);
    CHECK(r.err.find("n_itres") != std::string::npos);
}

TEST_CASE("--set override lands in the frozen config") {
    TempDir dir("tmp_cli_override");
    write_text(dir.path / "config.json", kMinimalConfig);
    CliOutput r = run_cli({"train", "--config", (dir.path / "config.json").string(), "--out",
                           (dir.path / "run").string(), "--set", "reg.n_iters=10", "--set",
                           "epochs=1"});
    CHECK(r.code == cli::kExitOk);
    nlohmann::json frozen =
        nlohmann::json::parse(read_text(dir.path / "run" / "config.frozen.json"));
    CHECK(frozen["reg"]["n_iters"] == 10);
    CHECK(frozen["epochs"] == 1);
    // The input config itself is untouched.
    CHECK(read_text(dir.path / "config.json") == kMinimalConfig);
}

TEST_CASE("NEUROGROW_SEED overrides the config seed") {
    TempDir dir("tmp_cli_envseed");
    write_text(dir.path / "config.json", kMinimalConfig);
    setenv("NEUROGROW_SEED", "99", 1);
    CliOutput r = run_cli({"train", "--config", (dir.path / "config.json").string(), "--out",
                           (dir.path / "run").string()});
    unsetenv("NEUROGROW_SEED");
    CHECK(r.code == cli::kExitOk);
    nlohmann::json frozen =
        nlohmann::json::parse(read_text(dir.path / "run" / "config.frozen.json"));
    CHECK(frozen["seed"] == 99);

    setenv("NEUROGROW_SEED", "banana", 1);
    r = run_cli({"train", "--config", (dir.path / "config.json").string(), "--out",
                 (dir.path / "run2").string()});
    unsetenv("NEUROGROW_SEED");
    CHECK(r.code == cli::kExitConfig);
}

TEST_CASE("eval reports accuracy for a trained checkpoint") {
    TempDir dir("tmp_cli_eval");
    write_text(dir.path / "config.json", kMinimalConfig);
    REQUIRE(run_cli({"train", "--config", (dir.path / "config.json").string(), "--out",
                     (dir.path / "run").string()})
                .code == cli::kExitOk);
    CliOutput r = run_cli({"eval", "--checkpoint", (dir.path / "run" / "checkpoint.ngck").string(),
                           "--config", (dir.path / "config.json").string()});
    CHECK(r.code == cli::kExitOk);
    CHECK(r.out.find("accuracy=") != std::string::npos);

    // Missing checkpoint is a data error.
    r = run_cli({"eval", "--checkpoint", (dir.path / "nope.ngck").string(), "--config",
                 (dir.path / "config.json").string()});
    CHECK(r.code == cli::kExitData);
}

TEST_CASE("grow produces a larger checkpoint without touching the input") {
    TempDir dir("tmp_cli_grow");
    write_text(dir.path / "config.json", kMinimalConfig);
    REQUIRE(run_cli({"train", "--config", (dir.path / "config.json").string(), "--out",
                     (dir.path / "run").string()})
                .code == cli::kExitOk);
    const fs::path in = dir.path / "run" / "checkpoint.ngck";
    const std::string before_bytes = read_text(in);
    const std::size_t before_params = load_checkpoint(in.string()).parameter_count();

    CliOutput r = run_cli({"grow", "--checkpoint", in.string(), "--out-checkpoint",
                           (dir.path / "grown.ngck").string(), "--operator", "hybrid",
                           "--fraction", "0.5", "--seed", "7"});
    CHECK(r.code == cli::kExitOk);
    CHECK(read_text(in) == before_bytes);
    Network grown = load_checkpoint((dir.path / "grown.ngck").string());
    CHECK(grown.parameter_count() > before_params);
    CHECK(r.out.find("operator=hybrid") != std::string::npos);

    // Corrupt checkpoint is a data error.
    write_text(dir.path / "garbage.ngck", "not a checkpoint");
    r = run_cli({"grow", "--checkpoint", (dir.path / "garbage.ngck").string(),
                 "--out-checkpoint", (dir.path / "x.ngck").string()});
    CHECK(r.code == cli::kExitData);
}

TEST_CASE("analyze matches the library API on the same checkpoint") {
    TempDir dir("tmp_cli_analyze");
    write_text(dir.path / "config.json", kMinimalConfig);
    REQUIRE(run_cli({"train", "--config", (dir.path / "config.json").string(), "--out",
                     (dir.path / "run").string()})
                .code == cli::kExitOk);
    const fs::path ckpt = dir.path / "run" / "checkpoint.ngck";

    CliOutput r = run_cli({"analyze", "--checkpoint", ckpt.string(), "--out",
                           (dir.path / "ana").string()});
    CHECK(r.code == cli::kExitOk);
    CHECK(fs::exists(dir.path / "ana" / "histogram_l1.csv"));
    CHECK(fs::exists(dir.path / "ana" / "near_zero.csv"));

    // Library call on the identical checkpoint must produce identical bytes.
    Network net = load_checkpoint(ckpt.string());
    write_histogram_csv(similarity_histogram(net, 0, 40), (dir.path / "api.csv").string());
    CHECK(read_text(dir.path / "api.csv") == read_text(dir.path / "ana" / "histogram_l1.csv"));

    // --layer filter yields that single histogram.
    r = run_cli({"analyze", "--checkpoint", ckpt.string(), "--out",
                 (dir.path / "ana1").string(), "--layer", "1"});
    CHECK(r.code == cli::kExitOk);
    CHECK(r.out.find("layers_analyzed=1") != std::string::npos);
}

TEST_CASE("sweep runs the grid and flags one best row") {
    TempDir dir("tmp_cli_sweep");
    write_text(dir.path / "config.json", kMinimalConfig);

    // Singleton sweep: one row, flagged best.
    write_text(dir.path / "single.json", R"({"grid": {"reg.n_iters": [5]}, "seeds": [1]})");
    CliOutput r = run_cli({"sweep", "--config", (dir.path / "config.json").string(), "--sweep",
                           (dir.path / "single.json").string(), "--out",
                           (dir.path / "s1").string()});
    CHECK(r.code == cli::kExitOk);
    {
        std::ifstream is(dir.path / "s1" / "comparison.csv");
        std::string line;
        std::getline(is, line);  // header
        std::size_t rows = 0, best = 0;
        while (std::getline(is, line)) {
            ++rows;
            if (!line.empty() && line.back() == '1') ++best;
        }
        CHECK(rows == 1);
        CHECK(best == 1);
    }

    // Identical outcomes (reg disabled, growth off) tie-break to smaller N.
    write_text(dir.path / "tie.json", R"({"grid": {"reg.n_iters": [5, 1]}, "seeds": [1]})");
    r = run_cli({"sweep", "--config", (dir.path / "config.json").string(), "--sweep",
                 (dir.path / "tie.json").string(), "--out", (dir.path / "s2").string()});
    CHECK(r.code == cli::kExitOk);
    CHECK(r.out.find("best=reg.n_iters=1") != std::string::npos);

    // 3x2 grid: six result rows.
    write_text(dir.path / "grid.json",
               R"({"grid": {"reg.n_iters": [1, 5, 10], "reg.lambda": [0.1, 0.2]},
                   "seeds": [1]})");
    r = run_cli({"sweep", "--config", (dir.path / "config.json").string(), "--sweep",
                 (dir.path / "grid.json").string(), "--out", (dir.path / "s3").string()});
    CHECK(r.code == cli::kExitOk);
    {
        std::ifstream is(dir.path / "s3" / "comparison.csv");
        std::string line;
        std::getline(is, line);
        std::size_t rows = 0;
        while (std::getline(is, line)) rows += !line.empty();
        CHECK(rows == 6);
    }

    // Unknown sweep key is a config error.
    write_text(dir.path / "bad.json", R"({"grid": {"reg.n_iters": [1]}, "sedes": [1]})");
    r = run_cli({"sweep", "--config", (dir.path / "config.json").string(), "--sweep",
                 (dir.path / "bad.json").string(), "--out", (dir.path / "s4").string()});
    CHECK(r.code == cli::kExitConfig);
    CHECK(r.err.find("sedes") != std::string::npos);
}

TEST_CASE("argument parse failures exit 2") {
    CliOutput r = run_cli({"train"});  // missing required flags
    CHECK(r.code == cli::kExitConfig);
    r = run_cli({"frobnicate"});
    CHECK(r.code == cli::kExitConfig);
    r = run_cli({"train", "--config", "does_not_exist.json", "--out", "tmp_cli_noexist"});
    CHECK(r.code == cli::kExitConfig);
    fs::remove_all("tmp_cli_noexist");
}
