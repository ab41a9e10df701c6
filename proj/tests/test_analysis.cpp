#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "neurogrow/analysis.hpp"
#include "neurogrow/errors.hpp"
#include "test_util.hpp"

using namespace neurogrow;

namespace {

Network net_with_rows(const Tensor& rows) {
    Network net;
    net.input_shape = {rows.extent(1)};
    Layer l;
    DenseLayer d;
    d.weights = rows;
    d.bias = Tensor({rows.extent(0)});
    d.activation = Activation::Relu;
    l.impl = d;
    net.hidden.push_back(l);
    DenseLayer clf;
    clf.weights = Tensor({2, rows.extent(0)});
    clf.bias = Tensor({2});
    clf.activation = Activation::None;
    net.classifier = clf;
    return net;
}

}  // namespace

TEST_CASE("histogram fixed cases") {
    // Orthogonal 4x4 rows: all 6 pairs at cosine 0.
    Network ortho = net_with_rows(Tensor({4, 4}, {1, 0, 0, 0, 0, 1, 0, 0,
                                                  0, 0, 1, 0, 0, 0, 0, 1}));
    SimilarityHistogram h = similarity_histogram(ortho, 0, 40);
    CHECK(h.total_pairs == 6);
    CHECK(h.bin_edges.size() == 41);
    CHECK(h.bin_edges.front() == -1.0);
    CHECK(h.bin_edges.back() == 1.0);
    // 0 is a boundary between bins 19 and 20; boundary goes to the lower bin.
    CHECK(h.counts[19] == 6);
    std::size_t total = 0;
    for (std::size_t c : h.counts) total += c;
    CHECK(total == 6);

    // Two parallel rows: the single pair lands in the final bin.
    Network parallel = net_with_rows(Tensor({2, 2}, {1, 0, 2, 0}));
    h = similarity_histogram(parallel, 0, 40);
    CHECK(h.total_pairs == 1);
    CHECK(h.counts[39] == 1);
}

TEST_CASE("histogram matches a brute-force pairing loop") {
    const Tensor rows = test_util::random_tensor({16, 6}, 500);
    Network net = net_with_rows(rows);
    for (std::size_t bins : {1, 7, 40}) {
        SimilarityHistogram h = similarity_histogram(net, 0, bins);

        std::vector<std::size_t> oracle(bins, 0);
        SimilarityMap map = similarity_map(rows);
        for (std::size_t i = 0; i < 16; ++i)
            for (std::size_t j = i + 1; j < 16; ++j) {
                const double v = map.values.at(i, j);
                std::size_t b = 0;
                while (b + 1 < bins && v > -1.0 + 2.0 * double(b + 1) / double(bins)) ++b;
                ++oracle[b];
            }
        CHECK(h.counts == oracle);

        std::size_t total = 0;
        for (std::size_t c : h.counts) total += c;
        CHECK(total == 16 * 15 / 2);  // conservation at every binning
    }
}

TEST_CASE("histogram rejects degenerate layers") {
    Network one = net_with_rows(test_util::random_tensor({1, 3}, 501));
    CHECK_THROWS_AS(similarity_histogram(one, 0, 40), UsageError);
    CHECK_THROWS_AS(similarity_histogram(one, 5, 40), UsageError);
    Network ok = net_with_rows(test_util::random_tensor({4, 3}, 502));
    CHECK_THROWS_AS(similarity_histogram(ok, 0, 0), UsageError);
}

TEST_CASE("near_zero_fraction fixed cases") {
    Network ortho = net_with_rows(Tensor({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1}));
    CHECK(near_zero_fraction(ortho, 0, 0.5) == 1.0);

    Network parallel = net_with_rows(Tensor({3, 2}, {1, 0, 2, 0, 3, 0}));
    CHECK(near_zero_fraction(parallel, 0, 0.5) == 0.0);

    // Pairs of {(1,0),(0,1),(1,1)}: cosines {0, 1/sqrt2, 1/sqrt2} -> 1/3.
    Network mixed = net_with_rows(Tensor({3, 2}, {1, 0, 0, 1, 1, 1}));
    CHECK(near_zero_fraction(mixed, 0, 0.5) == doctest::Approx(1.0 / 3.0));

    CHECK_THROWS_AS(near_zero_fraction(mixed, 0, 0.0), UsageError);
    CHECK_THROWS_AS(near_zero_fraction(mixed, 0, 1.5), UsageError);
}

TEST_CASE("near_zero_fraction is monotone in the threshold") {
    Network net = net_with_rows(test_util::random_tensor({12, 5}, 510));
    double prev = 0.0;
    for (double t = 0.05; t <= 1.0; t += 0.05) {
        const double cur = near_zero_fraction(net, 0, t);
        CHECK(cur >= prev);
        prev = cur;
    }
    CHECK(near_zero_fraction(net, 0, 1.0) == 1.0);
}

TEST_CASE("histogram CSV format") {
    Network net = net_with_rows(test_util::random_tensor({4, 3}, 520));
    SimilarityHistogram h = similarity_histogram(net, 0, 4);
    const std::string path = "test_histogram.csv";
    write_histogram_csv(h, path);
    std::ifstream is(path);
    std::string line;
    std::getline(is, line);
    CHECK(line == "bin_lo,bin_hi,count");
    std::size_t rows = 0, total = 0;
    while (std::getline(is, line)) {
        ++rows;
        std::stringstream ss(line);
        std::string lo, hi, count;
        std::getline(ss, lo, ',');
        std::getline(ss, hi, ',');
        std::getline(ss, count, ',');
        CHECK(std::stod(lo) < std::stod(hi));
        total += std::stoul(count);
    }
    CHECK(rows == 4);
    CHECK(total == h.total_pairs);
    std::remove(path.c_str());
}

TEST_CASE("compare_runs aggregates and flags the best row") {
    RunSummary single{"baseline", {0.9}, {1.5}, 0, 0.0};
    auto rows = compare_runs({single});
    CHECK(rows.size() == 1);
    CHECK(rows[0].mean_accuracy == 0.9);
    CHECK(rows[0].std_accuracy == 0.0);
    CHECK(rows[0].best);

    // Hand aggregation over five seeds.
    RunSummary five{"reg", {0.91, 0.93, 0.89, 0.95, 0.87}, {1, 2, 3, 4, 5}, 15, 0.1};
    rows = compare_runs({single, five});
    CHECK(rows[1].mean_accuracy == doctest::Approx(0.91));
    const double var =
        (0.0 + 0.02 * 0.02 + 0.02 * 0.02 + 0.04 * 0.04 + 0.04 * 0.04) / 5.0;
    CHECK(rows[1].std_accuracy == doctest::Approx(std::sqrt(var)));
    CHECK(rows[1].mean_seconds == doctest::Approx(3.0));
    CHECK_FALSE(rows[0].best);
    CHECK(rows[1].best);

    CHECK_THROWS_AS(compare_runs({}), UsageError);
    CHECK_THROWS_AS(compare_runs({RunSummary{"empty", {}, {}, 0, 0.0}}), UsageError);
}

TEST_CASE("compare_runs tie-breaks by smaller N then label") {
    RunSummary a{"zeta", {0.9}, {1.0}, 15, 0.1};
    RunSummary b{"alpha", {0.9}, {1.0}, 15, 0.1};
    RunSummary c{"mid", {0.9}, {1.0}, 30, 0.1};
    auto rows = compare_runs({a, c, b});
    CHECK_FALSE(rows[0].best);  // zeta loses the label tie
    CHECK_FALSE(rows[1].best);  // larger N loses first
    CHECK(rows[2].best);        // alpha, N=15

    // Identical duplicate runs aggregate identically.
    auto dup = compare_runs({a, a});
    CHECK(dup[0].mean_accuracy == dup[1].mean_accuracy);
    CHECK(dup[0].std_accuracy == dup[1].std_accuracy);
}

TEST_CASE("comparison CSV format") {
    RunSummary a{"base", {0.5, 0.7}, {1.0, 2.0}, 0, 0.0};
    RunSummary b{"reg", {0.8}, {1.0}, 15, 0.1};
    const std::string path = "test_comparison.csv";
    write_comparison_csv(compare_runs({a, b}), path);
    std::ifstream is(path);
    std::string line;
    std::getline(is, line);
    CHECK(line ==
          "label,mean_test_accuracy,std_test_accuracy,mean_training_seconds,n_iters,lambda,best");
    std::getline(is, line);
    CHECK(line.rfind("base,0.6,", 0) == 0);
    std::getline(is, line);
    CHECK(line.rfind("reg,0.8,", 0) == 0);
    CHECK(line.back() == '1');  // best flag
    std::remove(path.c_str());
}
