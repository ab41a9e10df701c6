#include "neurogrow/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "neurogrow/errors.hpp"

namespace neurogrow {

std::vector<std::size_t> Dataset::sample_shape() const {
    return {inputs.shape().begin() + 1, inputs.shape().end()};
}

namespace {

std::uint32_t read_be_u32(std::ifstream& is, const std::string& path) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw DataError("truncated IDX header in " + path);
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream imgs(images_path, std::ios::binary);
    if (!imgs) throw DataError("cannot open IDX image file: " + images_path);
    const std::uint32_t img_magic = read_be_u32(imgs, images_path);
    if (img_magic != 0x00000803u)
        throw DataError("bad IDX image magic in " + images_path + " (expected 0x00000803)");
    const std::uint32_t n = read_be_u32(imgs, images_path);
    const std::uint32_t h = read_be_u32(imgs, images_path);
    const std::uint32_t w = read_be_u32(imgs, images_path);

    const std::size_t expected = std::size_t(n) * h * w;
    std::vector<unsigned char> pixels(expected);
    imgs.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(expected));
    const std::size_t got = static_cast<std::size_t>(imgs.gcount());
    if (got != expected)
        throw DataError("truncated IDX image payload in " + images_path + ": expected " +
                        std::to_string(expected) + " bytes, got " + std::to_string(got));

    std::ifstream labs(labels_path, std::ios::binary);
    if (!labs) throw DataError("cannot open IDX label file: " + labels_path);
    const std::uint32_t lab_magic = read_be_u32(labs, labels_path);
    if (lab_magic != 0x00000801u)
        throw DataError("bad IDX label magic in " + labels_path + " (expected 0x00000801)");
    const std::uint32_t ln = read_be_u32(labs, labels_path);
    if (ln != n)
        throw DataError("IDX image/label count mismatch: " + std::to_string(n) + " images vs " +
                        std::to_string(ln) + " labels");
    std::vector<unsigned char> raw_labels(ln);
    labs.read(reinterpret_cast<char*>(raw_labels.data()), static_cast<std::streamsize>(ln));
    if (static_cast<std::size_t>(labs.gcount()) != ln)
        throw DataError("truncated IDX label payload in " + labels_path);

    Dataset ds;
    ds.inputs = Tensor({n, 1, h, w});
    for (std::size_t i = 0; i < expected; ++i) ds.inputs[i] = pixels[i] / 255.0;
    std::size_t max_label = 0;
    for (unsigned char l : raw_labels) {
        ds.labels.push_back(l);
        max_label = std::max<std::size_t>(max_label, l);
    }
    ds.class_count = max_label + 1;
    return ds;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.push_back("");
    return cells;
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> features;  // label column removed
    std::vector<std::string> raw_labels;
};

CsvTable parse_csv(const std::string& path, const std::string& label_column) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open CSV file: " + path);
    std::string line;
    if (!std::getline(is, line)) throw DataError("empty CSV file: " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();

    CsvTable table;
    table.header = split_csv_line(line);
    std::size_t label_idx = table.header.size();
    for (std::size_t i = 0; i < table.header.size(); ++i)
        if (table.header[i] == label_column) label_idx = i;
    if (label_idx == table.header.size())
        throw DataError("CSV label column '" + label_column + "' not found in " + path);

    std::size_t row_number = 1;
    while (std::getline(is, line)) {
        ++row_number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != table.header.size())
            throw DataError("ragged CSV row " + std::to_string(row_number) + " in " + path +
                            ": expected " + std::to_string(table.header.size()) + " cells, got " +
                            std::to_string(cells.size()));
        std::vector<double> row;
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i == label_idx) {
                table.raw_labels.push_back(cells[i]);
                continue;
            }
            try {
                std::size_t pos = 0;
                const double v = std::stod(cells[i], &pos);
                if (pos != cells[i].size()) throw std::invalid_argument("trailing characters");
                row.push_back(v);
            } catch (const std::exception&) {
                throw DataError("non-numeric feature cell '" + cells[i] + "' at CSV row " +
                                std::to_string(row_number) + " in " + path);
            }
        }
        table.features.push_back(std::move(row));
    }
    if (table.features.empty()) throw DataError("CSV file has no data rows: " + path);
    return table;
}

Dataset csv_to_dataset_raw(const CsvTable& table) {
    const std::size_t n = table.features.size(), f = table.features[0].size();
    Dataset ds;
    ds.inputs = Tensor({n, f});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < f; ++j) ds.inputs.at(i, j) = table.features[i][j];

    // Dense 0-based ids in first-appearance order.
    std::vector<std::string> seen;
    for (const auto& raw : table.raw_labels) {
        auto it = std::find(seen.begin(), seen.end(), raw);
        if (it == seen.end()) {
            seen.push_back(raw);
            it = std::prev(seen.end());
        }
        ds.labels.push_back(static_cast<std::size_t>(it - seen.begin()));
    }
    ds.class_count = seen.size();
    return ds;
}

}  // namespace

Dataset load_csv(const std::string& path, const std::string& label_column) {
    Dataset ds = csv_to_dataset_raw(parse_csv(path, label_column));
    ds.normalization = compute_norm_stats(ds.inputs);
    apply_normalization(ds.inputs, ds.normalization);
    return ds;
}

Dataset load_csv(const std::string& path, const std::string& label_column,
                 const NormStats& stats) {
    Dataset ds = csv_to_dataset_raw(parse_csv(path, label_column));
    ds.normalization = stats;
    apply_normalization(ds.inputs, ds.normalization);
    return ds;
}

TrainTestSplit load_csv_split(const std::string& path, const std::string& label_column,
                              double test_fraction, std::uint64_t seed) {
    Dataset raw = csv_to_dataset_raw(parse_csv(path, label_column));
    TrainTestSplit split = split_dataset(raw, test_fraction, seed);
    const NormStats stats = compute_norm_stats(split.train.inputs);
    split.train.normalization = stats;
    apply_normalization(split.train.inputs, stats);
    split.test.normalization = stats;
    if (split.test.size() > 0) apply_normalization(split.test.inputs, stats);
    return split;
}

NormStats compute_norm_stats(const Tensor& features) {
    const std::size_t n = features.extent(0), f = features.extent(1);
    NormStats stats;
    stats.mean.assign(f, 0.0);
    stats.stddev.assign(f, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < f; ++j) stats.mean[j] += features.at(i, j);
    for (double& m : stats.mean) m /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < f; ++j) {
            const double d = features.at(i, j) - stats.mean[j];
            stats.stddev[j] += d * d;
        }
    for (double& s : stats.stddev) s = std::sqrt(s / static_cast<double>(n));
    return stats;
}

void apply_normalization(Tensor& features, const NormStats& stats) {
    const std::size_t n = features.extent(0), f = features.extent(1);
    if (stats.mean.size() != f)
        throw DataError("normalization statistics do not match feature count");
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < f; ++j) {
            // Constant feature (stddev 0) maps to 0.
            features.at(i, j) = stats.stddev[j] > 0.0
                                    ? (features.at(i, j) - stats.mean[j]) / stats.stddev[j]
                                    : 0.0;
        }
}

Dataset make_two_spirals(std::size_t n_per_class, double noise_std, std::uint64_t seed) {
    if (n_per_class < 1) throw ConfigError("two_spirals n_per_class must be >= 1");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 1.0);

    Dataset ds;
    ds.inputs = Tensor({2 * n_per_class, 2});
    ds.class_count = 2;
    // Point k sits at angle theta_k = pi/4 + 3*pi*k/n on the r = theta curve;
    // class 1 is the same spiral rotated by pi.
    for (std::size_t cls = 0; cls < 2; ++cls) {
        const double flip = cls == 0 ? 1.0 : -1.0;
        for (std::size_t k = 0; k < n_per_class; ++k) {
            const double theta = std::numbers::pi / 4.0 +
                                 3.0 * std::numbers::pi * static_cast<double>(k) /
                                     static_cast<double>(n_per_class);
            const std::size_t idx = cls * n_per_class + k;
            ds.inputs.at(idx, 0) = flip * theta * std::cos(theta) + noise_std * noise(rng);
            ds.inputs.at(idx, 1) = flip * theta * std::sin(theta) + noise_std * noise(rng);
            ds.labels.push_back(cls);
        }
    }
    return ds;
}

TrainTestSplit split_dataset(const Dataset& ds, double test_fraction, std::uint64_t seed) {
    if (test_fraction < 0.0 || test_fraction >= 1.0)
        throw ConfigError("test_fraction must be in [0, 1)");
    const std::size_t n = ds.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    const std::size_t n_test = static_cast<std::size_t>(std::floor(test_fraction * n));
    const std::size_t n_train = n - n_test;
    const std::size_t sample = ds.inputs.size() / n;

    auto take = [&](std::size_t begin, std::size_t count) {
        Dataset out;
        out.class_count = ds.class_count;
        out.normalization = ds.normalization;
        if (count == 0) return out;  // empty split: rank-0 inputs
        std::vector<std::size_t> shape = ds.inputs.shape();
        shape[0] = count;
        out.inputs = Tensor(shape);
        for (std::size_t i = 0; i < count; ++i) {
            const std::size_t src = order[begin + i];
            std::copy(ds.inputs.data().begin() + src * sample,
                      ds.inputs.data().begin() + (src + 1) * sample,
                      out.inputs.raw().begin() + i * sample);
            out.labels.push_back(ds.labels[src]);
        }
        return out;
    };
    return {take(0, n_train), take(n_train, n_test)};
}

BatchIterator::BatchIterator(const Dataset& ds, std::size_t batch_size, std::uint64_t epoch_seed)
    : ds_(ds), batch_size_(batch_size) {
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    order_.resize(ds.size());
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
    std::mt19937_64 rng(epoch_seed);
    std::shuffle(order_.begin(), order_.end(), rng);
}

std::size_t BatchIterator::batch_count() const {
    return (ds_.size() + batch_size_ - 1) / batch_size_;
}

bool BatchIterator::next(Batch& out) {
    if (cursor_ >= order_.size()) return false;
    const std::size_t count = std::min(batch_size_, order_.size() - cursor_);
    std::vector<std::size_t> shape = ds_.inputs.shape();
    shape[0] = count;
    const std::size_t sample = ds_.inputs.size() / ds_.size();
    out.inputs = Tensor(shape);
    out.labels.clear();
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t src = order_[cursor_ + i];
        std::copy(ds_.inputs.data().begin() + src * sample,
                  ds_.inputs.data().begin() + (src + 1) * sample,
                  out.inputs.raw().begin() + i * sample);
        out.labels.push_back(ds_.labels[src]);
    }
    cursor_ += count;
    return true;
}

}  // namespace neurogrow
