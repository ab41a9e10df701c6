#include "neurogrow/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

#include "neurogrow/errors.hpp"

namespace neurogrow {

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
    // splitmix64 over (seed, stream, index)
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1) + index;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

Tensor he_normal(std::vector<std::size_t> shape, std::size_t fan_in, Rng& rng) {
    Tensor t(std::move(shape));
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
    for (double& v : t.raw()) v = dist(rng);
    return t;
}

std::string format_double(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

}  // namespace

void TrainConfig::validate() const {
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    growth.policy.validate();
    reg.validate();
    if (growth.enabled) {
        if (growth.every_epochs < 1) throw ConfigError("growth.every_epochs must be >= 1");
        if (epochs > 0 && growth.every_epochs > epochs)
            throw ConfigError("growth.every_epochs exceeds epochs; disable growth instead");
    }
    if (optimizer.base_lr <= 0.0) throw ConfigError("optimizer.base_lr must be positive");
    if (optimizer.momentum < 0.0 || optimizer.momentum >= 1.0)
        throw ConfigError("optimizer.momentum must be in [0, 1)");
}

Network build_network(const ArchitectureConfig& arch,
                      const std::vector<std::size_t>& sample_shape, std::size_t class_count,
                      std::uint64_t seed) {
    Rng rng(mix_seed(seed, 1, 0));
    Network net;
    net.input_shape = sample_shape;

    std::vector<std::size_t> cur = sample_shape;
    if (arch.type == "mlp") {
        std::size_t features = 1;
        for (std::size_t e : cur) features *= e;
        if (sample_shape.size() != 1) net.input_shape = sample_shape;  // flattened in forward
        std::size_t in = features;
        for (std::size_t width : arch.hidden_widths) {
            DenseLayer d;
            d.weights = he_normal({width, in}, in, rng);
            d.bias = Tensor({width});
            d.activation = Activation::Relu;
            net.hidden.push_back(Layer{std::move(d), std::nullopt});
            in = width;
        }
        cur = {in};
    } else if (arch.type == "conv") {
        if (cur.size() != 3) throw ConfigError("conv architecture requires [C x H x W] samples");
        for (const auto& spec : arch.conv_layers) {
            Conv2dLayer c;
            const std::size_t fan_in = cur[0] * spec.kernel * spec.kernel;
            c.weights = he_normal({spec.out_channels, cur[0], spec.kernel, spec.kernel}, fan_in,
                                  rng);
            c.bias = Tensor({spec.out_channels});
            c.stride = spec.stride;
            c.pad = spec.pad;
            c.activation = Activation::Relu;
            const auto [ho, wo] = conv_output_hw(c, cur[1], cur[2]);
            cur = {spec.out_channels, ho, wo};
            net.hidden.push_back(Layer{std::move(c), std::nullopt});
        }
    } else {
        throw ConfigError("unknown architecture type '" + arch.type + "'");
    }
    if (net.hidden.empty()) throw ConfigError("architecture has no hidden layers");

    std::size_t features = 1;
    for (std::size_t e : cur) features *= e;
    net.classifier.weights = he_normal({class_count, features}, features, rng);
    net.classifier.bias = Tensor({class_count});
    net.classifier.activation = Activation::None;
    validate_network(net);
    return net;
}

TrainTestSplit load_dataset(const DatasetConfig& cfg) {
    if (cfg.type == "two_spirals") {
        Dataset ds = make_two_spirals(cfg.n_per_class, cfg.noise_std, cfg.data_seed);
        return split_dataset(ds, cfg.test_fraction, mix_seed(cfg.data_seed, 2, 0));
    }
    if (cfg.type == "idx") {
        Dataset train = load_idx(cfg.images_path, cfg.labels_path);
        if (!cfg.test_images_path.empty()) {
            Dataset test = load_idx(cfg.test_images_path, cfg.test_labels_path);
            test.class_count = train.class_count = std::max(train.class_count, test.class_count);
            return {std::move(train), std::move(test)};
        }
        return split_dataset(train, cfg.test_fraction, mix_seed(cfg.data_seed, 2, 0));
    }
    if (cfg.type == "csv") {
        return load_csv_split(cfg.csv_path, cfg.label_column, cfg.test_fraction,
                              mix_seed(cfg.data_seed, 2, 0));
    }
    throw ConfigError("unknown dataset type '" + cfg.type + "'");
}

std::vector<RegTraceEntry> post_growth_regularize(Network& net, const RegConfig& reg,
                                                  const std::vector<std::size_t>& layers) {
    std::vector<RegTraceEntry> trace;
    for (std::size_t li : layers) {
        if (li >= net.hidden.size())
            throw UsageError("regularized layer index " + std::to_string(li) + " out of range");
        Layer& layer = net.hidden[li];
        if (!layer.weight_sum_previous)
            throw UsageError("layer " + std::to_string(li) +
                             " has no weight-sum snapshot; run apply_growth first");
        LayerSnapshot snap{*layer.weight_sum_previous};
        Tensor w = neuron_matrix(layer);
        for (std::size_t it = 0; it < reg.n_iters; ++it) {
            SimilarityMap map = similarity_map(w);
            const double mu = mean_offdiag_abs(map);
            const PenaltyResult pen = weight_change_penalty(w, snap, reg);
            RegStepResult step = reg_step(w, snap, reg);
            trace.push_back({li, it, mu, pen.value, step.loss_before});
            w = std::move(step.weights);
        }
        set_neuron_matrix(layer, w);
    }
    return trace;
}

double evaluate(const Network& net, const Dataset& ds) {
    if (ds.size() == 0) return 0.0;
    const std::size_t chunk = 256;
    const std::size_t sample = ds.inputs.size() / ds.size();
    std::size_t correct = 0;
    for (std::size_t begin = 0; begin < ds.size(); begin += chunk) {
        const std::size_t count = std::min(chunk, ds.size() - begin);
        std::vector<std::size_t> shape = ds.inputs.shape();
        shape[0] = count;
        Tensor x(shape, std::vector<double>(ds.inputs.data().begin() + begin * sample,
                                            ds.inputs.data().begin() + (begin + count) * sample));
        Tensor logits = forward(net, x);
        for (std::size_t i = 0; i < count; ++i) {
            std::size_t arg = 0;  // ties break to the lowest class index
            for (std::size_t j = 1; j < logits.extent(1); ++j)
                if (logits.at(i, j) > logits.at(i, arg)) arg = j;
            if (arg == ds.labels[begin + i]) ++correct;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(ds.size());
}

namespace {

std::vector<std::size_t> resolve_regularized_layers(const TrainConfig& cfg, const Network& net) {
    if (cfg.regularized_layers) {
        for (std::size_t li : *cfg.regularized_layers)
            if (li >= net.hidden.size())
                throw ConfigError("regularized layer index " + std::to_string(li) +
                                  " out of range");
        return *cfg.regularized_layers;
    }
    std::vector<std::size_t> all(net.hidden.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return all;
}

}  // namespace

RunResult run_training(const TrainConfig& cfg, const std::string& out_dir) {
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();

    TrainTestSplit data = load_dataset(cfg.dataset);
    if (data.train.size() == 0) throw DataError("training split is empty");

    Network net = build_network(cfg.architecture, data.train.sample_shape(),
                                data.train.class_count, cfg.seed);
    const std::vector<std::size_t> reg_layers = resolve_regularized_layers(cfg, net);

    const std::size_t batches_per_epoch =
        (data.train.size() + cfg.batch_size - 1) / cfg.batch_size;
    const std::size_t total_steps = std::max<std::size_t>(1, cfg.epochs * batches_per_epoch);
    SgdState state =
        make_sgd_state(net, cfg.optimizer.base_lr, cfg.optimizer.momentum, total_steps);

    RunResult result;
    std::size_t step = 0;          // global optimizer step
    std::size_t schedule_base = 0; // subtracted when the schedule restarts
    std::size_t growth_events = 0;

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        EpochRow row;
        row.epoch = epoch;
        row.lr = lr_at(step - schedule_base, state);
        row.param_count = net.parameter_count();

        double loss_sum = 0.0;
        std::size_t sample_count = 0;
        BatchIterator batches(data.train, cfg.batch_size, mix_seed(cfg.seed, 3, epoch));
        Batch batch;
        while (batches.next(batch)) {
            ForwardCache cache;
            Tensor logits = forward(net, batch.inputs, cache);
            LossAndGrad loss = softmax_cross_entropy(logits, batch.labels);
            Gradients grads = backward(net, cache, loss.grad_logits);
            sgd_step(net, grads, state, step - schedule_base);
            ++step;
            loss_sum += loss.loss * static_cast<double>(batch.labels.size());
            sample_count += batch.labels.size();
        }
        row.train_loss = loss_sum / static_cast<double>(sample_count);
        row.train_acc = evaluate(net, data.train);
        row.test_acc = data.test.size() > 0 ? evaluate(net, data.test) : row.train_acc;
        for (const auto& layer : net.hidden)
            row.mu_sim.push_back(mean_offdiag_abs(similarity_map(neuron_matrix(layer))));
        result.report.rows.push_back(std::move(row));

        // Growth fires after the epoch completes, so every metrics row
        // describes a fixed architecture.
        if (cfg.growth.enabled && epoch % cfg.growth.every_epochs == 0) {
            GrowthPlan plan = plan_growth(net, cfg.growth.policy);
            const std::uint64_t gseed = mix_seed(cfg.seed, 4, growth_events);
            GrowthEventRecord record = apply_growth(net, plan, cfg.growth.policy, gseed);
            resize_state(state, net);
            if (cfg.optimizer.restart_schedule_on_growth) {
                schedule_base = step;
                state.total_steps =
                    std::max<std::size_t>(1, (cfg.epochs - epoch) * batches_per_epoch);
            }
            ++growth_events;
            result.report.events.push_back({epoch, std::move(record)});

            auto trace = post_growth_regularize(net, cfg.reg, reg_layers);
            if (cfg.reg_include_task_loss) {
                // Optional interleave: one task step on a seeded batch after
                // the regularizer phase.
                BatchIterator it(data.train, cfg.batch_size, mix_seed(cfg.seed, 5, epoch));
                Batch b;
                if (it.next(b)) {
                    ForwardCache cache;
                    Tensor logits = forward(net, b.inputs, cache);
                    LossAndGrad loss = softmax_cross_entropy(logits, b.labels);
                    Gradients grads = backward(net, cache, loss.grad_logits);
                    sgd_step(net, grads, state, step - schedule_base);
                }
            }
            result.report.reg_trace.insert(result.report.reg_trace.end(), trace.begin(),
                                           trace.end());
        }
    }

    result.report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.net = std::move(net);

    if (!out_dir.empty()) {
        write_metrics_csv(result.report, out_dir + "/metrics.csv");
        write_events_csv(result.report, out_dir + "/events.csv");
        result.report.checkpoint_path = out_dir + "/checkpoint.ngck";
        save_checkpoint(result.net, result.report.checkpoint_path);
    }
    return result;
}

void write_metrics_csv(const RunReport& report, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot write metrics CSV: " + path);
    const std::size_t layer_count = report.rows.empty() ? 0 : report.rows[0].mu_sim.size();
    os << "epoch,train_loss,train_acc,test_acc,param_count,lr";
    for (std::size_t i = 1; i <= layer_count; ++i) os << ",mu_sim_l" << i;
    os << "\n";
    for (const auto& r : report.rows) {
        os << r.epoch << "," << format_double(r.train_loss) << "," << format_double(r.train_acc)
           << "," << format_double(r.test_acc) << "," << r.param_count << ","
           << format_double(r.lr);
        for (double mu : r.mu_sim) os << "," << format_double(mu);
        os << "\n";
    }
}

void write_events_csv(const RunReport& report, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot write events CSV: " + path);
    os << "event,epoch,layer,operator,width_before,width_after,neurons_added,"
          "param_count_before,param_count_after,seed\n";
    for (std::size_t e = 0; e < report.events.size(); ++e) {
        const auto& ev = report.events[e];
        for (const auto& l : ev.record.layers) {
            os << e << "," << ev.epoch << "," << l.layer_index << ","
               << growth_operator_name(ev.record.op) << "," << l.width_before << ","
               << l.width_after << "," << l.neurons_added << "," << ev.record.param_count_before
               << "," << ev.record.param_count_after << "," << ev.record.seed << "\n";
        }
    }
}

}  // namespace neurogrow
