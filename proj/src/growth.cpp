#include "neurogrow/growth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "neurogrow/errors.hpp"

namespace neurogrow {

std::string growth_operator_name(GrowthOperator op) {
    switch (op) {
        case GrowthOperator::Random: return "random";
        case GrowthOperator::Split: return "split";
        case GrowthOperator::Hybrid: return "hybrid";
    }
    return "hybrid";
}

GrowthOperator growth_operator_from_name(const std::string& name) {
    if (name == "random") return GrowthOperator::Random;
    if (name == "split") return GrowthOperator::Split;
    if (name == "hybrid") return GrowthOperator::Hybrid;
    throw ConfigError("unknown growth operator '" + name + "'");
}

void GrowthPolicy::validate() const {
    if (fraction <= 0.0) throw ConfigError("growth.fraction must be positive");
    if (split_epsilon < 0.0) throw ConfigError("growth.split_epsilon must be nonnegative");
    if (random_init_std <= 0.0) throw ConfigError("growth.random_init_std must be positive");
    if (hybrid_split_share < 0.0 || hybrid_split_share > 1.0)
        throw ConfigError("growth.hybrid_split_share must be in [0, 1]");
}

bool GrowthPlan::is_noop() const {
    for (const auto& l : layers)
        if (l.neurons_to_add > 0) return false;
    return true;
}

namespace {

std::size_t round_half_up(double x) {
    return static_cast<std::size_t>(std::floor(x + 0.5));
}

/// Total parameter count if the hidden widths were replaced by `widths`,
/// keeping everything else (kernels, strides, classifier outputs) fixed.
std::size_t param_count_for_widths(const Network& net, const std::vector<std::size_t>& widths) {
    std::vector<std::size_t> cur = net.input_shape;
    std::size_t params = 0;
    for (std::size_t li = 0; li < net.hidden.size(); ++li) {
        const std::size_t out = widths[li];
        if (net.hidden[li].is_dense()) {
            std::size_t features = 1;
            for (std::size_t e : cur) features *= e;
            params += out * features + out;
            cur = {out};
        } else {
            const auto& c = std::get<Conv2dLayer>(net.hidden[li].impl);
            params += out * cur[0] * c.kh() * c.kw() + out;
            const auto [ho, wo] = conv_output_hw(c, cur[1], cur[2]);
            cur = {out, ho, wo};
        }
    }
    std::size_t features = 1;
    for (std::size_t e : cur) features *= e;
    params += net.classifier.out_features() * features + net.classifier.out_features();
    return params;
}

std::vector<std::size_t> widths_for_factor(const std::vector<std::size_t>& base, double r) {
    std::vector<std::size_t> widths(base.size());
    for (std::size_t i = 0; i < base.size(); ++i)
        widths[i] = std::max(base[i], round_half_up(r * static_cast<double>(base[i])));
    return widths;
}

/// Output activation shape of hidden layer `li` ({features} or {C, H, W}).
std::vector<std::size_t> layer_output_shape(const Network& net, std::size_t li) {
    std::vector<std::size_t> cur = net.input_shape;
    for (std::size_t i = 0; i <= li; ++i) {
        if (net.hidden[i].is_dense()) {
            cur = {std::get<DenseLayer>(net.hidden[i].impl).out_features()};
        } else {
            const auto& c = std::get<Conv2dLayer>(net.hidden[i].impl);
            const auto [ho, wo] = conv_output_hw(c, cur[1], cur[2]);
            cur = {c.out_channels(), ho, wo};
        }
    }
    return cur;
}

double gauss(Rng& rng) {
    std::normal_distribution<double> dist(0.0, 1.0);
    return dist(rng);
}

void check_layer_index(const Network& net, std::size_t layer_index) {
    if (layer_index >= net.hidden.size())
        throw UsageError("invalid layer index " + std::to_string(layer_index));
}

/// Append `k` rows to the layer's weights/bias; `fill_row(row, values)` is
/// called once per new row to populate its fan_in entries.
template <typename FillRow>
void append_neurons(Layer& layer, std::size_t k, FillRow fill_row) {
    if (layer.is_dense()) {
        auto& d = std::get<DenseLayer>(layer.impl);
        const std::size_t in = d.in_features(), out = d.out_features();
        Tensor w({out + k, in});
        std::copy(d.weights.data().begin(), d.weights.data().end(), w.raw().begin());
        for (std::size_t r = 0; r < k; ++r) {
            std::vector<double> row(in);
            fill_row(r, row);
            std::copy(row.begin(), row.end(), w.raw().begin() + (out + r) * in);
        }
        Tensor b({out + k});
        std::copy(d.bias.data().begin(), d.bias.data().end(), b.raw().begin());
        d.weights = std::move(w);
        d.bias = std::move(b);
    } else {
        auto& c = std::get<Conv2dLayer>(layer.impl);
        const std::size_t fan = c.in_channels() * c.kh() * c.kw(), out = c.out_channels();
        Tensor w({out + k, c.in_channels(), c.kh(), c.kw()});
        std::copy(c.weights.data().begin(), c.weights.data().end(), w.raw().begin());
        for (std::size_t r = 0; r < k; ++r) {
            std::vector<double> row(fan);
            fill_row(r, row);
            std::copy(row.begin(), row.end(), w.raw().begin() + (out + r) * fan);
        }
        Tensor b({out + k});
        std::copy(c.bias.data().begin(), c.bias.data().end(), b.raw().begin());
        c.weights = std::move(w);
        c.bias = std::move(b);
    }
}

/// Number of successor input slots one neuron of hidden layer `li` feeds:
/// 1 for dense->dense / conv->conv, H'*W' for conv->dense (flattened).
std::size_t successor_slot_width(const Network& net, std::size_t li) {
    const bool next_is_dense =
        li + 1 >= net.hidden.size() || net.hidden[li + 1].is_dense();
    if (!net.hidden[li].is_dense() && next_is_dense) {
        const auto shape = layer_output_shape(net, li);
        return shape[1] * shape[2];
    }
    return 1;
}

/// Grow the successor's input side by `k` units. `fill` populates the new
/// entries for one (output-row, new-unit-slot) pair; `half_copy_from`, when
/// set, instead halves the parent unit's outgoing weights and copies them.
struct SuccessorEdit {
    Network& net;
    std::size_t li;  // grown layer

    DenseLayer& successor_dense() {
        return li + 1 < net.hidden.size() ? std::get<DenseLayer>(net.hidden[li + 1].impl)
                                          : net.classifier;
    }
    bool successor_is_dense() const {
        return li + 1 >= net.hidden.size() || net.hidden[li + 1].is_dense();
    }
};

void successor_add_inputs_dense(DenseLayer& d, std::size_t slot_width, std::size_t k,
                                const std::vector<std::vector<double>>& new_cols) {
    // new_cols: k*slot_width columns, each of length d.out_features().
    const std::size_t out = d.out_features(), in = d.in_features();
    Tensor w({out, in + k * slot_width});
    for (std::size_t i = 0; i < out; ++i) {
        for (std::size_t j = 0; j < in; ++j) w.at(i, j) = d.weights.at(i, j);
        for (std::size_t j = 0; j < k * slot_width; ++j) w.at(i, in + j) = new_cols[j][i];
    }
    d.weights = std::move(w);
}

void successor_add_channels_conv(Conv2dLayer& c, std::size_t k,
                                 const std::vector<std::vector<double>>& new_slices) {
    // new_slices: k slices, each of length out_channels*kh*kw (per output
    // channel contiguous kh*kw blocks).
    const std::size_t out = c.out_channels(), cin = c.in_channels(), kk = c.kh() * c.kw();
    Tensor w({out, cin + k, c.kh(), c.kw()});
    for (std::size_t o = 0; o < out; ++o) {
        for (std::size_t ic = 0; ic < cin; ++ic)
            for (std::size_t p = 0; p < kk; ++p)
                w[(o * (cin + k) + ic) * kk + p] = c.weights[(o * cin + ic) * kk + p];
        for (std::size_t r = 0; r < k; ++r)
            for (std::size_t p = 0; p < kk; ++p)
                w[(o * (cin + k) + cin + r) * kk + p] = new_slices[r][o * kk + p];
    }
    c.weights = std::move(w);
}

}  // namespace

GrowthPlan plan_growth(const Network& net, const GrowthPolicy& policy) {
    policy.validate();
    if (net.hidden.empty()) throw ConfigError("network has no growable layer");

    std::vector<std::size_t> base(net.hidden.size());
    for (std::size_t i = 0; i < base.size(); ++i) base[i] = net.hidden[i].width();

    const std::size_t current = net.parameter_count();
    const double target = (1.0 + policy.fraction) * static_cast<double>(current);

    // count(r) is a nondecreasing step function of r; bisect to the target.
    double lo = 1.0, hi = 1.0 + policy.fraction;
    while (static_cast<double>(param_count_for_widths(net, widths_for_factor(base, hi))) <
           target)
        hi *= 1.5;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (static_cast<double>(param_count_for_widths(net, widths_for_factor(base, mid))) <
            target)
            lo = mid;
        else
            hi = mid;
    }
    const auto w_lo = widths_for_factor(base, lo);
    const auto w_hi = widths_for_factor(base, hi);
    const double d_lo =
        std::abs(static_cast<double>(param_count_for_widths(net, w_lo)) - target);
    const double d_hi =
        std::abs(static_cast<double>(param_count_for_widths(net, w_hi)) - target);
    const auto& chosen = d_lo <= d_hi ? w_lo : w_hi;  // ties to the smaller factor

    GrowthPlan plan;
    plan.source_stamp = network_stamp(net);
    plan.predicted_param_count = param_count_for_widths(net, chosen);
    for (std::size_t i = 0; i < base.size(); ++i)
        plan.layers.push_back({i, chosen[i] - base[i], chosen[i]});
    return plan;
}

void grow_random(Network& net, std::size_t layer_index, std::size_t k, const GrowthPolicy& policy,
                 Rng& rng) {
    check_layer_index(net, layer_index);
    if (k < 1) throw UsageError("grow_random requires k >= 1");
    Layer& layer = net.hidden[layer_index];
    const std::size_t fan_in = layer.fan_in();
    const double std_in = policy.random_init_std * std::sqrt(2.0 / static_cast<double>(fan_in));

    append_neurons(layer, k, [&](std::size_t, std::vector<double>& row) {
        for (double& v : row) v = std_in * gauss(rng);
    });

    SuccessorEdit edit{net, layer_index};
    const std::size_t slot = successor_slot_width(net, layer_index);
    if (edit.successor_is_dense()) {
        DenseLayer& d = edit.successor_dense();
        const double std_out =
            policy.random_init_std *
            std::sqrt(2.0 / static_cast<double>(d.in_features() + k * slot));
        std::vector<std::vector<double>> cols(k * slot,
                                              std::vector<double>(d.out_features()));
        for (auto& col : cols)
            for (double& v : col) v = std_out * gauss(rng);
        successor_add_inputs_dense(d, slot, k, cols);
    } else {
        auto& c = std::get<Conv2dLayer>(net.hidden[layer_index + 1].impl);
        const double std_out =
            policy.random_init_std *
            std::sqrt(2.0 / static_cast<double>((c.in_channels() + k) * c.kh() * c.kw()));
        std::vector<std::vector<double>> slices(
            k, std::vector<double>(c.out_channels() * c.kh() * c.kw()));
        for (auto& s : slices)
            for (double& v : s) v = std_out * gauss(rng);
        successor_add_channels_conv(c, k, slices);
    }
}

void grow_split(Network& net, std::size_t layer_index, std::size_t k, const GrowthPolicy& policy,
                Rng& rng) {
    check_layer_index(net, layer_index);
    Layer& layer = net.hidden[layer_index];
    const std::size_t width = layer.width();
    if (k > width)
        throw UsageError("grow_split: k=" + std::to_string(k) + " exceeds layer width " +
                         std::to_string(width));
    if (k == 0) return;

    Tensor nm = neuron_matrix(layer);
    std::vector<std::size_t> order(width);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return row_norm(nm, a) > row_norm(nm, b);  // ties keep lower index first
    });
    std::vector<std::size_t> parents(order.begin(), order.begin() + k);
    std::sort(parents.begin(), parents.end());

    const std::size_t fan_in = layer.fan_in();

    // Incoming rows: parent gets -eps*g, copy gets +eps*g, g a unit Gaussian
    // direction. Copies are appended in parent order.
    std::vector<std::vector<double>> copy_rows;
    for (std::size_t p : parents) {
        std::vector<double> g(fan_in);
        double norm = 0.0;
        for (double& v : g) {
            v = gauss(rng);
            norm += v * v;
        }
        norm = std::sqrt(norm);
        std::vector<double> parent_row(fan_in), copy_row(fan_in);
        for (std::size_t j = 0; j < fan_in; ++j) {
            const double delta = norm > 0.0 ? policy.split_epsilon * g[j] / norm : 0.0;
            parent_row[j] = nm.at(p, j) - delta;
            copy_row[j] = nm.at(p, j) + delta;
        }
        for (std::size_t j = 0; j < fan_in; ++j) nm.at(p, j) = parent_row[j];
        copy_rows.push_back(std::move(copy_row));
    }
    set_neuron_matrix(layer, nm);
    append_neurons(layer, k, [&](std::size_t r, std::vector<double>& row) { row = copy_rows[r]; });
    // Duplicates inherit the parent's bias.
    if (layer.is_dense()) {
        auto& d = std::get<DenseLayer>(layer.impl);
        for (std::size_t r = 0; r < k; ++r) d.bias[width + r] = d.bias[parents[r]];
    } else {
        auto& c = std::get<Conv2dLayer>(layer.impl);
        for (std::size_t r = 0; r < k; ++r) c.bias[width + r] = c.bias[parents[r]];
    }

    // Outgoing: halve the parent's successor weights and copy them to the
    // new neuron, preserving the function exactly at split_epsilon = 0.
    SuccessorEdit edit{net, layer_index};
    const std::size_t slot = successor_slot_width(net, layer_index);
    if (edit.successor_is_dense()) {
        DenseLayer& d = edit.successor_dense();
        std::vector<std::vector<double>> cols;
        for (std::size_t r = 0; r < k; ++r) {
            for (std::size_t s = 0; s < slot; ++s) {
                const std::size_t col = parents[r] * slot + s;
                std::vector<double> c(d.out_features());
                for (std::size_t i = 0; i < d.out_features(); ++i) {
                    d.weights.at(i, col) *= 0.5;
                    c[i] = d.weights.at(i, col);
                }
                cols.push_back(std::move(c));
            }
        }
        successor_add_inputs_dense(d, slot, k, cols);
    } else {
        auto& c = std::get<Conv2dLayer>(net.hidden[layer_index + 1].impl);
        const std::size_t kk = c.kh() * c.kw(), cin = c.in_channels();
        std::vector<std::vector<double>> slices;
        for (std::size_t r = 0; r < k; ++r) {
            std::vector<double> s(c.out_channels() * kk);
            for (std::size_t o = 0; o < c.out_channels(); ++o)
                for (std::size_t p = 0; p < kk; ++p) {
                    double& v = c.weights[(o * cin + parents[r]) * kk + p];
                    v *= 0.5;
                    s[o * kk + p] = v;
                }
            slices.push_back(std::move(s));
        }
        successor_add_channels_conv(c, k, slices);
    }
}

void grow_hybrid(Network& net, std::size_t layer_index, std::size_t k, const GrowthPolicy& policy,
                 Rng& rng) {
    check_layer_index(net, layer_index);
    if (k < 1) throw UsageError("grow_hybrid requires k >= 1");
    const std::size_t k_split = round_half_up(static_cast<double>(k) * policy.hybrid_split_share);
    if (k_split > 0) grow_split(net, layer_index, k_split, policy, rng);
    if (k - k_split > 0) grow_random(net, layer_index, k - k_split, policy, rng);
}

GrowthEventRecord apply_growth(Network& net, const GrowthPlan& plan, const GrowthPolicy& policy,
                               std::uint64_t seed) {
    if (plan.source_stamp != network_stamp(net))
        throw UsageError("growth plan is stale for this network");
    policy.validate();

    GrowthEventRecord record;
    record.param_count_before = net.parameter_count();
    record.op = policy.op;
    record.seed = seed;

    Rng rng(seed);
    for (const auto& lg : plan.layers) {
        const std::size_t before = net.hidden[lg.layer_index].width();
        if (lg.neurons_to_add > 0) {
            switch (policy.op) {
                case GrowthOperator::Random:
                    grow_random(net, lg.layer_index, lg.neurons_to_add, policy, rng);
                    break;
                case GrowthOperator::Split:
                    grow_split(net, lg.layer_index, lg.neurons_to_add, policy, rng);
                    break;
                case GrowthOperator::Hybrid:
                    grow_hybrid(net, lg.layer_index, lg.neurons_to_add, policy, rng);
                    break;
            }
        }
        record.layers.push_back(
            {lg.layer_index, before, net.hidden[lg.layer_index].width(), lg.neurons_to_add});
    }
    // Every hidden layer's weights may have changed (grown or fed by a grown
    // predecessor); refresh all snapshots so the penalty baselines on the
    // post-growth state.
    for (auto& layer : net.hidden)
        layer.weight_sum_previous = sum(neuron_matrix(layer));

    record.param_count_after = net.parameter_count();
    return record;
}

}  // namespace neurogrow
