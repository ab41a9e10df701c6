#include "neurogrow/network.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "neurogrow/errors.hpp"
#include "json.hpp"

namespace neurogrow {

std::string activation_name(Activation a) { return a == Activation::Relu ? "relu" : "none"; }

Activation activation_from_name(const std::string& name) {
    if (name == "relu") return Activation::Relu;
    if (name == "none") return Activation::None;
    throw ConfigError("unknown activation '" + name + "'");
}

std::size_t Layer::width() const {
    return is_dense() ? std::get<DenseLayer>(impl).out_features()
                      : std::get<Conv2dLayer>(impl).out_channels();
}

std::size_t Layer::fan_in() const {
    if (is_dense()) return std::get<DenseLayer>(impl).in_features();
    const auto& c = std::get<Conv2dLayer>(impl);
    return c.in_channels() * c.kh() * c.kw();
}

std::size_t Layer::parameter_count() const {
    return is_dense() ? std::get<DenseLayer>(impl).weights.size() +
                            std::get<DenseLayer>(impl).bias.size()
                      : std::get<Conv2dLayer>(impl).weights.size() +
                            std::get<Conv2dLayer>(impl).bias.size();
}

std::size_t Network::parameter_count() const {
    std::size_t n = classifier.weights.size() + classifier.bias.size();
    for (const auto& l : hidden) n += l.parameter_count();
    return n;
}

std::uint64_t network_stamp(const Network& net) {
    std::uint64_t h = 1469598103934665603ull;  // FNV-1a over structural shape
    auto mix = [&h](std::uint64_t v) {
        h ^= v;
        h *= 1099511628211ull;
    };
    for (std::size_t e : net.input_shape) mix(e);
    for (const auto& l : net.hidden) {
        mix(l.is_dense() ? 1 : 2);
        if (l.is_dense()) {
            const auto& d = std::get<DenseLayer>(l.impl);
            mix(d.out_features());
            mix(d.in_features());
        } else {
            const auto& c = std::get<Conv2dLayer>(l.impl);
            mix(c.out_channels());
            mix(c.in_channels());
            mix(c.kh());
            mix(c.kw());
            mix(c.stride);
            mix(c.pad);
        }
    }
    mix(net.classifier.out_features());
    mix(net.classifier.in_features());
    return h;
}

std::pair<std::size_t, std::size_t> conv_output_hw(const Conv2dLayer& layer, std::size_t h,
                                                   std::size_t w) {
    return {conv_out_extent(h, layer.kh(), layer.stride, layer.pad),
            conv_out_extent(w, layer.kw(), layer.stride, layer.pad)};
}

namespace {

Tensor flatten_batch(const Tensor& x) {
    if (x.rank() == 2) return x;
    if (x.rank() != 4) throw DimensionError("expected rank-2 or rank-4 batch, got " +
                                            x.shape_string());
    std::size_t features = x.extent(1) * x.extent(2) * x.extent(3);
    return Tensor({x.extent(0), features}, std::vector<double>(x.data().begin(), x.data().end()));
}

Tensor apply_activation(const Tensor& pre, Activation act) {
    if (act == Activation::None) return pre;
    Tensor out = pre;
    for (double& v : out.raw()) v = v > 0.0 ? v : 0.0;
    return out;
}

// Subgradient of relu at 0 is 0.
void mask_relu_grad(Tensor& grad, const Tensor& pre) {
    for (std::size_t i = 0; i < grad.size(); ++i)
        if (pre[i] <= 0.0) grad[i] = 0.0;
}

Tensor dense_forward(const DenseLayer& layer, const Tensor& x) {
    if (x.extent(1) != layer.in_features())
        throw DimensionError("dense layer expects " + std::to_string(layer.in_features()) +
                             " inputs, got batch " + x.shape_string());
    Tensor pre = matmul(x, transpose(layer.weights));
    for (std::size_t i = 0; i < pre.extent(0); ++i)
        for (std::size_t j = 0; j < pre.extent(1); ++j) pre.at(i, j) += layer.bias[j];
    return pre;
}

// Conv forward via im2col; returns pre-activation [N x C_out x H' x W'].
Tensor conv_forward(const Conv2dLayer& layer, const Tensor& x) {
    if (x.rank() != 4 || x.extent(1) != layer.in_channels())
        throw DimensionError("conv layer expects " + std::to_string(layer.in_channels()) +
                             " input channels, got batch " + x.shape_string());
    const std::size_t n = x.extent(0);
    const auto [ho, wo] = conv_output_hw(layer, x.extent(2), x.extent(3));
    Tensor cols = im2col(x, layer.kh(), layer.kw(), layer.stride, layer.pad);
    Tensor wmat({layer.out_channels(), layer.in_channels() * layer.kh() * layer.kw()},
                std::vector<double>(layer.weights.data().begin(), layer.weights.data().end()));
    Tensor out_cols = matmul(cols, transpose(wmat));  // [N*H'*W' x C_out]
    Tensor pre({n, layer.out_channels(), ho, wo});
    for (std::size_t in = 0; in < n; ++in)
        for (std::size_t oy = 0; oy < ho; ++oy)
            for (std::size_t ox = 0; ox < wo; ++ox)
                for (std::size_t c = 0; c < layer.out_channels(); ++c)
                    pre[((in * layer.out_channels() + c) * ho + oy) * wo + ox] =
                        out_cols.at((in * ho + oy) * wo + ox, c) + layer.bias[c];
    return pre;
}

}  // namespace

Tensor forward(const Network& net, const Tensor& x) {
    ForwardCache cache;
    return forward(net, x, cache);
}

Tensor forward(const Network& net, const Tensor& x, ForwardCache& cache) {
    cache.input = x;
    cache.layer_inputs.clear();
    cache.pre_activations.clear();
    cache.network_stamp = network_stamp(net);

    Tensor cur = x;
    for (const auto& layer : net.hidden) {
        if (layer.is_dense()) {
            cur = flatten_batch(cur);
            cache.layer_inputs.push_back(cur);
            const auto& d = std::get<DenseLayer>(layer.impl);
            Tensor pre = dense_forward(d, cur);
            cache.pre_activations.push_back(pre);
            cur = apply_activation(pre, d.activation);
        } else {
            cache.layer_inputs.push_back(cur);
            const auto& c = std::get<Conv2dLayer>(layer.impl);
            Tensor pre = conv_forward(c, cur);
            cache.pre_activations.push_back(pre);
            cur = apply_activation(pre, c.activation);
        }
    }
    cur = flatten_batch(cur);
    cache.layer_inputs.push_back(cur);
    return dense_forward(net.classifier, cur);
}

Gradients backward(const Network& net, const ForwardCache& cache, const Tensor& grad_logits) {
    if (cache.network_stamp != network_stamp(net))
        throw UsageError("backward called with a cache from a different network structure");
    if (cache.layer_inputs.size() != net.hidden.size() + 1)
        throw UsageError("forward cache is incomplete");

    Gradients g;
    g.weight_grads.resize(net.hidden.size());
    g.bias_grads.resize(net.hidden.size());

    // Classifier: logits = a * W^T + b.
    const Tensor& clf_in = cache.layer_inputs.back();
    g.classifier_weight_grad = matmul(transpose(grad_logits), clf_in);
    g.classifier_bias_grad = Tensor({net.classifier.out_features()});
    for (std::size_t i = 0; i < grad_logits.extent(0); ++i)
        for (std::size_t j = 0; j < grad_logits.extent(1); ++j)
            g.classifier_bias_grad[j] += grad_logits.at(i, j);
    Tensor grad_cur = matmul(grad_logits, net.classifier.weights);  // flat grad w.r.t. clf input

    for (std::size_t li = net.hidden.size(); li-- > 0;) {
        const Layer& layer = net.hidden[li];
        const Tensor& pre = cache.pre_activations[li];
        const Tensor& in = cache.layer_inputs[li];
        if (layer.is_dense()) {
            const auto& d = std::get<DenseLayer>(layer.impl);
            Tensor grad_pre = grad_cur;  // already [N x C_out]
            if (d.activation == Activation::Relu) mask_relu_grad(grad_pre, pre);
            g.weight_grads[li] = matmul(transpose(grad_pre), in);
            g.bias_grads[li] = Tensor({d.out_features()});
            for (std::size_t i = 0; i < grad_pre.extent(0); ++i)
                for (std::size_t j = 0; j < grad_pre.extent(1); ++j)
                    g.bias_grads[li][j] += grad_pre.at(i, j);
            grad_cur = matmul(grad_pre, d.weights);
        } else {
            const auto& c = std::get<Conv2dLayer>(layer.impl);
            // grad_cur may arrive flattened from a downstream dense layer.
            Tensor grad_pre(pre.shape(),
                            std::vector<double>(grad_cur.data().begin(), grad_cur.data().end()));
            if (c.activation == Activation::Relu) mask_relu_grad(grad_pre, pre);

            const std::size_t n = in.extent(0);
            const auto [ho, wo] = conv_output_hw(c, in.extent(2), in.extent(3));
            Tensor grad_cols({n * ho * wo, c.out_channels()});
            for (std::size_t ib = 0; ib < n; ++ib)
                for (std::size_t oc = 0; oc < c.out_channels(); ++oc)
                    for (std::size_t oy = 0; oy < ho; ++oy)
                        for (std::size_t ox = 0; ox < wo; ++ox)
                            grad_cols.at((ib * ho + oy) * wo + ox, oc) =
                                grad_pre[((ib * c.out_channels() + oc) * ho + oy) * wo + ox];

            Tensor cols = im2col(in, c.kh(), c.kw(), c.stride, c.pad);
            Tensor wgrad_mat = matmul(transpose(grad_cols), cols);
            g.weight_grads[li] = Tensor(
                c.weights.shape(),
                std::vector<double>(wgrad_mat.data().begin(), wgrad_mat.data().end()));
            g.bias_grads[li] = Tensor({c.out_channels()});
            for (std::size_t r = 0; r < grad_cols.extent(0); ++r)
                for (std::size_t oc = 0; oc < c.out_channels(); ++oc)
                    g.bias_grads[li][oc] += grad_cols.at(r, oc);

            Tensor wmat({c.out_channels(), c.in_channels() * c.kh() * c.kw()},
                        std::vector<double>(c.weights.data().begin(), c.weights.data().end()));
            Tensor grad_in_cols = matmul(grad_cols, wmat);
            grad_cur = col2im(grad_in_cols, in.shape(), c.kh(), c.kw(), c.stride, c.pad);
            // Flatten for uniform handling; upstream conv reshapes as needed.
            grad_cur = flatten_batch(grad_cur);
        }
    }
    return g;
}

LossAndGrad softmax_cross_entropy(const Tensor& logits, const std::vector<std::size_t>& labels) {
    if (logits.rank() != 2) throw DimensionError("logits must be rank-2");
    const std::size_t batch = logits.extent(0), classes = logits.extent(1);
    if (labels.size() != batch) throw DataError("label count does not match batch size");

    LossAndGrad out{0.0, Tensor(logits.shape())};
    for (std::size_t i = 0; i < batch; ++i) {
        if (labels[i] >= classes)
            throw DataError("label " + std::to_string(labels[i]) + " out of range [0, " +
                            std::to_string(classes) + ")");
        double maxv = logits.at(i, 0);
        for (std::size_t j = 1; j < classes; ++j) maxv = std::max(maxv, logits.at(i, j));
        double denom = 0.0;
        for (std::size_t j = 0; j < classes; ++j) denom += std::exp(logits.at(i, j) - maxv);
        const double log_denom = std::log(denom);
        out.loss += -(logits.at(i, labels[i]) - maxv - log_denom);
        for (std::size_t j = 0; j < classes; ++j) {
            const double p = std::exp(logits.at(i, j) - maxv) / denom;
            out.grad_logits.at(i, j) =
                (p - (j == labels[i] ? 1.0 : 0.0)) / static_cast<double>(batch);
        }
    }
    out.loss /= static_cast<double>(batch);
    return out;
}

Tensor neuron_matrix(const Layer& layer) {
    if (layer.is_dense()) return std::get<DenseLayer>(layer.impl).weights;
    const auto& c = std::get<Conv2dLayer>(layer.impl);
    return Tensor({c.out_channels(), c.in_channels() * c.kh() * c.kw()},
                  std::vector<double>(c.weights.data().begin(), c.weights.data().end()));
}

void set_neuron_matrix(Layer& layer, const Tensor& m) {
    if (layer.is_dense()) {
        auto& d = std::get<DenseLayer>(layer.impl);
        if (!m.same_shape(d.weights))
            throw DimensionError("neuron matrix shape mismatch: " + m.shape_string());
        d.weights = m;
    } else {
        auto& c = std::get<Conv2dLayer>(layer.impl);
        if (m.extent(0) != c.out_channels() ||
            m.extent(1) != c.in_channels() * c.kh() * c.kw())
            throw DimensionError("neuron matrix shape mismatch: " + m.shape_string());
        c.weights = Tensor(c.weights.shape(),
                           std::vector<double>(m.data().begin(), m.data().end()));
    }
}

void validate_network(const Network& net) {
    std::vector<std::size_t> cur = net.input_shape;
    bool seen_dense = false;
    for (std::size_t li = 0; li < net.hidden.size(); ++li) {
        const Layer& layer = net.hidden[li];
        if (layer.is_dense()) {
            seen_dense = true;
            std::size_t features = 1;
            for (std::size_t e : cur) features *= e;
            const auto& d = std::get<DenseLayer>(layer.impl);
            if (d.in_features() != features)
                throw ConfigError("hidden layer " + std::to_string(li) + " expects " +
                                  std::to_string(d.in_features()) + " inputs but receives " +
                                  std::to_string(features));
            cur = {d.out_features()};
        } else {
            if (seen_dense) throw ConfigError("conv layer after dense layer is not supported");
            if (cur.size() != 3) throw ConfigError("conv layer requires [C x H x W] input");
            const auto& c = std::get<Conv2dLayer>(layer.impl);
            if (c.in_channels() != cur[0])
                throw ConfigError("hidden layer " + std::to_string(li) + " expects " +
                                  std::to_string(c.in_channels()) + " channels but receives " +
                                  std::to_string(cur[0]));
            const auto [ho, wo] = conv_output_hw(c, cur[1], cur[2]);
            cur = {c.out_channels(), ho, wo};
        }
    }
    std::size_t features = 1;
    for (std::size_t e : cur) features *= e;
    if (net.classifier.in_features() != features)
        throw ConfigError("classifier expects " + std::to_string(net.classifier.in_features()) +
                          " inputs but receives " + std::to_string(features));
    if (net.classifier.activation != Activation::None)
        throw ConfigError("classifier must have no activation");
}

namespace {

constexpr char kCheckpointMagic[9] = "NGCKPT01";

void write_doubles(std::ofstream& os, const Tensor& t) {
    os.write(reinterpret_cast<const char*>(t.data().data()),
             static_cast<std::streamsize>(t.size() * sizeof(double)));
}

Tensor read_doubles(std::ifstream& is, std::vector<std::size_t> shape) {
    Tensor t(std::move(shape));
    is.read(reinterpret_cast<char*>(t.data().data()),
            static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!is) throw DataError("checkpoint truncated while reading tensor data");
    return t;
}

}  // namespace

void save_checkpoint(const Network& net, const std::string& path) {
    nlohmann::json header;
    header["input_shape"] = net.input_shape;
    header["layers"] = nlohmann::json::array();
    for (const auto& l : net.hidden) {
        nlohmann::json j;
        if (l.is_dense()) {
            const auto& d = std::get<DenseLayer>(l.impl);
            j["type"] = "dense";
            j["out"] = d.out_features();
            j["in"] = d.in_features();
            j["activation"] = activation_name(d.activation);
        } else {
            const auto& c = std::get<Conv2dLayer>(l.impl);
            j["type"] = "conv2d";
            j["out_channels"] = c.out_channels();
            j["in_channels"] = c.in_channels();
            j["kh"] = c.kh();
            j["kw"] = c.kw();
            j["stride"] = c.stride;
            j["pad"] = c.pad;
            j["activation"] = activation_name(c.activation);
        }
        j["has_snapshot"] = l.weight_sum_previous.has_value();
        header["layers"].push_back(j);
    }
    header["classifier"] = {{"out", net.classifier.out_features()},
                            {"in", net.classifier.in_features()}};

    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot open checkpoint for writing: " + path);
    os.write(kCheckpointMagic, 8);
    const std::string hs = header.dump();
    const std::uint64_t hlen = hs.size();
    os.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    os.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    for (const auto& l : net.hidden) {
        if (l.is_dense()) {
            write_doubles(os, std::get<DenseLayer>(l.impl).weights);
            write_doubles(os, std::get<DenseLayer>(l.impl).bias);
        } else {
            write_doubles(os, std::get<Conv2dLayer>(l.impl).weights);
            write_doubles(os, std::get<Conv2dLayer>(l.impl).bias);
        }
        if (l.weight_sum_previous) {
            const double s = *l.weight_sum_previous;
            os.write(reinterpret_cast<const char*>(&s), sizeof(s));
        }
    }
    write_doubles(os, net.classifier.weights);
    write_doubles(os, net.classifier.bias);
    if (!os) throw DataError("checkpoint write failed: " + path);
}

Network load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open checkpoint: " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kCheckpointMagic, 8) != 0)
        throw DataError("not a checkpoint file (bad magic): " + path);
    std::uint64_t hlen = 0;
    is.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    std::string hs(hlen, '\0');
    is.read(hs.data(), static_cast<std::streamsize>(hlen));
    if (!is) throw DataError("checkpoint truncated while reading header");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(hs);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("corrupt checkpoint header: ") + e.what());
    }

    Network net;
    net.input_shape = header.at("input_shape").get<std::vector<std::size_t>>();
    for (const auto& j : header.at("layers")) {
        Layer l;
        const std::string type = j.at("type");
        if (type == "dense") {
            DenseLayer d;
            d.weights = read_doubles(is, {j.at("out"), j.at("in")});
            d.bias = read_doubles(is, {j.at("out")});
            d.activation = activation_from_name(j.at("activation"));
            l.impl = std::move(d);
        } else if (type == "conv2d") {
            Conv2dLayer c;
            c.weights = read_doubles(is, {j.at("out_channels"), j.at("in_channels"), j.at("kh"),
                                          j.at("kw")});
            c.bias = read_doubles(is, {j.at("out_channels")});
            c.stride = j.at("stride");
            c.pad = j.at("pad");
            c.activation = activation_from_name(j.at("activation"));
            l.impl = std::move(c);
        } else {
            throw DataError("unknown layer type in checkpoint: " + type);
        }
        if (j.at("has_snapshot").get<bool>()) {
            double s = 0.0;
            is.read(reinterpret_cast<char*>(&s), sizeof(s));
            if (!is) throw DataError("checkpoint truncated while reading snapshot");
            l.weight_sum_previous = s;
        }
        net.hidden.push_back(std::move(l));
    }
    const auto& cj = header.at("classifier");
    net.classifier.weights = read_doubles(is, {cj.at("out"), cj.at("in")});
    net.classifier.bias = read_doubles(is, {cj.at("out")});
    net.classifier.activation = Activation::None;
    validate_network(net);
    return net;
}

}  // namespace neurogrow
