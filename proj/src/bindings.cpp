#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "neurogrow/analysis.hpp"
#include "neurogrow/config.hpp"
#include "neurogrow/data.hpp"
#include "neurogrow/growth.hpp"
#include "neurogrow/network.hpp"
#include "neurogrow/similarity.hpp"
#include "neurogrow/trainer.hpp"

namespace py = pybind11;
using namespace neurogrow;

namespace {

Tensor tensor_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    std::vector<std::size_t> shape(a.ndim());
    for (py::ssize_t d = 0; d < a.ndim(); ++d) shape[d] = static_cast<std::size_t>(a.shape(d));
    std::vector<double> data(a.data(), a.data() + a.size());
    return Tensor(std::move(shape), std::move(data));
}

py::array_t<double> array_from_tensor(const Tensor& t) {
    std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
    py::array_t<double> out(shape);
    std::copy(t.data().begin(), t.data().end(), out.mutable_data());
    return out;
}

RegConfig reg_config_from_kwargs(double lambda, std::size_t n_iters, double step_size,
                                 bool enable_sim_loss, bool enable_weight_penalty,
                                 bool literal_eq5, double epsilon) {
    RegConfig cfg;
    cfg.lambda = lambda;
    cfg.n_iters = n_iters;
    cfg.step_size = step_size;
    cfg.enable_sim_loss = enable_sim_loss;
    cfg.enable_weight_penalty = enable_weight_penalty;
    cfg.literal_eq5 = literal_eq5;
    cfg.epsilon = epsilon;
    return cfg;
}

}  // namespace

PYBIND11_MODULE(_neurogrow, m) {
    m.doc() = "Growing neural networks with a neuron-similarity regularizer";

    m.def(
        "similarity_map",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& w) {
            return array_from_tensor(similarity_map(tensor_from_array(w)).values);
        },
        py::arg("neuron_matrix"),
        "Pairwise cosine-similarity map between neuron weight rows");

    m.def(
        "mean_offdiag_abs",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& w) {
            return mean_offdiag_abs(similarity_map(tensor_from_array(w)));
        },
        py::arg("neuron_matrix"), "Mean absolute off-diagonal cosine similarity (mu_sim)");

    m.def(
        "similarity_loss_grad",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& w) {
            auto r = similarity_loss_grad(tensor_from_array(w));
            return py::make_tuple(r.value, array_from_tensor(r.grad));
        },
        py::arg("neuron_matrix"), "mu_sim and its analytic gradient w.r.t. the weight rows");

    m.def(
        "weight_change_penalty",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& w,
           double weight_sum_previous, double lambda, double epsilon, bool literal_eq5) {
            RegConfig cfg = reg_config_from_kwargs(lambda, 1, 1e-2, true, true, literal_eq5,
                                                   epsilon);
            auto r = weight_change_penalty(tensor_from_array(w),
                                           LayerSnapshot{weight_sum_previous}, cfg);
            return py::make_tuple(r.value, array_from_tensor(r.grad),
                                  r.disabled_degenerate_snapshot);
        },
        py::arg("w_current"), py::arg("weight_sum_previous"), py::arg("lambda_") = 0.1,
        py::arg("epsilon") = 1e-12, py::arg("literal_eq5") = false,
        "Weight-sum stability penalty and its gradient");

    m.def(
        "reg_step",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& w,
           double weight_sum_previous, double lambda, double step_size, bool enable_sim_loss,
           bool enable_weight_penalty, bool literal_eq5, double epsilon) {
            RegConfig cfg = reg_config_from_kwargs(lambda, 1, step_size, enable_sim_loss,
                                                   enable_weight_penalty, literal_eq5, epsilon);
            auto r = reg_step(tensor_from_array(w), LayerSnapshot{weight_sum_previous}, cfg);
            return py::make_tuple(array_from_tensor(r.weights), r.loss_before);
        },
        py::arg("w"), py::arg("weight_sum_previous"), py::arg("lambda_") = 0.1,
        py::arg("step_size") = 1e-2, py::arg("enable_sim_loss") = true,
        py::arg("enable_weight_penalty") = true, py::arg("literal_eq5") = false,
        py::arg("epsilon") = 1e-12,
        "One gradient-descent step on the combined regularization loss");

    m.def(
        "two_spirals",
        [](std::size_t n_per_class, double noise_std, std::uint64_t seed) {
            Dataset ds = make_two_spirals(n_per_class, noise_std, seed);
            std::vector<std::int64_t> labels(ds.labels.begin(), ds.labels.end());
            return py::make_tuple(array_from_tensor(ds.inputs), labels);
        },
        py::arg("n_per_class"), py::arg("noise_std") = 0.0, py::arg("seed") = 0,
        "Two interleaved spirals dataset");

    m.def(
        "train",
        [](const std::string& config_json, const std::string& out_dir) {
            nlohmann::json j = nlohmann::json::parse(config_json);
            const TrainConfig cfg = parse_train_config(resolve_config(j));
            RunResult r = run_training(cfg, out_dir);
            py::dict out;
            out["epochs"] = r.report.rows.size();
            out["final_params"] = r.net.parameter_count();
            out["growth_events"] = r.report.events.size();
            out["wall_seconds"] = r.report.wall_seconds;
            if (!r.report.rows.empty()) {
                out["final_test_acc"] = r.report.rows.back().test_acc;
                out["final_mu_sim"] = r.report.rows.back().mu_sim;
            }
            return out;
        },
        py::arg("config_json"), py::arg("out_dir") = "",
        "Run the full training loop from a JSON config string");

    m.def(
        "analyze_checkpoint",
        [](const std::string& checkpoint_path, std::size_t layer_index, double threshold) {
            Network net = load_checkpoint(checkpoint_path);
            return near_zero_fraction(net, layer_index, threshold);
        },
        py::arg("checkpoint_path"), py::arg("layer_index"), py::arg("threshold") = 0.5,
        "Near-zero similarity fraction for one layer of a saved checkpoint");
}
