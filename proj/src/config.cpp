#include "neurogrow/config.hpp"

#include <fstream>

#include "neurogrow/errors.hpp"

namespace neurogrow {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::vector<std::string>& allowed,
                const std::string& context) {
    if (!j.is_object()) throw ConfigError("config section '" + context + "' must be an object");
    for (const auto& [key, value] : j.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw ConfigError("unknown config key '" + context + key + "'");
    }
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config key '" + key + "' has the wrong type");
    }
}

DatasetConfig parse_dataset(const json& j) {
    check_keys(j,
               {"type", "n_per_class", "noise_std", "seed", "images", "labels", "test_images",
                "test_labels", "path", "label_column", "test_fraction"},
               "dataset.");
    DatasetConfig d;
    if (!j.contains("type")) throw ConfigError("dataset.type is required");
    d.type = j.at("type").get<std::string>();
    d.n_per_class = get_or<std::size_t>(j, "n_per_class", d.n_per_class);
    d.noise_std = get_or<double>(j, "noise_std", d.noise_std);
    d.data_seed = get_or<std::uint64_t>(j, "seed", d.data_seed);
    d.images_path = get_or<std::string>(j, "images", "");
    d.labels_path = get_or<std::string>(j, "labels", "");
    d.test_images_path = get_or<std::string>(j, "test_images", "");
    d.test_labels_path = get_or<std::string>(j, "test_labels", "");
    d.csv_path = get_or<std::string>(j, "path", "");
    d.label_column = get_or<std::string>(j, "label_column", "");
    d.test_fraction = get_or<double>(j, "test_fraction", d.test_fraction);
    if (d.type != "two_spirals" && d.type != "idx" && d.type != "csv")
        throw ConfigError("dataset.type must be two_spirals, idx, or csv");
    if (d.type == "idx" && (d.images_path.empty() || d.labels_path.empty()))
        throw ConfigError("dataset.images and dataset.labels are required for idx datasets");
    if (d.type == "csv" && (d.csv_path.empty() || d.label_column.empty()))
        throw ConfigError("dataset.path and dataset.label_column are required for csv datasets");
    return d;
}

ArchitectureConfig parse_architecture(const json& j) {
    check_keys(j, {"type", "hidden", "conv_layers"}, "architecture.");
    ArchitectureConfig a;
    if (!j.contains("type")) throw ConfigError("architecture.type is required");
    a.type = j.at("type").get<std::string>();
    if (a.type == "mlp") {
        if (!j.contains("hidden")) throw ConfigError("architecture.hidden is required for mlp");
        a.hidden_widths = j.at("hidden").get<std::vector<std::size_t>>();
        if (a.hidden_widths.empty()) throw ConfigError("architecture.hidden must be nonempty");
    } else if (a.type == "conv") {
        if (!j.contains("conv_layers"))
            throw ConfigError("architecture.conv_layers is required for conv");
        for (const auto& cj : j.at("conv_layers")) {
            check_keys(cj, {"out_channels", "kernel", "stride", "pad"},
                       "architecture.conv_layers[].");
            ArchitectureConfig::ConvSpec spec{};
            spec.out_channels = cj.at("out_channels").get<std::size_t>();
            spec.kernel = cj.at("kernel").get<std::size_t>();
            spec.stride = get_or<std::size_t>(cj, "stride", 1);
            spec.pad = get_or<std::size_t>(cj, "pad", 0);
            if (spec.out_channels < 1 || spec.kernel < 1 || spec.stride < 1)
                throw ConfigError("conv layer extents must be >= 1");
            a.conv_layers.push_back(spec);
        }
        if (a.conv_layers.empty()) throw ConfigError("architecture.conv_layers must be nonempty");
    } else {
        throw ConfigError("architecture.type must be mlp or conv");
    }
    return a;
}

}  // namespace

TrainConfig parse_train_config(const nlohmann::json& j) {
    check_keys(j,
               {"seed", "epochs", "batch_size", "dataset", "architecture", "optimizer", "growth",
                "reg", "reg_include_task_loss", "regularized_layers"},
               "");
    TrainConfig cfg;
    cfg.seed = get_or<std::uint64_t>(j, "seed", cfg.seed);
    if (!j.contains("epochs")) throw ConfigError("epochs is required");
    cfg.epochs = j.at("epochs").get<std::size_t>();
    cfg.batch_size = get_or<std::size_t>(j, "batch_size", cfg.batch_size);
    if (!j.contains("dataset")) throw ConfigError("dataset is required");
    cfg.dataset = parse_dataset(j.at("dataset"));
    if (!j.contains("architecture")) throw ConfigError("architecture is required");
    cfg.architecture = parse_architecture(j.at("architecture"));

    if (j.contains("optimizer")) {
        const auto& oj = j.at("optimizer");
        check_keys(oj, {"base_lr", "momentum", "restart_schedule_on_growth"}, "optimizer.");
        cfg.optimizer.base_lr = get_or<double>(oj, "base_lr", cfg.optimizer.base_lr);
        cfg.optimizer.momentum = get_or<double>(oj, "momentum", cfg.optimizer.momentum);
        cfg.optimizer.restart_schedule_on_growth =
            get_or<bool>(oj, "restart_schedule_on_growth", false);
    }
    if (j.contains("growth")) {
        const auto& gj = j.at("growth");
        check_keys(gj,
                   {"enabled", "every_epochs", "operator", "fraction", "split_epsilon",
                    "random_init_std", "hybrid_split_share"},
                   "growth.");
        cfg.growth.enabled = get_or<bool>(gj, "enabled", cfg.growth.enabled);
        cfg.growth.every_epochs = get_or<std::size_t>(gj, "every_epochs", cfg.growth.every_epochs);
        cfg.growth.policy.op =
            growth_operator_from_name(get_or<std::string>(gj, "operator", "hybrid"));
        cfg.growth.policy.fraction = get_or<double>(gj, "fraction", cfg.growth.policy.fraction);
        cfg.growth.policy.split_epsilon =
            get_or<double>(gj, "split_epsilon", cfg.growth.policy.split_epsilon);
        cfg.growth.policy.random_init_std =
            get_or<double>(gj, "random_init_std", cfg.growth.policy.random_init_std);
        cfg.growth.policy.hybrid_split_share =
            get_or<double>(gj, "hybrid_split_share", cfg.growth.policy.hybrid_split_share);
    }
    if (j.contains("reg")) {
        const auto& rj = j.at("reg");
        check_keys(rj,
                   {"lambda", "n_iters", "step_size", "enable_sim_loss", "enable_weight_penalty",
                    "literal_eq5", "epsilon"},
                   "reg.");
        cfg.reg.lambda = get_or<double>(rj, "lambda", cfg.reg.lambda);
        cfg.reg.n_iters = get_or<std::size_t>(rj, "n_iters", cfg.reg.n_iters);
        cfg.reg.step_size = get_or<double>(rj, "step_size", cfg.reg.step_size);
        cfg.reg.enable_sim_loss = get_or<bool>(rj, "enable_sim_loss", cfg.reg.enable_sim_loss);
        cfg.reg.enable_weight_penalty =
            get_or<bool>(rj, "enable_weight_penalty", cfg.reg.enable_weight_penalty);
        cfg.reg.literal_eq5 = get_or<bool>(rj, "literal_eq5", cfg.reg.literal_eq5);
        cfg.reg.epsilon = get_or<double>(rj, "epsilon", cfg.reg.epsilon);
    }
    cfg.reg_include_task_loss = get_or<bool>(j, "reg_include_task_loss", false);
    if (j.contains("regularized_layers")) {
        const auto& rl = j.at("regularized_layers");
        if (rl.is_string()) {
            if (rl.get<std::string>() != "all_hidden")
                throw ConfigError("regularized_layers must be \"all_hidden\" or an index array");
        } else {
            cfg.regularized_layers = rl.get<std::vector<std::size_t>>();
        }
    }
    cfg.validate();
    return cfg;
}

nlohmann::json load_config_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file: " + path);
    try {
        return nlohmann::json::parse(is);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("invalid JSON in " + path + ": " + e.what());
    }
}

void apply_override(nlohmann::json& config, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos)
        throw ConfigError("override must have the form key.path=value: " + assignment);
    const std::string path = assignment.substr(0, eq);
    const std::string value = assignment.substr(eq + 1);

    nlohmann::json* node = &config;
    std::size_t begin = 0;
    while (true) {
        const auto dot = path.find('.', begin);
        const std::string key = path.substr(begin, dot - begin);
        if (key.empty()) throw ConfigError("empty key segment in override: " + assignment);
        if (dot == std::string::npos) {
            nlohmann::json parsed = nlohmann::json::parse(value, nullptr, false);
            (*node)[key] = parsed.is_discarded() ? nlohmann::json(value) : parsed;
            return;
        }
        node = &(*node)[key];
        begin = dot + 1;
    }
}

nlohmann::json resolve_config(const nlohmann::json& j) {
    const TrainConfig cfg = parse_train_config(j);  // validates
    nlohmann::json out = j;
    out["seed"] = cfg.seed;
    out["epochs"] = cfg.epochs;
    out["batch_size"] = cfg.batch_size;
    out["optimizer"] = {{"base_lr", cfg.optimizer.base_lr},
                        {"momentum", cfg.optimizer.momentum},
                        {"restart_schedule_on_growth", cfg.optimizer.restart_schedule_on_growth}};
    out["growth"] = {{"enabled", cfg.growth.enabled},
                     {"every_epochs", cfg.growth.every_epochs},
                     {"operator", growth_operator_name(cfg.growth.policy.op)},
                     {"fraction", cfg.growth.policy.fraction},
                     {"split_epsilon", cfg.growth.policy.split_epsilon},
                     {"random_init_std", cfg.growth.policy.random_init_std},
                     {"hybrid_split_share", cfg.growth.policy.hybrid_split_share}};
    out["reg"] = {{"lambda", cfg.reg.lambda},
                  {"n_iters", cfg.reg.n_iters},
                  {"step_size", cfg.reg.step_size},
                  {"enable_sim_loss", cfg.reg.enable_sim_loss},
                  {"enable_weight_penalty", cfg.reg.enable_weight_penalty},
                  {"literal_eq5", cfg.reg.literal_eq5},
                  {"epsilon", cfg.reg.epsilon}};
    out["reg_include_task_loss"] = cfg.reg_include_task_loss;
    if (!out.contains("regularized_layers")) out["regularized_layers"] = "all_hidden";
    return out;
}

}  // namespace neurogrow
