#include "config.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace gradova::cli {

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& j, const std::string& path,
                         const std::set<std::string>& known) {
    if (!j.is_object()) throw ConfigError("expected an object at '" + path + "'");
    for (const auto& [key, value] : j.items()) {
        if (!known.count(key))
            throw ConfigError("unknown key '" + (path.empty() ? key : path + "." + key) + "'");
    }
}

template <typename T>
T get_or(const json& j, const std::string& path, const char* key, T def) {
    if (!j.contains(key)) return def;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("invalid value for key '" +
                          (path.empty() ? std::string(key) : path + "." + key) + "'");
    }
}

nn::TrainConfig parse_train(const json& j, const std::string& path,
                            const nn::TrainConfig& defaults) {
    reject_unknown_keys(j, path,
                        {"learning_rate", "adam_beta1", "adam_beta2", "epochs",
                         "minibatch_size", "optimizer"});
    nn::TrainConfig cfg = defaults;
    cfg.learning_rate = get_or(j, path, "learning_rate", cfg.learning_rate);
    cfg.adam_beta1 = get_or(j, path, "adam_beta1", cfg.adam_beta1);
    cfg.adam_beta2 = get_or(j, path, "adam_beta2", cfg.adam_beta2);
    cfg.epochs = get_or(j, path, "epochs", cfg.epochs);
    cfg.minibatch_size = get_or(j, path, "minibatch_size", cfg.minibatch_size);
    const std::string opt = get_or<std::string>(
        j, path, "optimizer", cfg.optimizer == nn::Optimizer::adam ? "adam" : "sgd");
    if (opt == "adam") cfg.optimizer = nn::Optimizer::adam;
    else if (opt == "sgd") cfg.optimizer = nn::Optimizer::sgd;
    else throw ConfigError("invalid value for key '" + path + ".optimizer'");
    if (!(cfg.learning_rate >= 0.0) || cfg.epochs < 1 || cfg.adam_beta1 < 0.0 ||
        cfg.adam_beta1 >= 1.0 || cfg.adam_beta2 < 0.0 || cfg.adam_beta2 >= 1.0)
        throw ConfigError("invalid training settings under '" + path + "'");
    return cfg;
}

json train_to_json(const nn::TrainConfig& cfg) {
    return {{"learning_rate", cfg.learning_rate},
            {"adam_beta1", cfg.adam_beta1},
            {"adam_beta2", cfg.adam_beta2},
            {"epochs", cfg.epochs},
            {"minibatch_size", cfg.minibatch_size},
            {"optimizer", cfg.optimizer == nn::Optimizer::adam ? "adam" : "sgd"}};
}

data::SourceSpec parse_source(const json& j, const std::string& path,
                              const data::SourceSpec& defaults, bool allow_ood_spec,
                              bool* shared_layout = nullptr) {
    std::set<std::string> known{"kind",       "class_count", "dim",      "samples_per_class",
                                "separation", "path",        "labels_path", "has_label"};
    if (allow_ood_spec) known.insert("ood_spec");
    if (shared_layout) known.insert("layout");
    reject_unknown_keys(j, path, known);
    if (shared_layout && j.contains("layout")) {
        const std::string layout = get_or<std::string>(j, path, "layout", "shared");
        if (layout == "shared") *shared_layout = true;
        else if (layout == "independent") *shared_layout = false;
        else throw ConfigError("invalid value for key '" + path + ".layout'");
    }
    data::SourceSpec s = defaults;
    s.kind = get_or<std::string>(j, path, "kind", s.kind);
    s.class_count = get_or(j, path, "class_count", s.class_count);
    s.dim = get_or(j, path, "dim", s.dim);
    s.samples_per_class = get_or(j, path, "samples_per_class", s.samples_per_class);
    s.separation = get_or(j, path, "separation", s.separation);
    s.path = get_or<std::string>(j, path, "path", s.path);
    s.labels_path = get_or<std::string>(j, path, "labels_path", s.labels_path);
    s.has_label = get_or(j, path, "has_label", s.has_label);
    if (s.kind != "blobs" && s.kind != "rings" && s.kind != "idx_file" && s.kind != "csv_file")
        throw ConfigError("invalid value for key '" + path + ".kind'");
    if (s.class_count < 1 || s.dim < 1 || s.samples_per_class < 1 || s.separation < 0.0)
        throw ConfigError("invalid generator settings under '" + path + "'");
    return s;
}

json source_to_json(const data::SourceSpec& s) {
    json j{{"kind", s.kind},
           {"class_count", s.class_count},
           {"dim", s.dim},
           {"samples_per_class", s.samples_per_class},
           {"separation", s.separation}};
    if (!s.path.empty()) j["path"] = s.path;
    if (!s.labels_path.empty()) j["labels_path"] = s.labels_path;
    if (s.kind == "csv_file") j["has_label"] = s.has_label;
    return j;
}

loop::LoopConfig parse_loop(const json& j, const std::string& path,
                            const loop::LoopConfig& defaults, int* n_batches) {
    reject_unknown_keys(j, path,
                        {"batch_size_in", "batch_size_ood", "n_batches", "selection_fraction",
                         "discriminator_train", "score_threshold_policy", "ablation",
                         "batch_vote_rule", "disc_batch_stats_at_inference"});
    loop::LoopConfig cfg = defaults;
    cfg.batch_size_in = get_or(j, path, "batch_size_in", cfg.batch_size_in);
    cfg.batch_size_ood = get_or(j, path, "batch_size_ood", cfg.batch_size_ood);
    *n_batches = get_or(j, path, "n_batches", *n_batches);
    cfg.selection_fraction = get_or(j, path, "selection_fraction", cfg.selection_fraction);
    if (j.contains("discriminator_train"))
        cfg.discriminator_train = parse_train(j.at("discriminator_train"),
                                              path + ".discriminator_train",
                                              cfg.discriminator_train);
    if (j.contains("score_threshold_policy")) {
        const auto& p = j.at("score_threshold_policy");
        if (p.is_string() && p.get<std::string>() == "tpr95") {
            cfg.threshold_policy = loop::ThresholdPolicy::tpr95;
        } else if (p.is_number()) {
            cfg.threshold_policy = loop::ThresholdPolicy::fixed;
            cfg.fixed_threshold = p.get<double>();
        } else {
            throw ConfigError("invalid value for key '" + path + ".score_threshold_policy'");
        }
    }
    if (j.contains("ablation")) {
        const auto& a = j.at("ablation");
        reject_unknown_keys(a, path + ".ablation",
                            {"disable_discriminator", "random_pseudo_labels", "no_reinit",
                             "refresh_label"});
        cfg.ablation.disable_discriminator = get_or(a, path + ".ablation",
                                                    "disable_discriminator",
                                                    cfg.ablation.disable_discriminator);
        cfg.ablation.random_pseudo_labels = get_or(a, path + ".ablation",
                                                   "random_pseudo_labels",
                                                   cfg.ablation.random_pseudo_labels);
        cfg.ablation.no_reinit = get_or(a, path + ".ablation", "no_reinit",
                                        cfg.ablation.no_reinit);
        cfg.ablation.refresh_label = get_or(a, path + ".ablation", "refresh_label",
                                            cfg.ablation.refresh_label);
    }
    const std::string rule = get_or<std::string>(
        j, path, "batch_vote_rule",
        cfg.batch_vote_rule == loop::BatchVoteRule::mean_sigmoid ? "mean" : "majority");
    if (rule == "mean") cfg.batch_vote_rule = loop::BatchVoteRule::mean_sigmoid;
    else if (rule == "majority") cfg.batch_vote_rule = loop::BatchVoteRule::majority;
    else throw ConfigError("invalid value for key '" + path + ".batch_vote_rule'");
    cfg.disc_batch_stats_at_inference = get_or(j, path, "disc_batch_stats_at_inference",
                                               cfg.disc_batch_stats_at_inference);
    if (cfg.batch_size_in < 1 || cfg.batch_size_ood < 1 || *n_batches < 1 ||
        !(cfg.selection_fraction > 0.0) || cfg.selection_fraction > 1.0)
        throw ConfigError("invalid stream settings under '" + path + "'");
    return cfg;
}

json loop_to_json(const loop::LoopConfig& cfg, int n_batches) {
    json policy = cfg.threshold_policy == loop::ThresholdPolicy::tpr95
                      ? json("tpr95")
                      : json(cfg.fixed_threshold);
    return {{"batch_size_in", cfg.batch_size_in},
            {"batch_size_ood", cfg.batch_size_ood},
            {"n_batches", n_batches},
            {"selection_fraction", cfg.selection_fraction},
            {"discriminator_train", train_to_json(cfg.discriminator_train)},
            {"score_threshold_policy", policy},
            {"ablation",
             {{"disable_discriminator", cfg.ablation.disable_discriminator},
              {"random_pseudo_labels", cfg.ablation.random_pseudo_labels},
              {"no_reinit", cfg.ablation.no_reinit},
              {"refresh_label", cfg.ablation.refresh_label}}},
            {"batch_vote_rule",
             cfg.batch_vote_rule == loop::BatchVoteRule::mean_sigmoid ? "mean" : "majority"},
            {"disc_batch_stats_at_inference", cfg.disc_batch_stats_at_inference}};
}

}  // namespace

CliConfig parse_config(const json& j) {
    reject_unknown_keys(j, "",
                        {"seed", "output_dir", "dataset", "model", "stats", "loop", "eval",
                         "format", "artifacts"});
    CliConfig cfg;
    cfg.seed = get_or<uint64_t>(j, "", "seed", cfg.seed);
    cfg.output_dir = get_or<std::string>(j, "", "output_dir", cfg.output_dir);

    // Defaults mirror the desk-scale experiment in the README.
    cfg.spec.idd.separation = 6.0;
    cfg.spec.idd.samples_per_class = 200;
    cfg.spec.ood = cfg.spec.idd;
    cfg.spec.ood.separation = 3.6;

    if (j.contains("dataset")) {
        const auto& d = j.at("dataset");
        cfg.spec.idd = parse_source(d, "dataset", cfg.spec.idd, true);
        data::SourceSpec ood_default = cfg.spec.idd;
        ood_default.separation = 0.6 * cfg.spec.idd.separation;
        cfg.spec.ood = d.contains("ood_spec")
                           ? parse_source(d.at("ood_spec"), "dataset.ood_spec", ood_default,
                                          false, &cfg.spec.ood_share_layout)
                           : ood_default;
    }

    if (j.contains("model")) {
        const auto& m = j.at("model");
        reject_unknown_keys(m, "model", {"hidden_dims", "train"});
        cfg.spec.hidden_dims =
            get_or(m, "model", "hidden_dims", cfg.spec.hidden_dims);
        if (cfg.spec.hidden_dims.empty())
            throw ConfigError("invalid value for key 'model.hidden_dims'");
        if (m.contains("train"))
            cfg.spec.idd_train = parse_train(m.at("train"), "model.train", cfg.spec.idd_train);
    }

    if (j.contains("stats")) {
        const auto& s = j.at("stats");
        reject_unknown_keys(s, "stats", {"include_bias", "epsilon_scale"});
        cfg.spec.include_bias = get_or(s, "stats", "include_bias", cfg.spec.include_bias);
        cfg.spec.epsilon_scale = get_or(s, "stats", "epsilon_scale", cfg.spec.epsilon_scale);
        if (!(cfg.spec.epsilon_scale > 0.0))
            throw ConfigError("invalid value for key 'stats.epsilon_scale'");
    }

    if (j.contains("loop"))
        cfg.spec.loop_cfg = parse_loop(j.at("loop"), "loop", cfg.spec.loop_cfg,
                                       &cfg.spec.n_batches);

    cfg.one_class.idd_classes = cfg.spec.idd.class_count;
    if (j.contains("eval")) {
        const auto& e = j.at("eval");
        reject_unknown_keys(e, "eval",
                            {"test_samples_per_class", "n_runs", "batch_sizes", "one_class"});
        cfg.spec.test_per_class =
            get_or(e, "eval", "test_samples_per_class", cfg.spec.test_per_class);
        cfg.n_runs = get_or(e, "eval", "n_runs", cfg.n_runs);
        cfg.batch_sizes = get_or(e, "eval", "batch_sizes", cfg.batch_sizes);
        if (e.contains("one_class")) {
            const auto& oc = e.at("one_class");
            reject_unknown_keys(oc, "eval.one_class",
                                {"idd_classes", "memory_budget", "ood_stream", "n_batches",
                                 "separation_factor", "train_per_class", "test_per_class"});
            cfg.one_class.idd_classes =
                get_or(oc, "eval.one_class", "idd_classes", cfg.one_class.idd_classes);
            cfg.one_class.memory_budget =
                get_or(oc, "eval.one_class", "memory_budget", cfg.one_class.memory_budget);
            cfg.one_class.ood_stream =
                get_or(oc, "eval.one_class", "ood_stream", cfg.one_class.ood_stream);
            cfg.one_class.n_batches =
                get_or(oc, "eval.one_class", "n_batches", cfg.one_class.n_batches);
            cfg.one_class.ood_separation_factor = get_or(
                oc, "eval.one_class", "separation_factor", cfg.one_class.ood_separation_factor);
            cfg.one_class.train_per_class =
                get_or(oc, "eval.one_class", "train_per_class", cfg.one_class.train_per_class);
            cfg.one_class.test_per_class =
                get_or(oc, "eval.one_class", "test_per_class", cfg.one_class.test_per_class);
        }
        if (cfg.n_runs < 1 || cfg.spec.test_per_class < 1)
            throw ConfigError("invalid evaluation settings under 'eval'");
    }

    cfg.spec.root_seed = cfg.seed;
    cfg.spec.pure_batch_sizes = cfg.batch_sizes;

    // The one-class run shares the classifier/loop settings.
    cfg.one_class.dim = cfg.spec.idd.dim;
    cfg.one_class.separation = cfg.spec.idd.separation;
    cfg.one_class.hidden_dims = cfg.spec.hidden_dims;
    cfg.one_class.idd_train = cfg.spec.idd_train;
    cfg.one_class.include_bias = cfg.spec.include_bias;
    cfg.one_class.epsilon_scale = cfg.spec.epsilon_scale;
    cfg.one_class.loop_cfg = cfg.spec.loop_cfg;
    cfg.one_class.root_seed = cfg.seed;
    return cfg;
}

CliConfig load_config_file(const std::string& path) {
    return parse_config(parse_json_file(path));
}

nlohmann::json config_to_json(const CliConfig& cfg) {
    json dataset = source_to_json(cfg.spec.idd);
    dataset["ood_spec"] = source_to_json(cfg.spec.ood);
    dataset["ood_spec"]["layout"] = cfg.spec.ood_share_layout ? "shared" : "independent";
    return {{"seed", cfg.seed},
            {"output_dir", cfg.output_dir},
            {"dataset", dataset},
            {"model",
             {{"hidden_dims", cfg.spec.hidden_dims},
              {"train", train_to_json(cfg.spec.idd_train)}}},
            {"stats",
             {{"include_bias", cfg.spec.include_bias},
              {"epsilon_scale", cfg.spec.epsilon_scale}}},
            {"loop", loop_to_json(cfg.spec.loop_cfg, cfg.spec.n_batches)},
            {"eval",
             {{"test_samples_per_class", cfg.spec.test_per_class},
              {"n_runs", cfg.n_runs},
              {"batch_sizes", cfg.batch_sizes},
              {"one_class",
               {{"idd_classes", cfg.one_class.idd_classes},
                {"memory_budget", cfg.one_class.memory_budget},
                {"ood_stream", cfg.one_class.ood_stream},
                {"n_batches", cfg.one_class.n_batches},
                {"separation_factor", cfg.one_class.ood_separation_factor},
                {"train_per_class", cfg.one_class.train_per_class},
                {"test_per_class", cfg.one_class.test_per_class}}}}}};
}

GenDataSpec parse_gen_data_spec(const json& j) {
    reject_unknown_keys(j, "",
                        {"kind", "class_count", "dim", "samples_per_class", "separation",
                         "path", "labels_path", "has_label", "ood_spec", "seed",
                         "test_samples_per_class", "format", "artifacts"});
    GenDataSpec spec;
    spec.idd = parse_source(j, "", spec.idd, true);
    data::SourceSpec ood_default = spec.idd;
    ood_default.separation = 0.6 * spec.idd.separation;
    spec.ood = j.contains("ood_spec")
                   ? parse_source(j.at("ood_spec"), "ood_spec", ood_default, false,
                                  &spec.ood_share_layout)
                   : ood_default;
    spec.seed = get_or<uint64_t>(j, "", "seed", spec.seed);
    spec.test_samples_per_class =
        get_or(j, "", "test_samples_per_class", spec.idd.samples_per_class);
    return spec;
}

nlohmann::json gen_data_spec_to_json(const GenDataSpec& spec) {
    json j = source_to_json(spec.idd);
    j["ood_spec"] = source_to_json(spec.ood);
    j["ood_spec"]["layout"] = spec.ood_share_layout ? "shared" : "independent";
    j["seed"] = spec.seed;
    j["test_samples_per_class"] = spec.test_samples_per_class;
    return j;
}

nlohmann::json parse_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return json::parse(ss.str());
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("json parse error in '") + path + "': " + e.what());
    }
}

}  // namespace gradova::cli
