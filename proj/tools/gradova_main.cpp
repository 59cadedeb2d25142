#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "config.hpp"
#include "gradova/experiments.hpp"
#include "gradova/rng.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace gradova;
using cli::CliConfig;
using cli::ConfigError;

namespace {

// I/O problems exit with status 3.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string fmt(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory '" + dir.string() + "'");
}

json report_to_json(const eval::MetricReport& r) {
    return {{"auroc", r.auroc},
            {"aupr", r.aupr},
            {"n_positive", r.n_positive},
            {"n_negative", r.n_negative},
            {"batch_mode", r.batch_mode}};
}

void write_manifest(const CliConfig& cfg, const std::vector<std::string>& artifacts) {
    json j = cli::config_to_json(cfg);
    j["format"] = "gradova.manifest/1";
    j["artifacts"] = artifacts;
    write_text(fs::path(cfg.output_dir) / "manifest.json", j.dump(2) + "\n");
}

std::string plot_csv(const std::vector<loop::IterationRecord>& trace) {
    std::string out = "iteration,auroc,aupr,disc_accuracy,threshold,n_history\n";
    for (const auto& rec : trace) {
        out += std::to_string(rec.iteration) + ",";
        out += (rec.auroc ? fmt(*rec.auroc) : "") + ",";
        out += (rec.aupr ? fmt(*rec.aupr) : "") + ",";
        out += (rec.disc_accuracy ? fmt(*rec.disc_accuracy) : "") + ",";
        out += fmt(rec.threshold) + ",";
        out += std::to_string(rec.n_history) + "\n";
    }
    return out;
}

std::string text_report(const eval::StreamStage& stage, double idd_acc) {
    std::string out;
    char line[160];
    std::snprintf(line, sizeof(line), "%-18s %10s %10s\n", "report", "AUROC", "AUPR");
    out += line;
    std::snprintf(line, sizeof(line), "%-18s %10.4f %10.4f\n", "held_out",
                  stage.held_out_report.auroc, stage.held_out_report.aupr);
    out += line;
    for (const auto& r : stage.pure_batch_reports) {
        std::snprintf(line, sizeof(line), "%-18s %10.4f %10.4f\n", r.batch_mode.c_str(),
                      r.auroc, r.aupr);
        out += line;
    }
    out += "\n";
    std::snprintf(line, sizeof(line), "idd_test_accuracy  %10.4f\n", idd_acc);
    out += line;
    if (stage.disc_test_accuracy) {
        std::snprintf(line, sizeof(line), "disc_test_accuracy %10.4f\n",
                      *stage.disc_test_accuracy);
        out += line;
    }
    out += "\n";
    std::snprintf(line, sizeof(line), "%5s %10s %10s %10s %12s %10s\n", "iter", "AUROC",
                  "AUPR", "disc_acc", "threshold", "history");
    out += line;
    for (const auto& rec : stage.stream.trace) {
        std::snprintf(line, sizeof(line), "%5d %10.4f %10.4f %10.4f %12.4g %10d\n",
                      rec.iteration, rec.auroc.value_or(-1.0), rec.aupr.value_or(-1.0),
                      rec.disc_accuracy.value_or(-1.0), rec.threshold, rec.n_history);
        out += line;
    }
    return out;
}

json stage_report_json(const CliConfig& cfg, const eval::StreamStage& stage, double idd_acc) {
    json j;
    j["held_out"] = report_to_json(stage.held_out_report);
    json pure = json::array();
    for (const auto& r : stage.pure_batch_reports) pure.push_back(report_to_json(r));
    j["pure_batch"] = pure;
    j["idd_test_accuracy"] = idd_acc;
    j["disc_test_accuracy"] = stage.disc_test_accuracy
                                  ? json(*stage.disc_test_accuracy)
                                  : json(nullptr);
    j["selected_label"] =
        stage.selected_label ? json(*stage.selected_label) : json(nullptr);
    j["threshold"] = loop::current_threshold(stage.stream.state);
    const auto decisions = loop::final_decisions(stage.stream.state);
    int flagged = 0;
    for (bool d : decisions) flagged += d ? 1 : 0;
    j["history_flagged_outliers"] = flagged;
    j["history_size"] = static_cast<int>(decisions.size());
    if (cfg.n_runs > 1) {
        const auto summary = eval::run_repeated(cfg.spec, cfg.n_runs);
        j["repeated"] = {{"n_runs", cfg.n_runs},
                         {"auroc_mean", summary.auroc_mean},
                         {"auroc_std", summary.auroc_std},
                         {"aupr_mean", summary.aupr_mean},
                         {"aupr_std", summary.aupr_std}};
    }
    return j;
}

// Writes every stream-stage artifact and returns their names.
std::vector<std::string> write_stream_artifacts(const CliConfig& cfg,
                                                const eval::StreamStage& stage,
                                                double idd_acc) {
    const fs::path dir(cfg.output_dir);
    std::vector<std::string> artifacts;

    std::ostringstream trace;
    loop::write_trace_ndjson(stage.stream.trace, trace);
    write_text(dir / "trace.ndjson", trace.str());
    artifacts.push_back("trace.ndjson");

    write_text(dir / "report.json", stage_report_json(cfg, stage, idd_acc).dump(2) + "\n");
    artifacts.push_back("report.json");
    write_text(dir / "report.txt", text_report(stage, idd_acc));
    artifacts.push_back("report.txt");
    write_text(dir / "plot.csv", plot_csv(stage.stream.trace));
    artifacts.push_back("plot.csv");

    if (stage.stream.state.discriminator) {
        binary_classifier::save_discriminator(*stage.stream.state.discriminator,
                                              (dir / "discriminator.json").string());
        artifacts.push_back("discriminator.json");
    }
    return artifacts;
}

void require_artifact(const fs::path& path, const std::string& hint) {
    if (!fs::exists(path))
        throw ConfigError("missing " + hint + ": expected '" + path.string() + "'");
}

int cmd_gen_data(const std::string& spec_path, const std::string& out_dir) {
    const auto spec = cli::parse_gen_data_spec(cli::parse_json_file(spec_path));
    ensure_dir(out_dir);
    const fs::path dir(out_dir);

    // Layout seed slots follow the experiment driver: 1 for in-distribution,
    // 3 for independent outliers; draws 0/1 are the in-distribution
    // train/test splits and 3/4 the outlier ones.
    auto make = [&](const data::SourceSpec& base, uint64_t layout, uint64_t draw,
                    int per_class, data::OodTag tag) {
        data::SourceSpec s = base;
        s.seed = derive_seed(spec.seed, layout);
        s.draw = draw;
        s.samples_per_class = per_class;
        return data::generate(s, tag);
    };
    const uint64_t ood_layout = spec.ood_share_layout ? 1 : 3;
    const int test_n =
        spec.test_samples_per_class > 0 ? spec.test_samples_per_class
                                        : spec.idd.samples_per_class;
    data::write_csv(make(spec.idd, 1, 0, spec.idd.samples_per_class, data::OodTag::idd),
                    (dir / "idd_train.csv").string(), true);
    data::write_csv(make(spec.idd, 1, 1, test_n, data::OodTag::idd),
                    (dir / "idd_test.csv").string(), true);
    data::write_csv(make(spec.ood, ood_layout, 3, spec.ood.samples_per_class,
                         data::OodTag::ood),
                    (dir / "ood_train.csv").string(), false);
    data::write_csv(make(spec.ood, ood_layout, 4, test_n, data::OodTag::ood),
                    (dir / "ood_test.csv").string(), false);

    json manifest = cli::gen_data_spec_to_json(spec);
    manifest["format"] = "gradova.dataset-manifest/1";
    manifest["artifacts"] = {"idd_train.csv", "idd_test.csv", "ood_train.csv", "ood_test.csv"};
    write_text(dir / "manifest.json", manifest.dump(2) + "\n");
    std::cout << "wrote datasets to " << out_dir << "\n";
    return 0;
}

int cmd_train_idd(const CliConfig& cfg) {
    ensure_dir(cfg.output_dir);
    const auto trained = eval::train_idd_model(cfg.spec);
    nn::save_model(trained.model, (fs::path(cfg.output_dir) / "model.json").string());
    write_manifest(cfg, {"model.json"});
    std::cout << "idd test accuracy " << fmt(trained.idd_test_accuracy) << "\n";
    return 0;
}

int cmd_fit_stats(const CliConfig& cfg) {
    const fs::path dir(cfg.output_dir);
    require_artifact(dir / "model.json", "model (run train-idd first)");
    const auto model = nn::load_model((dir / "model.json").string());
    const auto stats = eval::fit_statistics(cfg.spec, model);
    mahalanobis::save_stats(stats, (dir / "stats.json").string());
    std::cout << "fitted statistics over dimension " << stats.dimension << "\n";
    return 0;
}

int cmd_stream(const CliConfig& cfg) {
    const fs::path dir(cfg.output_dir);
    require_artifact(dir / "model.json", "model (run train-idd first)");
    require_artifact(dir / "stats.json", "statistics (run fit-stats first)");
    const auto model = nn::load_model((dir / "model.json").string());
    const auto stats = mahalanobis::load_stats((dir / "stats.json").string());
    const auto stage = eval::run_stream_stage(cfg.spec, model, stats);
    write_stream_artifacts(cfg, stage, 0.0);
    std::cout << "final AUROC " << fmt(stage.held_out_report.auroc) << "\n";
    return 0;
}

int cmd_run(const CliConfig& cfg) {
    ensure_dir(cfg.output_dir);
    const fs::path dir(cfg.output_dir);

    const auto trained = eval::train_idd_model(cfg.spec);
    nn::save_model(trained.model, (dir / "model.json").string());
    const auto stats = eval::fit_statistics(cfg.spec, trained.model);
    mahalanobis::save_stats(stats, (dir / "stats.json").string());
    const auto stage = eval::run_stream_stage(cfg.spec, trained.model, stats);

    std::vector<std::string> artifacts{"model.json", "stats.json"};
    const auto more = write_stream_artifacts(cfg, stage, trained.idd_test_accuracy);
    artifacts.insert(artifacts.end(), more.begin(), more.end());
    write_manifest(cfg, artifacts);

    std::cout << "idd test accuracy " << fmt(trained.idd_test_accuracy) << "\n";
    std::cout << "final AUROC " << fmt(stage.held_out_report.auroc) << " (held-out, AUPR "
              << fmt(stage.held_out_report.aupr) << ")\n";
    return 0;
}

int cmd_one_class(const CliConfig& cfg) {
    ensure_dir(cfg.output_dir);
    const auto report = eval::one_class_experiment(cfg.one_class);
    json j;
    j["memory_budget"] = report.memory_budget;
    j["ood_stream_size"] = report.ood_stream_size;
    json acc = json::object();
    for (const auto& [cls, a] : report.per_class_single_head_accuracy)
        acc[std::to_string(cls)] = a;
    j["per_class_single_head_accuracy"] = acc;
    write_text(fs::path(cfg.output_dir) / "one_class_report.json", j.dump(2) + "\n");

    std::string txt = "class  single_head_accuracy\n";
    char line[64];
    for (const auto& [cls, a] : report.per_class_single_head_accuracy) {
        std::snprintf(line, sizeof(line), "%5d  %8.4f\n", cls, a);
        txt += line;
    }
    write_text(fs::path(cfg.output_dir) / "one_class_report.txt", txt);
    write_manifest(cfg, {"one_class_report.json", "one_class_report.txt"});
    std::cout << txt;
    return 0;
}

int cmd_ablation(const CliConfig& cfg, const std::string& letter) {
    ensure_dir(cfg.output_dir);
    const fs::path dir(cfg.output_dir);

    struct Arm {
        std::string name;
        eval::ExperimentSpec spec;
    };
    std::vector<Arm> arms;
    eval::ExperimentSpec base = cfg.spec;
    if (letter == "a") {
        arms.push_back({"with_discriminator", base});
        auto off = base;
        off.loop_cfg.ablation.disable_discriminator = true;
        arms.push_back({"without_discriminator", off});
    } else if (letter == "b") {
        arms.push_back({"ranked_pseudo_labels", base});
        auto rnd = base;
        rnd.loop_cfg.ablation.random_pseudo_labels = true;
        arms.push_back({"random_pseudo_labels", rnd});
    } else if (letter == "c") {
        for (double f : {0.25, 0.5, 1.0}) {
            auto arm = base;
            arm.loop_cfg.selection_fraction = f;
            arms.push_back({"fraction_" + fmt(f), arm});
        }
    } else {
        arms.push_back({"reinit", base});
        auto keep = base;
        keep.loop_cfg.ablation.no_reinit = true;
        arms.push_back({"no_reinit", keep});
    }

    json summary;
    summary["ablation"] = letter;
    summary["seed"] = cfg.seed;
    json arms_json = json::array();
    std::vector<std::vector<loop::IterationRecord>> traces;
    for (const auto& arm : arms) {
        const auto result = eval::run_experiment(arm.spec);
        json a;
        a["name"] = arm.name;
        a["held_out"] = report_to_json(result.held_out_report);
        a["final_history_auroc"] =
            result.stream.trace.back().auroc
                ? json(*result.stream.trace.back().auroc)
                : json(nullptr);
        arms_json.push_back(a);
        traces.push_back(result.stream.trace);
        std::cout << arm.name << ": held-out AUROC "
                  << fmt(result.held_out_report.auroc) << "\n";
    }
    summary["arms"] = arms_json;
    write_text(dir / ("ablation_" + letter + ".json"), summary.dump(2) + "\n");

    // Per-iteration history AUROC, one column per arm.
    std::string csv = "iteration";
    for (const auto& arm : arms) csv += "," + arm.name;
    csv += "\n";
    for (size_t i = 0; i < traces.front().size(); ++i) {
        csv += std::to_string(traces.front()[i].iteration);
        for (const auto& t : traces)
            csv += "," + (t[i].auroc ? fmt(*t[i].auroc) : std::string());
        csv += "\n";
    }
    write_text(dir / ("ablation_" + letter + ".csv"), csv);
    write_manifest(cfg, {"ablation_" + letter + ".json", "ablation_" + letter + ".csv"});
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"gradova: gradient-space novelty detection workbench"};
    app.require_subcommand(1);

    std::string spec_path, out_dir, config_path, letter;

    auto* gen = app.add_subcommand("gen-data", "generate CSV datasets from a spec file");
    gen->add_option("--spec", spec_path, "dataset spec JSON")->required();
    gen->add_option("--out", out_dir, "output directory")->required();

    auto add_config = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "experiment config JSON")->required();
    };
    auto* run = app.add_subcommand("run", "full pipeline: train, fit, stream, evaluate");
    add_config(run);
    auto* train = app.add_subcommand("train-idd", "train the in-distribution classifier");
    add_config(train);
    auto* fit = app.add_subcommand("fit-stats", "fit gradient statistics for a trained model");
    add_config(fit);
    auto* stream = app.add_subcommand("stream", "replay the unlabeled stream through the loop");
    add_config(stream);
    auto* one = app.add_subcommand("one-class", "one-class continual-learning experiment");
    add_config(one);
    auto* abl = app.add_subcommand("ablation", "paired ablation runs (a|b|c|d)");
    abl->add_option("letter", letter, "ablation letter")
        ->required()
        ->check(CLI::IsMember({"a", "b", "c", "d"}));
    add_config(abl);

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_gen_data(spec_path, out_dir);
        const CliConfig cfg = cli::load_config_file(config_path);
        if (run->parsed()) return cmd_run(cfg);
        if (train->parsed()) return cmd_train_idd(cfg);
        if (fit->parsed()) return cmd_fit_stats(cfg);
        if (stream->parsed()) return cmd_stream(cfg);
        if (one->parsed()) return cmd_one_class(cfg);
        if (abl->parsed()) return cmd_ablation(cfg, letter);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const nn::NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
