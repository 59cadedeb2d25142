#pragma once

#include <map>

#include "gradova/eval.hpp"
#include "gradova/loop.hpp"

namespace gradova::eval {

// A fully resolved experiment: datasets, classifier, statistics and stream
// settings. All component seeds derive from root_seed (see README).
// How the outlier source's class directions relate to the in-distribution
// layout. "similar" is the hard case: outliers resemble specific classes
// (cosine ood_similarity to the matched direction) with a novel orthogonal
// component; "shared" reuses the directions exactly; "independent" draws an
// unrelated frame.
enum class OodLayout { independent, shared, similar };

struct ExperimentSpec {
    data::SourceSpec idd;  // training-set sizing; test/stream draws derive from it
    data::SourceSpec ood;
    OodLayout ood_layout = OodLayout::similar;
    double ood_similarity = 0.9;
    int test_per_class = 100;
    std::vector<int> hidden_dims = {64, 16};
    nn::TrainConfig idd_train;
    bool include_bias = false;
    double epsilon_scale = 1e-6;
    loop::LoopConfig loop_cfg;
    int n_batches = 10;
    std::vector<int> pure_batch_sizes;
    uint64_t root_seed = 7;
};

struct ExperimentResult {
    nn::MlpModel model;
    mahalanobis::GradientStatistics stats;
    loop::StreamRunResult stream;
    MetricReport held_out_report;  // per-sample, discriminator-routed
    std::vector<MetricReport> pure_batch_reports;
    double idd_test_accuracy = 0.0;
    std::optional<double> disc_test_accuracy;
    std::optional<int> selected_label;
};

// Trains the classifier, fits the gradient statistics, replays the stream
// through the closed loop and evaluates on held-out data.
ExperimentResult run_experiment(const ExperimentSpec& spec);

// Partial stages, shared by the CLI subcommands.
struct TrainedIdd {
    nn::MlpModel model;
    double idd_test_accuracy = 0.0;
};
TrainedIdd train_idd_model(const ExperimentSpec& spec);

mahalanobis::GradientStatistics fit_statistics(const ExperimentSpec& spec,
                                               const nn::MlpModel& model);

struct StreamStage {
    loop::StreamRunResult stream;
    MetricReport held_out_report;
    std::vector<MetricReport> pure_batch_reports;
    std::optional<double> disc_test_accuracy;
    std::optional<int> selected_label;
};
StreamStage run_stream_stage(const ExperimentSpec& spec, const nn::MlpModel& model,
                             const mahalanobis::GradientStatistics& stats);

// Builds the seeded stream batches plus the truth alignment for the hooks.
struct StreamData {
    std::vector<std::vector<Vector>> batches;
    std::vector<std::vector<bool>> truth;
};
StreamData make_stream(const ExperimentSpec& spec);

// Held-out tagged test set (in-distribution plus outliers).
std::vector<data::TaggedSample> make_test_set(const ExperimentSpec& spec);

// Repeated runs with derived seeds; mean and sample standard deviation.
struct MultiRunSummary {
    std::vector<MetricReport> runs;
    double auroc_mean = 0.0, auroc_std = 0.0;
    double aupr_mean = 0.0, aupr_std = 0.0;
};
MultiRunSummary run_repeated(const ExperimentSpec& spec, int n_runs);

// One-class continual-learning experiment: the detector routes predicted
// outliers to an extra class head.
struct OneClassOptions {
    int idd_classes = 4;
    int dim = 8;
    double separation = 6.0;
    double ood_separation_factor = 3.0;
    int train_per_class = 200;
    int test_per_class = 100;
    int memory_budget = 1000;
    int ood_stream = 2500;
    int n_batches = 10;
    std::vector<int> hidden_dims = {64, 16};
    nn::TrainConfig idd_train;
    bool include_bias = false;
    double epsilon_scale = 1e-6;
    loop::LoopConfig loop_cfg;
    uint64_t root_seed = 7;
    // Sanity construction: outliers drawn on top of in-distribution class 0.
    bool ood_on_centroid = false;
};

struct OneClassReport {
    std::map<int, double> per_class_single_head_accuracy;  // class idd_classes = the outlier class
    int memory_budget = 0;
    int ood_stream_size = 0;
};

OneClassReport one_class_experiment(const OneClassOptions& opt);

}  // namespace gradova::eval
