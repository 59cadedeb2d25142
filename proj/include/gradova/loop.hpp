#pragma once

#include <optional>
#include <ostream>

#include "gradova/binary_classifier.hpp"
#include "gradova/data.hpp"
#include "gradova/label_select.hpp"
#include "gradova/mahalanobis.hpp"

namespace gradova::loop {

using binary_classifier::BatchVoteRule;
using binary_classifier::Discriminator;
using binary_classifier::ScoredSample;
using gradients::LabelMode;
using linalg::Vector;

enum class ThresholdPolicy { tpr95, fixed };

struct LoopConfig {
    int batch_size_in = 100;
    int batch_size_ood = 100;
    double selection_fraction = 0.5;
    nn::TrainConfig discriminator_train;
    ThresholdPolicy threshold_policy = ThresholdPolicy::tpr95;
    double fixed_threshold = 0.0;
    struct Ablation {
        bool disable_discriminator = false;
        bool random_pseudo_labels = false;
        bool no_reinit = false;
        bool refresh_label = false;
    } ablation;
    BatchVoteRule batch_vote_rule = BatchVoteRule::mean_sigmoid;
    // Flag freshly trained discriminators for inference-time batch stats.
    bool disc_batch_stats_at_inference = false;
};

// Everything the closed loop carries between batches. Truth tags never enter
// this structure; the evaluation harness keeps its own tag alignment.
struct StreamState {
    std::vector<Vector> history;
    std::vector<double> scores;
    std::vector<int> score_labels;
    std::vector<LabelMode> score_modes;
    std::optional<label_select::SelectedLabel> selected_label;
    std::optional<Discriminator> discriminator;
    std::vector<size_t> pseudo_idd_indices;
    std::vector<size_t> pseudo_ood_indices;
    int iteration = 0;
    LoopConfig config;
};

StreamState make_stream_state(const LoopConfig& cfg);

// One Algorithm-1 iteration: concatenate the batch, re-score the whole
// history (predicted labels on the first batch, discriminator-routed labels
// afterwards), rebuild the pseudo-labeled selection, estimate the selected
// label once, and retrain the discriminator from a fresh initialization.
void consume_batch(StreamState& state, const std::vector<Vector>& batch,
                   const nn::MlpModel& model, const mahalanobis::GradientStatistics& stats);

double current_threshold(const StreamState& state);

// score > threshold per the configured policy.
std::vector<bool> final_decisions(const StreamState& state);

struct IterationRecord {
    int iteration = 0;
    std::optional<double> auroc;
    std::optional<double> aupr;
    std::optional<double> disc_accuracy;
    std::optional<int> selected_label;
    int n_history = 0;
    double threshold = 0.0;
};

// Truth alignment supplied by the evaluation harness; the loop itself never
// reads it while scoring.
struct StreamEvalHooks {
    std::vector<std::vector<bool>> batch_truth_ood;  // aligned with the batches
    const std::vector<data::TaggedSample>* disc_test = nullptr;
};

struct StreamRunResult {
    std::vector<IterationRecord> trace;
    StreamState state;
};

StreamRunResult run_stream(const std::vector<std::vector<Vector>>& batches,
                           const nn::MlpModel& model,
                           const mahalanobis::GradientStatistics& stats,
                           const LoopConfig& cfg,
                           const StreamEvalHooks* hooks = nullptr);

// One JSON object per iteration.
void write_trace_ndjson(const std::vector<IterationRecord>& trace, std::ostream& out);

}  // namespace gradova::loop
