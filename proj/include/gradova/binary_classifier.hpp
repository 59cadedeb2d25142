#pragma once

#include <optional>
#include <string>

#include "gradova/nn.hpp"

namespace gradova::binary_classifier {

using linalg::Vector;

// One stream sample with its detector score. Truth tags are carried for the
// evaluation harness only; nothing on the scoring path reads them.
struct ScoredSample {
    Vector payload;
    double novelty_score = 0.0;
    std::optional<bool> discriminator_vote;  // true = outlier
    std::optional<bool> truth_ood;           // evaluation only
};

struct Discriminator {
    nn::MlpModel net;
    int generation = 0;
    int training_set_size = 0;
    bool degenerate_training = false;
};

struct PseudoLabeledSet {
    std::vector<Vector> idd_samples;
    std::vector<Vector> ood_samples;
    double selection_fraction = 0.5;
    // Positions in the scored list, for threshold and label bookkeeping.
    std::vector<size_t> idd_indices;
    std::vector<size_t> ood_indices;
};

// Top k scores become pseudo-outliers and bottom k pseudo-in-distribution,
// k = floor(selection_fraction * n / 2), at least 1. Ties keep stream order.
PseudoLabeledSet build_pseudo_set(const std::vector<ScoredSample>& scored,
                                  double selection_fraction);

// Trains a freshly initialized discriminator on the pseudo set. The previous
// model is discarded; init and shuffle seeds derive from the config seed plus
// the new generation number. A warm start (no-re-init ablation) may be
// supplied. bn_batch_stats_at_inference flags the new net's batchnorm for
// inference-time batch statistics.
Discriminator retrain(const PseudoLabeledSet& pseudo, const nn::TrainConfig& cfg,
                      int previous_generation, const nn::MlpModel* warm_start = nullptr,
                      bool bn_batch_stats_at_inference = false);

enum class PredictMode { per_sample, pure_batch };
enum class BatchVoteRule { mean_sigmoid, majority };

// true = outlier. per_sample thresholds each sigmoid at 0.5 (strictly above
// means outlier) under running batchnorm statistics. pure_batch forwards the
// whole list together (batch statistics when the net's batchnorm is flagged
// for them, running statistics otherwise) and gives every member the same
// vote. A pure batch of one sample falls back to the per-sample path (its
// batch variance is degenerate).
std::vector<bool> predict(const Discriminator& disc, const std::vector<Vector>& samples,
                          PredictMode mode,
                          BatchVoteRule rule = BatchVoteRule::mean_sigmoid);

// Sigmoid outputs under running statistics, clamped into the open (0,1).
std::vector<double> raw_outputs(const Discriminator& disc, const std::vector<Vector>& samples);

void save_discriminator(const Discriminator& disc, const std::string& path);
Discriminator load_discriminator(const std::string& path);

}  // namespace gradova::binary_classifier
