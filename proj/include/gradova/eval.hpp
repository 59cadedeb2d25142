#pragma once

#include <optional>
#include <string>

#include "gradova/binary_classifier.hpp"
#include "gradova/data.hpp"
#include "gradova/mahalanobis.hpp"

namespace gradova::eval {

using binary_classifier::BatchVoteRule;
using binary_classifier::Discriminator;
using linalg::Vector;

struct MetricReport {
    double auroc = 0.0;
    double aupr = 0.0;
    int n_positive = 0;  // outliers
    int n_negative = 0;
    std::string batch_mode = "per_sample";
};

// Rank statistic: P(outlier score > in-dist score) + 0.5 P(tie). Exact, so it
// matches the pairwise-counting oracle to the bit.
double auroc(const std::vector<double>& scores, const std::vector<bool>& is_ood);

// Area under the precision-recall staircase over all distinct thresholds,
// with the monotone precision envelope (no linear interpolation); outliers
// are the positive class. Never drops below the positive prevalence.
double aupr(const std::vector<double>& scores, const std::vector<bool>& is_ood);

// Everything the detector needs at inference time.
struct DetectorState {
    const nn::MlpModel* model = nullptr;
    const mahalanobis::GradientStatistics* stats = nullptr;
    std::optional<int> selected_label;
};

// Scores one tagged sample set with discriminator-routed labels. In
// pure-batch mode each side of the test set is shuffled (seeded), split into
// single-origin batches of batch_size (remainder dropped) and voted on as a
// batch; per_sample votes independently.
MetricReport evaluate_pure_batch(const Discriminator& disc, const DetectorState& detector,
                                 const std::vector<data::TaggedSample>& test_set,
                                 int batch_size, uint64_t seed,
                                 BatchVoteRule rule = BatchVoteRule::mean_sigmoid);

// disc may be null: every sample then scores with its predicted label.
MetricReport evaluate_per_sample(const Discriminator* disc, const DetectorState& detector,
                                 const std::vector<data::TaggedSample>& test_set,
                                 BatchVoteRule rule = BatchVoteRule::mean_sigmoid);

}  // namespace gradova::eval
