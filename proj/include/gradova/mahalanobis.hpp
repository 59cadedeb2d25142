#pragma once

#include <optional>
#include <string>

#include "gradova/gradients.hpp"
#include "gradova/linalg.hpp"
#include "gradova/nn.hpp"

namespace gradova::mahalanobis {

using gradients::GradientVector;
using gradients::LabelMode;
using linalg::Vector;

// Class-conditional gradient means plus the tied, regularized precision.
struct GradientStatistics {
    std::vector<Vector> class_means;
    linalg::SymMatrix tied_precision;
    int dimension = 0;
    std::vector<int> per_class_counts;
    double epsilon_scale = 1e-6;
    bool include_bias = false;
};

struct NoveltyScore {
    double value = 0.0;
    int label_used = 0;
    LabelMode label_mode = LabelMode::predicted;
};

// Per-class means over ground-truth labels, pooled covariance with divisor N,
// precision by regularized inversion.
GradientStatistics fit(const nn::MlpModel& model, const std::vector<Vector>& samples,
                       const std::vector<int>& labels, bool include_bias,
                       double epsilon_scale);

// Same fit on pre-extracted gradient vectors.
GradientStatistics fit_from_gradients(const std::vector<Vector>& gradients,
                                      const std::vector<int>& labels, int class_count,
                                      double epsilon_scale, bool include_bias = false);

NoveltyScore score(const GradientStatistics& stats, const GradientVector& gradient,
                   int class_for_mean);

// Without an override: predicted label for both the gradient and the mean.
// With one: the override label serves both roles.
NoveltyScore score_sample(const nn::MlpModel& model, const GradientStatistics& stats,
                          const Vector& sample, std::optional<int> label_override = {});

// One score per sample; overrides[i], when set, plays the score_sample
// override role. Parallel over samples; bit-identical to the serial variant.
std::vector<NoveltyScore> score_all(const nn::MlpModel& model, const GradientStatistics& stats,
                                    const std::vector<Vector>& samples,
                                    const std::vector<std::optional<int>>& overrides);
std::vector<NoveltyScore> score_all_serial(const nn::MlpModel& model,
                                           const GradientStatistics& stats,
                                           const std::vector<Vector>& samples,
                                           const std::vector<std::optional<int>>& overrides);

std::string stats_to_json(const GradientStatistics& stats);
GradientStatistics stats_from_json(const std::string& text);
void save_stats(const GradientStatistics& stats, const std::string& path);
GradientStatistics load_stats(const std::string& path);

}  // namespace gradova::mahalanobis
