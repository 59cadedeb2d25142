#pragma once

#include "gradova/nn.hpp"

namespace gradova::gradients {

using linalg::Vector;

enum class LabelMode { predicted, selected };

// Flattened cross-entropy gradient of the final classification layer for one
// sample and one label choice: row-major (p - e_label) h^T, optionally
// followed by the bias block (p - e_label).
struct GradientVector {
    Vector values;
    int source_label = 0;
    LabelMode label_mode = LabelMode::predicted;
};

// Length of a gradient vector for the given model/bias configuration.
int gradient_dim(const nn::MlpModel& model, bool include_bias);

GradientVector extract_gradient(const nn::MlpModel& model, const Vector& sample, int label,
                                bool include_bias,
                                LabelMode mode = LabelMode::predicted);

// Element i equals the single-sample call on (samples[i], labels[i]).
std::vector<GradientVector> extract_batch(const nn::MlpModel& model,
                                          const std::vector<Vector>& samples,
                                          const std::vector<int>& labels, bool include_bias);

}  // namespace gradova::gradients
