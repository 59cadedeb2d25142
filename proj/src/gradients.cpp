#include "gradova/gradients.hpp"

#include <cmath>
#include <stdexcept>

namespace gradova::gradients {

int gradient_dim(const nn::MlpModel& model, bool include_bias) {
    const int c = model.class_count;
    const int h = model.feature_dim_last_hidden;
    return include_bias ? c * h + c : c * h;
}

GradientVector extract_gradient(const nn::MlpModel& model, const Vector& sample, int label,
                                bool include_bias, LabelMode mode) {
    if (label < 0 || label >= model.class_count)
        throw std::invalid_argument("extract_gradient: label out of range");

    const auto fwd = nn::forward(model, {sample}, nn::Mode::eval);
    const Vector p = nn::softmax(fwd.logits[0]);
    const Vector& h = fwd.hidden[0];

    GradientVector g;
    g.source_label = label;
    g.label_mode = mode;
    g.values.reserve(gradient_dim(model, include_bias));
    for (int c = 0; c < model.class_count; ++c) {
        const double pc = p[c] - (c == label ? 1.0 : 0.0);
        for (double hj : h) g.values.push_back(pc * hj);
    }
    if (include_bias) {
        for (int c = 0; c < model.class_count; ++c)
            g.values.push_back(p[c] - (c == label ? 1.0 : 0.0));
    }
    return g;
}

std::vector<GradientVector> extract_batch(const nn::MlpModel& model,
                                          const std::vector<Vector>& samples,
                                          const std::vector<int>& labels, bool include_bias) {
    if (samples.size() != labels.size())
        throw std::invalid_argument("extract_batch: length mismatch");
    std::vector<GradientVector> out;
    out.reserve(samples.size());
    for (size_t i = 0; i < samples.size(); ++i)
        out.push_back(extract_gradient(model, samples[i], labels[i], include_bias));
    return out;
}

}  // namespace gradova::gradients
