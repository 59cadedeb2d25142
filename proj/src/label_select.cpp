#include "gradova/label_select.hpp"

#include <stdexcept>

namespace gradova::label_select {

SelectedLabel select_label(const nn::MlpModel& model,
                           const std::vector<Vector>& predicted_ood_samples) {
    if (predicted_ood_samples.empty())
        throw std::invalid_argument("select_label: empty sample list");

    Vector sums(model.class_count, 0.0);
    const auto fwd = nn::forward(model, predicted_ood_samples, nn::Mode::eval);
    for (const auto& logits : fwd.logits) {
        const Vector p = nn::softmax(logits);
        for (int c = 0; c < model.class_count; ++c) sums[c] += p[c];
    }

    int best = 0;
    for (int c = 1; c < model.class_count; ++c) {
        if (sums[c] < sums[best]) best = c;
    }
    SelectedLabel out;
    out.class_index = best;
    out.estimated_from = static_cast<int>(predicted_ood_samples.size());
    out.frozen = true;
    return out;
}

}  // namespace gradova::label_select
