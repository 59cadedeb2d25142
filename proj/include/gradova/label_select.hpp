#pragma once

#include "gradova/nn.hpp"

namespace gradova::label_select {

using linalg::Vector;

struct SelectedLabel {
    int class_index = 0;
    int estimated_from = 0;
    bool frozen = true;
};

// Class with the minimal summed softmax probability over the batch of
// predicted outliers; ties go to the lowest class index.
SelectedLabel select_label(const nn::MlpModel& model,
                           const std::vector<Vector>& predicted_ood_samples);

}  // namespace gradova::label_select
