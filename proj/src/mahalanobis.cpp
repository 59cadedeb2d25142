#include "gradova/mahalanobis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "gradova/kernels.hpp"
#include "json.hpp"

namespace gradova::mahalanobis {

GradientStatistics fit_from_gradients(const std::vector<Vector>& gradients,
                                      const std::vector<int>& labels, int class_count,
                                      double epsilon_scale, bool include_bias) {
    if (gradients.empty()) throw std::invalid_argument("fit: empty training set");
    if (gradients.size() != labels.size())
        throw std::invalid_argument("fit: gradients/labels length mismatch");
    const size_t dim = gradients.front().size();
    for (const auto& g : gradients) {
        if (g.size() != dim) throw std::invalid_argument("fit: gradient dimension drift");
    }

    GradientStatistics stats;
    stats.dimension = static_cast<int>(dim);
    stats.epsilon_scale = epsilon_scale;
    stats.include_bias = include_bias;
    stats.class_means.assign(class_count, Vector(dim, 0.0));
    stats.per_class_counts.assign(class_count, 0);

    for (size_t i = 0; i < gradients.size(); ++i) {
        const int c = labels[i];
        if (c < 0 || c >= class_count) throw std::invalid_argument("fit: label out of range");
        stats.per_class_counts[c] += 1;
        for (size_t k = 0; k < dim; ++k) stats.class_means[c][k] += gradients[i][k];
    }
    for (int c = 0; c < class_count; ++c) {
        if (stats.per_class_counts[c] == 0)
            throw std::invalid_argument("fit: class " + std::to_string(c) + " has no samples");
        const double inv = 1.0 / static_cast<double>(stats.per_class_counts[c]);
        for (auto& v : stats.class_means[c]) v *= inv;
    }

    // Pooled scatter around the class means, divisor N.
    linalg::SymMatrix pooled(static_cast<int>(dim));
    for (int c = 0; c < class_count; ++c) {
        std::vector<Vector> members;
        for (size_t i = 0; i < gradients.size(); ++i)
            if (labels[i] == c) members.push_back(gradients[i]);
        const auto scatter = kernels::scatter_matrix(members, stats.class_means[c]);
        for (size_t k = 0; k < pooled.values.size(); ++k) pooled.values[k] += scatter.values[k];
    }
    const double inv_n = 1.0 / static_cast<double>(gradients.size());
    for (auto& v : pooled.values) v *= inv_n;
    pooled.is_positive_semidefinite = true;

    stats.tied_precision = linalg::regularized_inverse(pooled, epsilon_scale);
    return stats;
}

GradientStatistics fit(const nn::MlpModel& model, const std::vector<Vector>& samples,
                       const std::vector<int>& labels, bool include_bias,
                       double epsilon_scale) {
    const auto grads = gradients::extract_batch(model, samples, labels, include_bias);
    std::vector<Vector> values;
    values.reserve(grads.size());
    for (const auto& g : grads) values.push_back(g.values);
    return fit_from_gradients(values, labels, model.class_count, epsilon_scale, include_bias);
}

NoveltyScore score(const GradientStatistics& stats, const GradientVector& gradient,
                   int class_for_mean) {
    if (class_for_mean < 0 || class_for_mean >= static_cast<int>(stats.class_means.size()))
        throw std::invalid_argument("score: class index out of range");
    if (static_cast<int>(gradient.values.size()) != stats.dimension)
        throw std::invalid_argument("score: gradient dimension mismatch");
    NoveltyScore s;
    s.value = linalg::quadratic_form(gradient.values, stats.class_means[class_for_mean],
                                     stats.tied_precision);
    s.label_used = gradient.source_label;
    s.label_mode = gradient.label_mode;
    return s;
}

namespace {

NoveltyScore score_one(const nn::MlpModel& model, const GradientStatistics& stats,
                       const Vector& sample, const std::optional<int>& label_override) {
    int label;
    LabelMode mode;
    if (label_override) {
        label = *label_override;
        mode = LabelMode::selected;
    } else {
        const auto fwd = nn::forward(model, {sample}, nn::Mode::eval);
        const Vector p = nn::softmax(fwd.logits[0]);
        label = static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
        mode = LabelMode::predicted;
    }
    const auto g = gradients::extract_gradient(model, sample, label, stats.include_bias, mode);
    return score(stats, g, label);
}

}  // namespace

NoveltyScore score_sample(const nn::MlpModel& model, const GradientStatistics& stats,
                          const Vector& sample, std::optional<int> label_override) {
    if (label_override &&
        (*label_override < 0 || *label_override >= static_cast<int>(stats.class_means.size())))
        throw std::invalid_argument("score_sample: override out of range");
    return score_one(model, stats, sample, label_override);
}

std::vector<NoveltyScore> score_all(const nn::MlpModel& model, const GradientStatistics& stats,
                                    const std::vector<Vector>& samples,
                                    const std::vector<std::optional<int>>& overrides) {
    if (!overrides.empty() && overrides.size() != samples.size())
        throw std::invalid_argument("score_all: overrides length mismatch");
    for (const auto& s : samples) {
        if (static_cast<int>(s.size()) != model.input_dim())
            throw std::invalid_argument("score_all: sample dimension mismatch");
    }
    for (const auto& o : overrides) {
        if (o && (*o < 0 || *o >= static_cast<int>(stats.class_means.size())))
            throw std::invalid_argument("score_all: override out of range");
    }
    const int n = static_cast<int>(samples.size());
    std::vector<NoveltyScore> out(samples.size());
#pragma omp parallel for schedule(static) num_threads(kernels::resolve_threads())
    for (int i = 0; i < n; ++i) {
        out[i] = score_one(model, stats, samples[i],
                           overrides.empty() ? std::optional<int>{} : overrides[i]);
    }
    return out;
}

std::vector<NoveltyScore> score_all_serial(const nn::MlpModel& model,
                                           const GradientStatistics& stats,
                                           const std::vector<Vector>& samples,
                                           const std::vector<std::optional<int>>& overrides) {
    if (!overrides.empty() && overrides.size() != samples.size())
        throw std::invalid_argument("score_all: overrides length mismatch");
    std::vector<NoveltyScore> out(samples.size());
    for (size_t i = 0; i < samples.size(); ++i) {
        out[i] = score_one(model, stats, samples[i],
                           overrides.empty() ? std::optional<int>{} : overrides[i]);
    }
    return out;
}

std::string stats_to_json(const GradientStatistics& stats) {
    nlohmann::json j;
    j["format"] = "gradova.stats/1";
    j["dimension"] = stats.dimension;
    j["epsilon_scale"] = stats.epsilon_scale;
    j["include_bias"] = stats.include_bias;
    j["per_class_counts"] = stats.per_class_counts;
    j["class_means"] = stats.class_means;
    j["tied_precision"] = stats.tied_precision.values;
    return j.dump(2);
}

GradientStatistics stats_from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    GradientStatistics s;
    s.dimension = j.at("dimension").get<int>();
    s.epsilon_scale = j.at("epsilon_scale").get<double>();
    s.include_bias = j.at("include_bias").get<bool>();
    s.per_class_counts = j.at("per_class_counts").get<std::vector<int>>();
    s.class_means = j.at("class_means").get<std::vector<Vector>>();
    s.tied_precision = linalg::SymMatrix(s.dimension);
    s.tied_precision.values = j.at("tied_precision").get<std::vector<double>>();
    s.tied_precision.is_positive_semidefinite = true;
    if (s.tied_precision.values.size() !=
        static_cast<size_t>(s.dimension) * static_cast<size_t>(s.dimension))
        throw std::invalid_argument("stats json: precision size mismatch");
    return s;
}

void save_stats(const GradientStatistics& stats, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << stats_to_json(stats) << "\n";
}

GradientStatistics load_stats(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return stats_from_json(ss.str());
}

}  // namespace gradova::mahalanobis
