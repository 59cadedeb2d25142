#include "gradova/eval.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "gradova/rng.hpp"

namespace gradova::eval {

namespace {

void check_metric_inputs(const std::vector<double>& scores, const std::vector<bool>& is_ood) {
    if (scores.size() != is_ood.size())
        throw std::invalid_argument("metric: scores/truth length mismatch");
    size_t pos = 0;
    for (bool b : is_ood) pos += b ? 1 : 0;
    if (pos == 0 || pos == is_ood.size())
        throw std::invalid_argument("metric: both classes must be present");
}

}  // namespace

double auroc(const std::vector<double>& scores, const std::vector<bool>& is_ood) {
    check_metric_inputs(scores, is_ood);
    const size_t n = scores.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return scores[a] < scores[b]; });

    // Mid-ranks for ties, 1-based.
    std::vector<double> rank(n);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double mid = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
        for (size_t k = i; k <= j; ++k) rank[order[k]] = mid;
        i = j + 1;
    }

    double rank_sum = 0.0;
    size_t n_pos = 0;
    for (size_t k = 0; k < n; ++k) {
        if (is_ood[k]) {
            rank_sum += rank[k];
            ++n_pos;
        }
    }
    const size_t n_neg = n - n_pos;
    const double u = rank_sum - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1);
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double aupr(const std::vector<double>& scores, const std::vector<bool>& is_ood) {
    check_metric_inputs(scores, is_ood);
    const size_t n = scores.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return scores[a] > scores[b]; });

    size_t total_pos = 0;
    for (bool b : is_ood) total_pos += b ? 1 : 0;

    // One (precision, recall) point per distinct threshold, descending.
    std::vector<std::pair<double, double>> points;
    size_t tp = 0, fp = 0;
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        for (size_t k = i; k <= j; ++k) (is_ood[order[k]] ? tp : fp) += 1;
        points.push_back({static_cast<double>(tp) / static_cast<double>(tp + fp),
                          static_cast<double>(tp) / static_cast<double>(total_pos)});
        i = j + 1;
    }

    // Monotone precision envelope: each recall level takes the best
    // precision achievable at or beyond it, then the staircase area.
    double running_max = 0.0;
    for (size_t k = points.size(); k-- > 0;) {
        running_max = std::max(running_max, points[k].first);
        points[k].first = running_max;
    }
    double ap = 0.0;
    double prev_recall = 0.0;
    for (const auto& [precision, recall] : points) {
        ap += precision * (recall - prev_recall);
        prev_recall = recall;
    }
    return ap;
}

namespace {

MetricReport report_from(const std::vector<double>& scores, const std::vector<bool>& truth,
                         std::string mode) {
    MetricReport r;
    r.auroc = auroc(scores, truth);
    r.aupr = aupr(scores, truth);
    for (bool b : truth) (b ? r.n_positive : r.n_negative) += 1;
    r.batch_mode = std::move(mode);
    return r;
}

void score_group(const DetectorState& detector, const std::vector<Vector>& feats,
                 const std::vector<bool>& votes, std::vector<double>& scores_out) {
    std::vector<std::optional<int>> overrides(feats.size());
    for (size_t i = 0; i < feats.size(); ++i) {
        if (votes[i] && detector.selected_label) overrides[i] = *detector.selected_label;
    }
    const auto scored = mahalanobis::score_all(*detector.model, *detector.stats, feats, overrides);
    for (const auto& s : scored) scores_out.push_back(s.value);
}

}  // namespace

MetricReport evaluate_pure_batch(const Discriminator& disc, const DetectorState& detector,
                                 const std::vector<data::TaggedSample>& test_set,
                                 int batch_size, uint64_t seed, BatchVoteRule rule) {
    if (batch_size < 1) throw std::invalid_argument("evaluate_pure_batch: bad batch size");
    std::vector<size_t> idd_idx, ood_idx;
    for (size_t i = 0; i < test_set.size(); ++i)
        (test_set[i].tag == data::OodTag::ood ? ood_idx : idd_idx).push_back(i);
    if (idd_idx.size() < static_cast<size_t>(batch_size) ||
        ood_idx.size() < static_cast<size_t>(batch_size))
        throw std::invalid_argument("evaluate_pure_batch: insufficient samples per class");

    std::vector<double> scores;
    std::vector<bool> truth;
    int side = 0;
    for (auto* idx : {&idd_idx, &ood_idx}) {
        Rng rng(derive_seed(seed, static_cast<uint64_t>(side++)));
        rng.shuffle(*idx);
        const size_t n_batches = idx->size() / static_cast<size_t>(batch_size);
        for (size_t bi = 0; bi < n_batches; ++bi) {
            std::vector<Vector> feats;
            for (int k = 0; k < batch_size; ++k)
                feats.push_back(test_set[(*idx)[bi * batch_size + k]].features);
            const auto votes =
                binary_classifier::predict(disc, feats,
                                           binary_classifier::PredictMode::pure_batch, rule);
            score_group(detector, feats, votes, scores);
            for (int k = 0; k < batch_size; ++k)
                truth.push_back(test_set[(*idx)[bi * batch_size + k]].tag == data::OodTag::ood);
        }
    }
    return report_from(scores, truth,
                       "pure_batch(" + std::to_string(batch_size) + ")");
}

MetricReport evaluate_per_sample(const Discriminator* disc, const DetectorState& detector,
                                 const std::vector<data::TaggedSample>& test_set,
                                 BatchVoteRule rule) {
    std::vector<Vector> feats;
    std::vector<bool> truth;
    feats.reserve(test_set.size());
    for (const auto& t : test_set) {
        feats.push_back(t.features);
        truth.push_back(t.tag == data::OodTag::ood);
    }
    std::vector<bool> votes(feats.size(), false);
    if (disc)
        votes = binary_classifier::predict(*disc, feats,
                                           binary_classifier::PredictMode::per_sample, rule);
    std::vector<double> scores;
    score_group(detector, feats, votes, scores);
    return report_from(scores, truth, "per_sample");
}

}  // namespace gradova::eval
