#include "gradova/loop.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "gradova/eval.hpp"
#include "gradova/rng.hpp"
#include "json.hpp"

namespace gradova::loop {

StreamState make_stream_state(const LoopConfig& cfg) {
    if (cfg.batch_size_in < 1 || cfg.batch_size_ood < 1)
        throw std::invalid_argument("loop: batch sizes must be >= 1");
    if (!(cfg.selection_fraction > 0.0) || cfg.selection_fraction > 1.0)
        throw std::invalid_argument("loop: selection fraction must be in (0,1]");
    StreamState s;
    s.config = cfg;
    return s;
}

namespace {

// Random selection replacing the score-ranked pseudo set (the "bad OOD
// prediction" ablation). Deterministic per iteration.
binary_classifier::PseudoLabeledSet random_pseudo_set(const std::vector<Vector>& history,
                                                      double fraction, uint64_t base_seed,
                                                      int iteration) {
    const size_t n = history.size();
    if (n < 2) throw std::invalid_argument("pseudo set: need at least 2 samples");
    size_t k = static_cast<size_t>(std::floor(fraction * static_cast<double>(n) / 2.0));
    if (k < 1) k = 1;
    std::vector<size_t> idx(n);
    for (size_t i = 0; i < n; ++i) idx[i] = i;
    Rng rng(derive_seed(base_seed, 7700 + static_cast<uint64_t>(iteration)));
    rng.shuffle(idx);
    binary_classifier::PseudoLabeledSet out;
    out.selection_fraction = fraction;
    for (size_t i = 0; i < k; ++i) {
        out.ood_indices.push_back(idx[i]);
        out.ood_samples.push_back(history[idx[i]]);
        out.idd_indices.push_back(idx[k + i]);
        out.idd_samples.push_back(history[idx[k + i]]);
    }
    return out;
}

}  // namespace

void consume_batch(StreamState& state, const std::vector<Vector>& batch,
                   const nn::MlpModel& model, const mahalanobis::GradientStatistics& stats) {
    if (batch.empty()) throw std::invalid_argument("consume_batch: empty batch");
    if (stats.class_means.empty() ||
        stats.dimension != gradients::gradient_dim(model, stats.include_bias))
        throw std::invalid_argument("consume_batch: statistics not fitted for this model");

    const LoopConfig& cfg = state.config;
    state.history.insert(state.history.end(), batch.begin(), batch.end());
    state.iteration += 1;

    // Discriminator routing; the first batch and the no-discriminator
    // ablation score everything with predicted labels.
    std::vector<std::optional<int>> overrides;
    if (state.iteration > 1 && !cfg.ablation.disable_discriminator && state.discriminator &&
        state.selected_label) {
        const auto votes = binary_classifier::predict(*state.discriminator, state.history,
                                                      binary_classifier::PredictMode::per_sample,
                                                      cfg.batch_vote_rule);
        overrides.assign(state.history.size(), std::nullopt);
        for (size_t i = 0; i < votes.size(); ++i) {
            if (votes[i]) overrides[i] = state.selected_label->class_index;
        }
    }

    const auto scored = mahalanobis::score_all(model, stats, state.history, overrides);
    state.scores.resize(scored.size());
    state.score_labels.resize(scored.size());
    state.score_modes.resize(scored.size());
    for (size_t i = 0; i < scored.size(); ++i) {
        state.scores[i] = scored[i].value;
        state.score_labels[i] = scored[i].label_used;
        state.score_modes[i] = scored[i].label_mode;
    }

    binary_classifier::PseudoLabeledSet pseudo;
    if (cfg.ablation.random_pseudo_labels) {
        pseudo = random_pseudo_set(state.history, cfg.selection_fraction,
                                   cfg.discriminator_train.rng_seed, state.iteration);
    } else {
        std::vector<ScoredSample> scored_samples(state.history.size());
        for (size_t i = 0; i < state.history.size(); ++i) {
            scored_samples[i].payload = state.history[i];
            scored_samples[i].novelty_score = state.scores[i];
        }
        pseudo = binary_classifier::build_pseudo_set(scored_samples, cfg.selection_fraction);
    }
    state.pseudo_idd_indices = pseudo.idd_indices;
    state.pseudo_ood_indices = pseudo.ood_indices;

    if (!state.selected_label || cfg.ablation.refresh_label) {
        auto sel = label_select::select_label(model, pseudo.ood_samples);
        sel.frozen = !cfg.ablation.refresh_label;
        state.selected_label = sel;
    }

    if (!cfg.ablation.disable_discriminator) {
        const nn::MlpModel* warm =
            cfg.ablation.no_reinit && state.discriminator ? &state.discriminator->net : nullptr;
        const int prev_gen = state.discriminator ? state.discriminator->generation : 0;
        state.discriminator =
            binary_classifier::retrain(pseudo, cfg.discriminator_train, prev_gen, warm,
                                       cfg.disc_batch_stats_at_inference);
    }
}

double current_threshold(const StreamState& state) {
    if (state.iteration == 0)
        throw std::logic_error("threshold requested before any iteration");
    if (state.config.threshold_policy == ThresholdPolicy::fixed)
        return state.config.fixed_threshold;
    // 95th percentile (nearest rank) of the pseudo-in-distribution scores.
    // Once the discriminator routes labels, its voted-in-distribution side
    // (scored in predicted mode) is the proxy; before that the bottom half
    // of the history stands in. The selection-fraction subset itself is
    // biased low, so its own p95 would sit near the in-dist median.
    std::vector<double> vals;
    bool any_selected = false;
    for (const auto& mode : state.score_modes)
        any_selected = any_selected || mode == LabelMode::selected;
    if (any_selected) {
        for (size_t i = 0; i < state.scores.size(); ++i) {
            if (state.score_modes[i] == LabelMode::predicted) vals.push_back(state.scores[i]);
        }
    }
    if (vals.empty()) {
        vals = state.scores;
        std::sort(vals.begin(), vals.end());
        vals.resize(std::max<size_t>(1, vals.size() / 2));
    }
    std::sort(vals.begin(), vals.end());
    const size_t rank =
        static_cast<size_t>(std::ceil(0.95 * static_cast<double>(vals.size())));
    return vals[rank == 0 ? 0 : rank - 1];
}

std::vector<bool> final_decisions(const StreamState& state) {
    const double threshold = current_threshold(state);
    std::vector<bool> out(state.scores.size());
    for (size_t i = 0; i < state.scores.size(); ++i) out[i] = state.scores[i] > threshold;
    return out;
}

StreamRunResult run_stream(const std::vector<std::vector<Vector>>& batches,
                           const nn::MlpModel& model,
                           const mahalanobis::GradientStatistics& stats,
                           const LoopConfig& cfg, const StreamEvalHooks* hooks) {
    if (batches.empty()) throw std::invalid_argument("run_stream: need at least one batch");
    if (hooks && hooks->batch_truth_ood.size() != batches.size())
        throw std::invalid_argument("run_stream: truth alignment mismatch");

    StreamRunResult result;
    result.state = make_stream_state(cfg);
    std::vector<bool> truth;
    for (size_t bi = 0; bi < batches.size(); ++bi) {
        consume_batch(result.state, batches[bi], model, stats);
        if (hooks) {
            truth.insert(truth.end(), hooks->batch_truth_ood[bi].begin(),
                         hooks->batch_truth_ood[bi].end());
        }

        IterationRecord rec;
        rec.iteration = result.state.iteration;
        rec.n_history = static_cast<int>(result.state.history.size());
        rec.threshold = current_threshold(result.state);
        if (result.state.selected_label)
            rec.selected_label = result.state.selected_label->class_index;
        if (hooks) {
            rec.auroc = eval::auroc(result.state.scores, truth);
            rec.aupr = eval::aupr(result.state.scores, truth);
            if (hooks->disc_test && result.state.discriminator) {
                std::vector<Vector> feats;
                feats.reserve(hooks->disc_test->size());
                for (const auto& t : *hooks->disc_test) feats.push_back(t.features);
                const auto votes = binary_classifier::predict(
                    *result.state.discriminator, feats,
                    binary_classifier::PredictMode::per_sample, cfg.batch_vote_rule);
                size_t hit = 0;
                for (size_t i = 0; i < votes.size(); ++i) {
                    const bool is_ood = (*hooks->disc_test)[i].tag == data::OodTag::ood;
                    if (votes[i] == is_ood) ++hit;
                }
                rec.disc_accuracy =
                    static_cast<double>(hit) / static_cast<double>(votes.size());
            }
        }
        result.trace.push_back(rec);
    }
    return result;
}

void write_trace_ndjson(const std::vector<IterationRecord>& trace, std::ostream& out) {
    for (const auto& rec : trace) {
        nlohmann::json j;
        j["iteration"] = rec.iteration;
        j["auroc"] = rec.auroc ? nlohmann::json(*rec.auroc) : nlohmann::json(nullptr);
        j["aupr"] = rec.aupr ? nlohmann::json(*rec.aupr) : nlohmann::json(nullptr);
        j["disc_accuracy"] =
            rec.disc_accuracy ? nlohmann::json(*rec.disc_accuracy) : nlohmann::json(nullptr);
        j["selected_label"] =
            rec.selected_label ? nlohmann::json(*rec.selected_label) : nlohmann::json(nullptr);
        j["n_history"] = rec.n_history;
        j["threshold"] = rec.threshold;
        out << j.dump() << "\n";
    }
}

}  // namespace gradova::loop
