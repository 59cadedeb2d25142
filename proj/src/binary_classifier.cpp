#include "gradova/binary_classifier.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "gradova/rng.hpp"
#include "json.hpp"

namespace gradova::binary_classifier {

PseudoLabeledSet build_pseudo_set(const std::vector<ScoredSample>& scored,
                                  double selection_fraction) {
    if (scored.size() < 2)
        throw std::invalid_argument("build_pseudo_set: need at least 2 samples");
    if (!(selection_fraction > 0.0) || selection_fraction > 1.0)
        throw std::invalid_argument("build_pseudo_set: fraction must be in (0,1]");

    const size_t n = scored.size();
    size_t k = static_cast<size_t>(
        std::floor(selection_fraction * static_cast<double>(n) / 2.0));
    if (k < 1) k = 1;

    std::vector<size_t> by_desc(n), by_asc(n);
    std::iota(by_desc.begin(), by_desc.end(), 0);
    by_asc = by_desc;
    std::stable_sort(by_desc.begin(), by_desc.end(), [&](size_t a, size_t b) {
        return scored[a].novelty_score > scored[b].novelty_score;
    });
    std::stable_sort(by_asc.begin(), by_asc.end(), [&](size_t a, size_t b) {
        return scored[a].novelty_score < scored[b].novelty_score;
    });

    PseudoLabeledSet out;
    out.selection_fraction = selection_fraction;
    for (size_t i = 0; i < k; ++i) {
        out.ood_indices.push_back(by_desc[i]);
        out.ood_samples.push_back(scored[by_desc[i]].payload);
        out.idd_indices.push_back(by_asc[i]);
        out.idd_samples.push_back(scored[by_asc[i]].payload);
    }
    return out;
}

namespace {

bool all_identical(const std::vector<Vector>& vs) {
    for (size_t i = 1; i < vs.size(); ++i) {
        if (vs[i] != vs[0]) return false;
    }
    return vs.size() > 1;
}

}  // namespace

Discriminator retrain(const PseudoLabeledSet& pseudo, const nn::TrainConfig& cfg,
                      int previous_generation, const nn::MlpModel* warm_start,
                      bool bn_batch_stats_at_inference) {
    if (pseudo.idd_samples.empty() || pseudo.ood_samples.empty())
        throw std::invalid_argument("retrain: pseudo set must hold both classes");
    if (pseudo.idd_samples.size() != pseudo.ood_samples.size())
        throw std::invalid_argument("retrain: pseudo set must be balanced");

    const int generation = previous_generation + 1;
    const uint64_t gen_seed = cfg.rng_seed + static_cast<uint64_t>(generation);
    const int input_dim = static_cast<int>(pseudo.idd_samples.front().size());

    nn::MlpModel init = warm_start
                            ? *warm_start
                            : nn::make_discriminator(input_dim, derive_seed(gen_seed, 1));
    if (!warm_start) nn::set_bn_inference_policy(init, bn_batch_stats_at_inference);

    std::vector<Vector> samples;
    std::vector<int> labels;
    for (const auto& s : pseudo.idd_samples) {
        samples.push_back(s);
        labels.push_back(0);
    }
    for (const auto& s : pseudo.ood_samples) {
        samples.push_back(s);
        labels.push_back(1);
    }

    nn::TrainConfig run_cfg = cfg;
    run_cfg.rng_seed = derive_seed(gen_seed, 2);
    auto trained = nn::train(init, samples, labels, run_cfg, nn::LossKind::discriminator);

    Discriminator disc;
    disc.net = std::move(trained.model);
    disc.generation = generation;
    disc.training_set_size = static_cast<int>(samples.size());
    disc.degenerate_training =
        all_identical(pseudo.idd_samples) || all_identical(pseudo.ood_samples);
    return disc;
}

namespace {

// Sigmoid clamped away from exact 0/1 so outputs stay in the open interval
// even when the logit saturates the exponential.
double clamped_sigmoid(double z) {
    const double s = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
    return std::min(1.0 - 1e-12, std::max(1e-12, s));
}

}  // namespace

std::vector<double> raw_outputs(const Discriminator& disc, const std::vector<Vector>& samples) {
    if (samples.empty()) return {};
    const auto fwd = nn::forward_with_policy(disc.net, samples, nn::Mode::eval,
                                             nn::BnPolicy::force_running_stats);
    std::vector<double> out(samples.size());
    for (size_t i = 0; i < samples.size(); ++i) out[i] = clamped_sigmoid(fwd.logits[i][0]);
    return out;
}

std::vector<bool> predict(const Discriminator& disc, const std::vector<Vector>& samples,
                          PredictMode mode, BatchVoteRule rule) {
    if (samples.empty()) {
        if (mode == PredictMode::pure_batch)
            throw std::invalid_argument("predict: empty pure batch");
        return {};
    }

    if (mode == PredictMode::per_sample || samples.size() == 1) {
        const auto sig = raw_outputs(disc, samples);
        std::vector<bool> votes(samples.size());
        for (size_t i = 0; i < sig.size(); ++i) votes[i] = sig[i] > 0.5;
        return votes;
    }

    // Batch statistics apply only when the batchnorm layer is flagged for
    // inference-time batch stats; with vector inputs whose signal is the
    // class mean, whitening a single-origin batch by its own statistics
    // removes that mean, so running stats are the default.
    const auto fwd = nn::forward_with_policy(disc.net, samples, nn::Mode::eval,
                                             nn::BnPolicy::per_layer_flag);
    bool ood;
    if (rule == BatchVoteRule::mean_sigmoid) {
        double mean = 0.0;
        for (const auto& logits : fwd.logits) mean += clamped_sigmoid(logits[0]);
        mean /= static_cast<double>(samples.size());
        ood = mean > 0.5;
    } else {
        size_t n_ood = 0;
        for (const auto& logits : fwd.logits) {
            if (logits[0] > 0.0) n_ood += 1;
        }
        ood = 2 * n_ood > samples.size();
    }
    return std::vector<bool>(samples.size(), ood);
}

void save_discriminator(const Discriminator& disc, const std::string& path) {
    nlohmann::json j = nlohmann::json::parse(nn::model_to_json(disc.net));
    j["generation"] = disc.generation;
    j["training_set_size"] = disc.training_set_size;
    j["degenerate_training"] = disc.degenerate_training;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << j.dump(2) << "\n";
}

Discriminator load_discriminator(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    const nlohmann::json j = nlohmann::json::parse(ss.str());
    Discriminator disc;
    disc.net = nn::model_from_json(ss.str());
    disc.generation = j.at("generation").get<int>();
    disc.training_set_size = j.at("training_set_size").get<int>();
    disc.degenerate_training = j.value("degenerate_training", false);
    return disc;
}

}  // namespace gradova::binary_classifier
