#include "doctest.h"

#include <cmath>
#include <limits>

#include "gradova/binary_classifier.hpp"
#include "gradova/data.hpp"
#include "gradova/rng.hpp"
#include "oracles.hpp"

using namespace gradova;
using binary_classifier::BatchVoteRule;
using binary_classifier::Discriminator;
using binary_classifier::PredictMode;
using binary_classifier::ScoredSample;
using linalg::Vector;

namespace {

std::vector<ScoredSample> scored_from(const std::vector<double>& scores) {
    std::vector<ScoredSample> out(scores.size());
    for (size_t i = 0; i < scores.size(); ++i) {
        out[i].payload = {static_cast<double>(i), 0.0};
        out[i].novelty_score = scores[i];
    }
    return out;
}

binary_classifier::PseudoLabeledSet separable_pseudo(uint64_t seed, int per_side = 40) {
    Rng rng(seed);
    binary_classifier::PseudoLabeledSet p;
    for (int i = 0; i < per_side; ++i) {
        p.idd_samples.push_back({rng.normal() - 4.0, rng.normal()});
        p.ood_samples.push_back({rng.normal() + 4.0, rng.normal()});
    }
    return p;
}

nn::TrainConfig quick_cfg(uint64_t seed, int epochs = 80) {
    nn::TrainConfig cfg;
    cfg.epochs = epochs;
    cfg.learning_rate = 2e-3;
    cfg.rng_seed = seed;
    return cfg;
}

}  // namespace

TEST_SUITE("binary_classifier") {

TEST_CASE("two-sample pseudo split") {
    const auto p = binary_classifier::build_pseudo_set(scored_from({9.0, 1.0}), 1.0);
    CHECK(p.ood_indices == std::vector<size_t>{0});
    CHECK(p.idd_indices == std::vector<size_t>{1});
}

TEST_CASE("selection arithmetic at fraction one half") {
    const auto p = binary_classifier::build_pseudo_set(
        scored_from({5.0, 8.0, 1.0, 9.0, 3.0, 7.0, 2.0, 6.0}), 0.5);
    // k = floor(0.5 * 8 / 2) = 2: top two scores 9, 8; bottom two 1, 2.
    CHECK(p.ood_samples.size() == 2);
    CHECK(p.idd_samples.size() == 2);
    CHECK(p.ood_indices == std::vector<size_t>{3, 1});
    CHECK(p.idd_indices == std::vector<size_t>{2, 6});
}

TEST_CASE("pseudo selection matches a full-sort oracle") {
    Rng rng(71);
    std::vector<double> scores(200);
    for (auto& s : scores) s = rng.uniform(0.0, 100.0);
    const auto p = binary_classifier::build_pseudo_set(scored_from(scores), 0.5);
    CHECK(p.ood_indices.size() == 50);
    CHECK(p.idd_indices.size() == 50);

    std::vector<size_t> order(scores.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return scores[a] > scores[b]; });
    std::vector<bool> in_ood(scores.size(), false), in_idd(scores.size(), false);
    for (size_t i : p.ood_indices) in_ood[i] = true;
    for (size_t i : p.idd_indices) in_idd[i] = true;
    for (size_t k = 0; k < 50; ++k) {
        CHECK(in_ood[order[k]]);
        CHECK(in_idd[order[order.size() - 1 - k]]);
    }
}

TEST_CASE("pseudo boundary: outlier side never scores below the in-dist side") {
    Rng rng(72);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> scores(31);
        for (auto& s : scores) s = std::floor(rng.uniform(0.0, 10.0));
        const auto p = binary_classifier::build_pseudo_set(scored_from(scores), 0.4);
        double min_ood = std::numeric_limits<double>::infinity();
        double max_idd = -min_ood;
        for (size_t i : p.ood_indices) min_ood = std::min(min_ood, scores[i]);
        for (size_t i : p.idd_indices) max_idd = std::max(max_idd, scores[i]);
        CHECK(min_ood >= max_idd);
    }
}

TEST_CASE("ties keep stream order") {
    const auto p = binary_classifier::build_pseudo_set(
        scored_from({5.0, 5.0, 5.0, 5.0, 5.0, 5.0}), 1.0);
    CHECK(p.ood_indices == std::vector<size_t>{0, 1, 2});
    CHECK(p.idd_indices == std::vector<size_t>{0, 1, 2});
}

TEST_CASE("pseudo set input validation") {
    CHECK_THROWS_AS(binary_classifier::build_pseudo_set(scored_from({1.0}), 0.5),
                    std::invalid_argument);
    CHECK_THROWS_AS(binary_classifier::build_pseudo_set(scored_from({1.0, 2.0}), 0.0),
                    std::invalid_argument);
    CHECK_THROWS_AS(binary_classifier::build_pseudo_set(scored_from({1.0, 2.0}), 1.5),
                    std::invalid_argument);
}

TEST_CASE("retrain separates a separable pseudo set") {
    const auto p = separable_pseudo(81);
    std::vector<Vector> xs;
    std::vector<int> ys;
    for (const auto& s : p.idd_samples) {
        xs.push_back(s);
        ys.push_back(0);
    }
    for (const auto& s : p.ood_samples) {
        xs.push_back(s);
        ys.push_back(1);
    }
    REQUIRE(oracles::perceptron_separable(xs, ys));

    const auto disc = binary_classifier::retrain(p, quick_cfg(82), 0);
    CHECK(disc.generation == 1);
    CHECK(disc.training_set_size == 80);
    const auto votes = binary_classifier::predict(disc, xs, PredictMode::per_sample);
    size_t hit = 0;
    for (size_t i = 0; i < votes.size(); ++i)
        if (static_cast<int>(votes[i]) == ys[i]) ++hit;
    CHECK(static_cast<double>(hit) / votes.size() >= 0.99);
}

TEST_CASE("retrain is deterministic") {
    const auto p = separable_pseudo(83, 10);
    const auto a = binary_classifier::retrain(p, quick_cfg(84, 20), 3);
    const auto b = binary_classifier::retrain(p, quick_cfg(84, 20), 3);
    CHECK(a.generation == 4);
    CHECK(a.net.layers.back().weights == b.net.layers.back().weights);
    CHECK(a.net.layers.front().weights == b.net.layers.front().weights);
}

TEST_CASE("retrain really re-initializes: poisoned weights do not survive") {
    const auto p = separable_pseudo(85, 10);
    auto first = binary_classifier::retrain(p, quick_cfg(86, 10), 0);
    for (auto& w : first.net.layers[0].weights)
        w = std::numeric_limits<double>::quiet_NaN();
    // A fresh retrain must not inherit anything from the poisoned model.
    const auto second = binary_classifier::retrain(p, quick_cfg(86, 10), first.generation);
    for (const auto& L : second.net.layers)
        for (double w : L.weights) CHECK(std::isfinite(w));
    const auto out = binary_classifier::raw_outputs(second, p.ood_samples);
    for (double v : out) CHECK(std::isfinite(v));
}

TEST_CASE("degenerate pseudo class is flagged but still trains") {
    binary_classifier::PseudoLabeledSet p;
    for (int i = 0; i < 6; ++i) {
        p.idd_samples.push_back({1.0, 1.0});
        p.ood_samples.push_back({static_cast<double>(i), -1.0});
    }
    const auto disc = binary_classifier::retrain(p, quick_cfg(87, 5), 0);
    CHECK(disc.degenerate_training);
}

TEST_CASE("zero final layer votes in-distribution at the 0.5 boundary") {
    Discriminator disc;
    disc.net = nn::make_discriminator(2, 88);
    auto& head = disc.net.layers.back();
    std::fill(head.weights.begin(), head.weights.end(), 0.0);
    std::fill(head.bias.begin(), head.bias.end(), 0.0);
    const auto sig = binary_classifier::raw_outputs(disc, {{0.3, -0.7}});
    CHECK(sig[0] == 0.5);
    const auto votes = binary_classifier::predict(disc, {{0.3, -0.7}}, PredictMode::per_sample);
    CHECK_FALSE(votes[0]);
}

TEST_CASE("pure batch of one sample equals the per-sample vote") {
    const auto p = separable_pseudo(89, 20);
    const auto disc = binary_classifier::retrain(p, quick_cfg(90, 30), 0);
    const Vector probe{4.2, 0.3};
    const auto a = binary_classifier::predict(disc, {probe}, PredictMode::per_sample);
    const auto b = binary_classifier::predict(disc, {probe}, PredictMode::pure_batch);
    CHECK(a == b);
}

TEST_CASE("constant batch matches per-sample when batch stats match the sample") {
    // A discriminator without batchnorm: both modes share the same forward.
    Discriminator disc;
    disc.net = nn::make_mlp(2, {8}, 1, 91);
    disc.net.layers.back().act = nn::Activation::sigmoid;
    const std::vector<Vector> batch(5, Vector{1.5, -2.5});
    const auto per = binary_classifier::predict(disc, batch, PredictMode::per_sample);
    const auto pure = binary_classifier::predict(disc, batch, PredictMode::pure_batch);
    CHECK(per == pure);
}

TEST_CASE("a trained discriminator votes a pure outlier batch as outliers") {
    const auto p = separable_pseudo(92);
    const auto disc = binary_classifier::retrain(p, quick_cfg(93), 0);
    Rng rng(94);
    std::vector<Vector> ood_batch(32);
    for (auto& v : ood_batch) v = {rng.normal() + 4.0, rng.normal()};
    const auto votes = binary_classifier::predict(disc, ood_batch, PredictMode::pure_batch);
    for (bool v : votes) CHECK(v);

    // The mean rule should agree with the majority of per-sample sigmoids here.
    const auto sig = binary_classifier::raw_outputs(disc, ood_batch);
    size_t above = 0;
    for (double s : sig) above += s > 0.5 ? 1 : 0;
    CHECK(2 * above > ood_batch.size());
    const auto majority =
        binary_classifier::predict(disc, ood_batch, PredictMode::pure_batch,
                                   BatchVoteRule::majority);
    CHECK(majority == votes);
}

TEST_CASE("outputs stay strictly inside (0,1)") {
    const auto p = separable_pseudo(95, 15);
    const auto disc = binary_classifier::retrain(p, quick_cfg(96, 40), 0);
    Rng rng(97);
    for (int trial = 0; trial < 100; ++trial) {
        const Vector x{rng.uniform(-50.0, 50.0), rng.uniform(-50.0, 50.0)};
        const auto sig = binary_classifier::raw_outputs(disc, {x});
        CHECK(sig[0] > 0.0);
        CHECK(sig[0] < 1.0);
    }
}

TEST_CASE("discriminator json round-trip keeps the generation counter") {
    const auto p = separable_pseudo(98, 10);
    const auto disc = binary_classifier::retrain(p, quick_cfg(99, 10), 6);
    const std::string path = "test_disc_roundtrip.json";
    binary_classifier::save_discriminator(disc, path);
    const auto back = binary_classifier::load_discriminator(path);
    CHECK(back.generation == 7);
    CHECK(back.training_set_size == disc.training_set_size);
    CHECK(back.net.layers.back().weights == disc.net.layers.back().weights);
    std::remove(path.c_str());
}

}  // TEST_SUITE
