#include "doctest.h"

#include <cmath>

#include "gradova/data.hpp"
#include "gradova/label_select.hpp"
#include "gradova/rng.hpp"

using namespace gradova;
using linalg::Vector;

namespace {

// Identity 3x3 linear layer: softmax(f(x)) = softmax(x), so inputs of
// log-probabilities reproduce those probabilities exactly.
nn::MlpModel identity3() {
    nn::MlpModel m = nn::make_mlp(3, {}, 3, 1);
    m.layers[0].weights = {1, 0, 0, 0, 1, 0, 0, 0, 1};
    m.layers[0].bias = {0, 0, 0};
    return m;
}

Vector logits_for(const Vector& p) {
    Vector z(p.size());
    for (size_t i = 0; i < p.size(); ++i) z[i] = p[i] > 0.0 ? std::log(p[i]) : -1000.0;
    return z;
}

}  // namespace

TEST_SUITE("label_select") {

TEST_CASE("single sample takes the softmax argmin") {
    const auto m = identity3();
    const auto sel = label_select::select_label(m, {logits_for({0.7, 0.2, 0.1})});
    CHECK(sel.class_index == 2);
    CHECK(sel.estimated_from == 1);
    CHECK(sel.frozen);
}

TEST_CASE("ties break toward the lowest class index") {
    const auto m = identity3();
    // Sums (0.5, 1.0, 0.5): classes 0 and 2 tie, 0 wins.
    const auto sel = label_select::select_label(
        m, {logits_for({0.5, 0.5, 0.0}), logits_for({0.0, 0.5, 0.5})});
    CHECK(sel.class_index == 0);
}

TEST_CASE("matches the brute-force per-class sums on a trained model") {
    data::SourceSpec spec;
    spec.class_count = 4;
    spec.dim = 4;
    spec.samples_per_class = 50;
    spec.separation = 4.0;
    spec.seed = 61;
    std::vector<Vector> xs;
    std::vector<int> ys;
    for (const auto& t : data::generate(spec, data::OodTag::idd)) {
        xs.push_back(t.features);
        ys.push_back(*t.class_label);
    }
    nn::MlpModel init = nn::make_mlp(4, {16}, 4, 62);
    nn::TrainConfig cfg;
    cfg.epochs = 60;
    cfg.learning_rate = 2e-3;
    cfg.rng_seed = 63;
    const auto model = nn::train(init, xs, ys, cfg, nn::LossKind::multiclass).model;

    Rng rng(64);
    std::vector<Vector> probes(50, Vector(4));
    for (auto& v : probes)
        for (auto& e : v) e = rng.normal() * 3.0;

    Vector sums(4, 0.0);
    for (const auto& x : probes) {
        const auto fwd = nn::forward(model, {x}, nn::Mode::eval);
        const auto p = nn::softmax(fwd.logits[0]);
        for (int c = 0; c < 4; ++c) sums[c] += p[c];
    }
    int ref = 0;
    for (int c = 1; c < 4; ++c)
        if (sums[c] < sums[ref]) ref = c;

    CHECK(label_select::select_label(model, probes).class_index == ref);
}

TEST_CASE("invariant under permutation and duplication") {
    const auto m = identity3();
    std::vector<Vector> batch{logits_for({0.6, 0.3, 0.1}), logits_for({0.2, 0.3, 0.5}),
                              logits_for({0.25, 0.7, 0.05})};
    const int base = label_select::select_label(m, batch).class_index;

    std::vector<Vector> permuted{batch[2], batch[0], batch[1]};
    CHECK(label_select::select_label(m, permuted).class_index == base);

    std::vector<Vector> doubled = batch;
    doubled.insert(doubled.end(), batch.begin(), batch.end());
    CHECK(label_select::select_label(m, doubled).class_index == base);
}

TEST_CASE("selected class is never the argmax of the summed softmax") {
    const auto m = identity3();
    Rng rng(65);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<Vector> batch;
        Vector sums(3, 0.0);
        for (int i = 0; i < 10; ++i) {
            Vector z(3);
            for (auto& e : z) e = rng.uniform(-2.0, 2.0);
            batch.push_back(z);
            const auto p = nn::softmax(z);
            for (int c = 0; c < 3; ++c) sums[c] += p[c];
        }
        int argmax = 0;
        for (int c = 1; c < 3; ++c)
            if (sums[c] > sums[argmax]) argmax = c;
        const int sel = label_select::select_label(m, batch).class_index;
        if (sums[argmax] > sums[sel]) CHECK(sel != argmax);
    }
}

TEST_CASE("empty batch is rejected") {
    const auto m = identity3();
    CHECK_THROWS_AS(label_select::select_label(m, {}), std::invalid_argument);
}

}  // TEST_SUITE
