#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "gradova/data.hpp"
#include "gradova/mahalanobis.hpp"
#include "gradova/rng.hpp"
#include "oracles.hpp"

using namespace gradova;
using linalg::Vector;

namespace {

struct TrainedSetup {
    nn::MlpModel model;
    mahalanobis::GradientStatistics stats;
    std::vector<Vector> train_x;
    std::vector<int> train_y;
    data::SourceSpec spec;
};

TrainedSetup small_trained_setup(uint64_t seed, double separation = 4.0, int epochs = 80) {
    TrainedSetup s;
    s.spec.class_count = 4;
    s.spec.dim = 4;
    s.spec.samples_per_class = 60;
    s.spec.separation = separation;
    s.spec.seed = seed;
    for (const auto& t : data::generate(s.spec, data::OodTag::idd)) {
        s.train_x.push_back(t.features);
        s.train_y.push_back(*t.class_label);
    }
    nn::MlpModel init = nn::make_mlp(4, {16, 8}, 4, seed + 1);
    nn::TrainConfig cfg;
    cfg.epochs = epochs;
    cfg.learning_rate = 2e-3;
    cfg.rng_seed = seed + 2;
    s.model = nn::train(init, s.train_x, s.train_y, cfg, nn::LossKind::multiclass).model;
    s.stats = mahalanobis::fit(s.model, s.train_x, s.train_y, false, 1e-6);
    return s;
}

}  // namespace

TEST_SUITE("mahalanobis") {

TEST_CASE("degenerate fit: one class, one sample") {
    // Zero scatter, so the precision is the pure regularizer (1/eps) I.
    std::vector<Vector> grads{{0.5, -0.25}};
    const auto stats = mahalanobis::fit_from_gradients(grads, {0}, 1, 1e-6);
    CHECK(stats.class_means[0] == grads[0]);
    CHECK(stats.per_class_counts == std::vector<int>{1});
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            CHECK(stats.tied_precision.at(i, j) ==
                  doctest::Approx(i == j ? 1e6 : 0.0).epsilon(1e-9));
}

TEST_CASE("fit matches a hand expansion on a 2-class 1-D model") {
    // Single linear layer on 1-D input: gradients are 2-vectors
    // ((p0 - [c=0]) x, (p1 - [c=1]) x), fully hand-computable.
    nn::MlpModel m = nn::make_mlp(1, {}, 2, 1);
    m.layers[0].weights = {1.5, -0.5};
    m.layers[0].bias = {0.25, -0.25};

    const std::vector<Vector> xs{{0.8}, {1.2}, {-0.9}, {-0.3}};
    const std::vector<int> ys{0, 0, 1, 1};

    std::vector<Vector> grads;
    for (size_t i = 0; i < xs.size(); ++i) {
        const double x = xs[i][0];
        const double z0 = 1.5 * x + 0.25;
        const double z1 = -0.5 * x - 0.25;
        const double mx = std::max(z0, z1);
        const double e0 = std::exp(z0 - mx), e1 = std::exp(z1 - mx);
        const double p0 = e0 / (e0 + e1), p1 = e1 / (e0 + e1);
        grads.push_back({(p0 - (ys[i] == 0 ? 1.0 : 0.0)) * x,
                         (p1 - (ys[i] == 1 ? 1.0 : 0.0)) * x});
    }

    // Hand expansion of the statistics.
    Vector mu0(2, 0.0), mu1(2, 0.0);
    for (int k = 0; k < 2; ++k) {
        mu0[k] = 0.5 * (grads[0][k] + grads[1][k]);
        mu1[k] = 0.5 * (grads[2][k] + grads[3][k]);
    }
    linalg::SymMatrix sigma(2);
    for (size_t i = 0; i < grads.size(); ++i) {
        const Vector& mu = ys[i] == 0 ? mu0 : mu1;
        for (int r = 0; r < 2; ++r)
            for (int c = 0; c < 2; ++c)
                sigma.at(r, c) += (grads[i][r] - mu[r]) * (grads[i][c] - mu[c]) / 4.0;
    }
    const double eps = 1e-6 * (sigma.at(0, 0) + sigma.at(1, 1)) / 2.0;
    linalg::SymMatrix reg = sigma;
    reg.at(0, 0) += eps;
    reg.at(1, 1) += eps;
    const auto precision_ref = oracles::inverse_2x2(reg);

    const auto stats = mahalanobis::fit(m, xs, ys, false, 1e-6);
    for (int k = 0; k < 2; ++k) {
        CHECK(stats.class_means[0][k] == doctest::Approx(mu0[k]).epsilon(1e-12));
        CHECK(stats.class_means[1][k] == doctest::Approx(mu1[k]).epsilon(1e-12));
    }
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c)
            CHECK(stats.tied_precision.at(r, c) ==
                  doctest::Approx(precision_ref.at(r, c)).epsilon(1e-9));
}

TEST_CASE("fit on blobs produces distinct class means") {
    const auto s = small_trained_setup(2024);
    double min_dist = 1e300;
    for (size_t a = 0; a < s.stats.class_means.size(); ++a) {
        for (size_t b = a + 1; b < s.stats.class_means.size(); ++b) {
            double d = 0.0;
            for (int k = 0; k < s.stats.dimension; ++k) {
                const double diff = s.stats.class_means[a][k] - s.stats.class_means[b][k];
                d += diff * diff;
            }
            min_dist = std::min(min_dist, std::sqrt(d));
        }
    }
    CHECK(min_dist > 0.0);

    // Independent re-accumulation of one class mean.
    const auto grads = gradients::extract_batch(s.model, s.train_x, s.train_y, false);
    Vector mu(s.stats.dimension, 0.0);
    int count = 0;
    for (size_t i = 0; i < grads.size(); ++i) {
        if (s.train_y[i] != 2) continue;
        ++count;
        for (int k = 0; k < s.stats.dimension; ++k) mu[k] += grads[i].values[k];
    }
    for (int k = 0; k < s.stats.dimension; ++k)
        CHECK(s.stats.class_means[2][k] == doctest::Approx(mu[k] / count).epsilon(1e-12));
}

TEST_CASE("fit rejects an empty class") {
    CHECK_THROWS_AS(mahalanobis::fit_from_gradients({{1.0, 0.0}}, {0}, 2, 1e-6),
                    std::invalid_argument);
}

TEST_CASE("fit is permutation invariant") {
    Rng rng(33);
    std::vector<Vector> grads(30, Vector(3));
    std::vector<int> labels;
    for (size_t i = 0; i < grads.size(); ++i) {
        for (auto& e : grads[i]) e = rng.normal();
        labels.push_back(static_cast<int>(i % 3));
    }
    const auto a = mahalanobis::fit_from_gradients(grads, labels, 3, 1e-6);
    std::vector<size_t> perm(grads.size());
    for (size_t i = 0; i < perm.size(); ++i) perm[i] = perm.size() - 1 - i;
    std::vector<Vector> g2;
    std::vector<int> l2;
    for (size_t i : perm) {
        g2.push_back(grads[i]);
        l2.push_back(labels[i]);
    }
    const auto b = mahalanobis::fit_from_gradients(g2, l2, 3, 1e-6);
    for (int c = 0; c < 3; ++c)
        for (int k = 0; k < 3; ++k)
            CHECK(a.class_means[c][k] == doctest::Approx(b.class_means[c][k]).epsilon(1e-12));
    for (size_t k = 0; k < a.tied_precision.values.size(); ++k)
        CHECK(a.tied_precision.values[k] ==
              doctest::Approx(b.tied_precision.values[k]).epsilon(1e-8));
}

TEST_CASE("score at the class mean is zero and the whitened unit is one") {
    std::vector<Vector> grads{{1.0, 0.0}, {0.0, 1.0}, {-1.0, 0.0}, {0.0, -1.0}};
    auto stats = mahalanobis::fit_from_gradients(grads, {0, 0, 0, 0}, 1, 1e-6);
    mahalanobis::GradientVector g;
    g.values = stats.class_means[0];
    CHECK(mahalanobis::score(stats, g, 0).value == 0.0);

    stats.tied_precision = linalg::identity(2);
    g.values = {stats.class_means[0][0] + 1.0, stats.class_means[0][1]};
    CHECK(mahalanobis::score(stats, g, 0).value == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("score equals the naive quadratic form") {
    const auto s = small_trained_setup(777);
    Rng rng(778);
    Vector x(4);
    for (auto& e : x) e = rng.normal();
    const auto g = gradients::extract_gradient(s.model, x, 1, false);
    const auto sc = mahalanobis::score(s.stats, g, 1);
    const double ref =
        oracles::quadratic_form_naive(g.values, s.stats.class_means[1], s.stats.tied_precision);
    CHECK(sc.value == doctest::Approx(ref).epsilon(1e-12));
    CHECK(sc.label_used == 1);
}

TEST_CASE("score_sample override consistency and range check") {
    const auto s = small_trained_setup(555);
    const Vector x = s.train_x[5];
    const auto fwd = nn::forward(s.model, {x}, nn::Mode::eval);
    const auto p = nn::softmax(fwd.logits[0]);
    const int pred = static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
    const auto a = mahalanobis::score_sample(s.model, s.stats, x);
    const auto b = mahalanobis::score_sample(s.model, s.stats, x, pred);
    CHECK(a.value == b.value);
    CHECK(a.label_used == b.label_used);
    CHECK_THROWS_AS(mahalanobis::score_sample(s.model, s.stats, x, 9), std::invalid_argument);
}

TEST_CASE("an in-distribution sample near its centroid scores low") {
    const auto s = small_trained_setup(901);
    // Class centroid estimate and the training sample closest to it.
    Vector centroid(4, 0.0);
    int count = 0;
    for (size_t i = 0; i < s.train_x.size(); ++i) {
        if (s.train_y[i] != 0) continue;
        ++count;
        for (int k = 0; k < 4; ++k) centroid[k] += s.train_x[i][k];
    }
    for (auto& e : centroid) e /= count;
    size_t best = 0;
    double best_d = 1e300;
    std::vector<double> class_scores;
    for (size_t i = 0; i < s.train_x.size(); ++i) {
        if (s.train_y[i] != 0) continue;
        double d = 0.0;
        for (int k = 0; k < 4; ++k) {
            const double diff = s.train_x[i][k] - centroid[k];
            d += diff * diff;
        }
        if (d < best_d) {
            best_d = d;
            best = i;
        }
        class_scores.push_back(mahalanobis::score_sample(s.model, s.stats, s.train_x[i]).value);
    }
    std::sort(class_scores.begin(), class_scores.end());
    const double p95 = class_scores[static_cast<size_t>(
        std::ceil(0.95 * static_cast<double>(class_scores.size())) - 1)];
    CHECK(mahalanobis::score_sample(s.model, s.stats, s.train_x[best]).value < p95);
}

TEST_CASE("a far outlier scores above every training sample") {
    const auto s = small_trained_setup(911);
    double max_train = 0.0;
    for (const auto& x : s.train_x)
        max_train = std::max(max_train, mahalanobis::score_sample(s.model, s.stats, x).value);

    // 20 sigma from the origin, opposite the centroid cone.
    Rng rng(912);
    Vector far(4);
    for (auto& e : far) e = rng.normal();
    double norm = 0.0;
    for (double e : far) norm += e * e;
    norm = std::sqrt(norm);
    for (auto& e : far) e = -20.0 * e / norm;
    CHECK(mahalanobis::score_sample(s.model, s.stats, far).value > max_train);
}

TEST_CASE("scores are non-negative") {
    const auto s = small_trained_setup(921);
    Rng rng(922);
    for (int trial = 0; trial < 100; ++trial) {
        Vector x(4);
        for (auto& e : x) e = rng.normal() * rng.uniform(0.0, 10.0);
        CHECK(mahalanobis::score_sample(s.model, s.stats, x).value >= 0.0);
    }
}

TEST_CASE("refit after an orthogonal gradient transform keeps scores") {
    Rng rng(44);
    const int d = 5;
    std::vector<Vector> grads(40, Vector(d));
    std::vector<int> labels;
    for (size_t i = 0; i < grads.size(); ++i) {
        for (auto& e : grads[i]) e = rng.normal();
        labels.push_back(static_cast<int>(i % 2));
    }
    const auto q = oracles::random_orthogonal(d, 45);
    std::vector<Vector> rotated;
    for (const auto& g : grads) rotated.push_back(oracles::apply_matrix(q, g));

    const auto stats = mahalanobis::fit_from_gradients(grads, labels, 2, 1e-6);
    const auto stats_rot = mahalanobis::fit_from_gradients(rotated, labels, 2, 1e-6);

    for (int trial = 0; trial < 20; ++trial) {
        Vector g(d);
        for (auto& e : g) e = rng.normal();
        mahalanobis::GradientVector gv, gv_rot;
        gv.values = g;
        gv_rot.values = oracles::apply_matrix(q, g);
        const double a = mahalanobis::score(stats, gv, trial % 2).value;
        const double b = mahalanobis::score(stats_rot, gv_rot, trial % 2).value;
        CHECK(a == doctest::Approx(b).epsilon(1e-8));
    }
}

TEST_CASE("score_all parallel path is bit-identical to the serial one") {
    const auto s = small_trained_setup(931);
    Rng rng(932);
    std::vector<Vector> xs(43, Vector(4));
    std::vector<std::optional<int>> overrides(43);
    for (size_t i = 0; i < xs.size(); ++i) {
        for (auto& e : xs[i]) e = rng.normal() * 3.0;
        if (i % 3 == 0) overrides[i] = static_cast<int>(i % 4);
    }
    const auto par = mahalanobis::score_all(s.model, s.stats, xs, overrides);
    const auto ser = mahalanobis::score_all_serial(s.model, s.stats, xs, overrides);
    REQUIRE(par.size() == ser.size());
    for (size_t i = 0; i < par.size(); ++i) {
        CHECK(par[i].value == ser[i].value);
        CHECK(par[i].label_used == ser[i].label_used);
        CHECK((par[i].label_mode == ser[i].label_mode));
    }
}

TEST_CASE("statistics json round-trip") {
    const auto s = small_trained_setup(941);
    const std::string text = mahalanobis::stats_to_json(s.stats);
    const auto back = mahalanobis::stats_from_json(text);
    CHECK(back.dimension == s.stats.dimension);
    CHECK(back.per_class_counts == s.stats.per_class_counts);
    CHECK(back.class_means == s.stats.class_means);
    CHECK(back.tied_precision.values == s.stats.tied_precision.values);
    CHECK(back.include_bias == s.stats.include_bias);
    CHECK(back.epsilon_scale == s.stats.epsilon_scale);

    const std::string path = "test_stats_roundtrip.json";
    mahalanobis::save_stats(s.stats, path);
    const auto loaded = mahalanobis::load_stats(path);
    CHECK(loaded.tied_precision.values == s.stats.tied_precision.values);
    std::remove(path.c_str());
}

}  // TEST_SUITE
