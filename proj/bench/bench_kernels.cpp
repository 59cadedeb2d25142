// Timing comparison between the serial references and the OpenMP kernels.
#include <chrono>
#include <cstdio>

#include "gradova/data.hpp"
#include "gradova/kernels.hpp"
#include "gradova/mahalanobis.hpp"
#include "gradova/nn.hpp"
#include "gradova/rng.hpp"

using namespace gradova;
using linalg::Vector;

namespace {

double seconds(std::chrono::steady_clock::time_point a,
               std::chrono::steady_clock::time_point b) {
    return std::chrono::duration<double>(b - a).count();
}

template <typename F>
double time_best_of(int reps, F&& f) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        f();
        const auto t1 = std::chrono::steady_clock::now();
        best = std::min(best, seconds(t0, t1));
    }
    return best;
}

std::vector<Vector> random_vectors(int n, int d, uint64_t seed) {
    Rng rng(seed);
    std::vector<Vector> out(n, Vector(d));
    for (auto& v : out)
        for (auto& e : v) e = rng.normal();
    return out;
}

void report(const char* name, double serial, double parallel) {
    std::printf("%-28s serial %8.4f s   parallel %8.4f s   speedup %5.2fx\n", name, serial,
                parallel, serial / parallel);
}

}  // namespace

int main() {
    std::printf("threads: %d\n", kernels::resolve_threads());

    {
        const int n = 4000, d = 96;
        const auto xs = random_vectors(n, d, 1);
        const Vector mean(d, 0.0);
        const double ts = time_best_of(3, [&] { kernels::serial::scatter_matrix(xs, mean); });
        const double tp = time_best_of(3, [&] { kernels::scatter_matrix(xs, mean); });
        report("scatter_matrix 4000x96", ts, tp);
    }

    {
        const int n = 20000, d = 96;
        const auto xs = random_vectors(n, d, 2);
        const auto basis = random_vectors(2 * d, d, 3);
        const linalg::SymMatrix p = kernels::serial::scatter_matrix(basis, Vector(d, 0.0));
        const Vector mu = random_vectors(1, d, 4)[0];
        const double ts = time_best_of(3, [&] { kernels::serial::quadratic_forms(xs, mu, p); });
        const double tp = time_best_of(3, [&] { kernels::quadratic_forms(xs, mu, p); });
        report("quadratic_forms 20000x96", ts, tp);
    }

    {
        // Full scoring path: forward, gradient extraction, quadratic form.
        data::SourceSpec spec;
        spec.class_count = 4;
        spec.dim = 8;
        spec.samples_per_class = 150;
        spec.separation = 6.0;
        spec.seed = 5;
        std::vector<Vector> xs;
        std::vector<int> ys;
        for (const auto& t : data::generate(spec, data::OodTag::idd)) {
            xs.push_back(t.features);
            ys.push_back(*t.class_label);
        }
        nn::MlpModel init = nn::make_mlp(8, {64, 16}, 4, 6);
        nn::TrainConfig cfg;
        cfg.epochs = 30;
        cfg.rng_seed = 7;
        const auto model = nn::train(init, xs, ys, cfg, nn::LossKind::multiclass).model;
        const auto stats = mahalanobis::fit(model, xs, ys, false, 1e-6);
        const auto probes = random_vectors(4000, 8, 8);
        const double ts = time_best_of(
            3, [&] { mahalanobis::score_all_serial(model, stats, probes, {}); });
        const double tp =
            time_best_of(3, [&] { mahalanobis::score_all(model, stats, probes, {}); });
        report("score_all 4000 samples", ts, tp);
    }
    return 0;
}
