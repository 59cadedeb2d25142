#include "gradova/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "gradova/kernels.hpp"
#include "gradova/rng.hpp"

namespace gradova::eval {

namespace {

// Component offsets for derive_seed(root, ...). The README mirrors this
// table. Layout seeds pin class geometry; the draw index picks the split.
enum SeedSlot : uint64_t {
    kIddLayout = 1,
    kOodLayout = 3,
    kModelInit = 5,
    kModelTrain = 6,
    kDiscBase = 7,
    kStreamShuffle = 8,
    kEvalPartition = 9,
};

// Distinct draw indices per role: with a shared layout the outlier pools
// must still see noise streams independent of the in-distribution pools.
enum DrawSlot : uint64_t {
    kTrainDraw = 0,
    kTestDraw = 1,
    kStreamDraw = 2,
    kOodStreamDraw = 3,
    kOodTestDraw = 4,
};

// Applies the configured layout relation to a resolved outlier source.
void apply_ood_layout(const ExperimentSpec& spec, data::SourceSpec& ood) {
    switch (spec.ood_layout) {
        case OodLayout::shared:
            ood.seed = derive_seed(spec.root_seed, kIddLayout);
            break;
        case OodLayout::independent:
            ood.seed = derive_seed(spec.root_seed, kOodLayout);
            break;
        case OodLayout::similar:
            ood.seed = derive_seed(spec.root_seed, kOodLayout);
            ood.base_layout_seed = derive_seed(spec.root_seed, kIddLayout);
            ood.direction_similarity = spec.ood_similarity;
            break;
    }
}

// Round-robin over classes so every prefix of the pool is class-balanced.
std::vector<data::TaggedSample> interleave_classes(std::vector<data::TaggedSample> samples,
                                                   int class_count, int per_class,
                                                   size_t want) {
    std::vector<data::TaggedSample> out;
    out.reserve(want);
    for (int s = 0; s < per_class && out.size() < want; ++s) {
        for (int c = 0; c < class_count && out.size() < want; ++c) {
            out.push_back(samples[static_cast<size_t>(c) * per_class + s]);
        }
    }
    if (out.size() != want) throw std::logic_error("interleave: pool too small");
    return out;
}

std::vector<data::TaggedSample> make_pool(const data::SourceSpec& base, data::OodTag tag,
                                          uint64_t layout_seed, uint64_t draw, size_t want) {
    data::SourceSpec spec = base;
    spec.seed = layout_seed;
    spec.draw = draw;
    spec.samples_per_class =
        static_cast<int>((want + spec.class_count - 1) / spec.class_count);
    auto all = data::generate(spec, tag);
    return interleave_classes(std::move(all), spec.class_count, spec.samples_per_class, want);
}

double classifier_accuracy(const nn::MlpModel& model,
                           const std::vector<data::TaggedSample>& test) {
    size_t hit = 0;
    for (const auto& t : test) {
        const auto fwd = nn::forward(model, {t.features}, nn::Mode::eval);
        const auto p = nn::softmax(fwd.logits[0]);
        const int pred = static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
        if (t.class_label && pred == *t.class_label) ++hit;
    }
    return static_cast<double>(hit) / static_cast<double>(test.size());
}

}  // namespace

data::SourceSpec resolved_source(const data::SourceSpec& base, uint64_t root, uint64_t layout,
                                 uint64_t draw) {
    data::SourceSpec s = base;
    s.seed = derive_seed(root, layout);
    s.draw = draw;
    return s;
}

TrainedIdd train_idd_model(const ExperimentSpec& spec) {
    const auto train_set = data::generate(
        resolved_source(spec.idd, spec.root_seed, kIddLayout, kTrainDraw), data::OodTag::idd);

    std::vector<Vector> xs;
    std::vector<int> ys;
    for (const auto& t : train_set) {
        xs.push_back(t.features);
        ys.push_back(*t.class_label);
    }

    nn::MlpModel init = nn::make_mlp(spec.idd.dim, spec.hidden_dims, spec.idd.class_count,
                                     derive_seed(spec.root_seed, kModelInit));
    nn::TrainConfig tc = spec.idd_train;
    tc.rng_seed = derive_seed(spec.root_seed, kModelTrain);
    auto trained = nn::train(init, xs, ys, tc, nn::LossKind::multiclass);

    TrainedIdd out;
    out.model = std::move(trained.model);
    data::SourceSpec test_spec =
        resolved_source(spec.idd, spec.root_seed, kIddLayout, kTestDraw);
    test_spec.samples_per_class = spec.test_per_class;
    out.idd_test_accuracy =
        classifier_accuracy(out.model, data::generate(test_spec, data::OodTag::idd));
    return out;
}

mahalanobis::GradientStatistics fit_statistics(const ExperimentSpec& spec,
                                               const nn::MlpModel& model) {
    std::vector<Vector> xs;
    std::vector<int> ys;
    for (const auto& t : data::generate(
             resolved_source(spec.idd, spec.root_seed, kIddLayout, kTrainDraw),
             data::OodTag::idd)) {
        xs.push_back(t.features);
        ys.push_back(*t.class_label);
    }
    return mahalanobis::fit(model, xs, ys, spec.include_bias, spec.epsilon_scale);
}

StreamData make_stream(const ExperimentSpec& spec) {
    const size_t n_in = static_cast<size_t>(spec.loop_cfg.batch_size_in) * spec.n_batches;
    const size_t n_ood = static_cast<size_t>(spec.loop_cfg.batch_size_ood) * spec.n_batches;
    const auto idd_pool = make_pool(spec.idd, data::OodTag::idd,
                                    derive_seed(spec.root_seed, kIddLayout), kStreamDraw, n_in);
    const auto ood_pool =
        make_pool(spec.ood, data::OodTag::ood, ood_layout_seed(spec), kOodStreamDraw, n_ood);

    StreamData out;
    for (int k = 0; k < spec.n_batches; ++k) {
        std::vector<std::pair<Vector, bool>> members;
        for (int j = 0; j < spec.loop_cfg.batch_size_in; ++j)
            members.push_back({idd_pool[static_cast<size_t>(k) * spec.loop_cfg.batch_size_in + j]
                                   .features,
                               false});
        for (int j = 0; j < spec.loop_cfg.batch_size_ood; ++j)
            members.push_back({ood_pool[static_cast<size_t>(k) * spec.loop_cfg.batch_size_ood + j]
                                   .features,
                               true});
        Rng rng(derive_seed(derive_seed(spec.root_seed, kStreamShuffle),
                            static_cast<uint64_t>(k)));
        rng.shuffle(members);
        std::vector<Vector> batch;
        std::vector<bool> truth;
        for (auto& m : members) {
            batch.push_back(std::move(m.first));
            truth.push_back(m.second);
        }
        out.batches.push_back(std::move(batch));
        out.truth.push_back(std::move(truth));
    }
    return out;
}

std::vector<data::TaggedSample> make_test_set(const ExperimentSpec& spec) {
    data::SourceSpec idd_test = resolved_source(spec.idd, spec.root_seed, kIddLayout, kTestDraw);
    idd_test.samples_per_class = spec.test_per_class;
    auto test = data::generate(idd_test, data::OodTag::idd);

    data::SourceSpec ood_test = spec.ood;
    ood_test.seed = ood_layout_seed(spec);
    ood_test.draw = kOodTestDraw;
    ood_test.samples_per_class = spec.test_per_class;
    const auto ood = data::generate(ood_test, data::OodTag::ood);
    test.insert(test.end(), ood.begin(), ood.end());
    return test;
}

StreamStage run_stream_stage(const ExperimentSpec& spec, const nn::MlpModel& model,
                             const mahalanobis::GradientStatistics& stats) {
    const StreamData stream_data = make_stream(spec);
    const auto test_set = make_test_set(spec);

    loop::LoopConfig cfg = spec.loop_cfg;
    cfg.discriminator_train.rng_seed = derive_seed(spec.root_seed, kDiscBase);

    loop::StreamEvalHooks hooks;
    hooks.batch_truth_ood = stream_data.truth;
    hooks.disc_test = &test_set;

    StreamStage stage;
    stage.stream = loop::run_stream(stream_data.batches, model, stats, cfg, &hooks);
    if (!stage.stream.trace.empty())
        stage.disc_test_accuracy = stage.stream.trace.back().disc_accuracy;
    if (stage.stream.state.selected_label)
        stage.selected_label = stage.stream.state.selected_label->class_index;

    DetectorState ds{&model, &stats, stage.selected_label};
    const Discriminator* disc =
        stage.stream.state.discriminator ? &*stage.stream.state.discriminator : nullptr;
    stage.held_out_report = evaluate_per_sample(disc, ds, test_set, cfg.batch_vote_rule);

    for (int bs : spec.pure_batch_sizes) {
        if (!disc) break;
        stage.pure_batch_reports.push_back(
            evaluate_pure_batch(*disc, ds, test_set, bs,
                                derive_seed(spec.root_seed, kEvalPartition),
                                cfg.batch_vote_rule));
    }
    return stage;
}

ExperimentResult run_experiment(const ExperimentSpec& spec) {
    TrainedIdd trained = train_idd_model(spec);
    auto stats = fit_statistics(spec, trained.model);
    StreamStage stage = run_stream_stage(spec, trained.model, stats);

    ExperimentResult result;
    result.model = std::move(trained.model);
    result.stats = std::move(stats);
    result.idd_test_accuracy = trained.idd_test_accuracy;
    result.stream = std::move(stage.stream);
    result.held_out_report = stage.held_out_report;
    result.pure_batch_reports = std::move(stage.pure_batch_reports);
    result.disc_test_accuracy = stage.disc_test_accuracy;
    result.selected_label = stage.selected_label;
    return result;
}

MultiRunSummary run_repeated(const ExperimentSpec& spec, int n_runs) {
    if (n_runs < 1) throw std::invalid_argument("run_repeated: n_runs must be >= 1");
    MultiRunSummary summary;
    summary.runs.resize(n_runs);
    const int threads = std::min(kernels::resolve_threads(), n_runs);
#pragma omp parallel for schedule(static) num_threads(threads)
    for (int r = 0; r < n_runs; ++r) {
        ExperimentSpec run_spec = spec;
        run_spec.root_seed = derive_seed(spec.root_seed, 100 + static_cast<uint64_t>(r));
        summary.runs[r] = run_experiment(run_spec).held_out_report;
    }
    auto mean_std = [&](auto metric, double& mean, double& std) {
        double m = 0.0;
        for (const auto& rep : summary.runs) m += metric(rep);
        m /= static_cast<double>(n_runs);
        double ss = 0.0;
        for (const auto& rep : summary.runs) {
            const double d = metric(rep) - m;
            ss += d * d;
        }
        mean = m;
        std = n_runs > 1 ? std::sqrt(ss / static_cast<double>(n_runs - 1)) : 0.0;
    };
    mean_std([](const MetricReport& r) { return r.auroc; }, summary.auroc_mean,
             summary.auroc_std);
    mean_std([](const MetricReport& r) { return r.aupr; }, summary.aupr_mean, summary.aupr_std);
    return summary;
}

OneClassReport one_class_experiment(const OneClassOptions& opt) {
    if (opt.memory_budget < opt.n_batches)
        throw std::invalid_argument("one_class: memory budget below one loop batch");

    const uint64_t root = opt.root_seed;
    data::SourceSpec idd;
    idd.kind = "blobs";
    idd.class_count = opt.idd_classes;
    idd.dim = opt.dim;
    idd.samples_per_class = opt.train_per_class;
    idd.separation = opt.separation;
    idd.seed = derive_seed(root, kIddLayout);
    idd.draw = kTrainDraw;

    data::SourceSpec ood;
    ood.kind = "blobs";
    ood.class_count = 1;
    ood.dim = opt.dim;
    ood.separation = opt.ood_on_centroid ? opt.separation
                                         : opt.separation * opt.ood_separation_factor;
    // The on-centroid sanity case reuses the in-distribution layout seed so
    // the single outlier direction coincides with class 0's.
    ood.seed = opt.ood_on_centroid ? idd.seed : derive_seed(root, kOodLayout);

    const auto train_set = data::generate(idd, data::OodTag::idd);
    std::vector<Vector> xs;
    std::vector<int> ys;
    for (const auto& t : train_set) {
        xs.push_back(t.features);
        ys.push_back(*t.class_label);
    }
    nn::MlpModel init = nn::make_mlp(opt.dim, opt.hidden_dims, opt.idd_classes,
                                     derive_seed(root, kModelInit));
    nn::TrainConfig tc = opt.idd_train;
    tc.rng_seed = derive_seed(root, kModelTrain);
    const auto model = nn::train(init, xs, ys, tc, nn::LossKind::multiclass).model;
    const auto stats = mahalanobis::fit(model, xs, ys, opt.include_bias, opt.epsilon_scale);

    // Stream: the rehearsal budget of in-distribution samples against the
    // full outlier stream, spread evenly over the batches.
    const auto idd_pool = make_pool(idd, data::OodTag::idd, idd.seed, kStreamDraw,
                                    static_cast<size_t>(opt.memory_budget));
    data::SourceSpec ood_pool_spec = ood;
    ood_pool_spec.samples_per_class = opt.ood_stream;
    ood_pool_spec.draw = kOodStreamDraw;
    const auto ood_pool = data::generate(ood_pool_spec, data::OodTag::ood);

    std::vector<std::vector<Vector>> batches;
    size_t idd_at = 0, ood_at = 0;
    for (int k = 0; k < opt.n_batches; ++k) {
        const size_t idd_take = static_cast<size_t>(opt.memory_budget) * (k + 1) / opt.n_batches -
                                static_cast<size_t>(opt.memory_budget) * k / opt.n_batches;
        const size_t ood_take = static_cast<size_t>(opt.ood_stream) * (k + 1) / opt.n_batches -
                                static_cast<size_t>(opt.ood_stream) * k / opt.n_batches;
        std::vector<Vector> batch;
        for (size_t j = 0; j < idd_take; ++j) batch.push_back(idd_pool[idd_at++].features);
        for (size_t j = 0; j < ood_take; ++j) batch.push_back(ood_pool[ood_at++].features);
        Rng rng(derive_seed(derive_seed(root, kStreamShuffle), static_cast<uint64_t>(k)));
        rng.shuffle(batch);
        batches.push_back(std::move(batch));
    }

    loop::LoopConfig cfg = opt.loop_cfg;
    cfg.batch_size_in = std::max<int>(1, opt.memory_budget / opt.n_batches);
    cfg.batch_size_ood = std::max<int>(1, opt.ood_stream / opt.n_batches);
    cfg.discriminator_train.rng_seed = derive_seed(root, kDiscBase);
    const auto run = loop::run_stream(batches, model, stats, cfg, nullptr);

    const double threshold = loop::current_threshold(run.state);
    const Discriminator* disc =
        run.state.discriminator ? &*run.state.discriminator : nullptr;
    const std::optional<int> y_opt = run.state.selected_label
                                         ? std::optional<int>(run.state.selected_label->class_index)
                                         : std::nullopt;

    // Held-out test: every in-distribution class plus the outlier class,
    // routed through detector decision -> head.
    data::SourceSpec idd_test = idd;
    idd_test.samples_per_class = opt.test_per_class;
    idd_test.draw = kTestDraw;
    auto test = data::generate(idd_test, data::OodTag::idd);
    data::SourceSpec ood_test = ood;
    ood_test.samples_per_class = opt.test_per_class;
    ood_test.draw = kOodTestDraw;
    const auto ood_samples = data::generate(ood_test, data::OodTag::ood);

    OneClassReport report;
    report.memory_budget = opt.memory_budget;
    report.ood_stream_size = opt.ood_stream;

    std::map<int, std::pair<int, int>> hits;  // class -> (correct, total)
    auto route = [&](const Vector& x, int true_class) {
        std::optional<int> override_label;
        if (disc && y_opt) {
            const auto vote = binary_classifier::predict(
                *disc, {x}, binary_classifier::PredictMode::per_sample, cfg.batch_vote_rule);
            if (vote[0]) override_label = y_opt;
        }
        const auto score = mahalanobis::score_sample(model, stats, x, override_label);
        int predicted;
        if (score.value > threshold) {
            predicted = opt.idd_classes;  // the new one-class head
        } else {
            const auto fwd = nn::forward(model, {x}, nn::Mode::eval);
            const auto p = nn::softmax(fwd.logits[0]);
            predicted = static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
        }
        auto& h = hits[true_class];
        h.second += 1;
        if (predicted == true_class) h.first += 1;
    };
    for (const auto& t : test) route(t.features, *t.class_label);
    for (const auto& t : ood_samples) route(t.features, opt.idd_classes);

    for (const auto& [cls, h] : hits)
        report.per_class_single_head_accuracy[cls] =
            static_cast<double>(h.first) / static_cast<double>(h.second);
    return report;
}

}  // namespace gradova::eval
