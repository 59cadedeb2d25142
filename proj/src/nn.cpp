#include "gradova/nn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "gradova/rng.hpp"
#include "json.hpp"

namespace gradova::nn {

namespace {

constexpr double kBnEps = 1e-5;
constexpr double kBnMomentum = 0.1;
constexpr double kAdamEps = 1e-8;

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double softplus(double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

Layer make_layer(int in, int out, Activation act, Rng& rng) {
    Layer l;
    l.in = in;
    l.out = out;
    l.act = act;
    l.weights.resize(static_cast<size_t>(out) * in);
    const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
    for (auto& w : l.weights) w = rng.uniform(-bound, bound);
    l.bias.assign(out, 0.0);
    if (act == Activation::batchnorm_relu) {
        BatchNormState bn;
        bn.gamma.assign(out, 1.0);
        bn.beta.assign(out, 0.0);
        bn.running_mean.assign(out, 0.0);
        bn.running_var.assign(out, 1.0);
        l.bn = bn;
    }
    return l;
}

// Per-batch intermediate values kept for the backward pass.
struct BatchCache {
    std::vector<std::vector<Vector>> a;     // a[0] = inputs, a[l+1] = layer l output
    std::vector<std::vector<Vector>> z;     // dense pre-activations per layer
    std::vector<std::vector<Vector>> xhat;  // batchnorm layers only
    std::vector<Vector> bn_mean, bn_var;    // stats used by each bn layer
};

void run_forward(const MlpModel& model, const std::vector<Vector>& batch, Mode mode,
                 BnPolicy policy, BatchCache* cache) {
    if (model.layers.empty()) throw std::invalid_argument("forward: model has no layers");
    const size_t m = batch.size();
    for (const auto& x : batch) {
        if (static_cast<int>(x.size()) != model.input_dim())
            throw std::invalid_argument("forward: input dimension mismatch");
    }

    const size_t nl = model.layers.size();
    cache->a.assign(nl + 1, {});
    cache->z.assign(nl, {});
    cache->xhat.assign(nl, {});
    cache->bn_mean.assign(nl, {});
    cache->bn_var.assign(nl, {});
    cache->a[0] = batch;

    std::vector<Vector> act = batch;
    for (size_t li = 0; li < nl; ++li) {
        const Layer& L = model.layers[li];
        std::vector<Vector> z(m, Vector(L.out, 0.0));
        for (size_t i = 0; i < m; ++i) {
            for (int o = 0; o < L.out; ++o) {
                double s = L.bias[o];
                const double* wrow = &L.weights[static_cast<size_t>(o) * L.in];
                for (int k = 0; k < L.in; ++k) s += wrow[k] * act[i][k];
                z[i][o] = s;
            }
        }
        cache->z[li] = z;

        std::vector<Vector> out;
        switch (L.act) {
            case Activation::linear:
                out = z;
                break;
            case Activation::relu:
                out = z;
                for (auto& v : out)
                    for (auto& e : v) e = e > 0.0 ? e : 0.0;
                break;
            case Activation::sigmoid:
                out = z;
                for (auto& v : out)
                    for (auto& e : v) e = sigmoid(e);
                break;
            case Activation::batchnorm_relu: {
                const BatchNormState& bn = *L.bn;
                const bool batch_stats =
                    mode == Mode::train ||
                    (policy == BnPolicy::force_batch_stats) ||
                    (policy == BnPolicy::per_layer_flag && bn.batch_stats_at_inference);
                if (batch_stats && m == 0)
                    throw std::invalid_argument(
                        "forward: empty batch with batch-statistics batchnorm");
                Vector mean(L.out, 0.0), var(L.out, 0.0);
                if (batch_stats) {
                    for (int o = 0; o < L.out; ++o) {
                        double s = 0.0;
                        for (size_t i = 0; i < m; ++i) s += z[i][o];
                        mean[o] = s / static_cast<double>(m);
                        double v = 0.0;
                        for (size_t i = 0; i < m; ++i) {
                            const double d = z[i][o] - mean[o];
                            v += d * d;
                        }
                        var[o] = v / static_cast<double>(m);
                    }
                } else {
                    mean = bn.running_mean;
                    var = bn.running_var;
                }
                out.assign(m, Vector(L.out, 0.0));
                std::vector<Vector> xhat(m, Vector(L.out, 0.0));
                for (int o = 0; o < L.out; ++o) {
                    const double ivar = 1.0 / std::sqrt(var[o] + kBnEps);
                    for (size_t i = 0; i < m; ++i) {
                        const double xh = (z[i][o] - mean[o]) * ivar;
                        xhat[i][o] = xh;
                        const double y = bn.gamma[o] * xh + bn.beta[o];
                        out[i][o] = y > 0.0 ? y : 0.0;
                    }
                }
                cache->xhat[li] = std::move(xhat);
                cache->bn_mean[li] = mean;
                cache->bn_var[li] = var;
                break;
            }
        }
        cache->a[li + 1] = out;
        act = std::move(out);
    }
}

// Parameter-shaped gradient (and optimizer moment) container.
struct ParamBlock {
    std::vector<double> w, b, gamma, beta;
};

std::vector<ParamBlock> zero_blocks(const MlpModel& model) {
    std::vector<ParamBlock> blocks(model.layers.size());
    for (size_t li = 0; li < model.layers.size(); ++li) {
        const Layer& L = model.layers[li];
        blocks[li].w.assign(L.weights.size(), 0.0);
        blocks[li].b.assign(L.bias.size(), 0.0);
        if (L.bn) {
            blocks[li].gamma.assign(L.bn->gamma.size(), 0.0);
            blocks[li].beta.assign(L.bn->beta.size(), 0.0);
        }
    }
    return blocks;
}

// Backward pass from head pre-activation gradients; batch-statistics
// batchnorm (train mode) assumed for bn layers.
std::vector<ParamBlock> backward(const MlpModel& model, const BatchCache& cache,
                                 const std::vector<Vector>& dz_head) {
    const size_t nl = model.layers.size();
    const size_t m = dz_head.size();
    std::vector<ParamBlock> grads = zero_blocks(model);

    std::vector<Vector> dz = dz_head;
    for (size_t li = nl; li-- > 0;) {
        const Layer& L = model.layers[li];
        ParamBlock& g = grads[li];
        const std::vector<Vector>& a_prev = cache.a[li];

        for (size_t i = 0; i < m; ++i) {
            for (int o = 0; o < L.out; ++o) {
                const double d = dz[i][o];
                g.b[o] += d;
                double* grow = &g.w[static_cast<size_t>(o) * L.in];
                for (int k = 0; k < L.in; ++k) grow[k] += d * a_prev[i][k];
            }
        }
        if (li == 0) break;

        std::vector<Vector> da(m, Vector(L.in, 0.0));
        for (size_t i = 0; i < m; ++i) {
            for (int o = 0; o < L.out; ++o) {
                const double d = dz[i][o];
                const double* wrow = &L.weights[static_cast<size_t>(o) * L.in];
                for (int k = 0; k < L.in; ++k) da[i][k] += d * wrow[k];
            }
        }

        // Activation backward of the layer below.
        const size_t pl = li - 1;
        const Layer& P = model.layers[pl];
        std::vector<Vector> dz_prev(m, Vector(P.out, 0.0));
        switch (P.act) {
            case Activation::linear:
                dz_prev = da;
                break;
            case Activation::relu:
                for (size_t i = 0; i < m; ++i)
                    for (int o = 0; o < P.out; ++o)
                        dz_prev[i][o] = cache.z[pl][i][o] > 0.0 ? da[i][o] : 0.0;
                break;
            case Activation::sigmoid:
                for (size_t i = 0; i < m; ++i)
                    for (int o = 0; o < P.out; ++o) {
                        const double s = cache.a[pl + 1][i][o];
                        dz_prev[i][o] = da[i][o] * s * (1.0 - s);
                    }
                break;
            case Activation::batchnorm_relu: {
                ParamBlock& pg = grads[pl];
                const double mm = static_cast<double>(m);
                for (int o = 0; o < P.out; ++o) {
                    const double ivar = 1.0 / std::sqrt(cache.bn_var[pl][o] + kBnEps);
                    const double gamma = P.bn->gamma[o];
                    double dgamma = 0.0, dbeta = 0.0, dvar = 0.0, dmean = 0.0;
                    for (size_t i = 0; i < m; ++i) {
                        // ReLU gate: output positive iff pre-relu positive.
                        const double dy = cache.a[pl + 1][i][o] > 0.0 ? da[i][o] : 0.0;
                        const double xh = cache.xhat[pl][i][o];
                        dgamma += dy * xh;
                        dbeta += dy;
                        const double dxhat = dy * gamma;
                        const double zc = cache.z[pl][i][o] - cache.bn_mean[pl][o];
                        dvar += dxhat * zc;
                        dmean += dxhat;
                    }
                    dvar *= -0.5 * ivar * ivar * ivar;
                    dmean *= -ivar;
                    pg.gamma[o] += dgamma;
                    pg.beta[o] += dbeta;
                    for (size_t i = 0; i < m; ++i) {
                        const double dy = cache.a[pl + 1][i][o] > 0.0 ? da[i][o] : 0.0;
                        const double dxhat = dy * gamma;
                        const double zc = cache.z[pl][i][o] - cache.bn_mean[pl][o];
                        dz_prev[i][o] = dxhat * ivar + dvar * 2.0 * zc / mm + dmean / mm;
                    }
                }
                break;
            }
        }
        dz = std::move(dz_prev);
    }
    return grads;
}

double loss_and_head_grad(const std::vector<Vector>& logits, const std::vector<int>& labels,
                          LossKind kind, std::vector<Vector>* dz_out) {
    const size_t m = logits.size();
    if (dz_out) dz_out->assign(m, Vector(logits[0].size(), 0.0));
    if (kind == LossKind::multiclass) {
        double total = 0.0;
        for (size_t i = 0; i < m; ++i) {
            const Vector p = softmax(logits[i]);
            total += cross_entropy(p, labels[i]);
            if (dz_out) {
                for (size_t c = 0; c < p.size(); ++c)
                    (*dz_out)[i][c] = (p[c] - (static_cast<int>(c) == labels[i] ? 1.0 : 0.0)) /
                                      static_cast<double>(m);
            }
        }
        return total / static_cast<double>(m);
    }

    // Discriminator: the outlier and in-distribution halves are averaged
    // separately. Labels: 1 = outlier (sigmoid pushed to 1), 0 = in-dist.
    size_t n1 = 0, n0 = 0;
    for (int y : labels) (y == 1 ? n1 : n0) += 1;
    double loss = 0.0;
    for (size_t i = 0; i < m; ++i) {
        const double z = logits[i][0];
        const double s = sigmoid(z);
        if (labels[i] == 1) {
            loss += softplus(-z) / static_cast<double>(n1);
            if (dz_out) (*dz_out)[i][0] = (s - 1.0) / static_cast<double>(n1);
        } else {
            loss += softplus(z) / static_cast<double>(n0);
            if (dz_out) (*dz_out)[i][0] = s / static_cast<double>(n0);
        }
    }
    return loss;
}

struct AdamState {
    std::vector<ParamBlock> m, v;
    long step = 0;
};

void apply_update(MlpModel& model, const std::vector<ParamBlock>& grads,
                  const TrainConfig& cfg, AdamState& adam) {
    if (cfg.optimizer == Optimizer::sgd) {
        for (size_t li = 0; li < model.layers.size(); ++li) {
            Layer& L = model.layers[li];
            const ParamBlock& g = grads[li];
            for (size_t k = 0; k < L.weights.size(); ++k) L.weights[k] -= cfg.learning_rate * g.w[k];
            for (size_t k = 0; k < L.bias.size(); ++k) L.bias[k] -= cfg.learning_rate * g.b[k];
            if (L.bn) {
                for (size_t k = 0; k < L.bn->gamma.size(); ++k)
                    L.bn->gamma[k] -= cfg.learning_rate * g.gamma[k];
                for (size_t k = 0; k < L.bn->beta.size(); ++k)
                    L.bn->beta[k] -= cfg.learning_rate * g.beta[k];
            }
        }
        return;
    }

    adam.step += 1;
    const double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(adam.step));
    const double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(adam.step));
    auto step = [&](std::vector<double>& theta, std::vector<double>& m,
                    std::vector<double>& v, const std::vector<double>& g) {
        for (size_t k = 0; k < theta.size(); ++k) {
            m[k] = cfg.adam_beta1 * m[k] + (1.0 - cfg.adam_beta1) * g[k];
            v[k] = cfg.adam_beta2 * v[k] + (1.0 - cfg.adam_beta2) * g[k] * g[k];
            const double mhat = m[k] / bc1;
            const double vhat = v[k] / bc2;
            theta[k] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + kAdamEps);
        }
    };
    for (size_t li = 0; li < model.layers.size(); ++li) {
        Layer& L = model.layers[li];
        step(L.weights, adam.m[li].w, adam.v[li].w, grads[li].w);
        step(L.bias, adam.m[li].b, adam.v[li].b, grads[li].b);
        if (L.bn) {
            step(L.bn->gamma, adam.m[li].gamma, adam.v[li].gamma, grads[li].gamma);
            step(L.bn->beta, adam.m[li].beta, adam.v[li].beta, grads[li].beta);
        }
    }
}

void update_running_stats(MlpModel& model, const BatchCache& cache) {
    for (size_t li = 0; li < model.layers.size(); ++li) {
        Layer& L = model.layers[li];
        if (!L.bn) continue;
        for (int o = 0; o < L.out; ++o) {
            L.bn->running_mean[o] = (1.0 - kBnMomentum) * L.bn->running_mean[o] +
                                    kBnMomentum * cache.bn_mean[li][o];
            L.bn->running_var[o] = (1.0 - kBnMomentum) * L.bn->running_var[o] +
                                   kBnMomentum * cache.bn_var[li][o];
        }
    }
}

}  // namespace

MlpModel make_mlp(int input_dim, const std::vector<int>& hidden_dims, int class_count,
                  uint64_t seed) {
    if (input_dim < 1 || class_count < 1)
        throw std::invalid_argument("make_mlp: bad dimensions");
    Rng rng(seed);
    MlpModel m;
    m.class_count = class_count;
    m.rng_seed = seed;
    int prev = input_dim;
    for (int h : hidden_dims) {
        m.layers.push_back(make_layer(prev, h, Activation::relu, rng));
        prev = h;
    }
    m.layers.push_back(make_layer(prev, class_count, Activation::linear, rng));
    m.feature_dim_last_hidden = prev;
    return m;
}

MlpModel make_discriminator(int input_dim, uint64_t seed) {
    Rng rng(seed);
    MlpModel m;
    m.class_count = 1;
    m.rng_seed = seed;
    m.layers.push_back(make_layer(input_dim, 32, Activation::batchnorm_relu, rng));
    m.layers.push_back(make_layer(32, 16, Activation::relu, rng));
    m.layers.push_back(make_layer(16, 1, Activation::sigmoid, rng));
    m.feature_dim_last_hidden = 16;
    return m;
}

void set_bn_inference_policy(MlpModel& model, bool batch_stats_at_inference) {
    for (auto& layer : model.layers) {
        if (layer.bn) layer.bn->batch_stats_at_inference = batch_stats_at_inference;
    }
}

ForwardResult forward(const MlpModel& model, const std::vector<Vector>& batch, Mode mode) {
    return forward_with_policy(model, batch, mode, BnPolicy::per_layer_flag);
}

ForwardResult forward_with_policy(const MlpModel& model, const std::vector<Vector>& batch,
                                  Mode mode, BnPolicy policy) {
    BatchCache cache;
    run_forward(model, batch, mode, policy, &cache);
    ForwardResult r;
    r.logits = cache.z.back();
    r.hidden = cache.a[model.layers.size() - 1];
    return r;
}

Vector softmax(const Vector& logits) {
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    Vector p(logits.size());
    double sum = 0.0;
    for (size_t i = 0; i < p.size(); ++i) {
        p[i] = std::exp(logits[i] - mx);
        sum += p[i];
    }
    for (auto& v : p) v /= sum;
    return p;
}

double cross_entropy(const Vector& probabilities, int label) {
    if (label < 0 || label >= static_cast<int>(probabilities.size()))
        throw std::invalid_argument("cross_entropy: label out of range");
    return -std::log(std::max(probabilities[label], 1e-30));
}

TrainResult train(const MlpModel& init, const std::vector<Vector>& samples,
                  const std::vector<int>& labels, const TrainConfig& cfg, LossKind loss) {
    if (samples.empty()) throw std::invalid_argument("train: empty data");
    if (samples.size() != labels.size())
        throw std::invalid_argument("train: samples/labels length mismatch");
    const int n_classes = loss == LossKind::multiclass ? init.class_count : 2;
    for (int y : labels) {
        if (y < 0 || y >= n_classes) throw std::invalid_argument("train: label out of range");
    }

    std::vector<size_t> idx0, idx1, idx;
    if (loss == LossKind::discriminator) {
        for (size_t i = 0; i < labels.size(); ++i) (labels[i] == 1 ? idx1 : idx0).push_back(i);
        if (idx0.empty() || idx1.empty())
            throw std::invalid_argument("train: discriminator needs both classes");
    } else {
        idx.resize(samples.size());
        for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    }

    TrainResult result;
    result.model = init;
    AdamState adam;
    adam.m = zero_blocks(init);
    adam.v = zero_blocks(init);
    Rng rng(cfg.rng_seed);

    const size_t mb = std::max(1, cfg.minibatch_size);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double loss_sum = 0.0;
        size_t n_seen = 0;

        auto run_batch = [&](const std::vector<Vector>& bx, const std::vector<int>& by) {
            BatchCache cache;
            run_forward(result.model, bx, Mode::train, BnPolicy::per_layer_flag, &cache);
            update_running_stats(result.model, cache);
            std::vector<Vector> dz;
            const double batch_loss = loss_and_head_grad(cache.z.back(), by, loss, &dz);
            const auto grads = backward(result.model, cache, dz);
            apply_update(result.model, grads, cfg, adam);
            loss_sum += batch_loss * static_cast<double>(bx.size());
            n_seen += bx.size();
        };

        if (loss == LossKind::multiclass) {
            rng.shuffle(idx);
            for (size_t start = 0; start < idx.size(); start += mb) {
                const size_t end = std::min(start + mb, idx.size());
                std::vector<Vector> bx;
                std::vector<int> by;
                for (size_t k = start; k < end; ++k) {
                    bx.push_back(samples[idx[k]]);
                    by.push_back(labels[idx[k]]);
                }
                run_batch(bx, by);
            }
        } else {
            rng.shuffle(idx0);
            rng.shuffle(idx1);
            const size_t half = std::max<size_t>(1, mb / 2);
            const size_t n_batches =
                (std::max(idx0.size(), idx1.size()) + half - 1) / half;
            // Each batch carries both classes; an exhausted side cycles
            // through its shuffled order again.
            auto side_chunk = [&](const std::vector<size_t>& side, size_t bi,
                                  std::vector<Vector>& bx, std::vector<int>& by, int lab) {
                const size_t start = bi * half;
                if (start < side.size()) {
                    const size_t end = std::min(start + half, side.size());
                    for (size_t k = start; k < end; ++k) {
                        bx.push_back(samples[side[k]]);
                        by.push_back(lab);
                    }
                } else {
                    for (size_t j = 0; j < half; ++j) {
                        bx.push_back(samples[side[(start + j) % side.size()]]);
                        by.push_back(lab);
                    }
                }
            };
            for (size_t bi = 0; bi < n_batches; ++bi) {
                std::vector<Vector> bx;
                std::vector<int> by;
                side_chunk(idx0, bi, bx, by, 0);
                side_chunk(idx1, bi, bx, by, 1);
                run_batch(bx, by);
            }
        }

        const double epoch_loss = loss_sum / static_cast<double>(n_seen);
        if (!std::isfinite(epoch_loss))
            throw NumericError("train: non-finite epoch loss at epoch " + std::to_string(epoch));
        result.epoch_losses.push_back(epoch_loss);
    }
    return result;
}

double backprop_check_batch(const MlpModel& model, const std::vector<Vector>& batch,
                            const std::vector<int>& labels) {
    const LossKind kind = model.binary_head() ? LossKind::discriminator : LossKind::multiclass;

    BatchCache cache;
    run_forward(model, batch, Mode::train, BnPolicy::per_layer_flag, &cache);
    std::vector<Vector> dz;
    loss_and_head_grad(cache.z.back(), labels, kind, &dz);
    const auto analytic = backward(model, cache, dz);

    const double h = 1e-5;
    auto loss_at = [&](const MlpModel& m) {
        BatchCache c;
        run_forward(m, batch, Mode::train, BnPolicy::per_layer_flag, &c);
        return loss_and_head_grad(c.z.back(), labels, kind, nullptr);
    };

    double max_rel = 0.0;
    auto probe = [&](MlpModel& work, std::vector<double>& params, const std::vector<double>& ga) {
        for (size_t k = 0; k < params.size(); ++k) {
            const double orig = params[k];
            params[k] = orig + h;
            const double lp = loss_at(work);
            params[k] = orig - h;
            const double lm = loss_at(work);
            params[k] = orig;
            const double fd = (lp - lm) / (2.0 * h);
            const double rel =
                std::abs(ga[k] - fd) / std::max({std::abs(ga[k]), std::abs(fd), 1e-6});
            max_rel = std::max(max_rel, rel);
        }
    };

    MlpModel work = model;
    for (size_t li = 0; li < work.layers.size(); ++li) {
        probe(work, work.layers[li].weights, analytic[li].w);
        probe(work, work.layers[li].bias, analytic[li].b);
        if (work.layers[li].bn) {
            probe(work, work.layers[li].bn->gamma, analytic[li].gamma);
            probe(work, work.layers[li].bn->beta, analytic[li].beta);
        }
    }
    return max_rel;
}

double backprop_check(const MlpModel& model, const Vector& sample, int label) {
    return backprop_check_batch(model, {sample}, {label});
}

namespace {

const char* act_name(Activation a) {
    switch (a) {
        case Activation::linear: return "linear";
        case Activation::relu: return "relu";
        case Activation::batchnorm_relu: return "batchnorm_relu";
        case Activation::sigmoid: return "sigmoid";
    }
    return "linear";
}

Activation act_from_name(const std::string& s) {
    if (s == "linear") return Activation::linear;
    if (s == "relu") return Activation::relu;
    if (s == "batchnorm_relu") return Activation::batchnorm_relu;
    if (s == "sigmoid") return Activation::sigmoid;
    throw std::invalid_argument("unknown activation: " + s);
}

}  // namespace

std::string model_to_json(const MlpModel& model) {
    nlohmann::json j;
    j["format"] = "gradova.model/1";
    j["class_count"] = model.class_count;
    j["feature_dim_last_hidden"] = model.feature_dim_last_hidden;
    j["rng_seed"] = model.rng_seed;
    nlohmann::json layers = nlohmann::json::array();
    for (const Layer& L : model.layers) {
        nlohmann::json jl;
        jl["in"] = L.in;
        jl["out"] = L.out;
        jl["activation"] = act_name(L.act);
        jl["weights"] = L.weights;
        jl["bias"] = L.bias;
        if (L.bn) {
            jl["batchnorm"] = {{"gamma", L.bn->gamma},
                               {"beta", L.bn->beta},
                               {"running_mean", L.bn->running_mean},
                               {"running_var", L.bn->running_var},
                               {"batch_stats_at_inference", L.bn->batch_stats_at_inference}};
        }
        layers.push_back(jl);
    }
    j["layers"] = layers;
    return j.dump(2);
}

MlpModel model_from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    MlpModel m;
    m.class_count = j.at("class_count").get<int>();
    m.feature_dim_last_hidden = j.at("feature_dim_last_hidden").get<int>();
    m.rng_seed = j.at("rng_seed").get<uint64_t>();
    for (const auto& jl : j.at("layers")) {
        Layer L;
        L.in = jl.at("in").get<int>();
        L.out = jl.at("out").get<int>();
        L.act = act_from_name(jl.at("activation").get<std::string>());
        L.weights = jl.at("weights").get<std::vector<double>>();
        L.bias = jl.at("bias").get<std::vector<double>>();
        if (static_cast<int>(L.weights.size()) != L.in * L.out ||
            static_cast<int>(L.bias.size()) != L.out)
            throw std::invalid_argument("model json: parameter size mismatch");
        if (jl.contains("batchnorm")) {
            const auto& jb = jl.at("batchnorm");
            BatchNormState bn;
            bn.gamma = jb.at("gamma").get<std::vector<double>>();
            bn.beta = jb.at("beta").get<std::vector<double>>();
            bn.running_mean = jb.at("running_mean").get<std::vector<double>>();
            bn.running_var = jb.at("running_var").get<std::vector<double>>();
            bn.batch_stats_at_inference = jb.at("batch_stats_at_inference").get<bool>();
            L.bn = bn;
        }
        m.layers.push_back(std::move(L));
    }
    return m;
}

void save_model(const MlpModel& model, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << model_to_json(model) << "\n";
}

MlpModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return model_from_json(ss.str());
}

}  // namespace gradova::nn
