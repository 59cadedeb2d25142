#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gradova/linalg.hpp"

namespace gradova::nn {

using linalg::Vector;

enum class Activation { linear, relu, batchnorm_relu, sigmoid };

struct BatchNormState {
    std::vector<double> gamma;
    std::vector<double> beta;
    std::vector<double> running_mean;
    std::vector<double> running_var;
    // When set, plain eval-mode forward normalizes with the incoming
    // batch's statistics instead of the running ones.
    bool batch_stats_at_inference = false;
};

struct Layer {
    int in = 0;
    int out = 0;
    std::vector<double> weights;  // row-major, out x in
    std::vector<double> bias;     // out
    Activation act = Activation::linear;
    std::optional<BatchNormState> bn;  // present iff act == batchnorm_relu
};

struct MlpModel {
    std::vector<Layer> layers;
    int class_count = 0;
    int feature_dim_last_hidden = 0;
    uint64_t rng_seed = 0;

    int input_dim() const { return layers.empty() ? 0 : layers.front().in; }
    bool binary_head() const {
        return !layers.empty() && layers.back().act == Activation::sigmoid;
    }
};

// ReLU hidden stack with a linear classification head; weights drawn
// uniform(+-sqrt(6/(fan_in+fan_out))) from the seed, biases zero.
MlpModel make_mlp(int input_dim, const std::vector<int>& hidden_dims,
                  int class_count, uint64_t seed);

// dense(32)+batchnorm+ReLU -> dense(16)+ReLU -> dense(1)+sigmoid.
MlpModel make_discriminator(int input_dim, uint64_t seed);

// Sets the batch-stats-at-inference flag on every batchnorm layer.
void set_bn_inference_policy(MlpModel& model, bool batch_stats_at_inference);

enum class Mode { train, eval };

struct ForwardResult {
    std::vector<Vector> logits;  // final-layer pre-activations
    std::vector<Vector> hidden;  // activations feeding the final layer
};

ForwardResult forward(const MlpModel& model, const std::vector<Vector>& batch, Mode mode);

// Internal knob for the discriminator's two prediction modes.
enum class BnPolicy { per_layer_flag, force_batch_stats, force_running_stats };
ForwardResult forward_with_policy(const MlpModel& model, const std::vector<Vector>& batch,
                                  Mode mode, BnPolicy policy);

// Max-subtracted softmax; entries in (0,1], sum 1.
Vector softmax(const Vector& logits);

// -log(max(p_label, 1e-30)).
double cross_entropy(const Vector& probabilities, int label);

enum class LossKind { multiclass, discriminator };
enum class Optimizer { adam, sgd };

struct TrainConfig {
    double learning_rate = 2e-4;
    double adam_beta1 = 0.5;
    double adam_beta2 = 0.999;
    int epochs = 200;
    int minibatch_size = 32;
    uint64_t rng_seed = 0;
    Optimizer optimizer = Optimizer::adam;
};

struct TrainResult {
    MlpModel model;
    std::vector<double> epoch_losses;
    // Set when a discriminator class consisted of identical vectors.
    bool degenerate_input = false;
};

// Thrown when a training loss goes non-finite.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Multiclass: labels in [0, class_count), mean cross-entropy.
// Discriminator: labels 0 = in-distribution, 1 = outlier; the two halves of
// the loss are averaged separately. Deterministic given the config seed.
TrainResult train(const MlpModel& init, const std::vector<Vector>& samples,
                  const std::vector<int>& labels, const TrainConfig& cfg, LossKind loss);

// Max relative error between analytic parameter gradients and central finite
// differences (step 1e-5) of the sample's loss.
double backprop_check(const MlpModel& model, const Vector& sample, int label);
double backprop_check_batch(const MlpModel& model, const std::vector<Vector>& batch,
                            const std::vector<int>& labels);

// JSON persistence; round-trips are loss-free (shortest round-trip decimals).
std::string model_to_json(const MlpModel& model);
MlpModel model_from_json(const std::string& text);
void save_model(const MlpModel& model, const std::string& path);
MlpModel load_model(const std::string& path);

}  // namespace gradova::nn
