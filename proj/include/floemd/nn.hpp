#pragma once

#include "floemd/rng.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace floemd {

enum class Activation { relu, sigmoid, identity };

Activation activation_from_name(const std::string& name);
const char* activation_name(Activation a);

// Fully connected layer. dropout_rate masks this layer's *input* when the
// model is in train mode (inverted dropout: kept units scale by 1/(1-p)).
struct DenseLayer {
    int in_dim = 0;
    int out_dim = 0;
    std::vector<double> weights;  // out_dim x in_dim, row-major
    std::vector<double> bias;     // out_dim
    Activation activation = Activation::identity;
    double dropout_rate = 0.0;    // in [0, 1)
};

struct MlpModel {
    std::vector<DenseLayer> layers;
    bool train_mode = false;
    // Parameter generation counter; forward caches record it so backward can
    // reject a cache that predates a parameter update.
    std::uint64_t version = 0;
};

// He-style uniform init: weights ~ U(-sqrt(6/in_dim), sqrt(6/in_dim)), zero bias.
DenseLayer make_layer(int in_dim, int out_dim, Activation act, double dropout, Rng& rng);

// Throws unless consecutive layer dimensions chain.
void check_chain(const MlpModel& model);

struct ForwardCache {
    std::vector<std::vector<double>> inputs;   // per layer, after dropout
    std::vector<std::vector<double>> preacts;  // per layer, before activation
    std::vector<std::vector<double>> masks;    // dropout scale factors (empty if none)
    std::uint64_t version = 0;
};

// Affine + activation per layer. rng is consumed only in train mode by
// layers with dropout (required then); cache may be null for inference.
std::vector<double> forward(const MlpModel& model, const std::vector<double>& x,
                            Rng* rng = nullptr, ForwardCache* cache = nullptr);

// (1-eps) one-hot + eps/k; components sum to 1.
std::vector<double> smoothed_targets(int label, int k, double eps);

std::vector<double> softmax(const std::vector<double>& logits);

struct LossResult {
    double loss = 0.0;
    std::vector<double> grad;  // d loss / d logits = softmax(logits) - targets
};

// Cross entropy against an arbitrary target distribution, computed from
// max-subtracted softmax for stability.
LossResult ce_loss(const std::vector<double>& logits, const std::vector<double>& targets);

struct Gradients {
    std::vector<std::vector<double>> weights;  // shapes mirror the model
    std::vector<std::vector<double>> bias;
};

Gradients zero_gradients(const MlpModel& model);
void accumulate(Gradients& into, const Gradients& g);
void scale(Gradients& g, double k);

// Exact reverse-mode gradients honoring the cached dropout masks. Throws if
// the cache was produced under a different parameter version.
Gradients backward(const MlpModel& model, const ForwardCache& cache,
                   const std::vector<double>& grad_logits);

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double clip_norm = 1.0;  // global l2 clip applied before the moment update
};

struct AdamState {
    long step = 0;
    std::vector<std::vector<double>> m_w, v_w, m_b, v_b;
};

AdamState make_adam_state(const MlpModel& model);

// Step decay: base lr, x0.1 from epoch 30, x0.01 from epoch 60 (1-based).
double scheduled_lr(double base_lr, int epoch);

// Clips the full gradient set to clip_norm, then applies one bias-corrected
// Adam update. Non-finite gradients are rejected without touching the model.
void adam_step(MlpModel& model, AdamState& state, const AdamConfig& cfg,
               const Gradients& grads, int epoch);

// Scale used by gradient checks: |a-b| relative to max(1, |a|, |b|).
double relative_gap(double analytic, double numeric);

// Text tensor container: per tensor one line `name rows cols` followed by
// rows*cols whitespace-separated values at 17 significant digits, which
// round-trips doubles bit-exactly.
struct NamedTensor {
    std::string name;
    int rows = 0;
    int cols = 0;
    std::vector<double> values;
};

void write_tensor_file(const std::filesystem::path& path,
                       const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> read_tensor_file(const std::filesystem::path& path);

}  // namespace floemd
