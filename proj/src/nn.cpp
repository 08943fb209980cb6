#include "floemd/nn.hpp"

#include "floemd/dataset.hpp"  // DataError

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace floemd {

Activation activation_from_name(const std::string& name) {
    if (name == "relu") return Activation::relu;
    if (name == "sigmoid") return Activation::sigmoid;
    if (name == "identity") return Activation::identity;
    throw std::invalid_argument("unknown activation '" + name + "'");
}

const char* activation_name(Activation a) {
    switch (a) {
        case Activation::relu: return "relu";
        case Activation::sigmoid: return "sigmoid";
        case Activation::identity: return "identity";
    }
    return "identity";
}

DenseLayer make_layer(int in_dim, int out_dim, Activation act, double dropout, Rng& rng) {
    if (in_dim < 1 || out_dim < 1) throw std::invalid_argument("layer dimensions must be positive");
    if (dropout < 0.0 || dropout >= 1.0) throw std::invalid_argument("dropout must be in [0,1)");
    DenseLayer layer;
    layer.in_dim = in_dim;
    layer.out_dim = out_dim;
    layer.activation = act;
    layer.dropout_rate = dropout;
    const double limit = std::sqrt(6.0 / in_dim);
    layer.weights.resize(static_cast<std::size_t>(in_dim) * out_dim);
    for (double& w : layer.weights) w = rng.uniform(-limit, limit);
    layer.bias.assign(static_cast<std::size_t>(out_dim), 0.0);
    return layer;
}

void check_chain(const MlpModel& model) {
    if (model.layers.empty()) throw std::invalid_argument("model has no layers");
    for (std::size_t i = 0; i + 1 < model.layers.size(); ++i) {
        if (model.layers[i].out_dim != model.layers[i + 1].in_dim)
            throw std::invalid_argument("layer dimensions do not chain");
    }
}

namespace {

double activate(Activation a, double z) {
    switch (a) {
        case Activation::relu: return z > 0.0 ? z : 0.0;
        case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-z));
        case Activation::identity: return z;
    }
    return z;
}

double activate_grad(Activation a, double z, double y) {
    switch (a) {
        case Activation::relu: return z > 0.0 ? 1.0 : 0.0;
        case Activation::sigmoid: return y * (1.0 - y);
        case Activation::identity: return 1.0;
    }
    return 1.0;
}

}  // namespace

std::vector<double> forward(const MlpModel& model, const std::vector<double>& x,
                            Rng* rng, ForwardCache* cache) {
    check_chain(model);
    if (static_cast<int>(x.size()) != model.layers.front().in_dim)
        throw std::invalid_argument("input length does not match the first layer");

    if (cache) {
        cache->inputs.clear();
        cache->preacts.clear();
        cache->masks.clear();
        cache->version = model.version;
    }

    std::vector<double> cur = x;
    for (const DenseLayer& layer : model.layers) {
        std::vector<double> mask;
        if (model.train_mode && layer.dropout_rate > 0.0) {
            if (!rng) throw std::invalid_argument("train-mode dropout needs an rng");
            const double keep_scale = 1.0 / (1.0 - layer.dropout_rate);
            mask.resize(cur.size());
            for (std::size_t i = 0; i < cur.size(); ++i) {
                mask[i] = (rng->uniform() < layer.dropout_rate) ? 0.0 : keep_scale;
                cur[i] *= mask[i];
            }
        }
        if (cache) {
            cache->inputs.push_back(cur);
            cache->masks.push_back(std::move(mask));
        }
        std::vector<double> z(static_cast<std::size_t>(layer.out_dim));
        for (int o = 0; o < layer.out_dim; ++o) {
            const double* row = layer.weights.data() + static_cast<std::size_t>(o) * layer.in_dim;
            double acc = layer.bias[static_cast<std::size_t>(o)];
            for (int i = 0; i < layer.in_dim; ++i) acc += row[i] * cur[static_cast<std::size_t>(i)];
            z[static_cast<std::size_t>(o)] = acc;
        }
        if (cache) cache->preacts.push_back(z);
        cur.resize(z.size());
        for (std::size_t o = 0; o < z.size(); ++o) cur[o] = activate(layer.activation, z[o]);
    }
    return cur;
}

std::vector<double> smoothed_targets(int label, int k, double eps) {
    if (k < 1) throw std::invalid_argument("class count must be positive");
    if (label < 0 || label >= k) throw std::invalid_argument("label out of range");
    if (eps < 0.0 || eps >= 1.0) throw std::invalid_argument("smoothing must be in [0,1)");
    std::vector<double> t(static_cast<std::size_t>(k), eps / k);
    t[static_cast<std::size_t>(label)] += 1.0 - eps;
    return t;
}

std::vector<double> softmax(const std::vector<double>& logits) {
    if (logits.empty()) throw std::invalid_argument("softmax of empty vector");
    const double mx = *std::max_element(logits.begin(), logits.end());
    std::vector<double> p(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - mx);
        sum += p[i];
    }
    for (double& v : p) v /= sum;
    return p;
}

LossResult ce_loss(const std::vector<double>& logits, const std::vector<double>& targets) {
    if (logits.size() != targets.size())
        throw std::invalid_argument("logits/targets length mismatch");
    const auto p = softmax(logits);
    LossResult out;
    out.grad.resize(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (targets[i] > 0.0) out.loss -= targets[i] * std::log(p[i]);
        out.grad[i] = p[i] - targets[i];
    }
    return out;
}

Gradients zero_gradients(const MlpModel& model) {
    Gradients g;
    g.weights.reserve(model.layers.size());
    g.bias.reserve(model.layers.size());
    for (const auto& layer : model.layers) {
        g.weights.emplace_back(layer.weights.size(), 0.0);
        g.bias.emplace_back(layer.bias.size(), 0.0);
    }
    return g;
}

void accumulate(Gradients& into, const Gradients& g) {
    for (std::size_t l = 0; l < into.weights.size(); ++l) {
        for (std::size_t i = 0; i < into.weights[l].size(); ++i)
            into.weights[l][i] += g.weights[l][i];
        for (std::size_t i = 0; i < into.bias[l].size(); ++i) into.bias[l][i] += g.bias[l][i];
    }
}

void scale(Gradients& g, double k) {
    for (auto& w : g.weights)
        for (double& v : w) v *= k;
    for (auto& b : g.bias)
        for (double& v : b) v *= k;
}

Gradients backward(const MlpModel& model, const ForwardCache& cache,
                   const std::vector<double>& grad_logits) {
    check_chain(model);
    if (cache.version != model.version)
        throw std::invalid_argument("forward cache is stale (parameters changed since forward)");
    if (cache.inputs.size() != model.layers.size() || cache.preacts.size() != model.layers.size())
        throw std::invalid_argument("forward cache does not match the model");
    if (grad_logits.size() != static_cast<std::size_t>(model.layers.back().out_dim))
        throw std::invalid_argument("grad_logits length mismatch");

    Gradients g = zero_gradients(model);
    std::vector<double> delta = grad_logits;  // gradient wrt layer output
    for (int l = static_cast<int>(model.layers.size()) - 1; l >= 0; --l) {
        const DenseLayer& layer = model.layers[static_cast<std::size_t>(l)];
        const auto& z = cache.preacts[static_cast<std::size_t>(l)];
        const auto& in = cache.inputs[static_cast<std::size_t>(l)];
        // Through the activation.
        std::vector<double> dz(static_cast<std::size_t>(layer.out_dim));
        for (int o = 0; o < layer.out_dim; ++o) {
            const double zo = z[static_cast<std::size_t>(o)];
            dz[static_cast<std::size_t>(o)] =
                delta[static_cast<std::size_t>(o)] *
                activate_grad(layer.activation, zo, activate(layer.activation, zo));
        }
        // Parameter gradients.
        auto& gw = g.weights[static_cast<std::size_t>(l)];
        auto& gb = g.bias[static_cast<std::size_t>(l)];
        for (int o = 0; o < layer.out_dim; ++o) {
            const double d = dz[static_cast<std::size_t>(o)];
            gb[static_cast<std::size_t>(o)] = d;
            double* row = gw.data() + static_cast<std::size_t>(o) * layer.in_dim;
            for (int i = 0; i < layer.in_dim; ++i) row[i] = d * in[static_cast<std::size_t>(i)];
        }
        // Down to the layer input, honoring the dropout mask used forward.
        if (l > 0) {
            std::vector<double> dprev(static_cast<std::size_t>(layer.in_dim), 0.0);
            for (int o = 0; o < layer.out_dim; ++o) {
                const double d = dz[static_cast<std::size_t>(o)];
                const double* row = layer.weights.data() + static_cast<std::size_t>(o) * layer.in_dim;
                for (int i = 0; i < layer.in_dim; ++i) dprev[static_cast<std::size_t>(i)] += d * row[i];
            }
            const auto& mask = cache.masks[static_cast<std::size_t>(l)];
            if (!mask.empty()) {
                for (std::size_t i = 0; i < dprev.size(); ++i) dprev[i] *= mask[i];
            }
            delta = std::move(dprev);
        }
    }
    return g;
}

AdamState make_adam_state(const MlpModel& model) {
    AdamState st;
    for (const auto& layer : model.layers) {
        st.m_w.emplace_back(layer.weights.size(), 0.0);
        st.v_w.emplace_back(layer.weights.size(), 0.0);
        st.m_b.emplace_back(layer.bias.size(), 0.0);
        st.v_b.emplace_back(layer.bias.size(), 0.0);
    }
    return st;
}

double scheduled_lr(double base_lr, int epoch) {
    if (epoch >= 60) return base_lr * 0.01;
    if (epoch >= 30) return base_lr * 0.1;
    return base_lr;
}

void adam_step(MlpModel& model, AdamState& state, const AdamConfig& cfg,
               const Gradients& grads, int epoch) {
    if (grads.weights.size() != model.layers.size())
        throw std::invalid_argument("gradient shape mismatch");

    double sq = 0.0;
    for (const auto& w : grads.weights)
        for (double v : w) sq += v * v;
    for (const auto& b : grads.bias)
        for (double v : b) sq += v * v;
    if (!std::isfinite(sq)) throw std::invalid_argument("non-finite gradients; step refused");

    const double norm = std::sqrt(sq);
    const double clip = (cfg.clip_norm > 0.0 && norm > cfg.clip_norm) ? cfg.clip_norm / norm : 1.0;

    const long t = ++state.step;
    const double corr1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    const double corr2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    const double lr = scheduled_lr(cfg.lr, epoch);

    auto update = [&](std::vector<double>& param, const std::vector<double>& grad,
                      std::vector<double>& m, std::vector<double>& v) {
        for (std::size_t i = 0; i < param.size(); ++i) {
            const double gi = grad[i] * clip;
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
            const double mhat = m[i] / corr1;
            const double vhat = v[i] / corr2;
            param[i] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
    };

    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        update(model.layers[l].weights, grads.weights[l], state.m_w[l], state.v_w[l]);
        update(model.layers[l].bias, grads.bias[l], state.m_b[l], state.v_b[l]);
    }
    ++model.version;
}

double relative_gap(double analytic, double numeric) {
    const double scale = std::max({1.0, std::abs(analytic), std::abs(numeric)});
    return std::abs(analytic - numeric) / scale;
}

void write_tensor_file(const std::filesystem::path& path,
                       const std::vector<NamedTensor>& tensors) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot create " + path.string());
    char buf[40];
    for (const auto& t : tensors) {
        if (t.values.size() != static_cast<std::size_t>(t.rows) * t.cols)
            throw std::invalid_argument("tensor '" + t.name + "' shape mismatch");
        out << t.name << ' ' << t.rows << ' ' << t.cols << '\n';
        for (int r = 0; r < t.rows; ++r) {
            for (int c = 0; c < t.cols; ++c) {
                std::snprintf(buf, sizeof buf, "%.17g",
                              t.values[static_cast<std::size_t>(r) * t.cols + c]);
                out << buf << (c + 1 == t.cols ? '\n' : ' ');
            }
        }
    }
    if (!out) throw DataError("short write to " + path.string());
}

std::vector<NamedTensor> read_tensor_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    std::vector<NamedTensor> tensors;
    std::string name;
    while (in >> name) {
        NamedTensor t;
        t.name = name;
        if (!(in >> t.rows >> t.cols) || t.rows < 1 || t.cols < 1)
            throw DataError("bad tensor header for '" + name + "' in " + path.string());
        t.values.resize(static_cast<std::size_t>(t.rows) * t.cols);
        for (double& v : t.values) {
            if (!(in >> v))
                throw DataError("truncated tensor '" + name + "' in " + path.string());
        }
        tensors.push_back(std::move(t));
    }
    return tensors;
}

}  // namespace floemd
