#include "floemd/attention.hpp"
#include "floemd/config.hpp"
#include "floemd/dataset.hpp"
#include "floemd/emd.hpp"
#include "floemd/flow.hpp"
#include "floemd/image.hpp"
#include "floemd/nn.hpp"
#include "floemd/rng.hpp"
#include "floemd/synth.hpp"
#include "floemd/train.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace {

using namespace floemd;

// Usage problems exit 1, data/model problems exit 2.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string conf_key(std::string name) {
    while (!name.empty() && name.front() == '-') name.erase(name.begin());
    std::replace(name.begin(), name.end(), '-', '_');
    return name;
}

// Ties CLI options to config-file keys: an option the user did not pass on
// the command line takes its value from the config file when present, so
// explicit flags always win.
class Binder {
public:
    void add(CLI::Option* opt, int& var) {
        const std::string key = conf_key(opt->get_name());
        fns_.push_back([opt, &var, key](const Config& c) {
            if (opt->count() == 0 && c.has(key)) var = c.get_int(key, var);
        });
    }
    void add(CLI::Option* opt, double& var) {
        const std::string key = conf_key(opt->get_name());
        fns_.push_back([opt, &var, key](const Config& c) {
            if (opt->count() == 0 && c.has(key)) var = c.get_double(key, var);
        });
    }
    void add(CLI::Option* opt, std::uint64_t& var) {
        const std::string key = conf_key(opt->get_name());
        fns_.push_back([opt, &var, key](const Config& c) {
            if (opt->count() == 0 && c.has(key)) var = c.get_u64(key, var);
        });
    }
    void add(CLI::Option* opt, std::string& var) {
        const std::string key = conf_key(opt->get_name());
        fns_.push_back([opt, &var, key](const Config& c) {
            if (opt->count() == 0 && c.has(key)) var = c.get_str(key, var);
        });
    }
    void add_flag(CLI::Option* opt, bool& var) {
        const std::string key = conf_key(opt->get_name());
        fns_.push_back([opt, &var, key](const Config& c) {
            if (opt->count() == 0 && c.has(key)) var = c.get_int(key, 0) != 0;
        });
    }

    void apply(const std::string& config_path) const {
        if (config_path.empty()) return;
        const Config conf = Config::load(config_path);
        for (const auto& f : fns_) f(conf);
    }

private:
    std::vector<std::function<void(const Config&)>> fns_;
};

void require(const std::string& value, const char* flag) {
    if (value.empty())
        throw UsageError(std::string(flag) + " is required (flag or config key)");
}

int default_threads() {
    const unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : static_cast<int>(n);
}

// ---- shared option groups ------------------------------------------------

struct CommonOpts {
    std::string config;
    std::uint64_t seed = 7;
};

void add_common(CLI::App* cmd, Binder& bind, CommonOpts& o, const char* seed_help) {
    cmd->add_option("--config", o.config, "Flat key = value config file; flags override it");
    bind.add(cmd->add_option("--seed", o.seed, seed_help)->capture_default_str(), o.seed);
}

struct FlowOpts {
    FarnebackParams params;
};

void add_flow_opts(CLI::App* cmd, Binder& bind, FlowOpts& o) {
    bind.add(cmd->add_option("--levels", o.params.pyramid_levels, "Pyramid levels")
                 ->capture_default_str(), o.params.pyramid_levels);
    bind.add(cmd->add_option("--scale", o.params.pyramid_scale, "Per-level pyramid shrink factor")
                 ->capture_default_str(), o.params.pyramid_scale);
    bind.add(cmd->add_option("--window-size", o.params.window_size,
                             "Averaging window for the flow normal equations (odd)")
                 ->capture_default_str(), o.params.window_size);
    bind.add(cmd->add_option("--iterations", o.params.iterations,
                             "Refinement iterations per pyramid level")
                 ->capture_default_str(), o.params.iterations);
    bind.add(cmd->add_option("--poly-n", o.params.poly_n, "Polynomial expansion window (5 or 7)")
                 ->capture_default_str(), o.params.poly_n);
    bind.add(cmd->add_option("--poly-sigma", o.params.poly_sigma,
                             "Gaussian sigma of the expansion window")
                 ->capture_default_str(), o.params.poly_sigma);
}

struct SamplingOpts {
    int t_frames = 16;
    int resize = 0;
};

void add_sampling_opts(CLI::App* cmd, Binder& bind, SamplingOpts& o) {
    bind.add(cmd->add_option("--t-frames", o.t_frames,
                             "Frames sampled uniformly per clip (0 = use all)")
                 ->capture_default_str(), o.t_frames);
    bind.add(cmd->add_option("--resize", o.resize,
                             "Resize frames to this square size (0 = keep)")
                 ->capture_default_str(), o.resize);
}

struct SiftOpts {
    SiftConfig cfg;
};

void add_sift_opts(CLI::App* cmd, Binder& bind, SiftOpts& o) {
    bind.add(cmd->add_option("--n-imfs", o.cfg.n_modes, "Retained modes per descriptor series")
                 ->capture_default_str(), o.cfg.n_modes);
    bind.add(cmd->add_option("--sd-threshold", o.cfg.sd_threshold, "Sifting stop threshold")
                 ->capture_default_str(), o.cfg.sd_threshold);
    bind.add(cmd->add_option("--max-sift-iters", o.cfg.max_sift_iters,
                             "Sifting iteration cap per mode")
                 ->capture_default_str(), o.cfg.max_sift_iters);
}

struct TrainOpts {
    TrainConfig cfg;
};

void add_train_opts(CLI::App* cmd, Binder& bind, TrainOpts& o) {
    bind.add(cmd->add_option("--epochs", o.cfg.epochs, "Training epochs")->capture_default_str(),
             o.cfg.epochs);
    bind.add(cmd->add_option("--batch-size", o.cfg.batch_size, "Minibatch size")
                 ->capture_default_str(), o.cfg.batch_size);
    bind.add(cmd->add_option("--lr", o.cfg.lr, "Base learning rate")->capture_default_str(),
             o.cfg.lr);
    bind.add(cmd->add_option("--label-smoothing", o.cfg.label_smoothing,
                             "Smoothing mass spread over all classes")
                 ->capture_default_str(), o.cfg.label_smoothing);
    bind.add(cmd->add_option("--clip-norm", o.cfg.clip_norm, "Global gradient norm cap")
                 ->capture_default_str(), o.cfg.clip_norm);
}

// ---- pipeline plumbing ----------------------------------------------------

// Ingests and traces clips with a bounded number of frames in memory: each
// worker loads one clip, runs the flow chain, and keeps only the trace.
std::vector<LabeledTrace> traces_from_manifest(const std::vector<ClipRecord>& records,
                                               const SamplingOpts& sampling,
                                               const FarnebackParams& fp, int threads) {
    std::vector<LabeledTrace> out(records.size());
    const int n_workers =
        std::max(1, std::min<int>(threads, static_cast<int>(records.size())));
    std::atomic<std::size_t> cursor{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto worker = [&]() {
        for (;;) {
            const std::size_t i = cursor.fetch_add(1);
            if (i >= out.size()) return;
            try {
                const ClipRecord& rec = records[i];
                const std::vector<GrayFrame> frames =
                    ingest_clip(rec, sampling.t_frames, sampling.resize);
                out[i] = LabeledTrace{rec.clip_id, rec.label, rec.split,
                                      clip_trace(frames, fp)};
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };
    if (n_workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(n_workers));
        for (int t = 0; t < n_workers; ++t) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
    }
    if (first_error) std::rethrow_exception(first_error);
    return out;
}

std::map<std::string, std::string> featurization_conf(const SamplingOpts& sampling,
                                                      const FlowOpts& flow,
                                                      const SiftOpts& sift,
                                                      const std::string& mask) {
    char buf[64];
    auto fmt = [&buf](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    std::map<std::string, std::string> conf;
    conf["t_frames"] = std::to_string(sampling.t_frames);
    conf["resize"] = std::to_string(sampling.resize);
    conf["levels"] = std::to_string(flow.params.pyramid_levels);
    conf["scale"] = fmt(flow.params.pyramid_scale);
    conf["window_size"] = std::to_string(flow.params.window_size);
    conf["iterations"] = std::to_string(flow.params.iterations);
    conf["poly_n"] = std::to_string(flow.params.poly_n);
    conf["poly_sigma"] = fmt(flow.params.poly_sigma);
    conf["n_imfs"] = std::to_string(sift.cfg.n_modes);
    conf["sd_threshold"] = fmt(sift.cfg.sd_threshold);
    conf["max_sift_iters"] = std::to_string(sift.cfg.max_sift_iters);
    conf["mask"] = mask;
    return conf;
}

// ---- attn-demo ------------------------------------------------------------

struct CheckResult {
    std::string name;
    double max_gap = 0.0;
};

double weighted_sum(const FeatureMap& m, const std::vector<double>& coef) {
    double acc = 0.0;
    for (std::size_t i = 0; i < m.data.size(); ++i) acc += m.data[i] * coef[i];
    return acc;
}

int run_attn_demo(const std::string& out, std::uint64_t seed, int channels, int flow_channels,
                  int size, int reduction) {
    require(out, "--out");
    Rng rng(seed);
    FeatureMap x_rgb = make_map(channels, size, size);
    for (double& v : x_rgb.data) v = rng.uniform(-1.0, 1.0);
    FeatureMap x_flow = make_map(flow_channels, size, size);
    for (double& v : x_flow.data) v = rng.uniform(-1.0, 1.0);
    FeatureMap flow_mag = make_map(1, size + 5, size + 3);
    for (double& v : flow_mag.data) v = rng.uniform(0.0, 2.0);
    AttentionParams params = init_attention(channels, flow_channels, reduction, rng);

    const AttentionForward fwd = attention_forward(x_rgb, x_flow, flow_mag, params);
    write_attention_pgm(out, fwd.a_s, size, size);

    FeatureMap grad_out = make_map(channels, size, size);
    for (double& v : grad_out.data) v = rng.uniform(-1.0, 1.0);
    const AttentionGrads grads = attention_backward(fwd, x_rgb, x_flow, params, grad_out);

    const double step = 1e-5;
    auto loss_with = [&](const AttentionParams& p, const FeatureMap& rgb,
                         const FeatureMap& flw) {
        return weighted_sum(attention_forward(rgb, flw, flow_mag, p).refined, grad_out.data);
    };
    auto check_vector = [&](const char* name, std::vector<double>& param,
                            const std::vector<double>& analytic) {
        CheckResult r;
        r.name = name;
        for (std::size_t i = 0; i < param.size(); ++i) {
            const double keep = param[i];
            param[i] = keep + step;
            const double up = loss_with(params, x_rgb, x_flow);
            param[i] = keep - step;
            const double down = loss_with(params, x_rgb, x_flow);
            param[i] = keep;
            const double numeric = (up - down) / (2.0 * step);
            r.max_gap = std::max(r.max_gap, relative_gap(analytic[i], numeric));
        }
        return r;
    };

    std::vector<CheckResult> results;
    results.push_back(check_vector("channel.align", params.channel.align, grads.channel.align));
    results.push_back(check_vector("channel.w1", params.channel.w1, grads.channel.w1));
    results.push_back(check_vector("channel.b1", params.channel.b1, grads.channel.b1));
    results.push_back(check_vector("channel.w2", params.channel.w2, grads.channel.w2));
    results.push_back(check_vector("channel.b2", params.channel.b2, grads.channel.b2));
    results.push_back(check_vector("spatial.kernel", params.spatial.kernel, grads.spatial.kernel));
    {
        CheckResult r;
        r.name = "spatial.bias";
        const double keep = params.spatial.bias;
        params.spatial.bias = keep + step;
        const double up = loss_with(params, x_rgb, x_flow);
        params.spatial.bias = keep - step;
        const double down = loss_with(params, x_rgb, x_flow);
        params.spatial.bias = keep;
        r.max_gap = relative_gap(grads.spatial.bias, (up - down) / (2.0 * step));
        results.push_back(r);
    }
    {
        CheckResult r;
        r.name = "input.rgb";
        for (std::size_t i = 0; i < x_rgb.data.size(); ++i) {
            const double keep = x_rgb.data[i];
            x_rgb.data[i] = keep + step;
            const double up = loss_with(params, x_rgb, x_flow);
            x_rgb.data[i] = keep - step;
            const double down = loss_with(params, x_rgb, x_flow);
            x_rgb.data[i] = keep;
            r.max_gap = std::max(
                r.max_gap, relative_gap(grads.d_rgb.data[i], (up - down) / (2.0 * step)));
        }
        results.push_back(r);
    }
    {
        CheckResult r;
        r.name = "input.flow";
        for (std::size_t i = 0; i < x_flow.data.size(); ++i) {
            const double keep = x_flow.data[i];
            x_flow.data[i] = keep + step;
            const double up = loss_with(params, x_rgb, x_flow);
            x_flow.data[i] = keep - step;
            const double down = loss_with(params, x_rgb, x_flow);
            x_flow.data[i] = keep;
            r.max_gap = std::max(
                r.max_gap, relative_gap(grads.d_flow.data[i], (up - down) / (2.0 * step)));
        }
        results.push_back(r);
    }

    const double tolerance = 1e-4;
    bool all_ok = true;
    double worst = 0.0;
    for (const CheckResult& r : results) {
        const bool ok = r.max_gap < tolerance;
        all_ok = all_ok && ok;
        worst = std::max(worst, r.max_gap);
        std::printf("check %-16s max relative gap %.3e  %s\n", r.name.c_str(), r.max_gap,
                    ok ? "ok" : "FAIL");
    }
    std::printf("%s (worst gap %.3e, tolerance %.0e); attention map written to %s\n",
                all_ok ? "all gradient checks passed" : "gradient checks FAILED", worst,
                tolerance, out.c_str());
    return all_ok ? 0 : 2;
}

// ---- verb runners -----------------------------------------------------------

int dispatch(int argc, char** argv) {
    CLI::App app{"Dense-flow motion traces, mode-decomposition features, and a trainable "
                 "congestion classifier"};
    app.require_subcommand(1);

    // synth ------------------------------------------------------------------
    auto* synth = app.add_subcommand("synth", "Generate a labeled synthetic clip dataset");
    Binder synth_bind;
    CommonOpts synth_common;
    struct {
        std::string out;
        SynthDatasetConfig cfg;
    } synth_o;
    synth_bind.add(synth->add_option("--out", synth_o.out, "Output dataset directory"),
                   synth_o.out);
    synth_bind.add(synth->add_option("--clips", synth_o.cfg.clips,
                                     "Total clips, split evenly over the three regimes")
                       ->capture_default_str(), synth_o.cfg.clips);
    synth_bind.add(synth->add_option("--scenes", synth_o.cfg.scenes_per_regime,
                                     "Scenes per regime (splits are scene-disjoint)")
                       ->capture_default_str(), synth_o.cfg.scenes_per_regime);
    synth_bind.add(synth->add_option("--frame-size", synth_o.cfg.frame_size,
                                     "Square frame size in pixels")
                       ->capture_default_str(), synth_o.cfg.frame_size);
    synth_bind.add(synth->add_option("--frames", synth_o.cfg.n_frames, "Frames per clip")
                       ->capture_default_str(), synth_o.cfg.n_frames);
    add_common(synth, synth_bind, synth_common, "Master seed for scenes and vehicles");

    // flow -------------------------------------------------------------------
    auto* flow = app.add_subcommand("flow", "Dense optical flow between two frames");
    Binder flow_bind;
    CommonOpts flow_common;
    struct {
        std::string prev, next, out;
        FlowOpts flow;
    } flow_o;
    flow_bind.add(flow->add_option("--prev", flow_o.prev, "Earlier frame (.pgm or .png)"),
                  flow_o.prev);
    flow_bind.add(flow->add_option("--next", flow_o.next, "Later frame (.pgm or .png)"),
                  flow_o.next);
    flow_bind.add(flow->add_option("--out", flow_o.out, "Output flow file (FLO1 binary)"),
                  flow_o.out);
    add_flow_opts(flow, flow_bind, flow_o.flow);
    add_common(flow, flow_bind, flow_common, "Unused; kept so every verb takes --seed");

    // trace ------------------------------------------------------------------
    auto* trace = app.add_subcommand("trace", "Motion-descriptor time series for one clip");
    Binder trace_bind;
    CommonOpts trace_common;
    struct {
        std::string frames, out;
        SamplingOpts sampling;
        FlowOpts flow;
    } trace_o;
    trace_bind.add(trace->add_option("--frames", trace_o.frames, "Directory of clip frames"),
                   trace_o.frames);
    trace_bind.add(trace->add_option("--out", trace_o.out, "Output trace CSV"), trace_o.out);
    add_sampling_opts(trace, trace_bind, trace_o.sampling);
    add_flow_opts(trace, trace_bind, trace_o.flow);
    add_common(trace, trace_bind, trace_common, "Unused; kept so every verb takes --seed");

    // emd --------------------------------------------------------------------
    auto* emd = app.add_subcommand("emd", "Decompose one trace series into modes");
    Binder emd_bind;
    CommonOpts emd_common;
    struct {
        std::string trace, out, series = "mu_m";
        SiftOpts sift;
    } emd_o;
    emd_bind.add(emd->add_option("--trace", emd_o.trace, "Trace CSV from the trace verb"),
                 emd_o.trace);
    emd_bind.add(emd->add_option("--out", emd_o.out, "Output mode CSV (t,imf1..imfN,residual)"),
                 emd_o.out);
    emd_bind.add(emd->add_option("--series", emd_o.series,
                                 "Descriptor series: mu_m, sigma_m, mu_d, or sigma_d")
                     ->capture_default_str(), emd_o.series);
    add_sift_opts(emd, emd_bind, emd_o.sift);
    add_common(emd, emd_bind, emd_common, "Unused; kept so every verb takes --seed");

    // featurize ---------------------------------------------------------------
    auto* feat = app.add_subcommand("featurize", "Mode statistics for every clip in a manifest");
    Binder feat_bind;
    CommonOpts feat_common;
    struct {
        std::string manifest, out, mask = "all";
        SamplingOpts sampling;
        FlowOpts flow;
        SiftOpts sift;
        int threads = default_threads();
    } feat_o;
    feat_bind.add(feat->add_option("--manifest", feat_o.manifest, "Dataset manifest CSV"),
                  feat_o.manifest);
    feat_bind.add(feat->add_option("--out", feat_o.out, "Output feature CSV"), feat_o.out);
    feat_bind.add(feat->add_option("--mask", feat_o.mask,
                                   "Descriptor mask (all, no_mu_m, ..., direction_only)")
                      ->capture_default_str(), feat_o.mask);
    add_sampling_opts(feat, feat_bind, feat_o.sampling);
    add_flow_opts(feat, feat_bind, feat_o.flow);
    add_sift_opts(feat, feat_bind, feat_o.sift);
    feat_bind.add(feat->add_option("--threads", feat_o.threads, "Worker threads for flow")
                      ->capture_default_str(), feat_o.threads);
    add_common(feat, feat_bind, feat_common, "Unused; kept so every verb takes --seed");

    // train -------------------------------------------------------------------
    auto* train = app.add_subcommand("train", "Train the congestion classifier end to end");
    Binder train_bind;
    CommonOpts train_common;
    struct {
        std::string manifest, out, log, mask = "all";
        SamplingOpts sampling;
        FlowOpts flow;
        SiftOpts sift;
        TrainOpts train;
        int threads = default_threads();
        bool progress = false;
    } train_o;
    train_bind.add(train->add_option("--manifest", train_o.manifest, "Dataset manifest CSV"),
                   train_o.manifest);
    train_bind.add(train->add_option("--out", train_o.out,
                                     "Model prefix; writes <prefix>.params and <prefix>.conf"),
                   train_o.out);
    train_bind.add(train->add_option("--log", train_o.log, "Optional training-log CSV path"),
                   train_o.log);
    train_bind.add(train->add_option("--mask", train_o.mask, "Descriptor mask")
                       ->capture_default_str(), train_o.mask);
    add_sampling_opts(train, train_bind, train_o.sampling);
    add_flow_opts(train, train_bind, train_o.flow);
    add_sift_opts(train, train_bind, train_o.sift);
    add_train_opts(train, train_bind, train_o.train);
    train_bind.add(train->add_option("--threads", train_o.threads, "Worker threads for flow")
                       ->capture_default_str(), train_o.threads);
    train_bind.add_flag(train->add_flag("--progress", train_o.progress,
                                        "Log per-epoch loss and accuracy to standard error"),
                        train_o.progress);
    add_common(train, train_bind, train_common, "Shuffling, dropout, and init seed");

    // eval --------------------------------------------------------------------
    auto* eval = app.add_subcommand("eval", "Evaluate a trained model on a manifest split");
    Binder eval_bind;
    CommonOpts eval_common;
    struct {
        std::string manifest, model, out, split = "test";
        int threads = default_threads();
    } eval_o;
    eval_bind.add(eval->add_option("--manifest", eval_o.manifest, "Dataset manifest CSV"),
                  eval_o.manifest);
    eval_bind.add(eval->add_option("--model", eval_o.model,
                                   "Model prefix written by the train verb"),
                  eval_o.model);
    eval_bind.add(eval->add_option("--split", eval_o.split, "Split to evaluate: train, val, test")
                      ->capture_default_str(), eval_o.split);
    eval_bind.add(eval->add_option("--out", eval_o.out,
                                   "Metrics report path (standard output when omitted)"),
                  eval_o.out);
    eval_bind.add(eval->add_option("--threads", eval_o.threads, "Worker threads for flow")
                      ->capture_default_str(), eval_o.threads);
    add_common(eval, eval_bind, eval_common, "Unused; kept so every verb takes --seed");

    // sweep-imfs ----------------------------------------------------------------
    auto* sweep_n = app.add_subcommand("sweep-imfs",
                                       "Accuracy as a function of retained mode count");
    Binder sweep_n_bind;
    CommonOpts sweep_n_common;
    struct {
        std::string manifest, out, n_list = "2,3,4,5,6", mask = "all";
        SamplingOpts sampling;
        FlowOpts flow;
        SiftOpts sift;
        TrainOpts train;
        int threads = default_threads();
    } sweep_n_o;
    sweep_n_bind.add(sweep_n->add_option("--manifest", sweep_n_o.manifest, "Dataset manifest CSV"),
                     sweep_n_o.manifest);
    sweep_n_bind.add(sweep_n->add_option("--out", sweep_n_o.out, "Output sweep CSV"),
                     sweep_n_o.out);
    sweep_n_bind.add(sweep_n->add_option("--n-list", sweep_n_o.n_list,
                                         "Comma-separated retained-mode counts")
                         ->capture_default_str(), sweep_n_o.n_list);
    add_sampling_opts(sweep_n, sweep_n_bind, sweep_n_o.sampling);
    add_flow_opts(sweep_n, sweep_n_bind, sweep_n_o.flow);
    add_sift_opts(sweep_n, sweep_n_bind, sweep_n_o.sift);
    add_train_opts(sweep_n, sweep_n_bind, sweep_n_o.train);
    sweep_n_bind.add(sweep_n->add_option("--threads", sweep_n_o.threads,
                                         "Worker threads for flow")
                         ->capture_default_str(), sweep_n_o.threads);
    add_common(sweep_n, sweep_n_bind, sweep_n_common, "Training seed shared by every sweep point");

    // sweep-desc ---------------------------------------------------------------
    auto* sweep_d = app.add_subcommand("sweep-desc",
                                       "Accuracy under each descriptor-mask ablation");
    Binder sweep_d_bind;
    CommonOpts sweep_d_common;
    struct {
        std::string manifest, out;
        SamplingOpts sampling;
        FlowOpts flow;
        SiftOpts sift;
        TrainOpts train;
        int threads = default_threads();
    } sweep_d_o;
    sweep_d_bind.add(sweep_d->add_option("--manifest", sweep_d_o.manifest, "Dataset manifest CSV"),
                     sweep_d_o.manifest);
    sweep_d_bind.add(sweep_d->add_option("--out", sweep_d_o.out, "Output sweep CSV"),
                     sweep_d_o.out);
    add_sampling_opts(sweep_d, sweep_d_bind, sweep_d_o.sampling);
    add_flow_opts(sweep_d, sweep_d_bind, sweep_d_o.flow);
    add_sift_opts(sweep_d, sweep_d_bind, sweep_d_o.sift);
    add_train_opts(sweep_d, sweep_d_bind, sweep_d_o.train);
    sweep_d_bind.add(sweep_d->add_option("--threads", sweep_d_o.threads,
                                         "Worker threads for flow")
                         ->capture_default_str(), sweep_d_o.threads);
    add_common(sweep_d, sweep_d_bind, sweep_d_common,
               "Training seed shared by every sweep point");

    // attn-demo ------------------------------------------------------------------
    auto* attn = app.add_subcommand(
        "attn-demo", "Toy attention pass: spatial map to PGM, gradient checks to stdout");
    Binder attn_bind;
    CommonOpts attn_common;
    struct {
        std::string out;
        int channels = 8, flow_channels = 4, size = 12, reduction = 4;
    } attn_o;
    attn_bind.add(attn->add_option("--out", attn_o.out, "Output spatial-attention PGM"),
                  attn_o.out);
    attn_bind.add(attn->add_option("--channels", attn_o.channels, "RGB-stream channels")
                      ->capture_default_str(), attn_o.channels);
    attn_bind.add(attn->add_option("--flow-channels", attn_o.flow_channels,
                                   "Flow-stream channels")
                      ->capture_default_str(), attn_o.flow_channels);
    attn_bind.add(attn->add_option("--size", attn_o.size, "Square spatial size of the toy maps")
                      ->capture_default_str(), attn_o.size);
    attn_bind.add(attn->add_option("--reduction", attn_o.reduction,
                                   "Channel-attention bottleneck reduction")
                      ->capture_default_str(), attn_o.reduction);
    add_common(attn, attn_bind, attn_common, "Seed for the toy maps and parameters");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);  // --help and --version print and exit 0
    } catch (const CLI::ParseError& e) {
        app.exit(e);  // message to standard error
        return 1;
    }

    if (synth->parsed()) {
        synth_bind.apply(synth_common.config);
        require(synth_o.out, "--out");
        synth_o.cfg.seed = synth_common.seed;
        generate_synth_dataset(synth_o.out, synth_o.cfg);
        std::fprintf(stderr, "wrote %d clips (%d scenes per regime) under %s\n",
                     synth_o.cfg.clips, synth_o.cfg.scenes_per_regime, synth_o.out.c_str());
        return 0;
    }
    if (flow->parsed()) {
        flow_bind.apply(flow_common.config);
        require(flow_o.prev, "--prev");
        require(flow_o.next, "--next");
        require(flow_o.out, "--out");
        const GrayFrame prev = read_image(flow_o.prev);
        const GrayFrame next = read_image(flow_o.next);
        const FlowField field = estimate_flow(prev, next, flow_o.flow.params);
        write_flo(flow_o.out, field);
        std::fprintf(stderr, "wrote %dx%d flow to %s\n", field.width, field.height,
                     flow_o.out.c_str());
        return 0;
    }
    if (trace->parsed()) {
        trace_bind.apply(trace_common.config);
        require(trace_o.frames, "--frames");
        require(trace_o.out, "--out");
        const std::vector<GrayFrame> frames =
            ingest_frames(trace_o.frames, trace_o.sampling.t_frames, trace_o.sampling.resize);
        const MotionTrace mt = clip_trace(frames, trace_o.flow.params);
        write_trace_csv(trace_o.out, mt);
        std::fprintf(stderr, "wrote trace of length %zu to %s\n", mt.length(),
                     trace_o.out.c_str());
        return 0;
    }
    if (emd->parsed()) {
        emd_bind.apply(emd_common.config);
        require(emd_o.trace, "--trace");
        require(emd_o.out, "--out");
        int series = -1;
        for (std::size_t q = 0; q < kDescriptorNames.size(); ++q)
            if (emd_o.series == kDescriptorNames[q]) series = static_cast<int>(q);
        if (series < 0)
            throw UsageError("--series must be one of mu_m, sigma_m, mu_d, sigma_d");
        const MotionTrace mt = read_trace_csv(emd_o.trace);
        const ImfDecomposition d =
            decompose(mt.series[static_cast<std::size_t>(series)], emd_o.sift.cfg);
        write_imf_csv(emd_o.out, d);
        std::fprintf(stderr, "decomposed %s into %d modes (%d extracted) to %s\n",
                     emd_o.series.c_str(), d.n_modes, d.extracted_count, emd_o.out.c_str());
        return 0;
    }
    if (feat->parsed()) {
        feat_bind.apply(feat_common.config);
        require(feat_o.manifest, "--manifest");
        require(feat_o.out, "--out");
        const DescriptorMask mask = mask_from_name(feat_o.mask);
        const std::vector<ClipRecord> records = load_manifest(feat_o.manifest);
        const std::vector<LabeledTrace> traces = traces_from_manifest(
            records, feat_o.sampling, feat_o.flow.params, feat_o.threads);
        const std::vector<FeatureRow> rows = featurize_traces(traces, feat_o.sift.cfg, mask);
        write_feature_csv(feat_o.out, rows);
        std::fprintf(stderr, "featurized %zu clips to %s\n", rows.size(), feat_o.out.c_str());
        return 0;
    }
    if (train->parsed()) {
        train_bind.apply(train_common.config);
        require(train_o.manifest, "--manifest");
        require(train_o.out, "--out");
        const DescriptorMask mask = mask_from_name(train_o.mask);
        const std::vector<ClipRecord> records = load_manifest(train_o.manifest);
        const std::vector<LabeledTrace> traces = traces_from_manifest(
            records, train_o.sampling, train_o.flow.params, train_o.threads);
        const std::vector<FeatureRow> rows = featurize_traces(traces, train_o.sift.cfg, mask);
        TrainConfig cfg = train_o.train.cfg;
        cfg.seed = train_common.seed;
        cfg.log_progress = train_o.progress;
        const TrainedModel tm = train_classifier(rows, cfg);
        std::map<std::string, std::string> conf =
            featurization_conf(train_o.sampling, train_o.flow, train_o.sift, train_o.mask);
        conf["seed"] = std::to_string(cfg.seed);
        save_model(train_o.out, tm, conf);
        if (!train_o.log.empty()) write_train_log(train_o.log, tm.log);
        const EpochLog& last = tm.log.back();
        std::fprintf(stderr, "trained %d epochs; final loss %.6f train_acc %.4f%s%.4f\n",
                     cfg.epochs, last.loss, last.train_accuracy,
                     last.has_val ? " val_acc " : " (no val split) ",
                     last.has_val ? last.val_accuracy : 0.0);
        std::fprintf(stderr, "model written to %s.params / %s.conf\n", train_o.out.c_str(),
                     train_o.out.c_str());
        return 0;
    }
    if (eval->parsed()) {
        eval_bind.apply(eval_common.config);
        require(eval_o.manifest, "--manifest");
        require(eval_o.model, "--model");
        const Split want = split_from_name(eval_o.split);
        const ModelBundle bundle = load_model(eval_o.model);
        const Config conf{std::map<std::string, std::string>(bundle.conf)};
        SamplingOpts sampling;
        sampling.t_frames = conf.get_int("t_frames", sampling.t_frames);
        sampling.resize = conf.get_int("resize", sampling.resize);
        FarnebackParams fp;
        fp.pyramid_levels = conf.get_int("levels", fp.pyramid_levels);
        fp.pyramid_scale = conf.get_double("scale", fp.pyramid_scale);
        fp.window_size = conf.get_int("window_size", fp.window_size);
        fp.iterations = conf.get_int("iterations", fp.iterations);
        fp.poly_n = conf.get_int("poly_n", fp.poly_n);
        fp.poly_sigma = conf.get_double("poly_sigma", fp.poly_sigma);
        SiftConfig sift;
        sift.n_modes = conf.get_int("n_imfs", sift.n_modes);
        sift.sd_threshold = conf.get_double("sd_threshold", sift.sd_threshold);
        sift.max_sift_iters = conf.get_int("max_sift_iters", sift.max_sift_iters);
        const DescriptorMask mask = mask_from_name(conf.get_str("mask", "all"));

        std::vector<ClipRecord> records;
        for (ClipRecord& rec : load_manifest(eval_o.manifest))
            if (rec.split == want) records.push_back(std::move(rec));
        if (records.empty())
            throw DataError("manifest has no clips in the " + eval_o.split + " split");
        const std::vector<LabeledTrace> traces =
            traces_from_manifest(records, sampling, fp, eval_o.threads);
        const std::vector<FeatureRow> rows = featurize_traces(traces, sift, mask);
        const MetricsReport report = evaluate_rows(bundle.tm, rows);
        const std::string json = metrics_to_json(report);
        if (eval_o.out.empty()) {
            std::fputs(json.c_str(), stdout);
        } else {
            std::ofstream out(eval_o.out);
            if (!out) throw DataError("cannot write metrics: " + eval_o.out);
            out << json;
        }
        std::fprintf(stderr, "evaluated %ld clips: accuracy %.4f mean_loss %.6f\n", report.total,
                     report.accuracy, report.mean_loss);
        return 0;
    }
    if (sweep_n->parsed()) {
        sweep_n_bind.apply(sweep_n_common.config);
        require(sweep_n_o.manifest, "--manifest");
        require(sweep_n_o.out, "--out");
        std::vector<int> n_list;
        std::string item;
        std::istringstream ss(sweep_n_o.n_list);
        while (std::getline(ss, item, ',')) {
            try {
                n_list.push_back(std::stoi(item));
            } catch (const std::exception&) {
                throw UsageError("--n-list expects comma-separated integers");
            }
        }
        if (n_list.empty()) throw UsageError("--n-list is empty");
        const std::vector<ClipRecord> records = load_manifest(sweep_n_o.manifest);
        const std::vector<LabeledTrace> traces = traces_from_manifest(
            records, sweep_n_o.sampling, sweep_n_o.flow.params, sweep_n_o.threads);
        TrainConfig cfg = sweep_n_o.train.cfg;
        cfg.seed = sweep_n_common.seed;
        const std::vector<ImfSweepRow> rows =
            sweep_imfs(traces, n_list, cfg, sweep_n_o.sift.cfg);
        write_imf_sweep_csv(sweep_n_o.out, rows);
        std::fprintf(stderr, "swept %zu mode counts to %s\n", rows.size(),
                     sweep_n_o.out.c_str());
        return 0;
    }
    if (sweep_d->parsed()) {
        sweep_d_bind.apply(sweep_d_common.config);
        require(sweep_d_o.manifest, "--manifest");
        require(sweep_d_o.out, "--out");
        const std::vector<ClipRecord> records = load_manifest(sweep_d_o.manifest);
        const std::vector<LabeledTrace> traces = traces_from_manifest(
            records, sweep_d_o.sampling, sweep_d_o.flow.params, sweep_d_o.threads);
        TrainConfig cfg = sweep_d_o.train.cfg;
        cfg.seed = sweep_d_common.seed;
        const std::vector<MaskSweepRow> rows =
            sweep_descriptors(traces, cfg, sweep_d_o.sift.cfg);
        write_mask_sweep_csv(sweep_d_o.out, rows);
        std::fprintf(stderr, "swept %zu descriptor masks to %s\n", rows.size(),
                     sweep_d_o.out.c_str());
        return 0;
    }
    if (attn->parsed()) {
        attn_bind.apply(attn_common.config);
        return run_attn_demo(attn_o.out, attn_common.seed, attn_o.channels,
                             attn_o.flow_channels, attn_o.size, attn_o.reduction);
    }
    return 1;  // unreachable with require_subcommand(1)
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return dispatch(argc, argv);
    } catch (const UsageError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
