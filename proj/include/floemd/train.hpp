#pragma once

#include "floemd/dataset.hpp"
#include "floemd/nn.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace floemd {

struct TrainConfig {
    std::vector<int> embed_dims = {64, 128};   // relu embedding stack widths
    std::vector<int> head_dims = {512, 256};   // classifier hidden widths
    std::vector<double> head_dropout = {0.5, 0.3, 0.3};  // input dropout per head layer
    int classes = kNumClasses;
    int epochs = 100;
    int batch_size = 4;
    double lr = 1e-3;
    double label_smoothing = 0.1;
    double clip_norm = 1.0;
    std::uint64_t seed = 7;
    bool log_progress = false;  // per-epoch notes on stderr
};

// Per-feature z-score parameters, fit on the train split only. Features
// with zero variance keep std 1 so normalization stays total.
struct Normalization {
    std::vector<double> mean;
    std::vector<double> std;
};

Normalization fit_normalization(const std::vector<FeatureRow>& train_rows);
std::vector<double> normalize(const Normalization& n, const std::vector<double>& x);

struct EpochLog {
    int epoch = 0;
    double loss = 0.0;  // mean smoothed-CE over the epoch's train passes
    double train_accuracy = 0.0;
    double val_accuracy = 0.0;
    bool has_val = false;
};

struct TrainedModel {
    MlpModel model;
    Normalization norm;
    TrainConfig cfg;
    int feature_dim = 0;
    std::vector<EpochLog> log;
};

// Joint embedding + head training: shuffled minibatches, label-smoothed CE,
// globally clipped Adam with the step-decay schedule. rows carries all
// splits; only train rows fit the normalization and receive updates.
TrainedModel train_classifier(const std::vector<FeatureRow>& rows, const TrainConfig& cfg);

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    long support = 0;
    bool defined = true;  // false when the class is absent from the split
};

struct MetricsReport {
    long total = 0;
    double accuracy = 0.0;
    double mean_loss = 0.0;  // plain cross entropy of the true class
    std::vector<ClassMetrics> per_class;
    // Macro aggregates average classes with support; absent classes report 0
    // and raise a warning. Weighted aggregates weight by support.
    double macro_precision = 0.0, macro_recall = 0.0, macro_f1 = 0.0;
    double weighted_precision = 0.0, weighted_recall = 0.0, weighted_f1 = 0.0;
    std::vector<long> confusion;  // classes x classes, row = true label
    std::vector<std::string> warnings;
};

MetricsReport evaluate_rows(const TrainedModel& tm, const std::vector<FeatureRow>& rows);

// Deterministic JSON rendering (fixed key order; doubles at 17 significant
// digits), so identical runs serialize to identical bytes.
std::string metrics_to_json(const MetricsReport& r);

// CSV: epoch,loss,train_acc,val_acc (val_acc empty when there is no val split).
void write_train_log(const std::filesystem::path& path, const std::vector<EpochLog>& log);

// Persistence: <prefix>.params holds the tensors (including normalization),
// <prefix>.conf the architecture plus whatever extra key = value pairs the
// caller wants to ride along (featurization settings, seeds, ...).
void save_model(const std::filesystem::path& prefix, const TrainedModel& tm,
                const std::map<std::string, std::string>& extra_conf = {});

struct ModelBundle {
    TrainedModel tm;
    std::map<std::string, std::string> conf;
};

ModelBundle load_model(const std::filesystem::path& prefix);

struct ImfSweepRow {
    int n_modes = 0;
    double train_accuracy = 0.0;
    double test_accuracy = 0.0;
    double gap = 0.0;  // train - test
};

struct MaskSweepRow {
    std::string mask;
    double test_accuracy = 0.0;
    double delta_vs_full = 0.0;
};

// One training per retained-mode count, shared seed, traces computed once by
// the caller. Emitted in n_list order.
std::vector<ImfSweepRow> sweep_imfs(const std::vector<LabeledTrace>& traces,
                                    const std::vector<int>& n_list,
                                    const TrainConfig& cfg, SiftConfig sift);

// One training per descriptor mask in kMaskNames order ("all" first).
std::vector<MaskSweepRow> sweep_descriptors(const std::vector<LabeledTrace>& traces,
                                            const TrainConfig& cfg, const SiftConfig& sift);

void write_imf_sweep_csv(const std::filesystem::path& path, const std::vector<ImfSweepRow>& rows);
void write_mask_sweep_csv(const std::filesystem::path& path, const std::vector<MaskSweepRow>& rows);

}  // namespace floemd
