#include "floemd/train.hpp"

#include "floemd/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace floemd {

namespace {

std::string g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

struct SplitRows {
    std::vector<const FeatureRow*> train, val, test;
};

SplitRows partition(const std::vector<FeatureRow>& rows) {
    SplitRows s;
    for (const FeatureRow& r : rows) {
        switch (r.split) {
            case Split::train: s.train.push_back(&r); break;
            case Split::val: s.val.push_back(&r); break;
            case Split::test: s.test.push_back(&r); break;
        }
    }
    return s;
}

void check_rows(const std::vector<FeatureRow>& rows, int classes) {
    if (rows.empty()) throw DataError("no feature rows");
    const std::size_t dim = rows.front().values.size();
    if (dim == 0) throw DataError("feature rows are empty vectors");
    for (const FeatureRow& r : rows) {
        if (r.values.size() != dim)
            throw DataError("feature dimension mismatch at clip " + r.clip_id);
        if (r.label < 0 || r.label >= classes)
            throw DataError("label " + std::to_string(r.label) + " out of range at clip " +
                            r.clip_id);
        for (double v : r.values)
            if (!std::isfinite(v))
                throw DataError("non-finite feature value at clip " + r.clip_id);
    }
}

MlpModel build_model(int feature_dim, const TrainConfig& cfg, Rng& rng) {
    if (cfg.head_dropout.size() != cfg.head_dims.size() + 1)
        throw std::invalid_argument("head_dropout needs one rate per head layer (hidden + output)");
    for (double p : cfg.head_dropout)
        if (p < 0.0 || p >= 1.0)
            throw std::invalid_argument("dropout rates must lie in [0, 1)");
    if (cfg.classes < 2) throw std::invalid_argument("need at least two classes");

    MlpModel model;
    int in_dim = feature_dim;
    for (int width : cfg.embed_dims) {
        if (width < 1) throw std::invalid_argument("embedding widths must be positive");
        model.layers.push_back(make_layer(in_dim, width, Activation::relu, 0.0, rng));
        in_dim = width;
    }
    for (std::size_t i = 0; i < cfg.head_dims.size(); ++i) {
        const int width = cfg.head_dims[i];
        if (width < 1) throw std::invalid_argument("head widths must be positive");
        model.layers.push_back(
            make_layer(in_dim, width, Activation::relu, cfg.head_dropout[i], rng));
        in_dim = width;
    }
    model.layers.push_back(make_layer(in_dim, cfg.classes, Activation::identity,
                                      cfg.head_dropout.back(), rng));
    check_chain(model);
    return model;
}

int predict(const MlpModel& model, const std::vector<double>& x) {
    const std::vector<double> logits = forward(model, x);
    int best = 0;
    for (std::size_t i = 1; i < logits.size(); ++i)
        if (logits[i] > logits[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
    return best;
}

double accuracy_on(const MlpModel& model, const Normalization& norm,
                   const std::vector<const FeatureRow*>& rows) {
    if (rows.empty()) return 0.0;
    long correct = 0;
    for (const FeatureRow* r : rows)
        if (predict(model, normalize(norm, r->values)) == r->label) ++correct;
    return static_cast<double>(correct) / static_cast<double>(rows.size());
}

void append_json_escaped(std::string& out, const std::string& s) {
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            default:
                if (static_cast<unsigned char>(c) < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof buf, "\\u%04x", c);
                    out += buf;
                } else {
                    out += c;
                }
        }
    }
}

std::string class_key(int c) {
    return c < kNumClasses ? label_name(c) : "class_" + std::to_string(c);
}

}  // namespace

Normalization fit_normalization(const std::vector<FeatureRow>& train_rows) {
    if (train_rows.empty()) throw DataError("cannot fit normalization without training rows");
    const std::size_t dim = train_rows.front().values.size();
    Normalization n;
    n.mean.assign(dim, 0.0);
    n.std.assign(dim, 0.0);
    for (const FeatureRow& r : train_rows) {
        if (r.values.size() != dim) throw DataError("feature dimension mismatch");
        for (std::size_t i = 0; i < dim; ++i) n.mean[i] += r.values[i];
    }
    const double inv = 1.0 / static_cast<double>(train_rows.size());
    for (double& m : n.mean) m *= inv;
    for (const FeatureRow& r : train_rows)
        for (std::size_t i = 0; i < dim; ++i) {
            const double d = r.values[i] - n.mean[i];
            n.std[i] += d * d;
        }
    for (double& s : n.std) {
        s = std::sqrt(s * inv);
        if (!(s > 0.0)) s = 1.0;  // constant feature: pass through centered
    }
    return n;
}

std::vector<double> normalize(const Normalization& n, const std::vector<double>& x) {
    if (x.size() != n.mean.size())
        throw DataError("feature length does not match the normalization");
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - n.mean[i]) / n.std[i];
    return out;
}

TrainedModel train_classifier(const std::vector<FeatureRow>& rows, const TrainConfig& cfg) {
    if (cfg.epochs < 1) throw std::invalid_argument("epochs must be positive");
    if (cfg.batch_size < 1) throw std::invalid_argument("batch_size must be positive");
    check_rows(rows, cfg.classes);

    const SplitRows splits = partition(rows);
    if (splits.train.empty()) throw DataError("no rows in the train split");

    std::vector<FeatureRow> train_copy;
    train_copy.reserve(splits.train.size());
    for (const FeatureRow* r : splits.train) train_copy.push_back(*r);
    const Normalization norm = fit_normalization(train_copy);

    std::vector<std::vector<double>> train_x;
    std::vector<int> train_y;
    train_x.reserve(splits.train.size());
    for (const FeatureRow* r : splits.train) {
        train_x.push_back(normalize(norm, r->values));
        train_y.push_back(r->label);
    }

    const int feature_dim = static_cast<int>(rows.front().values.size());
    Rng rng(cfg.seed);
    MlpModel model = build_model(feature_dim, cfg, rng);
    model.train_mode = true;

    AdamConfig adam;
    adam.lr = cfg.lr;
    adam.clip_norm = cfg.clip_norm;
    AdamState state = make_adam_state(model);

    TrainedModel tm;
    tm.norm = norm;
    tm.cfg = cfg;
    tm.feature_dim = feature_dim;

    std::vector<std::size_t> order(train_x.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        shuffle(order, rng);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t stop =
                std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            Gradients batch = zero_gradients(model);
            for (std::size_t k = start; k < stop; ++k) {
                const std::size_t i = order[k];
                ForwardCache cache;
                const std::vector<double> logits = forward(model, train_x[i], &rng, &cache);
                const std::vector<double> targets =
                    smoothed_targets(train_y[i], cfg.classes, cfg.label_smoothing);
                const LossResult lr = ce_loss(logits, targets);
                epoch_loss += lr.loss;
                accumulate(batch, backward(model, cache, lr.grad));
            }
            scale(batch, 1.0 / static_cast<double>(stop - start));
            adam_step(model, state, adam, batch, epoch);
        }
        epoch_loss /= static_cast<double>(train_x.size());
        if (!std::isfinite(epoch_loss))
            throw DataError("training diverged at epoch " + std::to_string(epoch));

        model.train_mode = false;
        EpochLog log;
        log.epoch = epoch;
        log.loss = epoch_loss;
        log.train_accuracy = accuracy_on(model, norm, splits.train);
        log.has_val = !splits.val.empty();
        if (log.has_val) log.val_accuracy = accuracy_on(model, norm, splits.val);
        model.train_mode = true;
        tm.log.push_back(log);
        if (cfg.log_progress) {
            if (log.has_val)
                std::fprintf(stderr, "epoch %3d loss %.6f train_acc %.4f val_acc %.4f\n", epoch,
                             epoch_loss, log.train_accuracy, log.val_accuracy);
            else
                std::fprintf(stderr, "epoch %3d loss %.6f train_acc %.4f\n", epoch, epoch_loss,
                             log.train_accuracy);
        }
    }

    model.train_mode = false;
    tm.model = std::move(model);
    return tm;
}

MetricsReport evaluate_rows(const TrainedModel& tm, const std::vector<FeatureRow>& rows) {
    const int k = tm.cfg.classes;
    check_rows(rows, k);
    MlpModel model = tm.model;
    model.train_mode = false;

    MetricsReport rep;
    rep.total = static_cast<long>(rows.size());
    rep.confusion.assign(static_cast<std::size_t>(k) * k, 0);
    long correct = 0;
    double loss_sum = 0.0;
    for (const FeatureRow& r : rows) {
        const std::vector<double> x = normalize(tm.norm, r.values);
        const std::vector<double> p = softmax(forward(model, x));
        loss_sum += -std::log(std::max(p[static_cast<std::size_t>(r.label)], 1e-300));
        int pred = 0;
        for (std::size_t i = 1; i < p.size(); ++i)
            if (p[i] > p[static_cast<std::size_t>(pred)]) pred = static_cast<int>(i);
        if (pred == r.label) ++correct;
        ++rep.confusion[static_cast<std::size_t>(r.label) * k + pred];
    }
    rep.accuracy = static_cast<double>(correct) / static_cast<double>(rep.total);
    rep.mean_loss = loss_sum / static_cast<double>(rep.total);

    rep.per_class.resize(static_cast<std::size_t>(k));
    int present = 0;
    for (int c = 0; c < k; ++c) {
        ClassMetrics& m = rep.per_class[static_cast<std::size_t>(c)];
        long tp = rep.confusion[static_cast<std::size_t>(c) * k + c];
        long support = 0, predicted = 0;
        for (int j = 0; j < k; ++j) {
            support += rep.confusion[static_cast<std::size_t>(c) * k + j];
            predicted += rep.confusion[static_cast<std::size_t>(j) * k + c];
        }
        m.support = support;
        m.defined = support > 0;
        m.precision = predicted > 0 ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
        m.recall = support > 0 ? static_cast<double>(tp) / static_cast<double>(support) : 0.0;
        m.f1 = (m.precision + m.recall) > 0.0
                   ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
        if (m.defined) {
            ++present;
            rep.macro_precision += m.precision;
            rep.macro_recall += m.recall;
            rep.macro_f1 += m.f1;
            const double w = static_cast<double>(support) / static_cast<double>(rep.total);
            rep.weighted_precision += w * m.precision;
            rep.weighted_recall += w * m.recall;
            rep.weighted_f1 += w * m.f1;
        } else {
            rep.warnings.push_back(std::string("class ") + class_key(c) +
                                   " has no samples; excluded from macro averages");
        }
    }
    if (present > 0) {
        rep.macro_precision /= present;
        rep.macro_recall /= present;
        rep.macro_f1 /= present;
    }
    return rep;
}

std::string metrics_to_json(const MetricsReport& r) {
    const int k = static_cast<int>(r.per_class.size());
    std::string s = "{\n";
    s += "  \"total\": " + std::to_string(r.total) + ",\n";
    s += "  \"accuracy\": " + g17(r.accuracy) + ",\n";
    s += "  \"mean_loss\": " + g17(r.mean_loss) + ",\n";
    s += "  \"per_class\": {\n";
    for (int c = 0; c < k; ++c) {
        const ClassMetrics& m = r.per_class[static_cast<std::size_t>(c)];
        s += "    \"" + class_key(c) + "\": {\"precision\": " + g17(m.precision) +
             ", \"recall\": " + g17(m.recall) + ", \"f1\": " + g17(m.f1) +
             ", \"support\": " + std::to_string(m.support) + "}";
        s += c + 1 < k ? ",\n" : "\n";
    }
    s += "  },\n";
    s += "  \"macro\": {\"precision\": " + g17(r.macro_precision) +
         ", \"recall\": " + g17(r.macro_recall) + ", \"f1\": " + g17(r.macro_f1) + "},\n";
    s += "  \"weighted\": {\"precision\": " + g17(r.weighted_precision) +
         ", \"recall\": " + g17(r.weighted_recall) + ", \"f1\": " + g17(r.weighted_f1) + "},\n";
    s += "  \"confusion\": [";
    for (int i = 0; i < k; ++i) {
        s += "[";
        for (int j = 0; j < k; ++j) {
            s += std::to_string(r.confusion[static_cast<std::size_t>(i) * k + j]);
            if (j + 1 < k) s += ", ";
        }
        s += "]";
        if (i + 1 < k) s += ", ";
    }
    s += "],\n";
    s += "  \"warnings\": [";
    for (std::size_t i = 0; i < r.warnings.size(); ++i) {
        s += "\"";
        append_json_escaped(s, r.warnings[i]);
        s += "\"";
        if (i + 1 < r.warnings.size()) s += ", ";
    }
    s += "]\n}\n";
    return s;
}

void write_train_log(const std::filesystem::path& path, const std::vector<EpochLog>& log) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write train log: " + path.string());
    out << "epoch,loss,train_acc,val_acc\n";
    for (const EpochLog& e : log) {
        out << e.epoch << ',' << g17(e.loss) << ',' << g17(e.train_accuracy) << ',';
        if (e.has_val) out << g17(e.val_accuracy);
        out << '\n';
    }
    if (!out) throw DataError("failed while writing train log: " + path.string());
}

void save_model(const std::filesystem::path& prefix, const TrainedModel& tm,
                const std::map<std::string, std::string>& extra_conf) {
    std::vector<NamedTensor> tensors;
    for (std::size_t l = 0; l < tm.model.layers.size(); ++l) {
        const DenseLayer& layer = tm.model.layers[l];
        NamedTensor w;
        w.name = "layer" + std::to_string(l) + ".weights";
        w.rows = layer.out_dim;
        w.cols = layer.in_dim;
        w.values = layer.weights;
        tensors.push_back(std::move(w));
        NamedTensor b;
        b.name = "layer" + std::to_string(l) + ".bias";
        b.rows = 1;
        b.cols = layer.out_dim;
        b.values = layer.bias;
        tensors.push_back(std::move(b));
    }
    NamedTensor mean{"norm.mean", 1, static_cast<int>(tm.norm.mean.size()), tm.norm.mean};
    NamedTensor stdev{"norm.std", 1, static_cast<int>(tm.norm.std.size()), tm.norm.std};
    tensors.push_back(std::move(mean));
    tensors.push_back(std::move(stdev));
    write_tensor_file(prefix.string() + ".params", tensors);

    std::map<std::string, std::string> conf = extra_conf;
    conf["n_layers"] = std::to_string(tm.model.layers.size());
    conf["feature_dim"] = std::to_string(tm.feature_dim);
    conf["classes"] = std::to_string(tm.cfg.classes);
    for (std::size_t l = 0; l < tm.model.layers.size(); ++l) {
        const DenseLayer& layer = tm.model.layers[l];
        const std::string p = "layer" + std::to_string(l);
        conf[p + ".in"] = std::to_string(layer.in_dim);
        conf[p + ".out"] = std::to_string(layer.out_dim);
        conf[p + ".activation"] = activation_name(layer.activation);
        conf[p + ".dropout"] = g17(layer.dropout_rate);
    }
    write_config(prefix.string() + ".conf", conf);
}

ModelBundle load_model(const std::filesystem::path& prefix) {
    const Config conf = Config::load(prefix.string() + ".conf");
    const std::vector<NamedTensor> tensors = read_tensor_file(prefix.string() + ".params");
    auto find = [&tensors, &prefix](const std::string& name) -> const NamedTensor& {
        for (const NamedTensor& t : tensors)
            if (t.name == name) return t;
        throw DataError("tensor '" + name + "' missing from " + prefix.string() + ".params");
    };

    const int n_layers = conf.get_int("n_layers", -1);
    if (n_layers < 1) throw DataError("model config lacks a valid n_layers");

    ModelBundle bundle;
    bundle.conf = conf.values();
    TrainedModel& tm = bundle.tm;
    tm.feature_dim = conf.get_int("feature_dim", 0);
    tm.cfg.classes = conf.get_int("classes", kNumClasses);

    for (int l = 0; l < n_layers; ++l) {
        const std::string p = "layer" + std::to_string(l);
        DenseLayer layer;
        layer.in_dim = conf.get_int(p + ".in", -1);
        layer.out_dim = conf.get_int(p + ".out", -1);
        if (layer.in_dim < 1 || layer.out_dim < 1)
            throw DataError("model config lacks dimensions for " + p);
        layer.activation = activation_from_name(conf.get_str(p + ".activation", "identity"));
        layer.dropout_rate = conf.get_double(p + ".dropout", 0.0);
        const NamedTensor& w = find(p + ".weights");
        const NamedTensor& b = find(p + ".bias");
        if (w.rows != layer.out_dim || w.cols != layer.in_dim ||
            b.rows != 1 || b.cols != layer.out_dim)
            throw DataError("tensor shapes for " + p + " do not match the config");
        layer.weights = w.values;
        layer.bias = b.values;
        tm.model.layers.push_back(std::move(layer));
    }
    check_chain(tm.model);
    const NamedTensor& mean = find("norm.mean");
    const NamedTensor& stdev = find("norm.std");
    if (mean.cols != tm.feature_dim || stdev.cols != tm.feature_dim)
        throw DataError("normalization tensors do not match feature_dim");
    tm.norm.mean = mean.values;
    tm.norm.std = stdev.values;
    if (tm.model.layers.front().in_dim != tm.feature_dim)
        throw DataError("first layer width does not match feature_dim");
    return bundle;
}

std::vector<ImfSweepRow> sweep_imfs(const std::vector<LabeledTrace>& traces,
                                    const std::vector<int>& n_list,
                                    const TrainConfig& cfg, SiftConfig sift) {
    const DescriptorMask all = mask_from_name("all");
    std::vector<ImfSweepRow> rows;
    rows.reserve(n_list.size());
    for (int n : n_list) {
        if (n < 1) throw std::invalid_argument("retained-mode counts must be positive");
        sift.n_modes = n;
        const std::vector<FeatureRow> feats = featurize_traces(traces, sift, all);
        const TrainedModel tm = train_classifier(feats, cfg);
        const SplitRows s = partition(feats);
        std::vector<FeatureRow> train_rows, test_rows;
        for (const FeatureRow* r : s.train) train_rows.push_back(*r);
        for (const FeatureRow* r : s.test) test_rows.push_back(*r);
        if (test_rows.empty()) throw DataError("sweep requires a test split");
        ImfSweepRow row;
        row.n_modes = n;
        row.train_accuracy = evaluate_rows(tm, train_rows).accuracy;
        row.test_accuracy = evaluate_rows(tm, test_rows).accuracy;
        row.gap = row.train_accuracy - row.test_accuracy;
        rows.push_back(row);
    }
    return rows;
}

std::vector<MaskSweepRow> sweep_descriptors(const std::vector<LabeledTrace>& traces,
                                            const TrainConfig& cfg, const SiftConfig& sift) {
    std::vector<MaskSweepRow> rows;
    rows.reserve(kMaskNames.size());
    double full_acc = 0.0;
    for (std::size_t i = 0; i < kMaskNames.size(); ++i) {
        const std::string name = kMaskNames[i];
        const std::vector<FeatureRow> feats =
            featurize_traces(traces, sift, mask_from_name(name));
        const TrainedModel tm = train_classifier(feats, cfg);
        const SplitRows s = partition(feats);
        std::vector<FeatureRow> test_rows;
        for (const FeatureRow* r : s.test) test_rows.push_back(*r);
        if (test_rows.empty()) throw DataError("sweep requires a test split");
        MaskSweepRow row;
        row.mask = name;
        row.test_accuracy = evaluate_rows(tm, test_rows).accuracy;
        if (i == 0) full_acc = row.test_accuracy;
        row.delta_vs_full = row.test_accuracy - full_acc;
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_imf_sweep_csv(const std::filesystem::path& path,
                         const std::vector<ImfSweepRow>& rows) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write sweep csv: " + path.string());
    out << "n_imfs,train_acc,test_acc,gap\n";
    for (const ImfSweepRow& r : rows)
        out << r.n_modes << ',' << g17(r.train_accuracy) << ',' << g17(r.test_accuracy) << ','
            << g17(r.gap) << '\n';
    if (!out) throw DataError("failed while writing sweep csv: " + path.string());
}

void write_mask_sweep_csv(const std::filesystem::path& path,
                          const std::vector<MaskSweepRow>& rows) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write sweep csv: " + path.string());
    out << "mask,test_acc,delta_vs_full\n";
    for (const MaskSweepRow& r : rows)
        out << r.mask << ',' << g17(r.test_accuracy) << ',' << g17(r.delta_vs_full) << '\n';
    if (!out) throw DataError("failed while writing sweep csv: " + path.string());
}

}  // namespace floemd
