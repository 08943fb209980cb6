#include "floemd/dataset.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

namespace floemd {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    fields.push_back(cur);
    return fields;
}

std::string lower_ext(const std::filesystem::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext;
}

void format_g17(std::string& out, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out += buf;
}

}  // namespace

Split split_from_name(const std::string& name) {
    if (name == "train") return Split::train;
    if (name == "val") return Split::val;
    if (name == "test") return Split::test;
    throw DataError("unknown split '" + name + "' (expected train, val, or test)");
}

const char* split_name(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
    }
    throw DataError("invalid split value");
}

const char* label_name(int label) {
    switch (label) {
        case 0: return "light";
        case 1: return "medium";
        case 2: return "heavy";
        default: throw DataError("label out of range: " + std::to_string(label));
    }
}

std::string scene_of(const std::string& clip_id) {
    const auto pos = clip_id.find('_');
    return pos == std::string::npos ? clip_id : clip_id.substr(0, pos);
}

std::vector<ClipRecord> load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open manifest: " + path.string());
    std::string line;
    if (!std::getline(in, line))
        throw DataError("manifest is empty: " + path.string());
    {
        const auto header = split_csv_line(line);
        if (header.size() != 4 || header[0] != "clip_id" || header[1] != "frame_dir" ||
            header[2] != "label" || header[3] != "split")
            throw DataError("manifest header must be clip_id,frame_dir,label,split: " +
                            path.string());
    }
    const std::filesystem::path base = path.parent_path();
    std::vector<ClipRecord> records;
    std::map<std::string, Split> scene_split;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto f = split_csv_line(line);
        if (f.size() != 4)
            throw DataError("manifest line " + std::to_string(line_no) + " has " +
                            std::to_string(f.size()) + " fields, expected 4: " + path.string());
        ClipRecord rec;
        rec.clip_id = f[0];
        if (rec.clip_id.empty())
            throw DataError("manifest line " + std::to_string(line_no) + " has an empty clip_id");
        try {
            std::size_t used = 0;
            rec.label = std::stoi(f[2], &used);
            if (used != f[2].size()) throw std::invalid_argument("trailing characters");
        } catch (const std::exception&) {
            throw DataError("manifest line " + std::to_string(line_no) +
                            ": label is not an integer: '" + f[2] + "'");
        }
        if (rec.label < 0 || rec.label >= kNumClasses)
            throw DataError("manifest line " + std::to_string(line_no) + ": label " +
                            std::to_string(rec.label) + " outside 0.." +
                            std::to_string(kNumClasses - 1));
        rec.split = split_from_name(f[3]);
        std::filesystem::path dir(f[1]);
        if (dir.is_relative()) dir = base / dir;
        rec.frame_dir = dir.string();

        const std::string scene = scene_of(rec.clip_id);
        auto [it, inserted] = scene_split.emplace(scene, rec.split);
        if (!inserted && it->second != rec.split)
            throw DataError("scene '" + scene + "' appears in both " +
                            split_name(it->second) + " and " + split_name(rec.split) +
                            " splits; splits must be scene-disjoint");
        records.push_back(std::move(rec));
    }
    if (records.empty()) throw DataError("manifest has no clips: " + path.string());
    return records;
}

void write_manifest(const std::filesystem::path& path, const std::vector<ClipRecord>& records) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write manifest: " + path.string());
    out << "clip_id,frame_dir,label,split\n";
    for (const ClipRecord& rec : records)
        out << rec.clip_id << ',' << rec.frame_dir << ',' << rec.label << ','
            << split_name(rec.split) << '\n';
    if (!out) throw DataError("failed while writing manifest: " + path.string());
}

std::vector<GrayFrame> ingest_frames(const std::filesystem::path& frame_dir,
                                     int t_frames, int resize_to) {
    std::error_code ec;
    if (!std::filesystem::is_directory(frame_dir, ec))
        throw DataError("not a directory: " + frame_dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(frame_dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string ext = lower_ext(entry.path());
        if (ext == ".pgm" || ext == ".png") files.push_back(entry.path());
    }
    if (files.empty())
        throw DataError("no .pgm or .png frames in " + frame_dir.string());
    std::sort(files.begin(), files.end(),
              [](const std::filesystem::path& a, const std::filesystem::path& b) {
                  return a.filename().string() < b.filename().string();
              });

    std::vector<std::filesystem::path> picked;
    const int n = static_cast<int>(files.size());
    if (t_frames > 0) {
        if (n < t_frames)
            throw DataError("insufficient frames in " + frame_dir.string() + ": found " +
                            std::to_string(n) + ", need " + std::to_string(t_frames));
        picked.reserve(static_cast<std::size_t>(t_frames));
        for (int i = 0; i < t_frames; ++i)
            picked.push_back(files[static_cast<std::size_t>(
                static_cast<long long>(i) * n / t_frames)]);
    } else {
        picked = files;
    }

    std::vector<GrayFrame> frames;
    frames.reserve(picked.size());
    for (const auto& p : picked) {
        GrayFrame f = read_image(p);
        if (resize_to > 0 && (f.width != resize_to || f.height != resize_to))
            f = resize_bilinear(f, resize_to, resize_to);
        try {
            validate_frame(f);
        } catch (const std::exception& e) {
            throw DataError(p.string() + ": " + e.what());
        }
        if (!frames.empty() &&
            (f.width != frames.front().width || f.height != frames.front().height))
            throw DataError("frame size mismatch in " + frame_dir.string() + " at " +
                            p.filename().string());
        frames.push_back(std::move(f));
    }
    return frames;
}

std::vector<GrayFrame> ingest_clip(const ClipRecord& record, int t_frames, int resize_to) {
    try {
        return ingest_frames(record.frame_dir, t_frames, resize_to);
    } catch (const DataError& e) {
        throw DataError("clip " + record.clip_id + ": " + e.what());
    }
}

DescriptorMask mask_from_name(const std::string& name) {
    if (name == "all") return {true, true, true, true};
    if (name == "no_mu_m") return {false, true, true, true};
    if (name == "no_sigma_m") return {true, false, true, true};
    if (name == "no_mu_d") return {true, true, false, true};
    if (name == "no_sigma_d") return {true, true, true, false};
    if (name == "magnitude_only") return {true, true, false, false};
    if (name == "direction_only") return {false, false, true, true};
    std::string valid;
    for (const char* m : kMaskNames) {
        if (!valid.empty()) valid += ", ";
        valid += m;
    }
    throw DataError("unknown descriptor mask '" + name + "' (expected one of " + valid + ")");
}

MotionTrace clip_trace(const std::vector<GrayFrame>& frames, const FarnebackParams& fp) {
    if (frames.size() < 3)
        throw DataError("need at least 3 frames to build a motion trace, got " +
                        std::to_string(frames.size()));
    std::vector<FlowField> flows;
    flows.reserve(frames.size() - 1);
    for (std::size_t i = 0; i + 1 < frames.size(); ++i)
        flows.push_back(estimate_flow(frames[i], frames[i + 1], fp));
    return build_trace(flows);
}

void apply_mask(EmdFeatureVector& features, const DescriptorMask& mask, int n_modes) {
    const std::size_t block = static_cast<std::size_t>(n_modes) * 2;
    if (features.values.size() != 4 * block)
        throw DataError("feature vector length does not match n_modes");
    for (std::size_t s = 0; s < 4; ++s) {
        if (mask[s]) continue;
        std::fill_n(features.values.begin() + static_cast<std::ptrdiff_t>(s * block), block, 0.0);
    }
}

EmdFeatureVector extract_features(const std::vector<GrayFrame>& frames,
                                  const FarnebackParams& fp, const SiftConfig& sc,
                                  const DescriptorMask& mask) {
    const MotionTrace trace = clip_trace(frames, fp);
    EmdFeatureVector features = featurize(trace, sc);
    apply_mask(features, mask, sc.n_modes);
    return features;
}

void write_feature_csv(const std::filesystem::path& path, const std::vector<FeatureRow>& rows) {
    if (rows.empty()) throw DataError("no feature rows to write");
    const std::size_t dim = rows.front().values.size();
    std::string text = "clip_id,label";
    for (std::size_t i = 0; i < dim; ++i) text += ",f" + std::to_string(i);
    text += '\n';
    for (const FeatureRow& row : rows) {
        if (row.values.size() != dim)
            throw DataError("feature rows have inconsistent dimensions");
        text += row.clip_id;
        text += ',';
        text += std::to_string(row.label);
        for (double v : row.values) {
            text += ',';
            format_g17(text, v);
        }
        text += '\n';
    }
    std::ofstream out(path);
    if (!out) throw DataError("cannot write feature csv: " + path.string());
    out << text;
    if (!out) throw DataError("failed while writing feature csv: " + path.string());
}

std::vector<MotionTrace> traces_for_clips(const std::vector<std::vector<GrayFrame>>& clips,
                                          const FarnebackParams& fp, int threads) {
    std::vector<MotionTrace> out(clips.size());
    if (clips.empty()) return out;
    const int n_workers = std::max(
        1, std::min<int>(threads, static_cast<int>(clips.size())));
    if (n_workers == 1) {
        for (std::size_t i = 0; i < clips.size(); ++i) out[i] = clip_trace(clips[i], fp);
        return out;
    }
    // Work stealing over an atomic cursor; each result lands in its input
    // slot, so the output does not depend on scheduling.
    std::atomic<std::size_t> cursor{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto worker = [&]() {
        for (;;) {
            const std::size_t i = cursor.fetch_add(1);
            if (i >= clips.size()) return;
            try {
                out[i] = clip_trace(clips[i], fp);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_workers));
    for (int t = 0; t < n_workers; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
    return out;
}

std::vector<FeatureRow> featurize_traces(const std::vector<LabeledTrace>& traces,
                                         const SiftConfig& sc, const DescriptorMask& mask) {
    std::vector<FeatureRow> rows;
    rows.reserve(traces.size());
    for (const LabeledTrace& lt : traces) {
        EmdFeatureVector features = featurize(lt.trace, sc);
        apply_mask(features, mask, sc.n_modes);
        FeatureRow row;
        row.clip_id = lt.clip_id;
        row.label = lt.label;
        row.split = lt.split;
        row.values = std::move(features.values);
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace floemd
