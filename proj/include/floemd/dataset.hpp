#pragma once

#include "floemd/emd.hpp"
#include "floemd/flow.hpp"
#include "floemd/image.hpp"

#include <array>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace floemd {

// File, manifest, and model errors surfaced to the CLI as exit code 2.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Split { train = 0, val = 1, test = 2 };

Split split_from_name(const std::string& name);
const char* split_name(Split s);

inline constexpr int kNumClasses = 3;

// 0 = light, 1 = medium, 2 = heavy.
const char* label_name(int label);

struct ClipRecord {
    std::string clip_id;
    std::string frame_dir;  // relative paths resolve against the manifest's directory
    int label = 0;
    Split split = Split::train;
};

// Scene id = clip_id up to the first '_'. Splits must be scene-disjoint.
std::string scene_of(const std::string& clip_id);

// CSV manifest with header clip_id,frame_dir,label,split. The loader
// resolves relative frame_dirs, validates labels and splits, and rejects
// manifests where one scene contributes clips to more than one split.
std::vector<ClipRecord> load_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const std::vector<ClipRecord>& records);

// Lexicographic listing of .pgm/.png frames, uniform temporal sampling to
// t_frames (index floor(i*n/t)), optional bilinear resize when resize_to > 0.
// Errors name the offending file or directory.
std::vector<GrayFrame> ingest_frames(const std::filesystem::path& frame_dir,
                                     int t_frames, int resize_to);
std::vector<GrayFrame> ingest_clip(const ClipRecord& record, int t_frames, int resize_to);

// Which descriptor series contribute features, ordered mu_m, sigma_m, mu_d,
// sigma_d. Masked-out series have their feature blocks zeroed.
using DescriptorMask = std::array<bool, 4>;

inline constexpr std::array<const char*, 7> kMaskNames = {
    "all",          "no_mu_m",        "no_sigma_m",    "no_mu_d",
    "no_sigma_d",   "magnitude_only", "direction_only"};

DescriptorMask mask_from_name(const std::string& name);

MotionTrace clip_trace(const std::vector<GrayFrame>& frames, const FarnebackParams& fp);

void apply_mask(EmdFeatureVector& features, const DescriptorMask& mask, int n_modes);

EmdFeatureVector extract_features(const std::vector<GrayFrame>& frames,
                                  const FarnebackParams& fp, const SiftConfig& sc,
                                  const DescriptorMask& mask);

// One featurized clip; split rides along for training but is not serialized.
struct FeatureRow {
    std::string clip_id;
    int label = 0;
    Split split = Split::train;
    std::vector<double> values;
};

// CSV with header clip_id,label,f0..f{D-1}.
void write_feature_csv(const std::filesystem::path& path, const std::vector<FeatureRow>& rows);

// A clip's trace with its identity, the unit of work shared by the sweeps
// (flow runs once per clip regardless of how many configurations train on it).
struct LabeledTrace {
    std::string clip_id;
    int label = 0;
    Split split = Split::train;
    MotionTrace trace;
};

// Parallel trace extraction; results land in input order, so the output is
// independent of scheduling.
std::vector<MotionTrace> traces_for_clips(const std::vector<std::vector<GrayFrame>>& clips,
                                          const FarnebackParams& fp, int threads);

std::vector<FeatureRow> featurize_traces(const std::vector<LabeledTrace>& traces,
                                         const SiftConfig& sc, const DescriptorMask& mask);

}  // namespace floemd
