#pragma once

#include "floemd/dataset.hpp"
#include "floemd/image.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace floemd {

enum class Regime { light = 0, medium = 1, heavy = 2 };

const char* regime_name(Regime r);

// Desk-scale traffic stand-in: textured rectangles ("vehicles") sweeping
// over a static textured background with subpixel coverage rendering.
//   light  - few fast coherent movers
//   medium - more movers at moderate speed with a slow sinusoidal speed wave
//   heavy  - dense slow movers holding still every stop_go_period frames
// Vehicles spawn so their whole sweep stays inside the frame: content never
// appears or vanishes at an edge, which would read as spurious motion. The
// generator throws if frame_size cannot absorb the worst-case travel of the
// configured speeds over n_frames (the regime defaults target 64 px / 16
// frames; longer clips need slower speeds or larger frames).
struct SyntheticSceneConfig {
    Regime regime = Regime::light;
    int n_vehicles_min = 2;
    int n_vehicles_max = 3;
    double base_speed_min = 2.4;  // px/frame
    double base_speed_max = 2.9;
    double speed_jitter = 0.10;   // per-frame speed noise, std
    double max_angle = 0.12;      // heading spread around +x, radians
    double speed_wave_amp = 0.0;  // sinusoidal speed modulation amplitude
    int speed_wave_period = 6;    // frames
    int stop_go_period = 0;       // frames; 0 disables the hold phase
    int frame_size = 64;
    int n_frames = 16;
    std::uint64_t seed = 0;        // vehicle placement and motion
    std::uint64_t scene_seed = 0;  // background texture; clips of one scene share it
};

// Tuned per-regime parameters; the measurable contrasts (mean-magnitude
// ratio between light and heavy, heavy's oscillation depth) are verified by
// tests rather than assumed.
SyntheticSceneConfig regime_config(Regime regime, int frame_size, int n_frames,
                                   std::uint64_t seed);

// Deterministic per (seed, scene_seed): same config, same bytes.
std::vector<GrayFrame> generate_synthetic_clip(const SyntheticSceneConfig& cfg);

struct SynthDatasetConfig {
    int clips = 300;  // split as evenly as possible over the three regimes
    int scenes_per_regime = 10;
    int frame_size = 64;
    int n_frames = 16;
    std::uint64_t seed = 7;
};

struct SynthClip {
    std::string clip_id;  // sc<scene>_cl<clip>; scene prefix drives the split
    int label = 0;
    Split split = Split::train;
    std::vector<GrayFrame> frames;
};

// In-memory generation. Scenes are assigned whole to train/val/test
// (roughly 70/10/20, each regime keeping at least one train and one test
// scene), so the splits are scene-disjoint by construction.
std::vector<SynthClip> generate_synth_clips(const SynthDatasetConfig& cfg);

// On-disk variant: frames under out_dir/<scene>/<clip>/frame_###.pgm plus
// out_dir/manifest.csv.
void generate_synth_dataset(const std::filesystem::path& out_dir,
                            const SynthDatasetConfig& cfg);

}  // namespace floemd
