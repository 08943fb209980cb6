#include "floemd/synth.hpp"

#include "floemd/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace floemd {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

struct Vehicle {
    double x = 0.0, y = 0.0;  // top-left corner
    double w = 6.0, h = 3.0;
    double dir_x = 1.0, dir_y = 0.0;
    double base_speed = 1.0;
    double intensity = 0.7;
};

struct SizeRange {
    int w_min, w_max, h_min, h_max;
};

// Bigger, faster movers in the sparse regime; small dense ones in the jam.
SizeRange vehicle_size(Regime r) {
    switch (r) {
        case Regime::light: return {7, 10, 4, 6};
        case Regime::medium: return {6, 9, 3, 5};
        case Regime::heavy: return {5, 7, 3, 4};
    }
    throw std::invalid_argument("unknown regime");
}

// Number of frame-to-frame steps on which the vehicles actually move.
int moving_steps(const SyntheticSceneConfig& cfg) {
    int steps = 0;
    for (int t = 0; t + 1 < cfg.n_frames; ++t)
        if (cfg.stop_go_period <= 0 || ((t / cfg.stop_go_period) % 2 == 0)) ++steps;
    return steps;
}

// Upper bound on the horizontal distance a vehicle can cover in one clip:
// base speed over the moving steps, the sine wave's bounded partial sums,
// and a 3-sigma jitter allowance.
double travel_bound(const SyntheticSceneConfig& cfg) {
    const int steps = moving_steps(cfg);
    double wave = 0.0;
    if (cfg.speed_wave_amp != 0.0) {
        const double s = std::sin(kTwoPi / 2.0 / cfg.speed_wave_period);
        wave = cfg.speed_wave_amp * std::min<double>(steps, s > 0.0 ? 1.0 / s : steps);
    }
    return cfg.base_speed_max * (steps + wave) +
           3.0 * cfg.speed_jitter * std::sqrt(static_cast<double>(steps)) + 1.0;
}

// Static texture so zero-flow pixels still carry gradient for the flow
// estimator: uniform noise in [0.25, 0.45], box-blurred 5x5 (wraparound
// indexing just keeps the texture seamless).
std::vector<double> make_background(int size, std::uint64_t scene_seed) {
    Rng rng(scene_seed);
    const std::size_t n = static_cast<std::size_t>(size) * size;
    std::vector<double> noise(n);
    for (double& v : noise) v = rng.uniform(0.25, 0.45);

    const int radius = 2;
    std::vector<double> tmp(n), out(n);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            double acc = 0.0;
            for (int d = -radius; d <= radius; ++d) {
                const int xx = (x + d + size) % size;
                acc += noise[static_cast<std::size_t>(y) * size + xx];
            }
            tmp[static_cast<std::size_t>(y) * size + x] = acc / (2 * radius + 1);
        }
    }
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            double acc = 0.0;
            for (int d = -radius; d <= radius; ++d) {
                const int yy = (y + d + size) % size;
                acc += tmp[static_cast<std::size_t>(yy) * size + x];
            }
            out[static_cast<std::size_t>(y) * size + x] = acc / (2 * radius + 1);
        }
    }
    return out;
}

// Composites one axis-aligned rectangle with exact per-pixel coverage.
// Anything outside the frame is skipped.
void draw_rect(GrayFrame& frame, double x, double y, const Vehicle& v) {
    const int px0 = static_cast<int>(std::floor(x));
    const int px1 = static_cast<int>(std::ceil(x + v.w));
    const int py0 = static_cast<int>(std::floor(y));
    const int py1 = static_cast<int>(std::ceil(y + v.h));
    for (int py = std::max(0, py0); py < std::min(frame.height, py1); ++py) {
        const double oy = std::min<double>(py + 1, y + v.h) - std::max<double>(py, y);
        if (oy <= 0.0) continue;
        for (int px = std::max(0, px0); px < std::min(frame.width, px1); ++px) {
            const double ox = std::min<double>(px + 1, x + v.w) - std::max<double>(px, x);
            if (ox <= 0.0) continue;
            const double cov = ox * oy;
            // Lengthwise intensity ramp gives the patch internal gradient.
            const double lx = std::clamp(px + 0.5 - x, 0.0, v.w);
            const double value = v.intensity * (0.9 + 0.2 * lx / v.w);
            double& dst = frame.at(px, py);
            dst = dst * (1.0 - cov) + value * cov;
        }
    }
}

void validate_scene(const SyntheticSceneConfig& cfg) {
    if (cfg.frame_size < 16) throw std::invalid_argument("frame_size must be at least 16");
    if (cfg.n_frames < 2) throw std::invalid_argument("n_frames must be at least 2");
    if (cfg.n_vehicles_min < 1 || cfg.n_vehicles_max < cfg.n_vehicles_min)
        throw std::invalid_argument("vehicle count range is empty");
    if (cfg.base_speed_min < 0.0 || cfg.base_speed_max < cfg.base_speed_min)
        throw std::invalid_argument("speed range is empty");
    if (cfg.speed_wave_amp != 0.0 && cfg.speed_wave_period < 1)
        throw std::invalid_argument("speed_wave_period must be positive");
}

}  // namespace

const char* regime_name(Regime r) {
    switch (r) {
        case Regime::light: return "light";
        case Regime::medium: return "medium";
        case Regime::heavy: return "heavy";
    }
    throw std::invalid_argument("unknown regime");
}

SyntheticSceneConfig regime_config(Regime regime, int frame_size, int n_frames,
                                   std::uint64_t seed) {
    SyntheticSceneConfig cfg;
    cfg.regime = regime;
    cfg.frame_size = frame_size;
    cfg.n_frames = n_frames;
    cfg.seed = seed;
    cfg.scene_seed = seed;
    switch (regime) {
        case Regime::light:
            cfg.n_vehicles_min = 2;
            cfg.n_vehicles_max = 3;
            cfg.base_speed_min = 2.4;
            cfg.base_speed_max = 2.9;
            cfg.speed_jitter = 0.10;
            cfg.max_angle = 0.12;
            // Fast shallow pulsing; keeps the motion trace oscillating at a
            // scale the decomposition resolves on short clips.
            cfg.speed_wave_amp = 0.12;
            cfg.speed_wave_period = 3;
            cfg.stop_go_period = 0;
            break;
        case Regime::medium:
            cfg.n_vehicles_min = 6;
            cfg.n_vehicles_max = 8;
            cfg.base_speed_min = 1.6;
            cfg.base_speed_max = 2.2;
            cfg.speed_jitter = 0.12;
            cfg.max_angle = 0.20;
            cfg.speed_wave_amp = 0.35;
            cfg.speed_wave_period = 6;
            cfg.stop_go_period = 0;
            break;
        case Regime::heavy:
            cfg.n_vehicles_min = 12;
            cfg.n_vehicles_max = 15;
            cfg.base_speed_min = 0.38;
            cfg.base_speed_max = 0.55;
            cfg.speed_jitter = 0.05;
            cfg.max_angle = 0.05;
            cfg.speed_wave_amp = 0.0;
            // Two frames crawling, two frames held: the trace alternates
            // between its crawl level and exact zero every other step.
            cfg.stop_go_period = 2;
            break;
    }
    return cfg;
}

std::vector<GrayFrame> generate_synthetic_clip(const SyntheticSceneConfig& cfg) {
    validate_scene(cfg);
    const int size = cfg.frame_size;
    const std::vector<double> background = make_background(size, cfg.scene_seed);

    Rng rng(cfg.seed);
    const SizeRange sz = vehicle_size(cfg.regime);
    const int n_vehicles = rng.uniform_int(cfg.n_vehicles_min, cfg.n_vehicles_max);

    // Spawn band: everything a vehicle can sweep must stay inside the frame.
    const double margin = 2.0;
    const double travel = travel_bound(cfg);
    const double drift = travel * std::sin(cfg.max_angle);  // vertical spread
    std::vector<Vehicle> vehicles(static_cast<std::size_t>(n_vehicles));
    for (int i = 0; i < n_vehicles; ++i) {
        Vehicle& v = vehicles[static_cast<std::size_t>(i)];
        v.w = rng.uniform_int(sz.w_min, sz.w_max);
        v.h = rng.uniform_int(sz.h_min, sz.h_max);
        const double x_lo = margin;
        const double x_hi = size - margin - v.w - travel;
        const double y_lo = margin + drift;
        const double y_hi = size - margin - v.h - drift;
        if (x_hi < x_lo || y_hi < y_lo)
            throw std::invalid_argument(
                "frame_size cannot absorb the configured speeds over n_frames");
        v.x = rng.uniform(x_lo, x_hi);
        // Staggered lanes keep the movers from piling onto each other.
        const double lane = y_lo + (y_hi - y_lo) * (i + 0.5) / n_vehicles;
        v.y = std::clamp(lane + rng.uniform(-1.5, 1.5), y_lo, y_hi);
        const double theta = rng.uniform(-cfg.max_angle, cfg.max_angle);
        v.dir_x = std::cos(theta);
        v.dir_y = std::sin(theta);
        v.base_speed = rng.uniform(cfg.base_speed_min, cfg.base_speed_max);
        v.intensity = rng.uniform(0.55, 0.88);
    }
    // One congestion-wave phase per clip so the movers breathe together.
    const double wave_phase = rng.uniform(0.0, kTwoPi);

    std::vector<GrayFrame> frames;
    frames.reserve(static_cast<std::size_t>(cfg.n_frames));
    for (int t = 0; t < cfg.n_frames; ++t) {
        GrayFrame frame = make_frame(size, size);
        frame.data = background;
        for (const Vehicle& v : vehicles) draw_rect(frame, v.x, v.y, v);
        for (double& p : frame.data) p = std::clamp(p, 0.0, 1.0);
        frames.push_back(std::move(frame));

        // Advance to the next frame's positions.
        const bool moving =
            cfg.stop_go_period <= 0 || ((t / cfg.stop_go_period) % 2 == 0);
        double wave = 1.0;
        if (cfg.speed_wave_amp != 0.0)
            wave += cfg.speed_wave_amp *
                    std::sin(kTwoPi * t / cfg.speed_wave_period + wave_phase);
        for (Vehicle& v : vehicles) {
            // Drawn every step to keep the stream aligned across hold phases.
            const double jitter = cfg.speed_jitter > 0.0
                                      ? cfg.speed_jitter * rng.normal() : 0.0;
            if (!moving) continue;
            const double speed = std::max(0.0, v.base_speed * wave + jitter);
            v.x += speed * v.dir_x;
            v.y += speed * v.dir_y;
        }
    }
    return frames;
}

std::vector<SynthClip> generate_synth_clips(const SynthDatasetConfig& cfg) {
    if (cfg.clips < 1) throw std::invalid_argument("clips must be positive");
    if (cfg.scenes_per_regime < 2)
        throw std::invalid_argument("need at least two scenes per regime for disjoint splits");

    const int scenes = cfg.scenes_per_regime;
    const int n_test = std::max(1, scenes / 5);
    const int n_val = scenes / 10;
    const int n_train = scenes - n_val - n_test;
    if (n_train < 1)
        throw std::invalid_argument("too few scenes per regime to keep a training scene");

    std::vector<SynthClip> out;
    out.reserve(static_cast<std::size_t>(cfg.clips));
    for (int r = 0; r < 3; ++r) {
        const auto regime = static_cast<Regime>(r);
        const int regime_clips = cfg.clips / 3 + (r < cfg.clips % 3 ? 1 : 0);
        std::vector<int> per_scene(static_cast<std::size_t>(scenes), 0);
        for (int i = 0; i < regime_clips; ++i) ++per_scene[static_cast<std::size_t>(i % scenes)];

        for (int s = 0; s < scenes; ++s) {
            const int global_scene = r * scenes + s;
            const Split split = s < n_train ? Split::train
                                : s < n_train + n_val ? Split::val : Split::test;
            const std::uint64_t scene_seed =
                mix_seed(cfg.seed, 0x5ce0'0000ull + static_cast<std::uint64_t>(global_scene));
            for (int c = 0; c < per_scene[static_cast<std::size_t>(s)]; ++c) {
                SynthClip clip;
                char id[32];
                std::snprintf(id, sizeof id, "sc%03d_cl%02d", global_scene, c);
                clip.clip_id = id;
                clip.label = r;
                clip.split = split;
                SyntheticSceneConfig scene_cfg = regime_config(
                    regime, cfg.frame_size, cfg.n_frames,
                    mix_seed(cfg.seed, 0xc11b'0000ull +
                                           static_cast<std::uint64_t>(global_scene) * 1000 +
                                           static_cast<std::uint64_t>(c)));
                scene_cfg.scene_seed = scene_seed;
                clip.frames = generate_synthetic_clip(scene_cfg);
                out.push_back(std::move(clip));
            }
        }
    }
    return out;
}

void generate_synth_dataset(const std::filesystem::path& out_dir,
                            const SynthDatasetConfig& cfg) {
    const std::vector<SynthClip> clips = generate_synth_clips(cfg);
    std::filesystem::create_directories(out_dir);
    std::vector<ClipRecord> records;
    records.reserve(clips.size());
    for (const SynthClip& clip : clips) {
        const std::string rel = scene_of(clip.clip_id) + "/" + clip.clip_id;
        const std::filesystem::path clip_dir = out_dir / rel;
        std::filesystem::create_directories(clip_dir);
        for (std::size_t t = 0; t < clip.frames.size(); ++t) {
            char name[32];
            std::snprintf(name, sizeof name, "frame_%03d.pgm", static_cast<int>(t));
            write_pgm(clip_dir / name, clip.frames[t]);
        }
        ClipRecord rec;
        rec.clip_id = clip.clip_id;
        rec.frame_dir = rel;
        rec.label = clip.label;
        rec.split = clip.split;
        records.push_back(std::move(rec));
    }
    write_manifest(out_dir / "manifest.csv", records);
}

}  // namespace floemd
