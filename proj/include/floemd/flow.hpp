#pragma once

#include "floemd/image.hpp"

#include <filesystem>
#include <vector>

namespace floemd {

struct FarnebackParams {
    int pyramid_levels = 3;
    double pyramid_scale = 0.5;  // per-level shrink factor, in (0,1)
    int window_size = 15;        // odd, >= 5; neighborhood of the weighted fit
    int iterations = 3;          // displacement refinements per pyramid level
    int poly_n = 5;              // polynomial expansion window, 5 or 7
    double poly_sigma = 1.1;     // Gaussian weighting of the expansion window
};

// Dense per-pixel displacement from one frame to the next, row-major.
// `border` is the width of the outer band whose polynomial fits lean on
// replicated edge pixels; estimates there are unreliable by construction
// and are excluded from accuracy checks.
struct FlowField {
    int width = 0;
    int height = 0;
    std::vector<double> u;  // horizontal displacement, px/frame
    std::vector<double> v;  // vertical displacement, px/frame
    int border = 0;

    std::size_t size() const { return u.size(); }
};

// Farneback dense flow: per-pixel quadratic expansion of both frames over a
// Gaussian-weighted window, then iterative displacement refinement with
// box-averaged normal equations, coarse-to-fine over an image pyramid.
// Throws std::invalid_argument on dimension mismatch or invalid frames.
FlowField estimate_flow(const GrayFrame& prev, const GrayFrame& next,
                        const FarnebackParams& params = {});

// Per-pixel sqrt(u^2 + v^2).
std::vector<double> magnitude(const FlowField& flow);

// Per-pixel atan2(v, u) in (-pi, pi]; the zero vector maps to 0.
std::vector<double> direction(const FlowField& flow);

// Binary dump: magic "FLO1", u32 width, u32 height (little endian), then
// width*height (f32 u, f32 v) pairs in row-major order.
void write_flo(const std::filesystem::path& path, const FlowField& flow);
FlowField read_flo(const std::filesystem::path& path);

}  // namespace floemd
