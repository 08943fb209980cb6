#pragma once

#include "floemd/flow.hpp"

#include <array>
#include <cstddef>
#include <filesystem>
#include <vector>

namespace floemd {

// Spatial population statistics of one flow field: mean/std of the
// magnitude field and mean/std of the direction field. Direction statistics
// are arithmetic moments of the atan2 values, not circular moments, so
// scenes dominated by leftward motion (directions near +-pi) smear across
// the wrap; the synthetic generator keeps motion away from that seam.
struct FrameDescriptors {
    double mu_m = 0.0;
    double sigma_m = 0.0;
    double mu_d = 0.0;
    double sigma_d = 0.0;
};

FrameDescriptors frame_descriptors(const FlowField& flow);

// Four aligned per-clip series: [0]=mu_m, [1]=sigma_m, [2]=mu_d, [3]=sigma_d,
// one entry per consecutive-frame flow field.
struct MotionTrace {
    std::array<std::vector<double>, 4> series;
    std::size_t length() const { return series[0].size(); }
};

inline constexpr std::array<const char*, 4> kDescriptorNames = {
    "mu_m", "sigma_m", "mu_d", "sigma_d"};

// One trace entry per flow field, in temporal order. Needs >= 2 fields of
// identical dimensions.
MotionTrace build_trace(const std::vector<FlowField>& flows);

// CSV with header frame,mu_m,sigma_m,mu_d,sigma_d; values keep full double
// precision (17 significant digits).
void write_trace_csv(const std::filesystem::path& path, const MotionTrace& trace);
MotionTrace read_trace_csv(const std::filesystem::path& path);

}  // namespace floemd
