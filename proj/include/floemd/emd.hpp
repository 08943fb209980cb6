#pragma once

#include "floemd/trace.hpp"

#include <filesystem>
#include <vector>

namespace floemd {

struct SiftConfig {
    int n_modes = 4;            // retained modes; short traces are zero-padded up to this
    double sd_threshold = 0.2;  // Cauchy stopping ratio between sift iterations
    int max_sift_iters = 50;
    // Envelopes always use mirror boundary extension: the two extrema nearest
    // each end are reflected about the first and last sample, which keeps the
    // spline covered on [0, length-1] without extrapolation.
};

struct Extrema {
    std::vector<int> max_idx;
    std::vector<double> max_val;
    std::vector<int> min_idx;
    std::vector<double> min_val;
};

// Strict interior extrema. A flat plateau flanked by lower (higher) samples
// counts once, at the floor of its midpoint index. Endpoints are never
// extrema. Throws std::invalid_argument for signals shorter than 3.
Extrema find_extrema(const std::vector<double>& signal);

// Natural cubic spline through the mirror-extended extrema, evaluated at
// 0..length-1. An empty result signals fewer than 2 extrema.
std::vector<double> cubic_envelope(const std::vector<int>& idx,
                                   const std::vector<double>& val, int length);

struct SiftResult {
    std::vector<double> imf;
    bool converged = false;  // Cauchy criterion met before the iteration cap
    bool extracted = false;  // false: nothing to sift, imf is all-zero
};

// Repeatedly subtracts the mean envelope until the normalized step-to-step
// change drops under sd_threshold or the iteration cap is reached. A signal
// without two maxima and two minima yields extracted=false; losing extrema
// mid-sift returns the current candidate with converged=false.
SiftResult sift_one_imf(const std::vector<double>& signal, const SiftConfig& cfg);

struct ImfDecomposition {
    int n_modes = 0;
    std::vector<std::vector<double>> imfs;  // n_modes rows; rows >= extracted_count are zero
    std::vector<double> residual;
    int extracted_count = 0;
};

// Sifts the running residual until n_modes are extracted or the residual has
// too few extrema to envelope. The telescoping construction makes
// sum(imfs) + residual reproduce the input to rounding error.
ImfDecomposition decompose(const std::vector<double>& signal, const SiftConfig& cfg);

struct EmdFeatureVector {
    std::vector<double> values;  // length 4 * n_modes * 2
};

// For each of the four trace series: decompose, then per mode its temporal
// mean and population std. Layout: series-major, mode index next,
// (mean, std) innermost. Zero-padded modes contribute (0, 0).
EmdFeatureVector featurize(const MotionTrace& trace, const SiftConfig& cfg);

// CSV dump of one decomposition: header t,imf1..imfN,residual.
void write_imf_csv(const std::filesystem::path& path, const ImfDecomposition& d);

}  // namespace floemd
