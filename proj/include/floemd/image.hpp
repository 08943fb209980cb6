#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

namespace floemd {

// Row-major grayscale frame, luminance in [0,1].
struct GrayFrame {
    int width = 0;
    int height = 0;
    std::vector<double> data;

    double at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
    double& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
};

GrayFrame make_frame(int width, int height, double fill = 0.0);

// Throws std::invalid_argument unless the frame is at least 16x16 with every
// value finite and inside [0,1].
void validate_frame(const GrayFrame& f);

GrayFrame resize_bilinear(const GrayFrame& src, int out_w, int out_h);

// Binary 8-bit PGM (P5). Writing maps [0,1] to 0..255 with rounding.
GrayFrame read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const GrayFrame& f);

// PNG in any libpng-decodable layout; color is reduced to luminance with
// BT.601 weights (0.299, 0.587, 0.114).
GrayFrame read_png(const std::filesystem::path& path);

// Dispatches on extension: .pgm or .png (case-insensitive).
GrayFrame read_image(const std::filesystem::path& path);

}  // namespace floemd
