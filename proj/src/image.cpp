#include "floemd/image.hpp"

#include "floemd/dataset.hpp"  // DataError

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>

namespace floemd {

GrayFrame make_frame(int width, int height, double fill) {
    if (width < 1 || height < 1) throw std::invalid_argument("frame dimensions must be positive");
    GrayFrame f;
    f.width = width;
    f.height = height;
    f.data.assign(static_cast<std::size_t>(width) * height, fill);
    return f;
}

void validate_frame(const GrayFrame& f) {
    if (f.width < 16 || f.height < 16)
        throw std::invalid_argument("frame must be at least 16x16");
    if (f.data.size() != static_cast<std::size_t>(f.width) * f.height)
        throw std::invalid_argument("frame data length does not match dimensions");
    for (double v : f.data) {
        if (!std::isfinite(v) || v < 0.0 || v > 1.0)
            throw std::invalid_argument("frame values must be finite and in [0,1]");
    }
}

GrayFrame resize_bilinear(const GrayFrame& src, int out_w, int out_h) {
    if (src.width < 1 || src.height < 1) throw std::invalid_argument("empty source frame");
    if (out_w < 1 || out_h < 1) throw std::invalid_argument("resize target must be positive");
    GrayFrame dst = make_frame(out_w, out_h);
    const double sx = static_cast<double>(src.width) / out_w;
    const double sy = static_cast<double>(src.height) / out_h;
    for (int y = 0; y < out_h; ++y) {
        // Half-pixel centers keep the resample symmetric.
        double fy = (y + 0.5) * sy - 0.5;
        fy = std::clamp(fy, 0.0, static_cast<double>(src.height - 1));
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, src.height - 1);
        const double wy = fy - y0;
        for (int x = 0; x < out_w; ++x) {
            double fx = (x + 0.5) * sx - 0.5;
            fx = std::clamp(fx, 0.0, static_cast<double>(src.width - 1));
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, src.width - 1);
            const double wx = fx - x0;
            const double top = src.at(x0, y0) * (1.0 - wx) + src.at(x1, y0) * wx;
            const double bot = src.at(x0, y1) * (1.0 - wx) + src.at(x1, y1) * wx;
            dst.at(x, y) = top * (1.0 - wy) + bot * wy;
        }
    }
    return dst;
}

namespace {

int next_pgm_token(std::istream& in, std::string& tok) {
    tok.clear();
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {  // comment to end of line
            while (c != EOF && c != '\n') c = in.get();
        } else if (std::isspace(c)) {
            if (!tok.empty()) return 0;
        } else {
            tok.push_back(static_cast<char>(c));
        }
        c = in.get();
    }
    return tok.empty() ? -1 : 0;
}

int parse_pgm_int(std::istream& in, const std::string& what, const std::filesystem::path& path) {
    std::string tok;
    if (next_pgm_token(in, tok) != 0)
        throw DataError("truncated PGM header (" + what + ") in " + path.string());
    try {
        std::size_t used = 0;
        const int value = std::stoi(tok, &used);
        if (used != tok.size() || value < 0) throw std::invalid_argument(tok);
        return value;
    } catch (const std::exception&) {
        throw DataError("bad PGM " + what + " '" + tok + "' in " + path.string());
    }
}

}  // namespace

GrayFrame read_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::string magic;
    if (next_pgm_token(in, magic) != 0 || magic != "P5")
        throw DataError("not a binary PGM (P5): " + path.string());
    const int width = parse_pgm_int(in, "width", path);
    const int height = parse_pgm_int(in, "height", path);
    const int maxval = parse_pgm_int(in, "maxval", path);
    if (width < 1 || height < 1) throw DataError("bad PGM dimensions in " + path.string());
    if (maxval < 1 || maxval > 255)
        throw DataError("unsupported PGM maxval " + std::to_string(maxval) + " in " + path.string());
    // The header terminates with exactly one whitespace byte, already
    // consumed by the tokenizer.
    GrayFrame f = make_frame(width, height);
    std::vector<unsigned char> row(static_cast<std::size_t>(width));
    const double scale = 1.0 / maxval;
    for (int y = 0; y < height; ++y) {
        in.read(reinterpret_cast<char*>(row.data()), width);
        if (in.gcount() != width) throw DataError("truncated PGM pixel data in " + path.string());
        for (int x = 0; x < width; ++x) f.at(x, y) = std::min(1.0, row[x] * scale);
    }
    return f;
}

void write_pgm(const std::filesystem::path& path, const GrayFrame& f) {
    if (f.width < 1 || f.height < 1 ||
        f.data.size() != static_cast<std::size_t>(f.width) * f.height)
        throw std::invalid_argument("cannot write malformed frame");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot create " + path.string());
    out << "P5\n" << f.width << " " << f.height << "\n255\n";
    std::vector<unsigned char> row(static_cast<std::size_t>(f.width));
    for (int y = 0; y < f.height; ++y) {
        for (int x = 0; x < f.width; ++x) {
            const double v = std::clamp(f.at(x, y), 0.0, 1.0);
            row[x] = static_cast<unsigned char>(std::lround(v * 255.0));
        }
        out.write(reinterpret_cast<const char*>(row.data()), f.width);
    }
    if (!out) throw DataError("short write to " + path.string());
}

GrayFrame read_png(const std::filesystem::path& path) {
    std::FILE* fp = std::fopen(path.string().c_str(), "rb");
    if (!fp) throw DataError("cannot open " + path.string());

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw DataError("libpng initialization failed for " + path.string());
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw DataError("corrupt PNG: " + path.string());
    }

    png_init_io(png, fp);
    png_read_info(png, info);

    // Normalize every layout to 8-bit RGB or gray without alpha.
    png_byte color = png_get_color_type(png, info);
    png_byte depth = png_get_bit_depth(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (depth == 16) png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);

    const int width = static_cast<int>(png_get_image_width(png, info));
    const int height = static_cast<int>(png_get_image_height(png, info));
    const int chans = png_get_channels(png, info);
    if (width < 1 || height < 1 || (chans != 1 && chans != 3)) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw DataError("unsupported PNG layout in " + path.string());
    }

    std::vector<unsigned char> pixels(static_cast<std::size_t>(width) * height * chans);
    std::vector<png_bytep> rows(static_cast<std::size_t>(height));
    for (int y = 0; y < height; ++y)
        rows[static_cast<std::size_t>(y)] = pixels.data() + static_cast<std::size_t>(y) * width * chans;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);

    GrayFrame f = make_frame(width, height);
    const double inv = 1.0 / 255.0;
    for (int y = 0; y < height; ++y) {
        const unsigned char* p = pixels.data() + static_cast<std::size_t>(y) * width * chans;
        for (int x = 0; x < width; ++x) {
            double lum;
            if (chans == 1) {
                lum = p[x] * inv;
            } else {
                const unsigned char* px = p + static_cast<std::size_t>(x) * 3;
                lum = (0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2]) * inv;
            }
            f.at(x, y) = std::min(1.0, lum);
        }
    }
    return f;
}

GrayFrame read_image(const std::filesystem::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (ext == ".pgm") return read_pgm(path);
    if (ext == ".png") return read_png(path);
    throw DataError("unsupported image extension '" + ext + "' for " + path.string());
}

}  // namespace floemd
