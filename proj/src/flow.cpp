#include "floemd/flow.hpp"

#include "floemd/dataset.hpp"  // DataError

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace floemd {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

// Internal working image; unlike GrayFrame these may shrink below 16x16
// inside the pyramid and are not range-checked.
struct Plane {
    int w = 0, h = 0;
    std::vector<double> v;

    Plane() = default;
    Plane(int w_, int h_, double fill = 0.0)
        : w(w_), h(h_), v(static_cast<std::size_t>(w_) * h_, fill) {}

    double at(int x, int y) const { return v[static_cast<std::size_t>(y) * w + x]; }
    double& at(int x, int y) { return v[static_cast<std::size_t>(y) * w + x]; }
};

std::vector<double> gauss_kernel(int radius, double sigma) {
    std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        const double w = std::exp(-0.5 * (i * i) / (sigma * sigma));
        k[static_cast<std::size_t>(i + radius)] = w;
        sum += w;
    }
    for (double& w : k) w /= sum;
    return k;
}

int clampi(int x, int lo, int hi) { return x < lo ? lo : (x > hi ? hi : x); }

// Separable correlation with replicate borders; kernels may be asymmetric
// (the moment kernels g*i and g*i^2 below).
Plane correlate_rows(const Plane& src, const std::vector<double>& k) {
    const int r = (static_cast<int>(k.size()) - 1) / 2;
    Plane dst(src.w, src.h);
    for (int y = 0; y < src.h; ++y) {
        for (int x = 0; x < src.w; ++x) {
            double acc = 0.0;
            for (int i = -r; i <= r; ++i)
                acc += k[static_cast<std::size_t>(i + r)] * src.at(clampi(x + i, 0, src.w - 1), y);
            dst.at(x, y) = acc;
        }
    }
    return dst;
}

Plane correlate_cols(const Plane& src, const std::vector<double>& k) {
    const int r = (static_cast<int>(k.size()) - 1) / 2;
    Plane dst(src.w, src.h);
    for (int y = 0; y < src.h; ++y) {
        for (int x = 0; x < src.w; ++x) {
            double acc = 0.0;
            for (int j = -r; j <= r; ++j)
                acc += k[static_cast<std::size_t>(j + r)] * src.at(x, clampi(y + j, 0, src.h - 1));
            dst.at(x, y) = acc;
        }
    }
    return dst;
}

Plane gaussian_blur(const Plane& src, double sigma) {
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    const auto k = gauss_kernel(radius, sigma);
    return correlate_cols(correlate_rows(src, k), k);
}

Plane resize_plane(const Plane& src, int out_w, int out_h) {
    Plane dst(out_w, out_h);
    const double sx = static_cast<double>(src.w) / out_w;
    const double sy = static_cast<double>(src.h) / out_h;
    for (int y = 0; y < out_h; ++y) {
        double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(src.h - 1));
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, src.h - 1);
        const double wy = fy - y0;
        for (int x = 0; x < out_w; ++x) {
            double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(src.w - 1));
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, src.w - 1);
            const double wx = fx - x0;
            const double top = src.at(x0, y0) * (1.0 - wx) + src.at(x1, y0) * wx;
            const double bot = src.at(x0, y1) * (1.0 - wx) + src.at(x1, y1) * wx;
            dst.at(x, y) = top * (1.0 - wy) + bot * wy;
        }
    }
    return dst;
}

// Normalized box average with replicate borders, used to aggregate the
// normal equations over the correlation window.
Plane box_rows(const Plane& src, int radius) {
    Plane dst(src.w, src.h);
    const double inv = 1.0 / (2 * radius + 1);
    for (int y = 0; y < src.h; ++y) {
        double sum = 0.0;
        for (int i = -radius; i <= radius; ++i) sum += src.at(clampi(i, 0, src.w - 1), y);
        dst.at(0, y) = sum * inv;
        for (int x = 1; x < src.w; ++x) {
            sum += src.at(clampi(x + radius, 0, src.w - 1), y);
            sum -= src.at(clampi(x - radius - 1, 0, src.w - 1), y);
            dst.at(x, y) = sum * inv;
        }
    }
    return dst;
}

Plane box_cols(const Plane& src, int radius) {
    Plane dst(src.w, src.h);
    const double inv = 1.0 / (2 * radius + 1);
    for (int x = 0; x < src.w; ++x) {
        double sum = 0.0;
        for (int j = -radius; j <= radius; ++j) sum += src.at(x, clampi(j, 0, src.h - 1));
        dst.at(x, 0) = sum * inv;
        for (int y = 1; y < src.h; ++y) {
            sum += src.at(x, clampi(y + radius, 0, src.h - 1));
            sum -= src.at(x, clampi(y - radius - 1, 0, src.h - 1));
            dst.at(x, y) = sum * inv;
        }
    }
    return dst;
}

Plane box_blur(const Plane& src, int window) {
    const int radius = (window - 1) / 2;
    return box_cols(box_rows(src, radius), radius);
}

// Quadratic expansion of an image: per pixel the weighted least-squares fit
//   f(o) ~ c + b.o + o'Ao   over offsets o in the poly_n window,
// with Gaussian weights. Replicate padding keeps the weight mass constant at
// the borders, so one closed-form inverse of the (shared) Gram matrix serves
// every pixel:
//   bx  = vx/s2,  by = vy/s2,  axy = vxy/(2*s2^2),
//   axx = (vxx - s2*v1)/(s4 - s2^2),  ayy likewise,
// where v* are the Gaussian-weighted moments of the local signal and
// s2 = sum g(i) i^2, s4 = sum g(i) i^4 for the normalized 1-D kernel g.
struct Expansion {
    Plane bx, by, axx, axy, ayy;
};

Expansion polynomial_expansion(const Plane& img, int poly_n, double poly_sigma) {
    const int r = (poly_n - 1) / 2;
    const auto g = gauss_kernel(r, poly_sigma);
    std::vector<double> gi(g.size()), gii(g.size());
    double s2 = 0.0, s4 = 0.0;
    for (int i = -r; i <= r; ++i) {
        const double w = g[static_cast<std::size_t>(i + r)];
        gi[static_cast<std::size_t>(i + r)] = w * i;
        gii[static_cast<std::size_t>(i + r)] = w * i * i;
        s2 += w * i * i;
        s4 += w * i * i * i * i;
    }

    const Plane t0 = correlate_rows(img, g);
    const Plane t1 = correlate_rows(img, gi);
    const Plane t2 = correlate_rows(img, gii);

    const Plane v1 = correlate_cols(t0, g);
    const Plane vy = correlate_cols(t0, gi);
    const Plane vyy = correlate_cols(t0, gii);
    const Plane vx = correlate_cols(t1, g);
    const Plane vxy = correlate_cols(t1, gi);
    const Plane vxx = correlate_cols(t2, g);

    const double inv_s2 = 1.0 / s2;
    const double inv_sq = 1.0 / (s2 * s2);
    const double inv_d = 1.0 / (s4 - s2 * s2);

    Expansion e;
    e.bx = Plane(img.w, img.h);
    e.by = Plane(img.w, img.h);
    e.axx = Plane(img.w, img.h);
    e.axy = Plane(img.w, img.h);
    e.ayy = Plane(img.w, img.h);
    const std::size_t n = img.v.size();
    for (std::size_t i = 0; i < n; ++i) {
        e.bx.v[i] = vx.v[i] * inv_s2;
        e.by.v[i] = vy.v[i] * inv_s2;
        e.axy.v[i] = 0.5 * vxy.v[i] * inv_sq;  // A is symmetric; xy term splits in two
        e.axx.v[i] = (vxx.v[i] - s2 * v1.v[i]) * inv_d;
        e.ayy.v[i] = (vyy.v[i] - s2 * v1.v[i]) * inv_d;
    }
    return e;
}

struct Sample5 {
    double bx, by, axx, axy, ayy;
};

Sample5 sample_expansion(const Expansion& e, double x, double y) {
    const int w = e.bx.w, h = e.bx.h;
    const double cx = std::clamp(x, 0.0, static_cast<double>(w - 1));
    const double cy = std::clamp(y, 0.0, static_cast<double>(h - 1));
    const int x0 = static_cast<int>(cx);
    const int y0 = static_cast<int>(cy);
    const int x1 = std::min(x0 + 1, w - 1);
    const int y1 = std::min(y0 + 1, h - 1);
    const double fx = cx - x0, fy = cy - y0;
    const double w00 = (1 - fx) * (1 - fy), w10 = fx * (1 - fy);
    const double w01 = (1 - fx) * fy, w11 = fx * fy;
    auto lerp = [&](const Plane& p) {
        return w00 * p.at(x0, y0) + w10 * p.at(x1, y0) + w01 * p.at(x0, y1) + w11 * p.at(x1, y1);
    };
    return {lerp(e.bx), lerp(e.by), lerp(e.axx), lerp(e.axy), lerp(e.ayy)};
}

// One refinement pass: with current displacement d, match the expansion of
// the first frame at x against the second frame's expansion sampled at x+d.
// Averaged A and the flow-compensated b difference give per-pixel normal
// equations G d = h_vec which are box-averaged over the window and solved.
void refine_flow(const Expansion& e1, const Expansion& e2, Plane& fu, Plane& fv,
                 int window, int iterations) {
    const int w = fu.w, h = fu.h;
    Plane g11(w, h), g12(w, h), g22(w, h), h1(w, h), h2(w, h);
    for (int iter = 0; iter < iterations; ++iter) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const double dx = fu.at(x, y);
                const double dy = fv.at(x, y);
                const Sample5 s = sample_expansion(e2, x + dx, y + dy);
                const double axx = 0.5 * (e1.axx.at(x, y) + s.axx);
                const double axy = 0.5 * (e1.axy.at(x, y) + s.axy);
                const double ayy = 0.5 * (e1.ayy.at(x, y) + s.ayy);
                const double dbx = -0.5 * (s.bx - e1.bx.at(x, y)) + axx * dx + axy * dy;
                const double dby = -0.5 * (s.by - e1.by.at(x, y)) + axy * dx + ayy * dy;
                g11.at(x, y) = axx * axx + axy * axy;
                g12.at(x, y) = axy * (axx + ayy);
                g22.at(x, y) = axy * axy + ayy * ayy;
                h1.at(x, y) = axx * dbx + axy * dby;
                h2.at(x, y) = axy * dbx + ayy * dby;
            }
        }
        const Plane G11 = box_blur(g11, window);
        const Plane G12 = box_blur(g12, window);
        const Plane G22 = box_blur(g22, window);
        const Plane H1 = box_blur(h1, window);
        const Plane H2 = box_blur(h2, window);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const double a = G11.at(x, y), b = G12.at(x, y), c = G22.at(x, y);
                const double det = a * c - b * b;
                if (std::abs(det) > 1e-12) {
                    fu.at(x, y) = (c * H1.at(x, y) - b * H2.at(x, y)) / det;
                    fv.at(x, y) = (a * H2.at(x, y) - b * H1.at(x, y)) / det;
                }
                // Degenerate windows (textureless) keep their prior estimate.
            }
        }
    }
}

void validate_params(const FarnebackParams& p) {
    if (p.pyramid_levels < 1) throw std::invalid_argument("pyramid_levels must be >= 1");
    if (!(p.pyramid_scale > 0.0 && p.pyramid_scale < 1.0))
        throw std::invalid_argument("pyramid_scale must be in (0,1)");
    if (p.window_size < 5 || p.window_size % 2 == 0)
        throw std::invalid_argument("window_size must be odd and >= 5");
    if (p.iterations < 1) throw std::invalid_argument("iterations must be >= 1");
    if (p.poly_n != 5 && p.poly_n != 7) throw std::invalid_argument("poly_n must be 5 or 7");
    if (!(p.poly_sigma > 0.0)) throw std::invalid_argument("poly_sigma must be > 0");
}

}  // namespace

FlowField estimate_flow(const GrayFrame& prev, const GrayFrame& next,
                        const FarnebackParams& params) {
    validate_params(params);
    if (prev.width != next.width || prev.height != next.height)
        throw std::invalid_argument("frame dimensions do not match");
    validate_frame(prev);
    validate_frame(next);

    Plane base1(prev.width, prev.height);
    Plane base2(next.width, next.height);
    base1.v = prev.data;
    base2.v = next.data;

    // Gaussian-smoothed, bilinearly shrunk pyramids; levels that would drop
    // under 16 px on either axis are skipped.
    std::vector<Plane> pyr1{base1}, pyr2{base2};
    const double aa_sigma = 1.0 / params.pyramid_scale - 1.0;
    for (int level = 1; level < params.pyramid_levels; ++level) {
        const Plane& p1 = pyr1.back();
        const int nw = static_cast<int>(std::lround(p1.w * params.pyramid_scale));
        const int nh = static_cast<int>(std::lround(p1.h * params.pyramid_scale));
        if (nw < 16 || nh < 16) break;
        pyr1.push_back(resize_plane(gaussian_blur(pyr1.back(), aa_sigma), nw, nh));
        pyr2.push_back(resize_plane(gaussian_blur(pyr2.back(), aa_sigma), nw, nh));
    }

    Plane fu, fv;
    for (int level = static_cast<int>(pyr1.size()) - 1; level >= 0; --level) {
        const Plane& im1 = pyr1[static_cast<std::size_t>(level)];
        const Plane& im2 = pyr2[static_cast<std::size_t>(level)];
        if (fu.v.empty()) {
            fu = Plane(im1.w, im1.h);
            fv = Plane(im1.w, im1.h);
        } else {
            const double su = static_cast<double>(im1.w) / fu.w;
            const double sv = static_cast<double>(im1.h) / fu.h;
            fu = resize_plane(fu, im1.w, im1.h);
            fv = resize_plane(fv, im1.w, im1.h);
            for (double& d : fu.v) d *= su;
            for (double& d : fv.v) d *= sv;
        }
        const Expansion e1 = polynomial_expansion(im1, params.poly_n, params.poly_sigma);
        const Expansion e2 = polynomial_expansion(im2, params.poly_n, params.poly_sigma);
        refine_flow(e1, e2, fu, fv, params.window_size, params.iterations);
    }

    FlowField flow;
    flow.width = prev.width;
    flow.height = prev.height;
    flow.u = std::move(fu.v);
    flow.v = std::move(fv.v);
    flow.border = params.poly_n / 2;
    return flow;
}

std::vector<double> magnitude(const FlowField& flow) {
    if (flow.u.size() != flow.v.size() ||
        flow.u.size() != static_cast<std::size_t>(flow.width) * flow.height)
        throw std::invalid_argument("malformed flow field");
    std::vector<double> m(flow.u.size());
    for (std::size_t i = 0; i < m.size(); ++i)
        m[i] = std::sqrt(flow.u[i] * flow.u[i] + flow.v[i] * flow.v[i]);
    return m;
}

std::vector<double> direction(const FlowField& flow) {
    if (flow.u.size() != flow.v.size() ||
        flow.u.size() != static_cast<std::size_t>(flow.width) * flow.height)
        throw std::invalid_argument("malformed flow field");
    std::vector<double> d(flow.u.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (flow.u[i] == 0.0 && flow.v[i] == 0.0) {
            d[i] = 0.0;
        } else {
            double a = std::atan2(flow.v[i], flow.u[i]);
            if (a <= -kPi) a = kPi;  // keep the range half-open at -pi
            d[i] = a;
        }
    }
    return d;
}

namespace {

void put_u32(std::ofstream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

void put_f32(std::ofstream& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

std::uint32_t get_u32(std::ifstream& in, const std::filesystem::path& path) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (in.gcount() != 4) throw DataError("truncated flow dump: " + path.string());
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

float get_f32(std::ifstream& in, const std::filesystem::path& path) {
    const std::uint32_t bits = get_u32(in, path);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

}  // namespace

void write_flo(const std::filesystem::path& path, const FlowField& flow) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot create " + path.string());
    out.write("FLO1", 4);
    put_u32(out, static_cast<std::uint32_t>(flow.width));
    put_u32(out, static_cast<std::uint32_t>(flow.height));
    for (std::size_t i = 0; i < flow.u.size(); ++i) {
        put_f32(out, static_cast<float>(flow.u[i]));
        put_f32(out, static_cast<float>(flow.v[i]));
    }
    if (!out) throw DataError("short write to " + path.string());
}

FlowField read_flo(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (in.gcount() != 4 || std::memcmp(magic, "FLO1", 4) != 0)
        throw DataError("not a flow dump: " + path.string());
    FlowField flow;
    flow.width = static_cast<int>(get_u32(in, path));
    flow.height = static_cast<int>(get_u32(in, path));
    if (flow.width < 1 || flow.height < 1) throw DataError("bad flow dimensions: " + path.string());
    const std::size_t n = static_cast<std::size_t>(flow.width) * flow.height;
    flow.u.resize(n);
    flow.v.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        flow.u[i] = get_f32(in, path);
        flow.v[i] = get_f32(in, path);
    }
    return flow;
}

}  // namespace floemd
