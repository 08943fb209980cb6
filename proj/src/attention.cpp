#include "floemd/attention.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace floemd {

namespace {

constexpr int kKernelSize = 7;
constexpr int kKernelRadius = kKernelSize / 2;
constexpr int kSpatialPlanes = 3;  // channel-mean, channel-max, flow magnitude

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

void check_map(const FeatureMap& m, const char* what) {
    if (m.channels < 1 || m.height < 1 || m.width < 1 ||
        m.data.size() != static_cast<std::size_t>(m.channels) * m.height * m.width)
        throw std::invalid_argument(std::string(what) + " feature map is malformed");
}

// The four pooled descriptors in fixed order: rgb-avg, rgb-max, flow-avg,
// flow-max. argmax indices (into the plane) are kept for the backward pass.
void pool_concat(const FeatureMap& rgb, const FeatureMap& aligned, std::vector<double>& z,
                 std::vector<int>& rgb_argmax, std::vector<int>& flow_argmax) {
    const int c_n = rgb.channels;
    const std::size_t plane = rgb.plane();
    z.assign(static_cast<std::size_t>(4 * c_n), 0.0);
    rgb_argmax.assign(static_cast<std::size_t>(c_n), 0);
    flow_argmax.assign(static_cast<std::size_t>(c_n), 0);
    const double inv = 1.0 / static_cast<double>(plane);
    for (int c = 0; c < c_n; ++c) {
        const double* pr = rgb.data.data() + static_cast<std::size_t>(c) * plane;
        const double* pf = aligned.data.data() + static_cast<std::size_t>(c) * plane;
        double sum_r = 0.0, sum_f = 0.0;
        double max_r = pr[0], max_f = pf[0];
        int arg_r = 0, arg_f = 0;
        for (std::size_t i = 0; i < plane; ++i) {
            sum_r += pr[i];
            sum_f += pf[i];
            if (pr[i] > max_r) { max_r = pr[i]; arg_r = static_cast<int>(i); }
            if (pf[i] > max_f) { max_f = pf[i]; arg_f = static_cast<int>(i); }
        }
        z[static_cast<std::size_t>(c)] = sum_r * inv;
        z[static_cast<std::size_t>(c_n + c)] = max_r;
        z[static_cast<std::size_t>(2 * c_n + c)] = sum_f * inv;
        z[static_cast<std::size_t>(3 * c_n + c)] = max_f;
        rgb_argmax[static_cast<std::size_t>(c)] = arg_r;
        flow_argmax[static_cast<std::size_t>(c)] = arg_f;
    }
}

FeatureMap align_flow(const FeatureMap& x_flow, const ChannelAttentionParams& p) {
    FeatureMap out = make_map(p.rgb_channels, x_flow.height, x_flow.width);
    const std::size_t plane = x_flow.plane();
    for (int c = 0; c < p.rgb_channels; ++c) {
        const double* row = p.align.data() + static_cast<std::size_t>(c) * p.flow_channels;
        double* dst = out.data.data() + static_cast<std::size_t>(c) * plane;
        for (int cf = 0; cf < p.flow_channels; ++cf) {
            const double w = row[cf];
            if (w == 0.0) continue;
            const double* src = x_flow.data.data() + static_cast<std::size_t>(cf) * plane;
            for (std::size_t i = 0; i < plane; ++i) dst[i] += w * src[i];
        }
    }
    return out;
}

void check_channel_params(const ChannelAttentionParams& p) {
    const auto c_n = static_cast<std::size_t>(p.rgb_channels);
    const auto h = static_cast<std::size_t>(p.hidden);
    if (p.rgb_channels < 1 || p.flow_channels < 1 || p.hidden < 1)
        throw std::invalid_argument("channel attention dimensions must be positive");
    if (p.align.size() != c_n * static_cast<std::size_t>(p.flow_channels) ||
        p.w1.size() != h * 4 * c_n || p.b1.size() != h ||
        p.w2.size() != c_n * h || p.b2.size() != c_n)
        throw std::invalid_argument("channel attention parameter shapes are wrong");
}

void check_spatial_params(const SpatialAttentionParams& p) {
    if (p.kernel.size() != static_cast<std::size_t>(kSpatialPlanes) * kKernelSize * kKernelSize)
        throw std::invalid_argument("spatial attention kernel must be 3x7x7");
}

struct ChannelPass {
    FeatureMap aligned;
    std::vector<double> z;
    std::vector<int> rgb_argmax, flow_argmax;
    std::vector<double> h1, r1, o, a_c;
};

ChannelPass channel_pass(const FeatureMap& x_rgb, const FeatureMap& x_flow,
                         const ChannelAttentionParams& p) {
    check_map(x_rgb, "rgb");
    check_map(x_flow, "flow");
    check_channel_params(p);
    if (x_rgb.channels != p.rgb_channels || x_flow.channels != p.flow_channels)
        throw std::invalid_argument("channel counts do not match the parameters");
    if (x_rgb.height != x_flow.height || x_rgb.width != x_flow.width)
        throw std::invalid_argument("rgb/flow spatial dimensions differ");

    ChannelPass cp;
    cp.aligned = align_flow(x_flow, p);
    pool_concat(x_rgb, cp.aligned, cp.z, cp.rgb_argmax, cp.flow_argmax);

    const int c_n = p.rgb_channels;
    const int hid = p.hidden;
    cp.h1.assign(static_cast<std::size_t>(hid), 0.0);
    for (int j = 0; j < hid; ++j) {
        const double* row = p.w1.data() + static_cast<std::size_t>(j) * 4 * c_n;
        double acc = p.b1[static_cast<std::size_t>(j)];
        for (int i = 0; i < 4 * c_n; ++i) acc += row[i] * cp.z[static_cast<std::size_t>(i)];
        cp.h1[static_cast<std::size_t>(j)] = acc;
    }
    cp.r1.resize(cp.h1.size());
    for (std::size_t j = 0; j < cp.h1.size(); ++j) cp.r1[j] = cp.h1[j] > 0.0 ? cp.h1[j] : 0.0;
    cp.o.assign(static_cast<std::size_t>(c_n), 0.0);
    cp.a_c.assign(static_cast<std::size_t>(c_n), 0.0);
    for (int c = 0; c < c_n; ++c) {
        const double* row = p.w2.data() + static_cast<std::size_t>(c) * hid;
        double acc = p.b2[static_cast<std::size_t>(c)];
        for (int j = 0; j < hid; ++j) acc += row[j] * cp.r1[static_cast<std::size_t>(j)];
        cp.o[static_cast<std::size_t>(c)] = acc;
        cp.a_c[static_cast<std::size_t>(c)] = sigmoid(acc);
    }
    return cp;
}

struct SpatialPass {
    std::vector<double> p_mean, p_max, p_flow;
    std::vector<int> cmax_idx;
    std::vector<double> s, a_s;
};

SpatialPass spatial_pass(const FeatureMap& x_refined, const FeatureMap& flow_mag,
                         const SpatialAttentionParams& p) {
    check_map(x_refined, "refined");
    check_map(flow_mag, "flow magnitude");
    check_spatial_params(p);
    if (flow_mag.channels != 1)
        throw std::invalid_argument("flow magnitude must be a single plane");

    const int h = x_refined.height, w = x_refined.width;
    const std::size_t plane = x_refined.plane();
    SpatialPass sp;
    sp.p_mean.assign(plane, 0.0);
    sp.p_max.assign(plane, 0.0);
    sp.cmax_idx.assign(plane, 0);
    const double inv_c = 1.0 / x_refined.channels;
    for (std::size_t i = 0; i < plane; ++i) {
        double sum = 0.0;
        double best = x_refined.data[i];
        int arg = 0;
        for (int c = 0; c < x_refined.channels; ++c) {
            const double v = x_refined.data[static_cast<std::size_t>(c) * plane + i];
            sum += v;
            if (v > best) { best = v; arg = c; }
        }
        sp.p_mean[i] = sum * inv_c;
        sp.p_max[i] = best;
        sp.cmax_idx[i] = arg;
    }

    // Guidance plane: resize to the refined grid, then min-max normalize.
    GrayFrame mag;
    mag.width = flow_mag.width;
    mag.height = flow_mag.height;
    mag.data = flow_mag.data;
    const GrayFrame sized = (flow_mag.width == w && flow_mag.height == h)
                                ? mag : resize_bilinear(mag, w, h);
    sp.p_flow = minmax_normalize(sized.data);

    const std::array<const std::vector<double>*, kSpatialPlanes> planes = {
        &sp.p_mean, &sp.p_max, &sp.p_flow};
    sp.s.assign(plane, 0.0);
    sp.a_s.assign(plane, 0.0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = p.bias;
            for (int pl = 0; pl < kSpatialPlanes; ++pl) {
                const auto& src = *planes[static_cast<std::size_t>(pl)];
                for (int dy = -kKernelRadius; dy <= kKernelRadius; ++dy) {
                    const int yy = y + dy;
                    if (yy < 0 || yy >= h) continue;  // zero padding
                    for (int dx = -kKernelRadius; dx <= kKernelRadius; ++dx) {
                        const int xx = x + dx;
                        if (xx < 0 || xx >= w) continue;
                        const std::size_t k =
                            (static_cast<std::size_t>(pl) * kKernelSize + (dy + kKernelRadius)) *
                                kKernelSize + (dx + kKernelRadius);
                        acc += p.kernel[k] * src[static_cast<std::size_t>(yy) * w + xx];
                    }
                }
            }
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            sp.s[i] = acc;
            sp.a_s[i] = sigmoid(acc);
        }
    }
    return sp;
}

}  // namespace

FeatureMap make_map(int channels, int height, int width, double fill) {
    if (channels < 1 || height < 1 || width < 1)
        throw std::invalid_argument("feature map dimensions must be positive");
    FeatureMap m;
    m.channels = channels;
    m.height = height;
    m.width = width;
    m.data.assign(static_cast<std::size_t>(channels) * height * width, fill);
    return m;
}

AttentionParams init_attention(int rgb_channels, int flow_channels, int reduction, Rng& rng) {
    if (rgb_channels < 1 || flow_channels < 1 || reduction < 1)
        throw std::invalid_argument("attention dimensions must be positive");
    AttentionParams p;
    auto& ch = p.channel;
    ch.rgb_channels = rgb_channels;
    ch.flow_channels = flow_channels;
    ch.hidden = std::max(1, rgb_channels / reduction);
    auto fill = [&rng](std::vector<double>& v, std::size_t n, int fan_in) {
        const double limit = std::sqrt(6.0 / fan_in);
        v.resize(n);
        for (double& x : v) x = rng.uniform(-limit, limit);
    };
    fill(ch.align, static_cast<std::size_t>(rgb_channels) * flow_channels, flow_channels);
    fill(ch.w1, static_cast<std::size_t>(ch.hidden) * 4 * rgb_channels, 4 * rgb_channels);
    ch.b1.assign(static_cast<std::size_t>(ch.hidden), 0.0);
    fill(ch.w2, static_cast<std::size_t>(rgb_channels) * ch.hidden, ch.hidden);
    ch.b2.assign(static_cast<std::size_t>(rgb_channels), 0.0);
    fill(p.spatial.kernel, static_cast<std::size_t>(kSpatialPlanes) * kKernelSize * kKernelSize,
         kSpatialPlanes * kKernelSize * kKernelSize);
    p.spatial.bias = 0.0;
    return p;
}

std::vector<double> channel_attention(const FeatureMap& x_rgb, const FeatureMap& x_flow,
                                      const ChannelAttentionParams& p) {
    return channel_pass(x_rgb, x_flow, p).a_c;
}

std::vector<double> spatial_attention(const FeatureMap& x_refined, const FeatureMap& flow_mag,
                                      const SpatialAttentionParams& p) {
    return spatial_pass(x_refined, flow_mag, p).a_s;
}

FeatureMap apply_attention(const FeatureMap& x_rgb, const std::vector<double>& a_c,
                           const std::vector<double>& a_s) {
    check_map(x_rgb, "rgb");
    if (a_c.size() != static_cast<std::size_t>(x_rgb.channels))
        throw std::invalid_argument("a_c length must equal the channel count");
    if (a_s.size() != x_rgb.plane())
        throw std::invalid_argument("a_s size must equal the spatial plane");
    FeatureMap out = x_rgb;
    const std::size_t plane = x_rgb.plane();
    for (int c = 0; c < x_rgb.channels; ++c) {
        double* dst = out.data.data() + static_cast<std::size_t>(c) * plane;
        const double w = a_c[static_cast<std::size_t>(c)];
        for (std::size_t i = 0; i < plane; ++i) dst[i] = a_s[i] * (w * dst[i]);
    }
    return out;
}

std::vector<double> minmax_normalize(const std::vector<double>& x) {
    if (x.empty()) return {};
    const auto [mn_it, mx_it] = std::minmax_element(x.begin(), x.end());
    const double mn = *mn_it, mx = *mx_it;
    std::vector<double> out(x.size(), 0.0);
    if (mx > mn) {
        const double inv = 1.0 / (mx - mn);
        for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mn) * inv;
    }
    return out;
}

AttentionForward attention_forward(const FeatureMap& x_rgb, const FeatureMap& x_flow,
                                   const FeatureMap& flow_mag, const AttentionParams& p) {
    AttentionForward fwd;
    ChannelPass cp = channel_pass(x_rgb, x_flow, p.channel);

    FeatureMap xprime = x_rgb;
    const std::size_t plane = x_rgb.plane();
    for (int c = 0; c < x_rgb.channels; ++c) {
        double* dst = xprime.data.data() + static_cast<std::size_t>(c) * plane;
        const double w = cp.a_c[static_cast<std::size_t>(c)];
        for (std::size_t i = 0; i < plane; ++i) dst[i] *= w;
    }

    SpatialPass sp = spatial_pass(xprime, flow_mag, p.spatial);

    fwd.refined = xprime;
    for (int c = 0; c < x_rgb.channels; ++c) {
        double* dst = fwd.refined.data.data() + static_cast<std::size_t>(c) * plane;
        for (std::size_t i = 0; i < plane; ++i) dst[i] *= sp.a_s[i];
    }

    fwd.a_c = cp.a_c;
    fwd.a_s = sp.a_s;
    auto& cc = fwd.cache;
    cc.aligned = std::move(cp.aligned);
    cc.z = std::move(cp.z);
    cc.rgb_argmax = std::move(cp.rgb_argmax);
    cc.flow_argmax = std::move(cp.flow_argmax);
    cc.h1 = std::move(cp.h1);
    cc.r1 = std::move(cp.r1);
    cc.o = std::move(cp.o);
    cc.a_c = fwd.a_c;
    cc.xprime = std::move(xprime);
    cc.p_mean = std::move(sp.p_mean);
    cc.p_max = std::move(sp.p_max);
    cc.p_flow = std::move(sp.p_flow);
    cc.cmax_idx = std::move(sp.cmax_idx);
    cc.s = std::move(sp.s);
    cc.a_s = fwd.a_s;
    return fwd;
}

AttentionGrads attention_backward(const AttentionForward& fwd, const FeatureMap& x_rgb,
                                  const FeatureMap& x_flow, const AttentionParams& p,
                                  const FeatureMap& grad_out) {
    check_map(grad_out, "grad_out");
    const AttentionCache& cc = fwd.cache;
    const int c_n = p.channel.rgb_channels;
    const int hid = p.channel.hidden;
    const int h = x_rgb.height, w = x_rgb.width;
    const std::size_t plane = x_rgb.plane();
    if (grad_out.channels != c_n || grad_out.height != h || grad_out.width != w)
        throw std::invalid_argument("grad_out shape must match the refined map");

    AttentionGrads g;
    g.channel.rgb_channels = c_n;
    g.channel.flow_channels = p.channel.flow_channels;
    g.channel.hidden = hid;
    g.channel.align.assign(p.channel.align.size(), 0.0);
    g.channel.w1.assign(p.channel.w1.size(), 0.0);
    g.channel.b1.assign(p.channel.b1.size(), 0.0);
    g.channel.w2.assign(p.channel.w2.size(), 0.0);
    g.channel.b2.assign(p.channel.b2.size(), 0.0);
    g.spatial.kernel.assign(p.spatial.kernel.size(), 0.0);
    g.spatial.bias = 0.0;
    g.d_rgb = make_map(c_n, h, w);
    g.d_flow = make_map(p.channel.flow_channels, x_flow.height, x_flow.width);

    // refined = a_s * xprime.
    std::vector<double> d_as(plane, 0.0);
    FeatureMap d_xprime = make_map(c_n, h, w);
    for (int c = 0; c < c_n; ++c) {
        const double* go = grad_out.data.data() + static_cast<std::size_t>(c) * plane;
        const double* xp = cc.xprime.data.data() + static_cast<std::size_t>(c) * plane;
        double* dxp = d_xprime.data.data() + static_cast<std::size_t>(c) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
            d_as[i] += go[i] * xp[i];
            dxp[i] = go[i] * cc.a_s[i];
        }
    }

    // a_s = sigmoid(s); conv over the three stacked planes.
    std::vector<double> ds(plane);
    for (std::size_t i = 0; i < plane; ++i)
        ds[i] = d_as[i] * cc.a_s[i] * (1.0 - cc.a_s[i]);

    std::vector<double> d_pmean(plane, 0.0), d_pmax(plane, 0.0);
    const std::array<const std::vector<double>*, kSpatialPlanes> planes = {
        &cc.p_mean, &cc.p_max, &cc.p_flow};
    std::array<std::vector<double>*, 2> dplanes = {&d_pmean, &d_pmax};
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            const double di = ds[i];
            if (di == 0.0) continue;
            g.spatial.bias += di;
            for (int pl = 0; pl < kSpatialPlanes; ++pl) {
                const auto& src = *planes[static_cast<std::size_t>(pl)];
                for (int dy = -kKernelRadius; dy <= kKernelRadius; ++dy) {
                    const int yy = y + dy;
                    if (yy < 0 || yy >= h) continue;
                    for (int dx = -kKernelRadius; dx <= kKernelRadius; ++dx) {
                        const int xx = x + dx;
                        if (xx < 0 || xx >= w) continue;
                        const std::size_t k =
                            (static_cast<std::size_t>(pl) * kKernelSize + (dy + kKernelRadius)) *
                                kKernelSize + (dx + kKernelRadius);
                        const std::size_t j = static_cast<std::size_t>(yy) * w + xx;
                        g.spatial.kernel[k] += di * src[j];
                        if (pl < 2) (*dplanes[static_cast<std::size_t>(pl)])[j] += di * p.spatial.kernel[k];
                        // The flow plane is guidance data; no gradient flows into it.
                    }
                }
            }
        }
    }

    // Planes back to xprime: mean spreads evenly, max routes to the argmax channel.
    const double inv_c = 1.0 / c_n;
    for (std::size_t i = 0; i < plane; ++i) {
        if (d_pmean[i] != 0.0) {
            const double spread = d_pmean[i] * inv_c;
            for (int c = 0; c < c_n; ++c)
                d_xprime.data[static_cast<std::size_t>(c) * plane + i] += spread;
        }
        if (d_pmax[i] != 0.0)
            d_xprime.data[static_cast<std::size_t>(cc.cmax_idx[i]) * plane + i] += d_pmax[i];
    }

    // xprime = a_c * x_rgb.
    std::vector<double> d_ac(static_cast<std::size_t>(c_n), 0.0);
    for (int c = 0; c < c_n; ++c) {
        const double* dxp = d_xprime.data.data() + static_cast<std::size_t>(c) * plane;
        const double* xr = x_rgb.data.data() + static_cast<std::size_t>(c) * plane;
        double* drgb = g.d_rgb.data.data() + static_cast<std::size_t>(c) * plane;
        const double ac = cc.a_c[static_cast<std::size_t>(c)];
        double acc = 0.0;
        for (std::size_t i = 0; i < plane; ++i) {
            acc += dxp[i] * xr[i];
            drgb[i] += dxp[i] * ac;
        }
        d_ac[static_cast<std::size_t>(c)] = acc;
    }

    // Channel MLP: a_c = sigmoid(o), o = w2 r1 + b2, r1 = relu(w1 z + b1).
    std::vector<double> d_o(static_cast<std::size_t>(c_n));
    for (int c = 0; c < c_n; ++c) {
        const double ac = cc.a_c[static_cast<std::size_t>(c)];
        d_o[static_cast<std::size_t>(c)] = d_ac[static_cast<std::size_t>(c)] * ac * (1.0 - ac);
    }
    std::vector<double> d_r1(static_cast<std::size_t>(hid), 0.0);
    for (int c = 0; c < c_n; ++c) {
        const double d = d_o[static_cast<std::size_t>(c)];
        g.channel.b2[static_cast<std::size_t>(c)] = d;
        const double* row = p.channel.w2.data() + static_cast<std::size_t>(c) * hid;
        double* grow = g.channel.w2.data() + static_cast<std::size_t>(c) * hid;
        for (int j = 0; j < hid; ++j) {
            grow[j] = d * cc.r1[static_cast<std::size_t>(j)];
            d_r1[static_cast<std::size_t>(j)] += d * row[j];
        }
    }
    std::vector<double> d_z(static_cast<std::size_t>(4 * c_n), 0.0);
    for (int j = 0; j < hid; ++j) {
        const double dh = cc.h1[static_cast<std::size_t>(j)] > 0.0 ? d_r1[static_cast<std::size_t>(j)] : 0.0;
        g.channel.b1[static_cast<std::size_t>(j)] = dh;
        const double* row = p.channel.w1.data() + static_cast<std::size_t>(j) * 4 * c_n;
        double* grow = g.channel.w1.data() + static_cast<std::size_t>(j) * 4 * c_n;
        for (int i = 0; i < 4 * c_n; ++i) {
            grow[i] = dh * cc.z[static_cast<std::size_t>(i)];
            d_z[static_cast<std::size_t>(i)] += dh * row[i];
        }
    }

    // Pooled descriptors back to the maps.
    const double inv_plane = 1.0 / static_cast<double>(plane);
    FeatureMap d_aligned = make_map(c_n, h, w);
    for (int c = 0; c < c_n; ++c) {
        const double d_avg_r = d_z[static_cast<std::size_t>(c)] * inv_plane;
        const double d_max_r = d_z[static_cast<std::size_t>(c_n + c)];
        const double d_avg_f = d_z[static_cast<std::size_t>(2 * c_n + c)] * inv_plane;
        const double d_max_f = d_z[static_cast<std::size_t>(3 * c_n + c)];
        double* drgb = g.d_rgb.data.data() + static_cast<std::size_t>(c) * plane;
        double* dali = d_aligned.data.data() + static_cast<std::size_t>(c) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
            drgb[i] += d_avg_r;
            dali[i] += d_avg_f;
        }
        drgb[static_cast<std::size_t>(cc.rgb_argmax[static_cast<std::size_t>(c)])] += d_max_r;
        dali[static_cast<std::size_t>(cc.flow_argmax[static_cast<std::size_t>(c)])] += d_max_f;
    }

    // 1x1 align conv: aligned[c] = sum_cf align[c,cf] * flow[cf].
    for (int c = 0; c < c_n; ++c) {
        const double* dali = d_aligned.data.data() + static_cast<std::size_t>(c) * plane;
        const double* arow = p.channel.align.data() + static_cast<std::size_t>(c) * p.channel.flow_channels;
        double* garow = g.channel.align.data() + static_cast<std::size_t>(c) * p.channel.flow_channels;
        for (int cf = 0; cf < p.channel.flow_channels; ++cf) {
            const double* xf = x_flow.data.data() + static_cast<std::size_t>(cf) * plane;
            double* dxf = g.d_flow.data.data() + static_cast<std::size_t>(cf) * plane;
            double acc = 0.0;
            const double aw = arow[cf];
            for (std::size_t i = 0; i < plane; ++i) {
                acc += dali[i] * xf[i];
                dxf[i] += dali[i] * aw;
            }
            garow[cf] += acc;
        }
    }
    return g;
}

void write_attention_pgm(const std::filesystem::path& path,
                         const std::vector<double>& a_s, int height, int width) {
    if (a_s.size() != static_cast<std::size_t>(height) * width)
        throw std::invalid_argument("attention map size mismatch");
    GrayFrame f;
    f.width = width;
    f.height = height;
    f.data = a_s;
    write_pgm(path, f);
}

}  // namespace floemd
