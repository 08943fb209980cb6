#pragma once

#include "floemd/image.hpp"
#include "floemd/rng.hpp"

#include <vector>

namespace floemd {

// Channel-major feature map: data[(c*height + y)*width + x].
struct FeatureMap {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<double> data;

    double at(int c, int y, int x) const {
        return data[(static_cast<std::size_t>(c) * height + y) * width + x];
    }
    double& at(int c, int y, int x) {
        return data[(static_cast<std::size_t>(c) * height + y) * width + x];
    }
    std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
};

FeatureMap make_map(int channels, int height, int width, double fill = 0.0);

// Channel attention over an RGB-stream map and a flow-stream map. The flow
// map first passes a bias-free 1x1 channel-mixing conv so both modalities
// share the RGB channel count. Average- and max-pooled descriptors of both
// maps are concatenated in fixed order (rgb-avg, rgb-max, flow-avg,
// flow-max) and fed through a shared two-layer MLP (relu hidden), then a
// sigmoid yields one weight per channel.
struct ChannelAttentionParams {
    int rgb_channels = 0;
    int flow_channels = 0;
    int hidden = 0;             // max(1, rgb_channels / reduction)
    std::vector<double> align;  // rgb_channels x flow_channels
    std::vector<double> w1;     // hidden x 4*rgb_channels
    std::vector<double> b1;     // hidden
    std::vector<double> w2;     // rgb_channels x hidden
    std::vector<double> b2;     // rgb_channels
};

// Spatial attention over the channel-refined map: stacks channel-mean,
// channel-max and the resized, min-max-normalized flow-magnitude plane,
// convolves 7x7 with zero same-padding, then sigmoid.
struct SpatialAttentionParams {
    std::vector<double> kernel;  // 3 planes x 7 x 7
    double bias = 0.0;
};

struct AttentionParams {
    ChannelAttentionParams channel;
    SpatialAttentionParams spatial;
};

AttentionParams init_attention(int rgb_channels, int flow_channels, int reduction,
                               Rng& rng);

// Per-channel weights in (0,1), length rgb_channels.
std::vector<double> channel_attention(const FeatureMap& x_rgb, const FeatureMap& x_flow,
                                      const ChannelAttentionParams& p);

// Per-pixel weights in (0,1), height*width of x_refined. flow_mag is a
// single-plane field of any size; it is bilinearly resized to the map's
// grid and min-max normalized (a constant field normalizes to all zeros).
std::vector<double> spatial_attention(const FeatureMap& x_refined, const FeatureMap& flow_mag,
                                      const SpatialAttentionParams& p);

// a_s(y,x) * (a_c(c) * x(c,y,x)); a_c broadcasts over space, a_s over channels.
FeatureMap apply_attention(const FeatureMap& x_rgb, const std::vector<double>& a_c,
                           const std::vector<double>& a_s);

// (x - min) / (max - min) per element; zero-range input maps to all zeros.
std::vector<double> minmax_normalize(const std::vector<double>& x);

struct AttentionCache {
    FeatureMap aligned;                        // flow after the 1x1 mixing
    std::vector<double> z;                     // pooled 4C vector
    std::vector<int> rgb_argmax, flow_argmax;  // plane index of each channel max
    std::vector<double> h1, r1, o;             // MLP intermediates
    std::vector<double> a_c;
    FeatureMap xprime;                         // a_c applied to x_rgb
    std::vector<double> p_mean, p_max, p_flow; // stacked spatial planes
    std::vector<int> cmax_idx;                 // argmax channel per pixel
    std::vector<double> s;                     // conv output before sigmoid
    std::vector<double> a_s;
};

struct AttentionForward {
    std::vector<double> a_c;
    std::vector<double> a_s;
    FeatureMap refined;
    AttentionCache cache;
};

// Full pass: channel attention, channel refinement, spatial attention over
// the refined map, final reweighting.
AttentionForward attention_forward(const FeatureMap& x_rgb, const FeatureMap& x_flow,
                                   const FeatureMap& flow_mag, const AttentionParams& p);

struct AttentionGrads {
    ChannelAttentionParams channel;  // same shapes as the parameters
    SpatialAttentionParams spatial;
    FeatureMap d_rgb;
    FeatureMap d_flow;
};

// Reverse-mode gradients for every parameter and both feature-map inputs.
// The flow-magnitude guidance plane is treated as data (no gradient): its
// min-max normalization is not differentiable at the selected extremes.
AttentionGrads attention_backward(const AttentionForward& fwd, const FeatureMap& x_rgb,
                                  const FeatureMap& x_flow, const AttentionParams& p,
                                  const FeatureMap& grad_out);

// A_s rendered as an 8-bit PGM (values scaled by 255).
void write_attention_pgm(const std::filesystem::path& path,
                         const std::vector<double>& a_s, int height, int width);

}  // namespace floemd
