#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "floemd/attention.hpp"
#include "floemd/image.hpp"
#include "floemd/nn.hpp"  // relative_gap
#include "floemd/rng.hpp"

#include <cmath>
#include <filesystem>
#include <vector>

using namespace floemd;

namespace {

FeatureMap random_map(int c, int h, int w, Rng& rng, double lo = -1.0, double hi = 1.0) {
    FeatureMap m = make_map(c, h, w);
    for (auto& v : m.data) v = rng.uniform(lo, hi);
    return m;
}

struct Toy {
    FeatureMap rgb, flow, mag, coeff;
    AttentionParams params;
};

Toy make_toy(std::uint64_t seed) {
    Rng rng(seed);
    Toy t;
    t.rgb = random_map(4, 6, 5, rng);
    t.flow = random_map(2, 6, 5, rng);
    t.mag = random_map(1, 8, 7, rng, 0.0, 2.0);  // off-grid: exercises the resize
    t.params = init_attention(4, 2, 2, rng);
    t.coeff = random_map(4, 6, 5, rng);
    return t;
}

double toy_loss(const Toy& t) {
    const AttentionForward fwd = attention_forward(t.rgb, t.flow, t.mag, t.params);
    double loss = 0.0;
    for (std::size_t i = 0; i < fwd.refined.data.size(); ++i)
        loss += t.coeff.data[i] * fwd.refined.data[i];
    return loss;
}

void check_block(Toy& t, std::vector<double>& param, const std::vector<double>& analytic,
                 const char* what) {
    REQUIRE(param.size() == analytic.size());
    const double h = 1e-5;
    double worst = 0.0;
    for (std::size_t i = 0; i < param.size(); ++i) {
        const double keep = param[i];
        param[i] = keep + h;
        const double up = toy_loss(t);
        param[i] = keep - h;
        const double dn = toy_loss(t);
        param[i] = keep;
        worst = std::max(worst, relative_gap(analytic[i], (up - dn) / (2 * h)));
    }
    CAPTURE(what);
    CHECK(worst < 1e-4);
}

}  // namespace

TEST_CASE("init shapes follow the reduction rule") {
    Rng rng(1);
    const AttentionParams p = init_attention(8, 3, 4, rng);
    CHECK(p.channel.rgb_channels == 8);
    CHECK(p.channel.flow_channels == 3);
    CHECK(p.channel.hidden == 2);
    CHECK(p.channel.align.size() == 8u * 3u);
    CHECK(p.channel.w1.size() == 2u * 32u);
    CHECK(p.channel.b1.size() == 2u);
    CHECK(p.channel.w2.size() == 8u * 2u);
    CHECK(p.channel.b2.size() == 8u);
    CHECK(p.spatial.kernel.size() == 3u * 7u * 7u);

    const AttentionParams tiny = init_attention(2, 1, 16, rng);
    CHECK(tiny.channel.hidden == 1);  // floors at one unit
    CHECK_THROWS_AS(init_attention(0, 1, 4, rng), std::invalid_argument);
}

TEST_CASE("minmax normalization spans [0,1] and flattens constants") {
    const auto n = minmax_normalize({2.0, 4.0, 3.0, 6.0});
    CHECK(n[0] == 0.0);
    CHECK(n[1] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(n[2] == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(n[3] == 1.0);
    for (double v : minmax_normalize({3.3, 3.3, 3.3})) CHECK(v == 0.0);
    CHECK(minmax_normalize({}).empty());
}

TEST_CASE("attention weights stay inside the open unit interval") {
    Toy t = make_toy(7);
    const auto a_c = channel_attention(t.rgb, t.flow, t.params.channel);
    REQUIRE(a_c.size() == 4);
    for (double v : a_c) {
        CHECK(v > 0.0);
        CHECK(v < 1.0);
    }
    const AttentionForward fwd = attention_forward(t.rgb, t.flow, t.mag, t.params);
    REQUIRE(fwd.a_s.size() == 6u * 5u);
    for (double v : fwd.a_s) {
        CHECK(v > 0.0);
        CHECK(v < 1.0);
    }
}

TEST_CASE("reweighting applies channel then spatial factors") {
    Toy t = make_toy(11);
    const AttentionForward fwd = attention_forward(t.rgb, t.flow, t.mag, t.params);
    const FeatureMap manual = apply_attention(t.rgb, fwd.a_c, fwd.a_s);
    REQUIRE(manual.data.size() == fwd.refined.data.size());
    for (int c = 0; c < 4; ++c)
        for (int y = 0; y < 6; ++y)
            for (int x = 0; x < 5; ++x) {
                const double expect =
                    fwd.a_s[static_cast<std::size_t>(y) * 5 + x] * fwd.a_c[static_cast<std::size_t>(c)] *
                    t.rgb.at(c, y, x);
                CHECK(fwd.refined.at(c, y, x) == doctest::Approx(expect).epsilon(1e-15));
                CHECK(manual.at(c, y, x) == fwd.refined.at(c, y, x));
            }
}

TEST_CASE("forward cache mirrors the refinement pipeline") {
    Toy t = make_toy(13);
    const AttentionForward fwd = attention_forward(t.rgb, t.flow, t.mag, t.params);
    // xprime is the channel-refined map before spatial weighting.
    for (int c = 0; c < 4; ++c)
        for (int y = 0; y < 6; ++y)
            for (int x = 0; x < 5; ++x)
                CHECK(fwd.cache.xprime.at(c, y, x) ==
                      doctest::Approx(fwd.a_c[static_cast<std::size_t>(c)] * t.rgb.at(c, y, x))
                          .epsilon(1e-15));
    // Spatial planes: channel mean and channel max of xprime.
    for (int y = 0; y < 6; ++y)
        for (int x = 0; x < 5; ++x) {
            double mean = 0.0, mx = fwd.cache.xprime.at(0, y, x);
            for (int c = 0; c < 4; ++c) {
                mean += fwd.cache.xprime.at(c, y, x);
                mx = std::max(mx, fwd.cache.xprime.at(c, y, x));
            }
            mean /= 4.0;
            const std::size_t i = static_cast<std::size_t>(y) * 5 + x;
            CHECK(fwd.cache.p_mean[i] == doctest::Approx(mean).epsilon(1e-14));
            CHECK(fwd.cache.p_max[i] == doctest::Approx(mx).epsilon(1e-14));
        }
    // The guidance plane is min-max normalized.
    double lo = 1e300, hi = -1e300;
    for (double v : fwd.cache.p_flow) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    CHECK(lo == 0.0);
    CHECK(hi == 1.0);
}

TEST_CASE("analytic gradients match finite differences everywhere") {
    Toy t = make_toy(17);
    const AttentionForward fwd = attention_forward(t.rgb, t.flow, t.mag, t.params);
    const AttentionGrads g = attention_backward(fwd, t.rgb, t.flow, t.params, t.coeff);

    check_block(t, t.params.channel.align, g.channel.align, "align");
    check_block(t, t.params.channel.w1, g.channel.w1, "w1");
    check_block(t, t.params.channel.b1, g.channel.b1, "b1");
    check_block(t, t.params.channel.w2, g.channel.w2, "w2");
    check_block(t, t.params.channel.b2, g.channel.b2, "b2");
    check_block(t, t.params.spatial.kernel, g.spatial.kernel, "kernel");
    {
        const double h = 1e-5;
        const double keep = t.params.spatial.bias;
        t.params.spatial.bias = keep + h;
        const double up = toy_loss(t);
        t.params.spatial.bias = keep - h;
        const double dn = toy_loss(t);
        t.params.spatial.bias = keep;
        CHECK(relative_gap(g.spatial.bias, (up - dn) / (2 * h)) < 1e-4);
    }
    check_block(t, t.rgb.data, g.d_rgb.data, "input rgb");
    check_block(t, t.flow.data, g.d_flow.data, "input flow");
}

TEST_CASE("gradients flow when the guidance plane needs no resize") {
    Toy t = make_toy(19);
    Rng rng(20);
    t.mag = random_map(1, 6, 5, rng, 0.0, 2.0);  // already on the map grid
    const AttentionForward fwd = attention_forward(t.rgb, t.flow, t.mag, t.params);
    const AttentionGrads g = attention_backward(fwd, t.rgb, t.flow, t.params, t.coeff);
    check_block(t, t.params.spatial.kernel, g.spatial.kernel, "kernel-noresize");
    check_block(t, t.rgb.data, g.d_rgb.data, "rgb-noresize");
}

TEST_CASE("shape validation rejects inconsistent inputs") {
    Toy t = make_toy(23);
    Rng rng(24);
    const FeatureMap wrong_space = random_map(2, 5, 5, rng);
    CHECK_THROWS_AS(channel_attention(t.rgb, wrong_space, t.params.channel),
                    std::invalid_argument);
    const FeatureMap wrong_channels = random_map(3, 6, 5, rng);
    CHECK_THROWS_AS(channel_attention(t.rgb, wrong_channels, t.params.channel),
                    std::invalid_argument);
    const FeatureMap two_plane_mag = random_map(2, 6, 5, rng);
    CHECK_THROWS_AS(spatial_attention(t.rgb, two_plane_mag, t.params.spatial),
                    std::invalid_argument);
    SpatialAttentionParams bad_kernel;
    bad_kernel.kernel.assign(10, 0.0);
    CHECK_THROWS_AS(spatial_attention(t.rgb, t.mag, bad_kernel), std::invalid_argument);
    CHECK_THROWS_AS(apply_attention(t.rgb, {0.5, 0.5}, std::vector<double>(30, 0.5)),
                    std::invalid_argument);
    CHECK_THROWS_AS(make_map(0, 3, 3), std::invalid_argument);
}

TEST_CASE("spatial attention map serializes as an 8-bit PGM") {
    Toy t = make_toy(29);
    const AttentionForward fwd = attention_forward(t.rgb, t.flow, t.mag, t.params);
    const auto path = std::filesystem::temp_directory_path() / "floemd_test_as.pgm";
    write_attention_pgm(path, fwd.a_s, 6, 5);
    const GrayFrame img = read_pgm(path);
    CHECK(img.width == 5);
    CHECK(img.height == 6);
    for (std::size_t i = 0; i < fwd.a_s.size(); ++i)
        CHECK(std::abs(img.data[i] - fwd.a_s[i]) <= 0.5 / 255.0 + 1e-12);
    std::filesystem::remove(path);
}
