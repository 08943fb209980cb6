#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "floemd/emd.hpp"
#include "floemd/rng.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

using namespace floemd;

namespace {

constexpr double kTau = 6.283185307179586476925286766559;

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= static_cast<double>(a.size());
    mb /= static_cast<double>(b.size());
    double num = 0.0, da = 0.0, db = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += (a[i] - ma) * (b[i] - mb);
        da += (a[i] - ma) * (a[i] - ma);
        db += (b[i] - mb) * (b[i] - mb);
    }
    return num / std::sqrt(da * db + 1e-300);
}

std::vector<double> tone(int n, double cycles, double phase, double amp = 1.0) {
    std::vector<double> s(static_cast<std::size_t>(n));
    for (int t = 0; t < n; ++t)
        s[static_cast<std::size_t>(t)] = amp * std::sin(kTau * cycles * t / n + phase);
    return s;
}

std::vector<double> add(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> s(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) s[i] = a[i] + b[i];
    return s;
}

}  // namespace

TEST_CASE("extrema: interior peaks and valleys") {
    const Extrema ex = find_extrema({0, 2, 1, 3, 3, 3, 1, 0});
    REQUIRE(ex.max_idx.size() == 2);
    CHECK(ex.max_idx[0] == 1);
    CHECK(ex.max_val[0] == 2.0);
    CHECK(ex.max_idx[1] == 4);  // plateau 3..5 collapses to its midpoint
    CHECK(ex.max_val[1] == 3.0);
    REQUIRE(ex.min_idx.size() == 1);
    CHECK(ex.min_idx[0] == 2);
}

TEST_CASE("extrema: monotone and constant signals have none") {
    const Extrema ramp = find_extrema({0, 1, 2, 3});
    CHECK(ramp.max_idx.empty());
    CHECK(ramp.min_idx.empty());
    const Extrema flat = find_extrema({5, 5, 5, 5, 5});
    CHECK(flat.max_idx.empty());
    CHECK(flat.min_idx.empty());
}

TEST_CASE("extrema: boundary plateaus are not extrema") {
    const Extrema ex = find_extrema({2, 2, 1, 3});
    CHECK(ex.max_idx.empty());  // {2,2} touches the start, 3 is the endpoint
    REQUIRE(ex.min_idx.size() == 1);
    CHECK(ex.min_idx[0] == 2);
}

TEST_CASE("extrema: minimal valley signal") {
    const Extrema ex = find_extrema({1, 0, 1});
    CHECK(ex.max_idx.empty());
    REQUIRE(ex.min_idx.size() == 1);
    CHECK(ex.min_idx[0] == 1);
    CHECK(ex.min_val[0] == 0.0);
}

TEST_CASE("extrema: too-short input throws") {
    CHECK_THROWS_AS(find_extrema({1, 2}), std::invalid_argument);
}

TEST_CASE("envelope: natural spline through mirrored knots matches reference") {
    // Independent natural-spline solve over the mirrored knot set
    // x = {-5,-2,2,5,9,12,16,19}, y = {-1,1,1,-1,2,-0.5,-0.5,2}.
    const std::vector<int> idx = {2, 5, 9, 12};
    const std::vector<double> val = {1.0, -1.0, 2.0, -0.5};
    const std::vector<double> env = cubic_envelope(idx, val, 15);
    REQUIRE(env.size() == 15);
    CHECK(env[0] == doctest::Approx(1.6135558456088011).epsilon(1e-9));
    CHECK(env[3] == doctest::Approx(0.1373574768130055).epsilon(1e-9));
    CHECK(env[7] == doctest::Approx(0.56743737957610796).epsilon(1e-9));
    CHECK(env[11] == doctest::Approx(0.51967527848564565).epsilon(1e-9));
    CHECK(env[14] == doctest::Approx(-1.2359065199825969).epsilon(1e-9));
    // The spline interpolates its knots.
    CHECK(env[2] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(env[9] == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("envelope: fewer than two extrema yields an empty result") {
    CHECK(cubic_envelope({5}, {1.0}, 10).empty());
    CHECK(cubic_envelope({}, {}, 10).empty());
}

TEST_CASE("sift: a linear ramp has nothing to extract") {
    std::vector<double> ramp(16);
    for (int t = 0; t < 16; ++t) ramp[static_cast<std::size_t>(t)] = 0.5 * t;
    const SiftResult r = sift_one_imf(ramp, SiftConfig{});
    CHECK_FALSE(r.extracted);
    CHECK_FALSE(r.converged);
    for (double v : r.imf) CHECK(v == 0.0);
}

TEST_CASE("sift: recovers a pure sampled sinusoid") {
    const auto sig = tone(64, 3.0, 0.0);
    const SiftResult r = sift_one_imf(sig, SiftConfig{});
    REQUIRE(r.extracted);
    CHECK(pearson(r.imf, sig) > 0.99);
    double worst = 0.0;
    for (std::size_t t = 0; t < sig.size(); ++t)
        worst = std::max(worst, std::abs(sig[t] - r.imf[t]));
    CHECK(worst < 0.05);  // residual of a unit-amplitude tone stays tiny
}

TEST_CASE("sift: first mode of a two-tone mix is the fast tone") {
    const auto fast = tone(64, 8.0, 0.0);
    const auto slow = tone(64, 1.0, 0.0);
    const SiftResult r = sift_one_imf(add(fast, slow), SiftConfig{});
    REQUIRE(r.extracted);
    CHECK(pearson(r.imf, fast) > 0.95);
}

TEST_CASE("sift: too-short input throws") {
    CHECK_THROWS_AS(sift_one_imf({1, 2, 3}, SiftConfig{}), std::invalid_argument);
}

TEST_CASE("decompose: constant signal extracts nothing") {
    const std::vector<double> sig(32, 3.25);
    const ImfDecomposition d = decompose(sig, SiftConfig{});
    CHECK(d.extracted_count == 0);
    for (const auto& imf : d.imfs)
        for (double v : imf) CHECK(v == 0.0);
    for (double v : d.residual) CHECK(v == 3.25);
}

TEST_CASE("decompose: modes and residual always reassemble the input") {
    Rng rng(41);
    for (int trial = 0; trial < 50; ++trial) {
        const int len = static_cast<int>(rng.uniform_int(8, 200));
        std::vector<double> sig(static_cast<std::size_t>(len));
        const double c1 = rng.uniform(2.0, 8.0), c2 = rng.uniform(0.5, 2.0);
        for (int t = 0; t < len; ++t)
            sig[static_cast<std::size_t>(t)] = std::sin(kTau * c1 * t / len) +
                                               0.7 * std::cos(kTau * c2 * t / len) +
                                               0.3 * rng.normal();
        const ImfDecomposition d = decompose(sig, SiftConfig{});
        for (int t = 0; t < len; ++t) {
            double rec = d.residual[static_cast<std::size_t>(t)];
            for (const auto& imf : d.imfs) rec += imf[static_cast<std::size_t>(t)];
            CHECK(std::abs(rec - sig[static_cast<std::size_t>(t)]) < 1e-9);
        }
    }
}

TEST_CASE("decompose: separates two resolvable tones") {
    const auto fast = tone(64, 10.0, 0.3);
    const auto slow = tone(64, 2.8, 1.1);
    const ImfDecomposition d = decompose(add(fast, slow), SiftConfig{});
    REQUIRE(d.extracted_count >= 2);
    CHECK(pearson(d.imfs[0], fast) > 0.95);
    CHECK(pearson(d.imfs[1], slow) > 0.9);
}

TEST_CASE("decompose: a slow tone without enough extrema stays in the residual") {
    // One cycle per window leaves the post-mode-1 residual with only two
    // extrema, so extraction stops after the fast mode.
    const auto fast = tone(64, 8.0, 0.0);
    const auto slow = tone(64, 1.0, 0.0);
    const auto sig = add(fast, slow);
    const ImfDecomposition d = decompose(sig, SiftConfig{});
    CHECK(d.extracted_count == 1);
    CHECK(pearson(d.imfs[0], fast) > 0.95);
    CHECK(pearson(d.residual, slow) > 0.95);
}

TEST_CASE("decompose: unused modes are zero-padded") {
    SiftConfig cfg;
    cfg.n_modes = 6;
    const ImfDecomposition d = decompose(tone(64, 3.0, 0.0), cfg);
    REQUIRE(d.imfs.size() == 6);
    REQUIRE(d.extracted_count < 6);
    for (std::size_t j = static_cast<std::size_t>(d.extracted_count); j < 6; ++j)
        for (double v : d.imfs[j]) CHECK(v == 0.0);
}

TEST_CASE("decompose: rejects bad input and bad config") {
    CHECK_THROWS_AS(decompose({1, 2, 3}, SiftConfig{}), std::invalid_argument);
    std::vector<double> bad = {1, 2, 3, std::nan("")};
    CHECK_THROWS_AS(decompose(bad, SiftConfig{}), std::invalid_argument);
    SiftConfig zero_modes;
    zero_modes.n_modes = 0;
    CHECK_THROWS_AS(decompose(tone(16, 2, 0), zero_modes), std::invalid_argument);
    SiftConfig bad_sd;
    bad_sd.sd_threshold = 0.0;
    CHECK_THROWS_AS(decompose(tone(16, 2, 0), bad_sd), std::invalid_argument);
    SiftConfig bad_iters;
    bad_iters.max_sift_iters = 0;
    CHECK_THROWS_AS(decompose(tone(16, 2, 0), bad_iters), std::invalid_argument);
}

TEST_CASE("featurize: series-major layout of per-mode mean and std") {
    MotionTrace trace;
    Rng rng(7);
    for (auto& s : trace.series) {
        s.resize(20);
        for (auto& v : s) v = rng.uniform(-1.0, 1.0);
    }
    SiftConfig cfg;
    cfg.n_modes = 3;
    const EmdFeatureVector fv = featurize(trace, cfg);
    REQUIRE(fv.values.size() == 4u * 3u * 2u);

    for (int s = 0; s < 4; ++s) {
        const ImfDecomposition d = decompose(trace.series[static_cast<std::size_t>(s)], cfg);
        for (int j = 0; j < 3; ++j) {
            const auto& imf = d.imfs[static_cast<std::size_t>(j)];
            double mean = 0.0;
            for (double v : imf) mean += v;
            mean /= static_cast<double>(imf.size());
            double sq = 0.0;
            for (double v : imf) sq += (v - mean) * (v - mean);
            const double sd = std::sqrt(sq / static_cast<double>(imf.size()));
            const std::size_t base = static_cast<std::size_t>((s * 3 + j) * 2);
            CHECK(fv.values[base] == doctest::Approx(mean).epsilon(1e-12));
            CHECK(fv.values[base + 1] == doctest::Approx(sd).epsilon(1e-12));
        }
    }
}

TEST_CASE("featurize: rejects short or ragged traces") {
    MotionTrace trace;
    for (auto& s : trace.series) s = {1.0, 2.0, 1.5};
    CHECK_THROWS_AS(featurize(trace, SiftConfig{}), std::invalid_argument);
    for (auto& s : trace.series) s = {1.0, 2.0, 1.5, 0.5};
    trace.series[3].push_back(0.0);
    CHECK_THROWS_AS(featurize(trace, SiftConfig{}), std::invalid_argument);
}

TEST_CASE("mode CSV dump carries every mode and the residual") {
    SiftConfig cfg;
    cfg.n_modes = 3;
    const ImfDecomposition d = decompose(tone(16, 3.0, 0.4), cfg);
    const auto path = std::filesystem::temp_directory_path() / "floemd_test_imfs.csv";
    write_imf_csv(path, d);
    std::ifstream in(path);
    REQUIRE(in.good());
    std::string header;
    std::getline(in, header);
    CHECK(header == "t,imf1,imf2,imf3,residual");
    int rows = 0;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 16);
    std::filesystem::remove(path);
}
