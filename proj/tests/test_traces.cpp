#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "floemd/dataset.hpp"
#include "floemd/rng.hpp"
#include "floemd/trace.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

using namespace floemd;

namespace {

FlowField known_field() {
    FlowField f;
    f.width = 3;
    f.height = 3;
    f.u = {0.5, -1, 0, 2, 0, 0.3, -0.7, 1.2, 0};
    f.v = {1, 0, 0, -0.5, 0, 0.4, 0.2, -2, 0};
    return f;
}

FlowField random_field(Rng& rng, int w, int h) {
    FlowField f;
    f.width = w;
    f.height = h;
    const std::size_t n = static_cast<std::size_t>(w) * h;
    f.u.resize(n);
    f.v.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        f.u[i] = rng.uniform(-3.0, 3.0);
        f.v[i] = rng.uniform(-3.0, 3.0);
        if (rng.uniform() < 0.2) f.u[i] = f.v[i] = 0.0;  // still pixels
    }
    return f;
}

void two_pass(const std::vector<double>& xs, double& mean, double& sd) {
    mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double sq = 0.0;
    for (double x : xs) sq += (x - mean) * (x - mean);
    sd = std::sqrt(sq / static_cast<double>(xs.size()));
}

}  // namespace

TEST_CASE("descriptors match an independently computed reference") {
    const FrameDescriptors d = frame_descriptors(known_field());
    CHECK(d.mu_m == doctest::Approx(0.85999761649165529).epsilon(1e-13));
    CHECK(d.sigma_m == doctest::Approx(0.8208151027862518).epsilon(1e-13));
    CHECK(d.mu_d == doctest::Approx(0.7515526771465556).epsilon(1e-13));
    CHECK(d.sigma_d == doctest::Approx(1.3413059138126533).epsilon(1e-13));
}

TEST_CASE("descriptors agree with a naive two-pass recount on random fields") {
    Rng rng(91);
    for (int trial = 0; trial < 20; ++trial) {
        const FlowField f = random_field(rng, 12, 9);
        const FrameDescriptors d = frame_descriptors(f);
        const auto m = magnitude(f);
        const auto dir = direction(f);
        double mu = 0.0, sd = 0.0;
        two_pass(m, mu, sd);
        CHECK(std::abs(d.mu_m - mu) <= 1e-12 * std::max(1.0, std::abs(mu)));
        CHECK(std::abs(d.sigma_m - sd) <= 1e-12 * std::max(1.0, std::abs(sd)));
        two_pass(dir, mu, sd);
        CHECK(std::abs(d.mu_d - mu) <= 1e-12 * std::max(1.0, std::abs(mu)));
        CHECK(std::abs(d.sigma_d - sd) <= 1e-12 * std::max(1.0, std::abs(sd)));
    }
}

TEST_CASE("an all-zero field has zero descriptors") {
    FlowField f;
    f.width = 4;
    f.height = 4;
    f.u.assign(16, 0.0);
    f.v.assign(16, 0.0);
    const FrameDescriptors d = frame_descriptors(f);
    CHECK(d.mu_m == 0.0);
    CHECK(d.sigma_m == 0.0);
    CHECK(d.mu_d == 0.0);
    CHECK(d.sigma_d == 0.0);
}

TEST_CASE("descriptor input validation") {
    FlowField empty;
    CHECK_THROWS_AS(frame_descriptors(empty), std::invalid_argument);
    FlowField ragged = known_field();
    ragged.v.pop_back();
    CHECK_THROWS_AS(frame_descriptors(ragged), std::invalid_argument);
}

TEST_CASE("trace stacks per-field descriptors in series order") {
    Rng rng(17);
    std::vector<FlowField> flows;
    for (int t = 0; t < 5; ++t) flows.push_back(random_field(rng, 8, 6));
    const MotionTrace trace = build_trace(flows);
    REQUIRE(trace.length() == 5);
    for (int t = 0; t < 5; ++t) {
        const FrameDescriptors d = frame_descriptors(flows[static_cast<std::size_t>(t)]);
        CHECK(trace.series[0][static_cast<std::size_t>(t)] == d.mu_m);
        CHECK(trace.series[1][static_cast<std::size_t>(t)] == d.sigma_m);
        CHECK(trace.series[2][static_cast<std::size_t>(t)] == d.mu_d);
        CHECK(trace.series[3][static_cast<std::size_t>(t)] == d.sigma_d);
    }
}

TEST_CASE("trace needs two fields of matching size") {
    Rng rng(19);
    CHECK_THROWS_AS(build_trace({random_field(rng, 8, 6)}), std::invalid_argument);
    std::vector<FlowField> mixed = {random_field(rng, 8, 6), random_field(rng, 6, 8)};
    CHECK_THROWS_AS(build_trace(mixed), std::invalid_argument);
}

TEST_CASE("trace CSV round-trips every value bit-exactly") {
    Rng rng(29);
    std::vector<FlowField> flows;
    for (int t = 0; t < 6; ++t) flows.push_back(random_field(rng, 7, 7));
    const MotionTrace trace = build_trace(flows);
    const auto path = std::filesystem::temp_directory_path() / "floemd_test_trace.csv";
    write_trace_csv(path, trace);
    const MotionTrace back = read_trace_csv(path);
    REQUIRE(back.length() == trace.length());
    for (int s = 0; s < 4; ++s)
        for (std::size_t t = 0; t < trace.length(); ++t)
            CHECK(back.series[static_cast<std::size_t>(s)][t] ==
                  trace.series[static_cast<std::size_t>(s)][t]);
    std::filesystem::remove(path);
}

TEST_CASE("trace CSV reader rejects malformed files") {
    const auto dir = std::filesystem::temp_directory_path();
    const auto bad_header = dir / "floemd_test_badheader.csv";
    {
        std::ofstream out(bad_header);
        out << "time,a,b,c,d\n0,1,2,3,4\n1,1,2,3,4\n";
    }
    CHECK_THROWS_AS(read_trace_csv(bad_header), DataError);

    const auto short_row = dir / "floemd_test_shortrow.csv";
    {
        std::ofstream out(short_row);
        out << "frame,mu_m,sigma_m,mu_d,sigma_d\n0,1,2,3\n1,1,2,3,4\n";
    }
    CHECK_THROWS_AS(read_trace_csv(short_row), DataError);

    const auto bad_value = dir / "floemd_test_badvalue.csv";
    {
        std::ofstream out(bad_value);
        out << "frame,mu_m,sigma_m,mu_d,sigma_d\n0,1,x,3,4\n1,1,2,3,4\n";
    }
    CHECK_THROWS_AS(read_trace_csv(bad_value), DataError);

    const auto too_short = dir / "floemd_test_tooshort.csv";
    {
        std::ofstream out(too_short);
        out << "frame,mu_m,sigma_m,mu_d,sigma_d\n0,1,2,3,4\n";
    }
    CHECK_THROWS_AS(read_trace_csv(too_short), DataError);

    CHECK_THROWS_AS(read_trace_csv(dir / "floemd_missing_trace.csv"), DataError);
    for (const auto& p : {bad_header, short_row, bad_value, too_short})
        std::filesystem::remove(p);
}
