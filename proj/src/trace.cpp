#include "floemd/trace.hpp"

#include "floemd/dataset.hpp"  // DataError

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace floemd {

namespace {

// Two-pass moments: the mean first, then centered squares. Avoids the
// cancellation of the sum-of-squares shortcut for near-constant fields.
void mean_std(const std::vector<double>& xs, double& mean, double& sd) {
    double sum = 0.0;
    for (double x : xs) sum += x;
    mean = sum / static_cast<double>(xs.size());
    double sq = 0.0;
    for (double x : xs) {
        const double d = x - mean;
        sq += d * d;
    }
    sd = std::sqrt(sq / static_cast<double>(xs.size()));
}

std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

FrameDescriptors frame_descriptors(const FlowField& flow) {
    if (flow.u.empty() || flow.u.size() != flow.v.size())
        throw std::invalid_argument("flow field is empty or malformed");
    const auto m = magnitude(flow);
    const auto d = direction(flow);
    FrameDescriptors out;
    mean_std(m, out.mu_m, out.sigma_m);
    mean_std(d, out.mu_d, out.sigma_d);
    return out;
}

MotionTrace build_trace(const std::vector<FlowField>& flows) {
    if (flows.size() < 2) throw std::invalid_argument("trace needs at least 2 flow fields");
    const int w = flows.front().width, h = flows.front().height;
    MotionTrace trace;
    for (auto& s : trace.series) s.reserve(flows.size());
    for (const auto& f : flows) {
        if (f.width != w || f.height != h)
            throw std::invalid_argument("flow fields in one clip must share dimensions");
        const FrameDescriptors d = frame_descriptors(f);
        trace.series[0].push_back(d.mu_m);
        trace.series[1].push_back(d.sigma_m);
        trace.series[2].push_back(d.mu_d);
        trace.series[3].push_back(d.sigma_d);
    }
    return trace;
}

void write_trace_csv(const std::filesystem::path& path, const MotionTrace& trace) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot create " + path.string());
    out << "frame,mu_m,sigma_m,mu_d,sigma_d\n";
    for (std::size_t t = 0; t < trace.length(); ++t) {
        out << t;
        for (const auto& s : trace.series) out << ',' << g17(s[t]);
        out << '\n';
    }
    if (!out) throw DataError("short write to " + path.string());
}

MotionTrace read_trace_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line.rfind("frame,", 0) != 0)
        throw DataError("missing trace header in " + path.string());
    MotionTrace trace;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string field;
        if (!std::getline(ss, field, ',')) throw DataError("bad trace row in " + path.string());
        for (auto& s : trace.series) {
            if (!std::getline(ss, field, ','))
                throw DataError("short trace row in " + path.string());
            try {
                s.push_back(std::stod(field));
            } catch (const std::exception&) {
                throw DataError("bad trace value '" + field + "' in " + path.string());
            }
        }
        ++rows;
    }
    if (rows < 2) throw DataError("trace too short in " + path.string());
    return trace;
}

}  // namespace floemd
