#include "floemd/emd.hpp"

#include "floemd/dataset.hpp"  // DataError

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>

namespace floemd {

namespace {

constexpr double kCauchyEps = 1e-12;  // per-element guard in the SD denominator

void validate_config(const SiftConfig& cfg) {
    if (cfg.n_modes < 1) throw std::invalid_argument("n_modes must be >= 1");
    if (!(cfg.sd_threshold > 0.0)) throw std::invalid_argument("sd_threshold must be > 0");
    if (cfg.max_sift_iters < 1) throw std::invalid_argument("max_sift_iters must be >= 1");
}

std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

Extrema find_extrema(const std::vector<double>& signal) {
    const int n = static_cast<int>(signal.size());
    if (n < 3) throw std::invalid_argument("extrema search needs at least 3 samples");
    Extrema out;
    int i = 0;
    while (i < n) {
        int j = i;
        while (j + 1 < n && signal[static_cast<std::size_t>(j + 1)] == signal[static_cast<std::size_t>(i)]) ++j;
        // Run [i..j] of equal values; interior runs flanked on both sides
        // qualify, collapsing to the floor of the midpoint.
        if (i > 0 && j < n - 1) {
            const double v = signal[static_cast<std::size_t>(i)];
            const double left = signal[static_cast<std::size_t>(i - 1)];
            const double right = signal[static_cast<std::size_t>(j + 1)];
            const int mid = (i + j) / 2;
            if (left < v && right < v) {
                out.max_idx.push_back(mid);
                out.max_val.push_back(v);
            } else if (left > v && right > v) {
                out.min_idx.push_back(mid);
                out.min_val.push_back(v);
            }
        }
        i = j + 1;
    }
    return out;
}

namespace {

// Natural cubic spline through strictly increasing knots, evaluated at the
// integers 0..length-1. Second derivatives from the classic tridiagonal
// system with natural end conditions.
std::vector<double> natural_spline_eval(const std::vector<double>& xs,
                                        const std::vector<double>& ys, int length) {
    const int n = static_cast<int>(xs.size());
    std::vector<double> m(static_cast<std::size_t>(n), 0.0);  // second derivatives
    if (n > 2) {
        std::vector<double> diag(static_cast<std::size_t>(n), 0.0);
        std::vector<double> rhs(static_cast<std::size_t>(n), 0.0);
        std::vector<double> sub(static_cast<std::size_t>(n), 0.0);
        std::vector<double> sup(static_cast<std::size_t>(n), 0.0);
        for (int i = 1; i < n - 1; ++i) {
            const double h0 = xs[static_cast<std::size_t>(i)] - xs[static_cast<std::size_t>(i - 1)];
            const double h1 = xs[static_cast<std::size_t>(i + 1)] - xs[static_cast<std::size_t>(i)];
            sub[static_cast<std::size_t>(i)] = h0;
            diag[static_cast<std::size_t>(i)] = 2.0 * (h0 + h1);
            sup[static_cast<std::size_t>(i)] = h1;
            rhs[static_cast<std::size_t>(i)] =
                6.0 * ((ys[static_cast<std::size_t>(i + 1)] - ys[static_cast<std::size_t>(i)]) / h1 -
                       (ys[static_cast<std::size_t>(i)] - ys[static_cast<std::size_t>(i - 1)]) / h0);
        }
        // Thomas algorithm on rows 1..n-2 (natural ends pin m[0] = m[n-1] = 0).
        for (int i = 2; i < n - 1; ++i) {
            const double f = sub[static_cast<std::size_t>(i)] / diag[static_cast<std::size_t>(i - 1)];
            diag[static_cast<std::size_t>(i)] -= f * sup[static_cast<std::size_t>(i - 1)];
            rhs[static_cast<std::size_t>(i)] -= f * rhs[static_cast<std::size_t>(i - 1)];
        }
        for (int i = n - 2; i >= 1; --i) {
            const double upper = (i + 1 <= n - 2) ? sup[static_cast<std::size_t>(i)] * m[static_cast<std::size_t>(i + 1)] : 0.0;
            m[static_cast<std::size_t>(i)] = (rhs[static_cast<std::size_t>(i)] - upper) / diag[static_cast<std::size_t>(i)];
        }
    }

    std::vector<double> out(static_cast<std::size_t>(length));
    int seg = 0;
    for (int t = 0; t < length; ++t) {
        const double x = static_cast<double>(t);
        while (seg + 2 < n && xs[static_cast<std::size_t>(seg + 1)] < x) ++seg;
        const double x0 = xs[static_cast<std::size_t>(seg)];
        const double x1 = xs[static_cast<std::size_t>(seg + 1)];
        const double h = x1 - x0;
        const double a = (x1 - x) / h;
        const double b = (x - x0) / h;
        out[static_cast<std::size_t>(t)] =
            a * ys[static_cast<std::size_t>(seg)] + b * ys[static_cast<std::size_t>(seg + 1)] +
            ((a * a * a - a) * m[static_cast<std::size_t>(seg)] +
             (b * b * b - b) * m[static_cast<std::size_t>(seg + 1)]) * (h * h) / 6.0;
    }
    return out;
}

}  // namespace

std::vector<double> cubic_envelope(const std::vector<int>& idx,
                                   const std::vector<double>& val, int length) {
    if (idx.size() != val.size()) throw std::invalid_argument("extrema index/value size mismatch");
    if (length < 2) throw std::invalid_argument("envelope needs length >= 2");
    const int m = static_cast<int>(idx.size());
    if (m < 2) return {};

    // Mirror extension: reflect the two extrema nearest each end about the
    // first and last sample. Reflections of an extremum sitting exactly on
    // an endpoint would land on itself and are skipped; the surviving knots
    // still bracket [0, length-1].
    const int last = length - 1;
    std::vector<double> xs, ys;
    xs.reserve(static_cast<std::size_t>(m) + 4);
    ys.reserve(static_cast<std::size_t>(m) + 4);
    for (int k = std::min(2, m) - 1; k >= 0; --k) {
        if (idx[static_cast<std::size_t>(k)] > 0) {
            xs.push_back(static_cast<double>(-idx[static_cast<std::size_t>(k)]));
            ys.push_back(val[static_cast<std::size_t>(k)]);
        }
    }
    for (int k = 0; k < m; ++k) {
        xs.push_back(static_cast<double>(idx[static_cast<std::size_t>(k)]));
        ys.push_back(val[static_cast<std::size_t>(k)]);
    }
    for (int k = m - 1; k >= std::max(0, m - 2); --k) {
        if (idx[static_cast<std::size_t>(k)] < last) {
            xs.push_back(static_cast<double>(2 * last - idx[static_cast<std::size_t>(k)]));
            ys.push_back(val[static_cast<std::size_t>(k)]);
        }
    }
    return natural_spline_eval(xs, ys, length);
}

SiftResult sift_one_imf(const std::vector<double>& signal, const SiftConfig& cfg) {
    validate_config(cfg);
    const int n = static_cast<int>(signal.size());
    if (n < 4) throw std::invalid_argument("sifting needs at least 4 samples");

    std::vector<double> h = signal;
    for (int iter = 1; iter <= cfg.max_sift_iters; ++iter) {
        const Extrema ex = find_extrema(h);
        if (ex.max_idx.size() < 2 || ex.min_idx.size() < 2) {
            if (iter == 1)
                return {std::vector<double>(static_cast<std::size_t>(n), 0.0), false, false};
            // Oscillation died mid-sift; the current candidate is still a
            // valid component to peel off.
            return {std::move(h), false, true};
        }
        const auto upper = cubic_envelope(ex.max_idx, ex.max_val, n);
        const auto lower = cubic_envelope(ex.min_idx, ex.min_val, n);

        double num = 0.0, den = 0.0;
        std::vector<double> next(static_cast<std::size_t>(n));
        for (int t = 0; t < n; ++t) {
            const double mean = 0.5 * (upper[static_cast<std::size_t>(t)] + lower[static_cast<std::size_t>(t)]);
            const double prev = h[static_cast<std::size_t>(t)];
            next[static_cast<std::size_t>(t)] = prev - mean;
            num += mean * mean;  // (h_prev - h_next)^2
            den += prev * prev + kCauchyEps;
        }
        h = std::move(next);
        if (num / den < cfg.sd_threshold) return {std::move(h), true, true};
    }
    return {std::move(h), false, true};
}

ImfDecomposition decompose(const std::vector<double>& signal, const SiftConfig& cfg) {
    validate_config(cfg);
    if (signal.size() < 4) throw std::invalid_argument("decomposition needs at least 4 samples");
    for (double v : signal) {
        if (!std::isfinite(v)) throw std::invalid_argument("decomposition input must be finite");
    }

    ImfDecomposition d;
    d.n_modes = cfg.n_modes;
    d.imfs.assign(static_cast<std::size_t>(cfg.n_modes),
                  std::vector<double>(signal.size(), 0.0));
    d.residual = signal;
    for (int j = 0; j < cfg.n_modes; ++j) {
        SiftResult r = sift_one_imf(d.residual, cfg);
        if (!r.extracted) break;
        for (std::size_t t = 0; t < signal.size(); ++t)
            d.residual[t] -= r.imf[t];
        d.imfs[static_cast<std::size_t>(j)] = std::move(r.imf);
        d.extracted_count = j + 1;
    }
    return d;
}

EmdFeatureVector featurize(const MotionTrace& trace, const SiftConfig& cfg) {
    validate_config(cfg);
    if (trace.length() < 4) throw std::invalid_argument("featurize needs trace length >= 4");
    const auto len = trace.length();
    for (const auto& s : trace.series) {
        if (s.size() != len) throw std::invalid_argument("trace series lengths differ");
    }

    EmdFeatureVector out;
    out.values.reserve(static_cast<std::size_t>(4 * cfg.n_modes * 2));
    for (const auto& series : trace.series) {
        const ImfDecomposition d = decompose(series, cfg);
        for (int j = 0; j < cfg.n_modes; ++j) {
            const auto& imf = d.imfs[static_cast<std::size_t>(j)];
            double mean = 0.0;
            for (double v : imf) mean += v;
            mean /= static_cast<double>(len);
            double sq = 0.0;
            for (double v : imf) {
                const double diff = v - mean;
                sq += diff * diff;
            }
            out.values.push_back(mean);
            out.values.push_back(std::sqrt(sq / static_cast<double>(len)));
        }
    }
    return out;
}

void write_imf_csv(const std::filesystem::path& path, const ImfDecomposition& d) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot create " + path.string());
    out << "t";
    for (int j = 1; j <= d.n_modes; ++j) out << ",imf" << j;
    out << ",residual\n";
    for (std::size_t t = 0; t < d.residual.size(); ++t) {
        out << t;
        for (const auto& imf : d.imfs) out << ',' << g17(imf[t]);
        out << ',' << g17(d.residual[t]) << '\n';
    }
    if (!out) throw DataError("short write to " + path.string());
}

}  // namespace floemd
