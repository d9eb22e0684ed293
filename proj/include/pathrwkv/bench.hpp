#pragma once

// Scaling measurements: recurrent inference wall time and peak activation
// footprint versus slide length, against a naive quadratic softmax-attention
// aggregator run on the same feature streams. Slopes come from a log-log
// least-squares fit.

#include "pathrwkv/aggregate.hpp"

namespace prwk {

// Deterministic feature stream: bag b of a synthetic slide is generated on
// demand, so the full slide never becomes resident.
inline BagSource synthetic_stream(std::size_t n_tiles, std::size_t bag_size,
                                  std::size_t d_in, std::uint64_t seed) {
    auto next = std::make_shared<std::size_t>(0);
    return [n_tiles, bag_size, d_in, seed, next]() -> std::optional<BagBatch> {
        if (*next >= n_tiles) return std::nullopt;
        const std::size_t lo = *next;
        const std::size_t hi = std::min(n_tiles, lo + bag_size);
        *next = hi;
        Rng rng(mix_seed(seed, 0xBA6 + lo));
        BagBatch out;
        out.n = hi - lo;
        out.features.resize(out.n * d_in);
        for (auto& f : out.features) f = static_cast<float>(gaussian(rng) * 0.5);
        out.coords.resize(out.n);
        for (std::size_t i = 0; i < out.n; ++i) {
            const std::size_t t = lo + i;
            out.coords[i] = {static_cast<std::int32_t>(t % 256),
                             static_cast<std::int32_t>(t / 256)};
        }
        return out;
    };
}

// Naive O(N^2 d) single-head softmax attention pooled to one output row;
// row-streamed so memory stays O(N d). Benchmark reference only.
inline double quadratic_attention_reference(std::size_t n_tiles, std::size_t d,
                                            std::uint64_t seed) {
    std::vector<float> x(n_tiles * d);
    Rng rng(mix_seed(seed, 0x40AD));
    for (auto& v : x) v = static_cast<float>(gaussian(rng) * 0.5);
    std::vector<float> out(d, 0.0f);
    std::vector<float> row(d);
    double sink = 0;
    const float inv_sqrt_d = 1.0f / std::sqrt(static_cast<float>(d));
    for (std::size_t i = 0; i < n_tiles; ++i) {
        const float* qi = x.data() + i * d;
        float mx = -1e30f;
        // two passes: max for stability, then weighted sum
        std::vector<float> scores(n_tiles);
        for (std::size_t j = 0; j < n_tiles; ++j) {
            const float* kj = x.data() + j * d;
            float s = 0;
            for (std::size_t c = 0; c < d; ++c) s += qi[c] * kj[c];
            scores[j] = s * inv_sqrt_d;
            mx = std::max(mx, scores[j]);
        }
        float z = 0;
        std::fill(row.begin(), row.end(), 0.0f);
        for (std::size_t j = 0; j < n_tiles; ++j) {
            const float w = std::exp(scores[j] - mx);
            z += w;
            const float* vj = x.data() + j * d;
            for (std::size_t c = 0; c < d; ++c) row[c] += w * vj[c];
        }
        for (std::size_t c = 0; c < d; ++c) out[c] += row[c] / z;
        sink += out[0];
    }
    return sink;  // defeat dead-code elimination
}

struct BenchRow {
    std::size_t n_tiles = 0;
    double recurrent_seconds = 0;
    double quadratic_seconds = 0;
    long long peak_bytes = 0;
};

struct BenchReport {
    std::vector<BenchRow> rows;
    std::size_t bag_size = 0;
    double slope_recurrent = 0;
    double slope_quadratic = 0;
    double mem_spread = 0;  // (max - min) / min of peak bytes across the grid
};

namespace detail {

inline double loglog_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
    const std::size_t k = xs.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < k; ++i) {
        const double lx = std::log10(xs[i]);
        const double ly = std::log10(std::max(ys[i], 1e-12));
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (sxy - sx * sy / static_cast<double>(k)) /
           (sxx - sx * sx / static_cast<double>(k));
}

}  // namespace detail

inline BenchReport bench_scaling(const ModelConfig& cfg_in,
                                 const std::vector<std::size_t>& n_grid,
                                 std::size_t bag_size, std::size_t d_ref,
                                 std::uint64_t seed, int reps = 3) {
    if (n_grid.size() < 2) throw ConfigError("bench needs at least two slide lengths");
    ModelConfig cfg = cfg_in;
    cfg.validate();
    PathRwkv<float> model(cfg, seed);

    BenchReport report;
    report.bag_size = bag_size;
    for (std::size_t n : n_grid) {
        BenchRow row;
        row.n_tiles = n;
        double best = 1e300;
        for (int r = 0; r < reps; ++r) {
            InferStats<float> stats;
            Stopwatch w;
            (void)infer_slide_outputs(model, synthetic_stream(n, bag_size, cfg.d_in, seed),
                                      &stats);
            best = std::min(best, w.seconds());
            row.peak_bytes = stats.peak_live_bytes;
        }
        row.recurrent_seconds = best;

        best = 1e300;
        volatile double sink = 0;
        for (int r = 0; r < std::max(1, reps - 1); ++r) {
            Stopwatch w;
            sink = quadratic_attention_reference(n, d_ref, seed);
            best = std::min(best, w.seconds());
        }
        (void)sink;
        row.quadratic_seconds = best;
        report.rows.push_back(row);
    }

    std::vector<double> ns, rt, qt;
    long long mn = report.rows.front().peak_bytes, mx = mn;
    for (const auto& r : report.rows) {
        ns.push_back(static_cast<double>(r.n_tiles));
        rt.push_back(r.recurrent_seconds);
        qt.push_back(r.quadratic_seconds);
        mn = std::min(mn, r.peak_bytes);
        mx = std::max(mx, r.peak_bytes);
    }
    report.slope_recurrent = detail::loglog_slope(ns, rt);
    report.slope_quadratic = detail::loglog_slope(ns, qt);
    report.mem_spread = static_cast<double>(mx - mn) / static_cast<double>(std::max(mn, 1ll));
    return report;
}

}  // namespace prwk
