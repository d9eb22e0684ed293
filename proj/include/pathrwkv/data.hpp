#pragma once

// Desk-scale stand-in for the WSI front end: synthetic tile images on a
// grid, coverage/variance filtering, a deterministic stub embedder in place
// of a foundation encoder, sinusoidal grid positional embeddings, and the
// random / Z-order tile samplers.

#include <cstdint>

#include "pathrwkv/mtl.hpp"
#include "pathrwkv/tensor.hpp"

namespace prwk {

struct GridCoord {
    std::int32_t x = 0;
    std::int32_t y = 0;
    bool operator==(const GridCoord&) const = default;
};

// One slide's embedded tiles: N x d_in features plus grid coordinates.
struct TileBag {
    std::string slide_id;
    std::size_t n = 0;
    std::size_t d_in = 0;
    std::vector<float> features;  // row-major n x d_in
    std::vector<GridCoord> coords;

    const float* row(std::size_t i) const { return features.data() + i * d_in; }
};

struct TileImage {
    std::size_t px = 16;               // side length
    std::vector<float> pixels;         // px*px grayscale in [0,1]
};

// ---------------------------------------------------------------------------
// Synthetic slide generation
// ---------------------------------------------------------------------------

struct SyntheticSlideSpec {
    std::size_t grid_w = 20;
    std::size_t grid_h = 20;
    std::size_t tile_px = 16;
    double witness_rate = 0.05;  // i.i.d. per-tile probability
    double noise_sigma = 0.002;  // label noise on the fraction task
    double blank_rate = 0.03;    // degenerate tiles the filters should drop
    std::uint64_t seed = 0;
};

struct SlideSample {
    std::vector<TileImage> tiles;
    std::vector<GridCoord> coords;
    std::vector<std::uint8_t> witness;  // per-tile flag
    LabelSet labels;
};

// Synthetic task names; "extent" is undefined (missing) on witness-free slides.
inline const std::vector<TaskSpec>& synthetic_tasks() {
    static const std::vector<TaskSpec> tasks = {
        {"witness", TaskKind::classification, 2},
        {"grade", TaskKind::classification, 4},
        {"fraction", TaskKind::regression, 1},
        {"extent", TaskKind::regression, 1},
    };
    return tasks;
}

inline int witness_grade_bucket(std::size_t count) {
    if (count == 0) return 0;
    if (count <= 4) return 1;
    if (count <= 12) return 2;
    return 3;
}

inline SlideSample generate_slide(const SyntheticSlideSpec& spec) {
    if (spec.grid_w * spec.grid_h == 0) throw ConfigError("generate_slide: empty grid");
    Rng rng(spec.seed);
    const std::size_t p = spec.tile_px;
    SlideSample out;
    out.tiles.reserve(spec.grid_w * spec.grid_h);

    auto clamp01 = [](double v) {
        return static_cast<float>(v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v));
    };

    std::size_t witness_count = 0;
    double cx = 0, cy = 0;
    for (std::size_t gy = 0; gy < spec.grid_h; ++gy) {
        for (std::size_t gx = 0; gx < spec.grid_w; ++gx) {
            TileImage img;
            img.px = p;
            img.pixels.resize(p * p);
            const bool is_witness = uniform01(rng) < spec.witness_rate;
            // 0 = tissue, 1 = glass (low coverage), 2 = flat (low variance)
            int kind = 0;
            if (!is_witness && uniform01(rng) < spec.blank_rate)
                kind = uniform01(rng) < 0.5 ? 1 : 2;
            for (std::size_t iy = 0; iy < p; ++iy) {
                for (std::size_t ix = 0; ix < p; ++ix) {
                    double v;
                    if (is_witness) {
                        // fixed checkerboard signature + light noise
                        const bool on = ((ix / 4) + (iy / 4)) % 2 == 0;
                        v = (on ? 0.85 : 0.20) + 0.05 * gaussian(rng);
                    } else if (kind == 1) {
                        v = 0.06 + 0.02 * std::abs(gaussian(rng));
                    } else if (kind == 2) {
                        v = 0.50 + 0.015 * gaussian(rng);
                    } else {
                        v = 0.45 + 0.18 * gaussian(rng);
                    }
                    img.pixels[iy * p + ix] = clamp01(v);
                }
            }
            out.tiles.push_back(std::move(img));
            out.coords.push_back({static_cast<std::int32_t>(gx),
                                  static_cast<std::int32_t>(gy)});
            out.witness.push_back(is_witness ? 1 : 0);
            if (is_witness) {
                ++witness_count;
                cx += static_cast<double>(gx);
                cy += static_cast<double>(gy);
            }
        }
    }

    const double n_raw = static_cast<double>(spec.grid_w * spec.grid_h);
    out.labels["witness"] = witness_count > 0 ? 1.0 : 0.0;
    out.labels["grade"] = witness_grade_bucket(witness_count);
    out.labels["fraction"] =
        static_cast<double>(witness_count) / n_raw + spec.noise_sigma * gaussian(rng);
    if (witness_count > 0) {
        cx /= static_cast<double>(witness_count);
        cy /= static_cast<double>(witness_count);
        double rms = 0;
        for (std::size_t i = 0; i < out.coords.size(); ++i) {
            if (!out.witness[i]) continue;
            const double dx = out.coords[i].x - cx;
            const double dy = out.coords[i].y - cy;
            rms += dx * dx + dy * dy;
        }
        rms = std::sqrt(rms / static_cast<double>(witness_count));
        const double diag = std::sqrt(static_cast<double>(spec.grid_w * spec.grid_w +
                                                          spec.grid_h * spec.grid_h));
        out.labels["extent"] = rms / diag + spec.noise_sigma * gaussian(rng);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Tile filters: coverage = fraction of pixels above a fixed intensity split.
// ---------------------------------------------------------------------------

constexpr double kTissueIntensitySplit = 0.15;

inline double tile_coverage(const TileImage& img) {
    std::size_t above = 0;
    for (float v : img.pixels)
        if (v > kTissueIntensitySplit) ++above;
    return static_cast<double>(above) / static_cast<double>(img.pixels.size());
}

inline double tile_variance(const TileImage& img) {
    double mean = 0;
    for (float v : img.pixels) mean += v;
    mean /= static_cast<double>(img.pixels.size());
    double var = 0;
    for (float v : img.pixels) var += (v - mean) * (v - mean);
    return var / static_cast<double>(img.pixels.size());
}

// Indices of tiles passing both filters, in input order.
inline std::vector<std::size_t> filter_tiles(const std::vector<TileImage>& tiles,
                                             double coverage_thresh = 0.5,
                                             double var_thresh = 0.01) {
    std::vector<std::size_t> kept;
    kept.reserve(tiles.size());
    for (std::size_t i = 0; i < tiles.size(); ++i) {
        if (tile_coverage(tiles[i]) < coverage_thresh) continue;
        if (tile_variance(tiles[i]) < var_thresh) continue;
        kept.push_back(i);
    }
    if (kept.empty()) throw DataError("empty slide: all tiles dropped by filters");
    return kept;
}

// ---------------------------------------------------------------------------
// Stub embedder: fixed seeded random projection + tanh, standing in for an
// ROI-level foundation encoder so the pipeline is self-contained.
// ---------------------------------------------------------------------------

class StubEmbedder {
public:
    explicit StubEmbedder(std::size_t d_in = 384, std::size_t tile_px = 16,
                          std::uint64_t seed = 7)
        : d_in_(d_in), px_(tile_px) {
        Rng rng(seed);
        const std::size_t flat = px_ * px_;
        const double std = 1.0 / std::sqrt(static_cast<double>(flat));
        weight_.resize(d_in_ * flat);
        bias_.resize(d_in_);
        for (auto& w : weight_) w = static_cast<float>(gaussian(rng) * std * 4.0);
        for (auto& b : bias_) b = static_cast<float>(gaussian(rng) * 0.1);
    }

    std::size_t d_in() const { return d_in_; }
    const std::vector<float>& bias() const { return bias_; }

    std::vector<float> embed(const TileImage& img) const {
        if (img.pixels.size() != px_ * px_)
            throw ContractError("stub_embed: unexpected tile size");
        std::vector<float> out(d_in_);
        const std::size_t flat = px_ * px_;
        for (std::size_t i = 0; i < d_in_; ++i) {
            float acc = bias_[i];
            const float* wrow = weight_.data() + i * flat;
            for (std::size_t j = 0; j < flat; ++j) acc += wrow[j] * img.pixels[j];
            out[i] = std::tanh(acc);
        }
        return out;
    }

private:
    std::size_t d_in_, px_;
    std::vector<float> weight_;
    std::vector<float> bias_;
};

// ---------------------------------------------------------------------------
// Morton (Z-order) codes and 2-D sinusoidal positional encoding
// ---------------------------------------------------------------------------

inline std::uint64_t morton_spread(std::uint32_t x) {
    std::uint64_t v = x;
    v = (v | (v << 16)) & 0x0000FFFF0000FFFFull;
    v = (v | (v << 8)) & 0x00FF00FF00FF00FFull;
    v = (v | (v << 4)) & 0x0F0F0F0F0F0F0F0Full;
    v = (v | (v << 2)) & 0x3333333333333333ull;
    v = (v | (v << 1)) & 0x5555555555555555ull;
    return v;
}

// x supplies the low bit: (1,0) -> 1, (0,1) -> 2.
inline std::uint64_t morton_code(std::uint32_t x, std::uint32_t y) {
    return morton_spread(x) | (morton_spread(y) << 1);
}

inline std::uint64_t morton_code(const GridCoord& c) {
    if (c.x < 0 || c.y < 0) throw ContractError("morton_code: negative coordinate");
    return morton_code(static_cast<std::uint32_t>(c.x), static_cast<std::uint32_t>(c.y));
}

// D/4 sin/cos frequency pairs per grid axis, x block then y block.
template <typename Real>
Tensor<Real> positional_embedding(std::span<const GridCoord> coords, std::size_t d,
                                  bool enabled = true) {
    if (d % 4 != 0) throw ConfigError("positional embedding dim must be divisible by 4");
    const std::size_t n = coords.size();
    auto out = Tensor<Real>::zeros({n, d});
    if (!enabled) return out;
    const std::size_t pairs = d / 4;
    Real* ov = out.value().data();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t f = 0; f < pairs; ++f) {
            const double omega =
                std::pow(10000.0, -static_cast<double>(f) / static_cast<double>(pairs));
            const double ax = coords[i].x * omega;
            const double ay = coords[i].y * omega;
            ov[i * d + 2 * f] = static_cast<Real>(std::sin(ax));
            ov[i * d + 2 * f + 1] = static_cast<Real>(std::cos(ax));
            ov[i * d + d / 2 + 2 * f] = static_cast<Real>(std::sin(ay));
            ov[i * d + d / 2 + 2 * f + 1] = static_cast<Real>(std::cos(ay));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Tile sampling
// ---------------------------------------------------------------------------

enum class SampleMethod { random, z_order };

inline SampleMethod parse_sample_method(const std::string& s) {
    if (s == "random") return SampleMethod::random;
    if (s == "z_order") return SampleMethod::z_order;
    throw ConfigError("unknown sampling method: " + s);
}

inline const char* sample_method_name(SampleMethod m) {
    return m == SampleMethod::random ? "random" : "z_order";
}

namespace detail {

inline TileBag take_rows(const TileBag& bag, const std::vector<std::size_t>& idx) {
    TileBag out;
    out.slide_id = bag.slide_id;
    out.d_in = bag.d_in;
    out.n = idx.size();
    out.features.reserve(idx.size() * bag.d_in);
    out.coords.reserve(idx.size());
    for (std::size_t i : idx) {
        out.features.insert(out.features.end(), bag.row(i), bag.row(i) + bag.d_in);
        out.coords.push_back(bag.coords[i]);
    }
    return out;
}

}  // namespace detail

// Sampling caps the tile count at max_n. random = uniform subset without
// replacement, shuffled; z_order = Morton-sorted contiguous run starting at
// a seeded offset (wrapping), the full sorted bag when it fits.
inline TileBag sample_tiles(const TileBag& bag, std::size_t max_n, SampleMethod method,
                            std::uint64_t seed) {
    if (max_n == 0) throw ContractError("sample_tiles: max_n must be >= 1");
    Rng rng(seed);
    std::vector<std::size_t> idx(bag.n);
    for (std::size_t i = 0; i < bag.n; ++i) idx[i] = i;

    if (method == SampleMethod::z_order) {
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            return morton_code(bag.coords[a]) < morton_code(bag.coords[b]);
        });
        if (bag.n > max_n) {
            const std::size_t start =
                static_cast<std::size_t>(uniform_index(rng, bag.n));
            std::vector<std::size_t> run(max_n);
            for (std::size_t i = 0; i < max_n; ++i) run[i] = idx[(start + i) % bag.n];
            idx = std::move(run);
        }
    } else {
        if (bag.n > max_n) {
            auto pick = sample_without_replacement(rng, bag.n, max_n);
            idx.assign(pick.begin(), pick.end());
        }
        shuffle_inplace(idx, rng);
    }
    return detail::take_rows(bag, idx);
}

}  // namespace prwk
