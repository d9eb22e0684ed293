#pragma once

// Executable property suites: gradient checks against central finite
// differences, chunked-vs-single-pass exactness, comb monoid laws (with a
// pluggable combiner so tampering is detectable), prediction-variance
// monotonicity, sampled-gradient unbiasedness under the mean aggregator,
// metric oracles, and format round-trips. Each check reports a pass flag,
// detail line, and the seed that reproduces any counterexample.

#include <functional>

#include "pathrwkv/bench.hpp"
#include "pathrwkv/dataset.hpp"
#include "pathrwkv/train.hpp"

namespace prwk {

struct VerifyResult {
    std::string name;
    bool pass = false;
    std::string detail;
    std::uint64_t seed = 0;
    double seconds = 0;
};

// ---------------------------------------------------------------------------
// Gradient correctness: every parameter of a small full model against
// central finite differences in 64-bit.
// ---------------------------------------------------------------------------

struct GradCheckReport {
    double worst_rel_err = 0;
    std::string worst_param;
    std::size_t checked = 0;
};

inline GradCheckReport check_model_gradients(std::uint64_t seed, std::size_t tiles = 5,
                                             double fd_step = 1e-5) {
    ModelConfig cfg;
    cfg.d_in = 10;
    cfg.d_model = 8;
    cfg.depth = 2;
    cfg.heads = 2;
    cfg.r_lora = 4;
    cfg.r_decay = 4;
    cfg.d_cm = 12;
    cfg.tasks = {{"cls", TaskKind::classification, 3}, {"reg", TaskKind::regression, 1}};
    PathRwkv<double> model(cfg, seed);
    Rng rng(mix_seed(seed, 1));
    for (auto& [name, t] : model.params().params())
        for (auto& v : t.value()) v = gaussian(rng) * 0.4;

    TileBag bag;
    bag.slide_id = "grad";
    bag.n = tiles;
    bag.d_in = cfg.d_in;
    bag.features.resize(tiles * cfg.d_in);
    for (auto& f : bag.features) f = static_cast<float>(gaussian(rng) * 0.7);
    for (std::size_t i = 0; i < tiles; ++i)
        bag.coords.push_back({static_cast<std::int32_t>(i % 3),
                              static_cast<std::int32_t>(i / 3)});
    LabelSet labels = {{"cls", 2.0}, {"reg", 0.4}};

    auto loss_value = [&] {
        NoGradGuard ng;
        auto preds = model.forward_slide(bag);
        return total_loss(preds, labels, cfg.tasks)->item();
    };

    model.params().zero_grads();
    {
        auto preds = model.forward_slide(bag);
        backward(*total_loss(preds, labels, cfg.tasks));
    }
    GradCheckReport rep;
    for (auto& [name, p] : model.params().params()) {
        if (!p.has_grad())
            throw PropertyError("parameter " + name + " missing gradient after backward");
        for (std::size_t i = 0; i < p.numel(); ++i) {
            auto val = p.value();
            const double orig = val[i];
            val[i] = orig + fd_step;
            const double fp = loss_value();
            val[i] = orig - fd_step;
            const double fm = loss_value();
            val[i] = orig;
            const double fd = (fp - fm) / (2 * fd_step);
            const double an = p.grad()[i];
            const double err =
                std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-6});
            ++rep.checked;
            if (err > rep.worst_rel_err) {
                rep.worst_rel_err = err;
                rep.worst_param = name + "[" + std::to_string(i) + "]";
            }
        }
    }
    model.params().zero_grads();
    return rep;
}

// ---------------------------------------------------------------------------
// Chunk exactness over random (model, slide) pairs
// ---------------------------------------------------------------------------

struct ChunkExactnessReport {
    double worst_f64 = 0;
    double worst_f32 = 0;
    std::uint64_t worst_seed = 0;
    std::size_t cases = 0;
};

namespace detail {

template <typename Real>
double chunk_exactness_case(std::uint64_t seed, std::size_t n, std::size_t bag_size) {
    ModelConfig cfg;
    cfg.d_in = 12;
    cfg.d_model = 16;
    cfg.depth = 2;
    cfg.heads = 2;
    cfg.r_lora = 4;
    cfg.r_decay = 4;
    cfg.d_cm = 24;
    cfg.tasks = {{"cls", TaskKind::classification, 2}, {"reg", TaskKind::regression, 1}};
    PathRwkv<Real> model(cfg, seed);
    Rng rng(mix_seed(seed, 2));
    TileBag bag;
    bag.slide_id = "chunk";
    bag.n = n;
    bag.d_in = cfg.d_in;
    bag.features.resize(n * cfg.d_in);
    for (auto& f : bag.features) f = static_cast<float>(gaussian(rng) * 0.6);
    for (std::size_t i = 0; i < n; ++i)
        bag.coords.push_back({static_cast<std::int32_t>(i % 19),
                              static_cast<std::int32_t>(i / 19)});
    NoGradGuard ng;
    auto full = model.forward_slide(bag);
    auto chunked = infer_slide_outputs(model, chunk_source(bag, bag_size));
    double worst = 0;
    for (std::size_t t = 0; t < full.size(); ++t)
        for (std::size_t j = 0; j < full[t].numel(); ++j)
            worst = std::max(worst, std::abs(static_cast<double>(full[t].value()[j]) -
                                             chunked[t][j]));
    return worst;
}

}  // namespace detail

inline ChunkExactnessReport check_chunk_exactness(std::size_t pairs, std::uint64_t seed) {
    ChunkExactnessReport rep;
    const std::size_t lengths[] = {1, 13, 257};
    for (std::size_t p = 0; p < pairs; ++p) {
        const std::uint64_t case_seed = mix_seed(seed, 100 + p);
        const std::size_t n = lengths[p % 3];
        for (std::size_t bag_size : {std::size_t(1), std::size_t(7), std::size_t(64), n}) {
            const double e64 = detail::chunk_exactness_case<double>(case_seed, n, bag_size);
            const double e32 = detail::chunk_exactness_case<float>(case_seed, n, bag_size);
            ++rep.cases;
            if (e64 > rep.worst_f64) {
                rep.worst_f64 = e64;
                rep.worst_seed = case_seed;
            }
            rep.worst_f32 = std::max(rep.worst_f32, e32);
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Comb monoid laws with a pluggable combiner (mutation detection)
// ---------------------------------------------------------------------------

struct MonoidReport {
    bool associative = true, commutative = true, idempotent = true, has_identity = true;
    bool fold_equals_global = true;
    std::uint64_t counterexample_seed = 0;
    std::string failed_law;

    bool all_pass() const {
        return associative && commutative && idempotent && has_identity &&
               fold_equals_global;
    }
};

using Combiner =
    std::function<std::vector<double>(const std::vector<double>&, const std::vector<double>&)>;

inline MonoidReport check_monoid_laws(const Combiner& op, std::size_t triples,
                                      std::uint64_t seed, std::size_t dim = 8) {
    MonoidReport rep;
    auto fail = [&](const char* law, std::uint64_t s) {
        if (rep.failed_law.empty()) {
            rep.failed_law = law;
            rep.counterexample_seed = s;
        }
    };
    for (std::size_t t = 0; t < triples; ++t) {
        const std::uint64_t s = mix_seed(seed, t);
        Rng rng(s);
        std::vector<double> a(dim), b(dim), c(dim);
        for (std::size_t i = 0; i < dim; ++i) {
            a[i] = gaussian(rng);
            b[i] = gaussian(rng);
            c[i] = gaussian(rng);
        }
        if (op(op(a, b), c) != op(a, op(b, c))) {
            rep.associative = false;
            fail("associativity", s);
        }
        if (op(a, b) != op(b, a)) {
            rep.commutative = false;
            fail("commutativity", s);
        }
        if (op(a, a) != a) {
            rep.idempotent = false;
            fail("idempotence", s);
        }
        if (op(a, comb_identity<double>(dim)) != a) {
            rep.has_identity = false;
            fail("identity", s);
        }
    }
    // streaming fold equality over a random partition
    for (std::size_t t = 0; t < std::max<std::size_t>(triples / 10, 1); ++t) {
        const std::uint64_t s = mix_seed(seed, 0xF01D + t);
        Rng rng(s);
        const std::size_t rows = 50 + uniform_index(rng, 50);
        std::vector<double> data(rows * dim);
        for (auto& v : data) v = gaussian(rng);
        const std::size_t n_bags = 1 + uniform_index(rng, 7);
        std::vector<std::size_t> owner(rows);
        for (auto& o : owner) o = uniform_index(rng, n_bags);
        auto acc = comb_identity<double>(dim);
        for (std::size_t bblk = 0; bblk < n_bags; ++bblk) {
            std::vector<double> part;
            for (std::size_t r = 0; r < rows; ++r)
                if (owner[r] == bblk)
                    part.insert(part.end(), data.begin() + static_cast<long>(r * dim),
                                data.begin() + static_cast<long>((r + 1) * dim));
            if (part.empty()) continue;
            // local summary under the same combiner
            std::vector<double> local(part.begin(), part.begin() + static_cast<long>(dim));
            for (std::size_t r = 1; r < part.size() / dim; ++r)
                local = op(local, std::vector<double>(
                                      part.begin() + static_cast<long>(r * dim),
                                      part.begin() + static_cast<long>((r + 1) * dim)));
            acc = op(acc, local);
        }
        std::vector<double> global(data.begin(), data.begin() + static_cast<long>(dim));
        for (std::size_t r = 1; r < rows; ++r)
            global = op(global, std::vector<double>(
                                    data.begin() + static_cast<long>(r * dim),
                                    data.begin() + static_cast<long>((r + 1) * dim)));
        if (acc != global) {
            rep.fold_equals_global = false;
            fail("fold-equality", s);
        }
    }
    return rep;
}

inline Combiner max_combiner() {
    return [](const std::vector<double>& a, const std::vector<double>& b) {
        return comb(a, b);
    };
}

// ---------------------------------------------------------------------------
// Variance reduction (frozen random model, Monte Carlo over subsets)
// ---------------------------------------------------------------------------

struct VarianceReport {
    std::vector<std::size_t> sizes;
    std::vector<double> variances;  // averaged over slides
    bool monotone = true;
    bool zero_at_full = true;
};

inline VarianceReport check_variance_reduction(std::size_t slides, std::size_t trials,
                                               std::size_t n_tiles, std::uint64_t seed) {
    ModelConfig cfg;
    cfg.d_in = 16;
    cfg.d_model = 16;
    cfg.depth = 1;
    cfg.heads = 2;
    cfg.r_lora = 4;
    cfg.r_decay = 4;
    cfg.d_cm = 24;
    cfg.tasks = {{"score", TaskKind::regression, 1}};
    PathRwkv<float> model(cfg, seed);

    VarianceReport rep;
    for (std::size_t s : {std::size_t(1), std::size_t(8), std::size_t(64),
                          std::size_t(256), n_tiles})
        if (s <= n_tiles) rep.sizes.push_back(s);
    rep.variances.assign(rep.sizes.size(), 0.0);

    for (std::size_t sl = 0; sl < slides; ++sl) {
        Rng rng(mix_seed(seed, 0xA1 + sl));
        TileBag bag;
        bag.slide_id = "var";
        bag.n = n_tiles;
        bag.d_in = cfg.d_in;
        bag.features.resize(n_tiles * cfg.d_in);
        for (auto& f : bag.features) f = static_cast<float>(gaussian(rng) * 0.8);
        for (std::size_t i = 0; i < n_tiles; ++i)
            bag.coords.push_back({static_cast<std::int32_t>(i % 29),
                                  static_cast<std::int32_t>(i / 29)});
        for (std::size_t k = 0; k < rep.sizes.size(); ++k) {
            Rng mc(mix_seed(seed, 0xB000 + sl * 97 + k));
            rep.variances[k] +=
                subset_prediction_variance(model, bag, rep.sizes[k], trials, mc);
        }
    }
    for (auto& v : rep.variances) v /= static_cast<double>(slides);
    for (std::size_t k = 1; k < rep.variances.size(); ++k)
        rep.monotone = rep.monotone && rep.variances[k] <= rep.variances[k - 1] + 1e-12;
    rep.zero_at_full = rep.variances.back() == 0.0;
    return rep;
}

// ---------------------------------------------------------------------------
// Sampled-gradient unbiasedness under the mean aggregator (linear head,
// squared loss, gradients taken at w = 0 where the estimator is exactly
// unbiased). Also reports the empirical bias a max aggregator would incur.
// ---------------------------------------------------------------------------

struct UnbiasednessReport {
    std::vector<std::size_t> trial_counts;
    std::vector<double> errors;  // || avg sampled grad - full grad ||
    double slope = 0;            // log-log fit, expected ~ -0.5
    double max_aggregator_bias = 0;
};

inline UnbiasednessReport check_mean_unbiasedness(const std::vector<std::size_t>& trials,
                                                  std::uint64_t seed,
                                                  std::size_t n_tiles = 512,
                                                  std::size_t d_in = 96,
                                                  std::size_t reps = 8) {
    // stub embeddings of one synthetic slide
    StubEmbedder embedder(d_in, 16, mix_seed(seed, 3));
    SyntheticSlideSpec spec;
    spec.grid_w = 32;
    spec.grid_h = (n_tiles + 31) / 32;
    spec.blank_rate = 0;
    spec.witness_rate = 0.3;
    spec.seed = mix_seed(seed, 4);
    auto sample = generate_slide(spec);
    std::vector<double> feats;
    feats.reserve(n_tiles * d_in);
    for (std::size_t i = 0; i < n_tiles; ++i) {
        auto f = embedder.embed(sample.tiles[i]);
        feats.insert(feats.end(), f.begin(), f.end());
    }
    std::vector<double> full_mean(d_in, 0.0);
    for (std::size_t i = 0; i < n_tiles; ++i)
        for (std::size_t j = 0; j < d_in; ++j) full_mean[j] += feats[i * d_in + j];
    for (auto& v : full_mean) v /= static_cast<double>(n_tiles);

    Rng rng(mix_seed(seed, 5));
    const double b = gaussian(rng);   // head bias (w = 0)
    const double y = gaussian(rng);   // target
    const double resid = 2.0 * (b - y);

    // full-slide gradient of (w . mean + b - y)^2 w.r.t. w at w = 0
    std::vector<double> g_full(d_in);
    for (std::size_t j = 0; j < d_in; ++j) g_full[j] = resid * full_mean[j];

    const std::size_t bag = n_tiles / 2;
    UnbiasednessReport rep;
    rep.trial_counts = trials;
    for (std::size_t t_idx = 0; t_idx < trials.size(); ++t_idx) {
        // expected squared error estimated over independent repetitions so
        // the slope fit is not dominated by single-run noise
        double mse = 0;
        for (std::size_t r = 0; r < reps; ++r) {
            Rng mc(mix_seed(seed, 0xC0 + t_idx * 131 + r));
            std::vector<double> acc(d_in, 0.0);
            for (std::size_t t = 0; t < trials[t_idx]; ++t) {
                auto idx = sample_without_replacement(mc, n_tiles, bag);
                std::vector<double> m(d_in, 0.0);
                for (std::size_t i : idx)
                    for (std::size_t j = 0; j < d_in; ++j) m[j] += feats[i * d_in + j];
                for (std::size_t j = 0; j < d_in; ++j) acc[j] += resid * m[j] / bag;
            }
            double err = 0;
            for (std::size_t j = 0; j < d_in; ++j) {
                const double d = acc[j] / static_cast<double>(trials[t_idx]) - g_full[j];
                err += d * d;
            }
            mse += err;
        }
        rep.errors.push_back(std::sqrt(mse / static_cast<double>(reps)));
    }
    // least-squares slope in log-log space
    const std::size_t k = trials.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < k; ++i) {
        const double lx = std::log10(static_cast<double>(trials[i]));
        const double ly = std::log10(std::max(rep.errors[i], 1e-300));
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    rep.slope = (sxy - sx * sy / k) / (sxx - sx * sx / k);

    // empirical bias of the max aggregator (reported, not asserted)
    {
        Rng mc(mix_seed(seed, 0xD0));
        std::vector<double> acc(d_in, 0.0);
        const std::size_t t_max = 4000;
        for (std::size_t t = 0; t < t_max; ++t) {
            auto idx = sample_without_replacement(mc, n_tiles, bag);
            std::vector<double> mx(d_in, -1e300);
            for (std::size_t i : idx)
                for (std::size_t j = 0; j < d_in; ++j)
                    mx[j] = std::max(mx[j], feats[i * d_in + j]);
            for (std::size_t j = 0; j < d_in; ++j) acc[j] += resid * mx[j];
        }
        std::vector<double> full_max(d_in, -1e300);
        for (std::size_t i = 0; i < n_tiles; ++i)
            for (std::size_t j = 0; j < d_in; ++j)
                full_max[j] = std::max(full_max[j], feats[i * d_in + j]);
        double bias = 0;
        for (std::size_t j = 0; j < d_in; ++j) {
            const double d = acc[j] / t_max - resid * full_max[j];
            bias += d * d;
        }
        rep.max_aggregator_bias = std::sqrt(bias);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Metric oracles
// ---------------------------------------------------------------------------

inline bool check_metric_oracles(std::uint64_t seed, std::string* detail) {
    for (std::size_t rep = 0; rep < 25; ++rep) {
        Rng rng(mix_seed(seed, rep));
        const std::size_t n = 10 + uniform_index(rng, 41);  // up to 50
        std::vector<double> scores(n);
        std::vector<int> labels(n);
        for (std::size_t i = 0; i < n; ++i) {
            scores[i] = std::round(gaussian(rng) * 4) / 4.0;
            labels[i] = uniform01(rng) < 0.5;
        }
        labels[0] = 1;
        labels[n - 1] = 0;
        double wins = 0;
        std::size_t pairs = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (!labels[i]) continue;
            for (std::size_t j = 0; j < n; ++j) {
                if (labels[j]) continue;
                ++pairs;
                wins += scores[i] > scores[j] ? 1.0 : (scores[i] == scores[j] ? 0.5 : 0.0);
            }
        }
        const double want = wins / static_cast<double>(pairs);
        const double got = auc_binary(scores, labels);
        if (std::abs(got - want) > 1e-12) {
            if (detail)
                *detail = "auc mismatch " + std::to_string(got) + " vs " +
                          std::to_string(want) + " at seed " + std::to_string(mix_seed(seed, rep));
            return false;
        }

        std::vector<double> xs(n), ys(n);
        for (std::size_t i = 0; i < n; ++i) {
            xs[i] = gaussian(rng);
            ys[i] = 0.4 * xs[i] + gaussian(rng);
        }
        double exy = 0, ex = 0, ey = 0, exx = 0, eyy = 0;
        for (std::size_t i = 0; i < n; ++i) {
            exy += xs[i] * ys[i];
            ex += xs[i];
            ey += ys[i];
            exx += xs[i] * xs[i];
            eyy += ys[i] * ys[i];
        }
        const double dn = static_cast<double>(n);
        const double want_r =
            (exy / dn - ex / dn * ey / dn) /
            (std::sqrt(exx / dn - ex / dn * ex / dn) * std::sqrt(eyy / dn - ey / dn * ey / dn));
        if (std::abs(pearson(xs, ys) - want_r) > 1e-12) {
            if (detail) *detail = "pearson mismatch at rep " + std::to_string(rep);
            return false;
        }
    }
    return true;
}

// ---------------------------------------------------------------------------
// Format round-trips
// ---------------------------------------------------------------------------

inline bool check_bag_roundtrips(std::size_t count, std::uint64_t seed,
                                 std::string* detail) {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "prwk_verify_bags";
    fs::create_directories(dir);
    bool ok = true;
    for (std::size_t i = 0; i < count && ok; ++i) {
        Rng rng(mix_seed(seed, i));
        TileBag bag;
        bag.slide_id = "rt";
        bag.n = 1 + uniform_index(rng, 64);
        bag.d_in = 1 + uniform_index(rng, 48);
        bag.features.resize(bag.n * bag.d_in);
        for (auto& f : bag.features) f = static_cast<float>(gaussian(rng) * 10);
        for (std::size_t t = 0; t < bag.n; ++t)
            bag.coords.push_back({static_cast<std::int32_t>(uniform_index(rng, 1000)),
                                  static_cast<std::int32_t>(uniform_index(rng, 1000))});
        const std::string path = (dir / ("b" + std::to_string(i) + ".prwk")).string();
        write_bag(path, bag);
        auto back = read_bag(path);
        ok = back.n == bag.n && back.d_in == bag.d_in && back.coords == bag.coords &&
             std::memcmp(back.features.data(), bag.features.data(),
                         bag.features.size() * sizeof(float)) == 0;
        if (!ok && detail) *detail = "round-trip mismatch at seed " + std::to_string(mix_seed(seed, i));
    }
    // corrupted file must be rejected
    const std::string bad = (dir / "bad.prwk").string();
    {
        std::ofstream os(bad, std::ios::binary | std::ios::trunc);
        os << "PRWJ" << std::string(24, '\x01');
    }
    try {
        read_bag(bad);
        if (detail) *detail = "corrupted bag was accepted";
        ok = false;
    } catch (const DataError&) {
    }
    fs::remove_all(dir);
    return ok;
}

// ---------------------------------------------------------------------------
// Suite runner
// ---------------------------------------------------------------------------

struct VerifyOptions {
    bool full = false;  // adds the scaling benches
    std::uint64_t seed = 42;
};

inline std::vector<VerifyResult> run_verification(const VerifyOptions& opt) {
    std::vector<VerifyResult> results;
    auto push = [&](const std::string& name, bool pass, const std::string& detail,
                    std::uint64_t seed, double secs) {
        results.push_back({name, pass, detail, seed, secs});
    };

    {
        Stopwatch w;
        auto rep = check_model_gradients(opt.seed);
        push("gradient_check",
             rep.worst_rel_err < 1e-4,
             "worst rel err " + std::to_string(rep.worst_rel_err) + " at " +
                 rep.worst_param + " over " + std::to_string(rep.checked) + " scalars",
             opt.seed, w.seconds());
    }
    {
        Stopwatch w;
        auto rep = check_chunk_exactness(6, opt.seed);
        push("chunk_exactness",
             rep.worst_f64 <= 1e-10 && rep.worst_f32 <= 1e-4,
             "max abs diff f64 " + std::to_string(rep.worst_f64) + ", f32 " +
                 std::to_string(rep.worst_f32),
             rep.worst_seed, w.seconds());
    }
    {
        Stopwatch w;
        auto rep = check_monoid_laws(max_combiner(), 1000, opt.seed);
        push("comb_monoid_laws", rep.all_pass(),
             rep.all_pass() ? "associative, commutative, idempotent, identity, fold-exact"
                            : "failed law: " + rep.failed_law,
             rep.counterexample_seed, w.seconds());
    }
    {
        Stopwatch w;
        auto rep = check_variance_reduction(5, 200, 400, opt.seed);
        std::string detail = "variances";
        for (double v : rep.variances) detail += " " + std::to_string(v);
        push("variance_reduction", rep.monotone && rep.zero_at_full, detail, opt.seed,
             w.seconds());
    }
    {
        Stopwatch w;
        auto rep = check_mean_unbiasedness({50, 500, 5000}, opt.seed);
        push("mean_gradient_unbiasedness",
             std::abs(rep.slope + 0.5) <= 0.15,
             "log-log slope " + std::to_string(rep.slope) + ", max-aggregator bias " +
                 std::to_string(rep.max_aggregator_bias),
             opt.seed, w.seconds());
    }
    {
        Stopwatch w;
        std::string detail = "auc pairwise + pearson covariance oracles agree";
        const bool ok = check_metric_oracles(opt.seed, &detail);
        push("metric_oracles", ok, detail, opt.seed, w.seconds());
    }
    {
        Stopwatch w;
        std::string detail = "bit-exact round trips, corruption rejected";
        const bool ok = check_bag_roundtrips(10, opt.seed, &detail);
        push("bag_format_roundtrip", ok, detail, opt.seed, w.seconds());
    }
    if (opt.full) {
        Stopwatch w;
        ModelConfig cfg;
        cfg.d_in = 32;
        cfg.d_model = 32;
        cfg.depth = 2;
        cfg.heads = 1;
        cfg.r_lora = 8;
        cfg.r_decay = 8;
        cfg.tasks = {{"score", TaskKind::regression, 1}};
        auto rep = bench_scaling(cfg, {1000, 2000, 4000, 8000}, 512, 32, opt.seed, 2);
        const bool ok = rep.slope_recurrent >= 0.8 && rep.slope_recurrent <= 1.2 &&
                        rep.slope_quadratic >= 1.7 && rep.slope_quadratic <= 2.3 &&
                        rep.mem_spread < 0.10;
        push("scaling_bench", ok,
             "recurrent slope " + std::to_string(rep.slope_recurrent) +
                 ", quadratic slope " + std::to_string(rep.slope_quadratic) +
                 ", memory spread " + std::to_string(rep.mem_spread),
             opt.seed, w.seconds());
    }
    return results;
}

}  // namespace prwk
