#pragma once

// Asymmetric inference machinery: bag planning, the feature-wise max local
// summary with its associative Comb, the streaming recurrent inference
// engine over carried RwkvState, and prediction-variance probes.

#include <functional>
#include <limits>
#include <optional>

#include "pathrwkv/model.hpp"

namespace prwk {

// ---------------------------------------------------------------------------
// Max monoid: identity is the -inf vector (h_0 = empty summary).
// ---------------------------------------------------------------------------

template <typename Real>
std::vector<Real> comb_identity(std::size_t dim) {
    return std::vector<Real>(dim, -std::numeric_limits<Real>::infinity());
}

template <typename Real>
std::vector<Real> comb(const std::vector<Real>& a, const std::vector<Real>& b) {
    if (a.size() != b.size())
        throw ShapeError("comb: length mismatch " + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
    std::vector<Real> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] > b[i] ? a[i] : b[i];
    return out;
}

// Feature-wise max over rows. n == 0 yields the identity and sets *empty.
template <typename Real>
std::vector<Real> local_summary(const Real* rows, std::size_t n, std::size_t dim,
                                bool* empty = nullptr) {
    if (empty) *empty = (n == 0);
    auto out = comb_identity<Real>(dim);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < dim; ++j)
            out[j] = std::max(out[j], rows[i * dim + j]);
    return out;
}

template <typename Real>
std::vector<Real> local_summary(const std::vector<Real>& rows, std::size_t dim,
                                bool* empty = nullptr) {
    if (dim == 0 || rows.size() % dim != 0)
        throw ShapeError("local_summary: row data not divisible by dim");
    return local_summary(rows.data(), rows.size() / dim, dim, empty);
}

template <typename Real>
struct RunningMax {
    std::vector<std::vector<Real>> values;  // per task
    std::size_t seen_count = 0;

    RunningMax(std::size_t tasks, std::size_t dim) {
        values.assign(tasks, comb_identity<Real>(dim));
    }
    void absorb(std::size_t task, const std::vector<Real>& summary) {
        values.at(task) = comb(values.at(task), summary);
    }
};

// ---------------------------------------------------------------------------
// Bag planning
// ---------------------------------------------------------------------------

struct BagPlan {
    std::size_t bag_size = 0;
    std::vector<std::pair<std::size_t, std::size_t>> ranges;  // [begin, end)
};

inline BagPlan plan_bags(std::size_t n, std::size_t bag_size) {
    if (n == 0) throw DataError("plan_bags: empty slide");
    if (bag_size == 0) throw ContractError("plan_bags: bag_size must be >= 1");
    BagPlan plan;
    plan.bag_size = bag_size;
    for (std::size_t b = 0; b < n; b += bag_size)
        plan.ranges.emplace_back(b, std::min(b + bag_size, n));
    return plan;
}

// ---------------------------------------------------------------------------
// Streaming sources
// ---------------------------------------------------------------------------

struct BagBatch {
    std::size_t n = 0;
    std::vector<float> features;
    std::vector<GridCoord> coords;
};

using BagSource = std::function<std::optional<BagBatch>()>;

inline BagSource chunk_source(const TileBag& bag, std::size_t bag_size) {
    auto plan = std::make_shared<BagPlan>(plan_bags(bag.n, bag_size));
    auto next = std::make_shared<std::size_t>(0);
    const TileBag* b = &bag;
    return [plan, next, b]() -> std::optional<BagBatch> {
        if (*next >= plan->ranges.size()) return std::nullopt;
        auto [lo, hi] = plan->ranges[(*next)++];
        BagBatch out;
        out.n = hi - lo;
        out.features.assign(b->row(lo), b->row(lo) + (hi - lo) * b->d_in);
        out.coords.assign(b->coords.begin() + static_cast<long>(lo),
                          b->coords.begin() + static_cast<long>(hi));
        return out;
    };
}

inline BagSource file_source(const std::string& path, std::size_t bag_size,
                             std::size_t expect_d_in = 0) {
    auto stream = std::make_shared<BagFileStream>(path, bag_size);
    if (expect_d_in && stream->d_in() != expect_d_in)
        throw DataError("bag feature dim " + std::to_string(stream->d_in()) +
                        " does not match checkpoint d_in " + std::to_string(expect_d_in));
    return [stream]() -> std::optional<BagBatch> {
        BagBatch out;
        out.n = stream->next(out.features, out.coords);
        if (out.n == 0) return std::nullopt;
        return out;
    };
}

// ---------------------------------------------------------------------------
// Recurrent inference
// ---------------------------------------------------------------------------

template <typename Real>
struct InferStats {
    std::size_t bags = 0;
    std::size_t tiles = 0;
    std::size_t skipped_bags = 0;
    long long peak_live_bytes = 0;
};

// One pass over all bags with carried state; per-tile task features flow
// into a RunningMax per task. Returns the aggregated per-task features.
// No gradients are recorded.
template <typename Real>
std::vector<std::vector<Real>> infer_slide(const PathRwkv<Real>& model, BagSource source,
                                           InferStats<Real>* stats = nullptr) {
    NoGradGuard no_grad;
    const auto& cfg = model.config();
    auto state = model.fresh_state();
    const std::size_t t_count = cfg.tasks.size();

    std::optional<RunningMax<Real>> running;
    std::vector<Real> mean_acc;  // 'to' variant: running sum over tiles
    if (cfg.variant == MtlVariant::ours)
        running.emplace(t_count, cfg.d_model);
    else if (cfg.variant == MtlVariant::to)
        mean_acc.assign(cfg.d_model, Real(0));

    InferStats<Real> local;
    tensor_mem().reset_peak();
    while (auto batch = source()) {
        if (batch->n == 0) {
            ++local.skipped_bags;  // empty after filtering: skip with warning
            continue;
        }
        auto x = model.embed(batch->features.data(), batch->n, batch->coords);
        auto y = model.backbone_chunk(x, state);
        switch (cfg.variant) {
            case MtlVariant::ours: {
                auto streams = model.per_tile_task_features(y);
                for (std::size_t t = 0; t < t_count; ++t) {
                    auto vals = streams[t].value();
                    running->absorb(
                        t, local_summary(vals.data(), batch->n, cfg.d_model));
                }
                running->seen_count += batch->n;
                break;
            }
            case MtlVariant::to: {
                auto vals = y.value();
                for (std::size_t i = 0; i < batch->n; ++i)
                    for (std::size_t j = 0; j < cfg.d_model; ++j)
                        mean_acc[j] += vals[i * cfg.d_model + j];
                break;
            }
            case MtlVariant::through:
                break;  // tokens are fed after the tile stream
        }
        local.bags += 1;
        local.tiles += batch->n;
    }
    if (local.tiles == 0) throw DataError("infer_slide: empty slide");

    std::vector<std::vector<Real>> feats(t_count);
    switch (cfg.variant) {
        case MtlVariant::ours:
            for (std::size_t t = 0; t < t_count; ++t) feats[t] = running->values[t];
            break;
        case MtlVariant::to: {
            for (auto& v : mean_acc) v /= static_cast<Real>(local.tiles);
            for (std::size_t t = 0; t < t_count; ++t) feats[t] = mean_acc;
            break;
        }
        case MtlVariant::through: {
            auto y = model.backbone_chunk(model.mtl_token_rows(), state);
            auto vals = y.value();
            for (std::size_t t = 0; t < t_count; ++t)
                feats[t].assign(vals.begin() + static_cast<long>(t * cfg.d_model),
                                vals.begin() + static_cast<long>((t + 1) * cfg.d_model));
            break;
        }
    }
    local.peak_live_bytes = tensor_mem().peak();
    if (stats) *stats = local;
    return feats;
}

// Aggregated features through the task heads, as plain numbers.
template <typename Real>
std::vector<std::vector<double>> infer_slide_outputs(const PathRwkv<Real>& model,
                                                     BagSource source,
                                                     InferStats<Real>* stats = nullptr) {
    NoGradGuard no_grad;
    auto feats = infer_slide(model, std::move(source), stats);
    std::vector<Tensor<Real>> feat_tensors;
    feat_tensors.reserve(feats.size());
    for (auto& f : feats) {
        auto t = Tensor<Real>::zeros({f.size()});
        std::copy(f.begin(), f.end(), t.value().begin());
        feat_tensors.push_back(std::move(t));
    }
    auto preds = model.heads_from_features(feat_tensors);
    std::vector<std::vector<double>> out;
    out.reserve(preds.size());
    for (auto& p : preds)
        out.emplace_back(p.value().begin(), p.value().end());
    return out;
}

// ---------------------------------------------------------------------------
// Tile-level baselines over per-tile predictions [N x K]
// ---------------------------------------------------------------------------

template <typename Real>
std::vector<Real> slide_ave(const Real* preds, std::size_t n, std::size_t k) {
    if (n == 0) throw ContractError("slide_ave: empty prediction matrix");
    std::vector<Real> out(k, Real(0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < k; ++j) out[j] += preds[i * k + j];
    for (auto& v : out) v /= static_cast<Real>(n);
    return out;
}

template <typename Real>
std::vector<Real> slide_max(const Real* preds, std::size_t n, std::size_t k) {
    if (n == 0) throw ContractError("slide_max: empty prediction matrix");
    auto out = comb_identity<Real>(k);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < k; ++j) out[j] = std::max(out[j], preds[i * k + j]);
    return out;
}

// ---------------------------------------------------------------------------
// Prediction variance over uniformly sampled tile subsets (Monte Carlo).
// Subsets keep the slide's original tile order, so the full set reproduces
// the deterministic full forward exactly.
// ---------------------------------------------------------------------------

template <typename Real>
double subset_prediction_variance(const PathRwkv<Real>& model, const TileBag& bag,
                                  std::size_t subset_size, std::size_t trials, Rng& rng) {
    if (subset_size == 0) throw ContractError("subset_prediction_variance: empty subset");
    if (subset_size > bag.n)
        throw ContractError("subset_prediction_variance: subset exceeds slide");
    if (trials < 2) throw ContractError("subset_prediction_variance: trials must be >= 2");
    NoGradGuard no_grad;
    std::vector<double> outputs;
    outputs.reserve(trials);
    for (std::size_t t = 0; t < trials; ++t) {
        auto idx = sample_without_replacement(rng, bag.n, subset_size);  // sorted
        auto sub = detail::take_rows(bag, idx);
        auto preds = model.forward_slide(sub);
        outputs.push_back(static_cast<double>(preds.at(0).value()[0]));
    }
    // identical samples have exactly zero variance; bypass mean rounding
    bool all_equal = true;
    for (double v : outputs) all_equal = all_equal && v == outputs[0];
    if (all_equal) return 0.0;
    double mean = 0;
    for (double v : outputs) mean += v;
    mean /= static_cast<double>(outputs.size());
    double var = 0;
    for (double v : outputs) var += (v - mean) * (v - mean);
    return var / static_cast<double>(outputs.size());
}

}  // namespace prwk
