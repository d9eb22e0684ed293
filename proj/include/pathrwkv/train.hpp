#pragma once

// Training loop (sampled single-chunk forwards, Eq-style summed multi-task
// loss with missing-label masking, Adam under the warmup+cosine schedule)
// and evaluation in sampled or recurrent mode.

#include <filesystem>
#include <optional>

#include "pathrwkv/aggregate.hpp"
#include "pathrwkv/metrics.hpp"

namespace prwk {

struct TrainConfig {
    int epochs = 100;
    int warmup_epochs = 20;
    double base_lr = 1e-4;
    double lr_floor = 0.01;  // fraction of base_lr at the final epoch
    int batch_size = 4;      // slides per optimizer step (gradient accumulation)
    std::size_t max_n_tiles = 2000;
    SampleMethod sampling = SampleMethod::random;
    std::uint64_t seed = 42;
    double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;

    void validate() const {
        if (epochs <= 0 || warmup_epochs < 0 || warmup_epochs >= epochs)
            throw ConfigError("need 0 <= warmup_epochs < epochs");
        if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
        if (max_n_tiles == 0) throw ConfigError("max_n_tiles must be >= 1");
    }
};

// ---------------------------------------------------------------------------
// Dataset loading and splits
// ---------------------------------------------------------------------------

struct LoadedDataset {
    std::filesystem::path root;
    Manifest manifest;
    std::vector<TileBag> bags;  // aligned with manifest.records

    std::size_t size() const { return bags.size(); }
    const SlideRecord& record(std::size_t i) const { return manifest.records[i]; }
    const TileBag& bag(std::size_t i) const { return bags[i]; }
};

inline LoadedDataset load_dataset(const std::string& manifest_path, int workers = 1) {
    LoadedDataset ds;
    ds.root = std::filesystem::path(manifest_path).parent_path();
    ds.manifest = read_manifest(manifest_path);
    ds.bags.resize(ds.manifest.records.size());
    parallel_for(ds.manifest.records.size(), workers, [&](std::size_t i) {
        const auto& rec = ds.manifest.records[i];
        ds.bags[i] = read_bag((ds.root / rec.path).string());
        ds.bags[i].slide_id = rec.slide_id;
        if (ds.bags[i].n != rec.n_tiles)
            throw DataError("manifest n_tiles mismatch for slide " + rec.slide_id);
    });
    return ds;
}

struct SplitIdx {
    std::vector<std::size_t> train, val, test;
};

// "0.7/0.1/0.2" (fractions) or "160/20/40" (absolute counts), applied after
// a seeded shuffle of the slide order.
inline SplitIdx split_dataset(std::size_t n, const std::string& split_spec,
                              std::uint64_t seed) {
    double a = 0, b = 0, c = 0;
    if (std::sscanf(split_spec.c_str(), "%lf/%lf/%lf", &a, &b, &c) != 3)
        throw ConfigError("bad split spec: " + split_spec);
    std::size_t n_train, n_val;
    if (a <= 1.0 && b <= 1.0 && c <= 1.0) {
        n_train = static_cast<std::size_t>(a * static_cast<double>(n) + 0.5);
        n_val = static_cast<std::size_t>(b * static_cast<double>(n) + 0.5);
    } else {
        if (a + b + c > static_cast<double>(n))
            throw ConfigError("split counts exceed dataset size");
        n_train = static_cast<std::size_t>(a);
        n_val = static_cast<std::size_t>(b);
    }
    if (n_train == 0 || n_train + n_val > n)
        throw ConfigError("degenerate split: " + split_spec);
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    Rng rng(mix_seed(seed, 0x59117));
    shuffle_inplace(idx, rng);
    SplitIdx s;
    s.train.assign(idx.begin(), idx.begin() + static_cast<long>(n_train));
    s.val.assign(idx.begin() + static_cast<long>(n_train),
                 idx.begin() + static_cast<long>(n_train + n_val));
    s.test.assign(idx.begin() + static_cast<long>(n_train + n_val), idx.end());
    return s;
}

// ---------------------------------------------------------------------------
// Metric report
// ---------------------------------------------------------------------------

struct TaskMetrics {
    std::optional<double> accuracy;
    std::optional<double> auc;
    std::optional<double> correlation;
    std::size_t n = 0;
};

struct MetricReport {
    std::map<std::string, TaskMetrics> per_task;
    std::vector<double> loss_curve;
    double wall_seconds = 0;
    long long peak_bytes = 0;
    std::size_t skipped_updates = 0;  // heads skipped by Adam due to masking

    double mean_auc() const {
        double s = 0;
        int k = 0;
        for (const auto& [name, m] : per_task)
            if (m.auc) {
                s += *m.auc;
                ++k;
            }
        return k ? s / k : 0.0;
    }
};

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

namespace detail {

// Labels with regression targets moved to z-space for the loss.
template <typename Model>
LabelSet z_space_labels(const Model& model, const std::vector<TaskSpec>& tasks,
                        const LabelSet& raw) {
    LabelSet out;
    for (const auto& t : tasks) {
        auto it = raw.find(t.name);
        if (it == raw.end()) continue;
        out[t.name] = t.kind == TaskKind::regression
                          ? model.reg_stats().to_z(t.name, it->second)
                          : it->second;
    }
    return out;
}

inline void fit_reg_stats(RegStats& stats, const std::vector<TaskSpec>& tasks,
                          const LoadedDataset& ds, const std::vector<std::size_t>& train) {
    for (const auto& t : tasks) {
        if (t.kind != TaskKind::regression) continue;
        std::vector<double> ys;
        for (std::size_t i : train) {
            auto it = ds.record(i).labels.find(t.name);
            if (it != ds.record(i).labels.end()) ys.push_back(it->second);
        }
        if (ys.empty()) continue;
        double mean = 0;
        for (double y : ys) mean += y;
        mean /= static_cast<double>(ys.size());
        double var = 0;
        for (double y : ys) var += (y - mean) * (y - mean);
        var /= static_cast<double>(ys.size());
        stats.by_task[t.name] = {mean, std::max(std::sqrt(var), 1e-6)};
    }
}

}  // namespace detail

struct EpochInfo {
    int epoch = 0;
    double lr = 0;
    double mean_loss = 0;
    std::size_t skipped_params = 0;
};

// Trains in place; the caller snapshots the checkpoint afterward. Works for
// PathRwkv and the tile-head baselines (same forward_slide surface).
template <typename Real, typename Model>
MetricReport train_model(Model& model, const std::vector<TaskSpec>& tasks,
                         const LoadedDataset& ds, const std::vector<std::size_t>& train_idx,
                         const TrainConfig& tc,
                         const std::function<void(const EpochInfo&)>& on_epoch = {}) {
    tc.validate();
    if (train_idx.empty()) throw ConfigError("empty training split");
    for (std::size_t i : train_idx) {
        bool any = false;
        for (const auto& t : tasks) any = any || ds.record(i).labels.count(t.name);
        if (!any)
            throw ConfigError("slide " + ds.record(i).slide_id +
                              " has no label for any configured task");
    }
    detail::fit_reg_stats(model.reg_stats(), tasks, ds, train_idx);

    LrSchedule sched(tc.base_lr, tc.warmup_epochs, tc.epochs, tc.lr_floor);
    MetricReport report;
    Stopwatch watch;

    std::vector<std::size_t> order(train_idx);
    for (int epoch = 0; epoch < tc.epochs; ++epoch) {
        const double lr = lr_at(sched, epoch);
        Rng shuffle_rng(mix_seed(tc.seed, 0xE0C0 + static_cast<std::uint64_t>(epoch)));
        shuffle_inplace(order, shuffle_rng);

        double loss_sum = 0;
        std::size_t loss_n = 0;
        std::size_t skipped = 0;
        for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(tc.batch_size)) {
            const std::size_t hi =
                std::min(order.size(), b + static_cast<std::size_t>(tc.batch_size));
            // count contributing slides first so each loss is scaled equally
            std::size_t contrib = 0;
            for (std::size_t s = b; s < hi; ++s) {
                for (const auto& t : tasks)
                    if (ds.record(order[s]).labels.count(t.name)) {
                        ++contrib;
                        break;
                    }
            }
            if (contrib == 0) continue;
            for (std::size_t s = b; s < hi; ++s) {
                const std::size_t slide = order[s];
                const auto labels =
                    detail::z_space_labels(model, tasks, ds.record(slide).labels);
                if (labels.empty()) continue;
                auto sub = sample_tiles(
                    ds.bag(slide), tc.max_n_tiles, tc.sampling,
                    mix_seed(tc.seed, (static_cast<std::uint64_t>(epoch) << 24) ^ slide));
                auto preds = model.forward_slide(sub);
                auto loss = total_loss(preds, labels, tasks);
                if (!loss) continue;
                const double lv = static_cast<double>(loss->item());
                if (!std::isfinite(lv))
                    throw NumericError("non-finite training loss at epoch " +
                                       std::to_string(epoch) + ", slide " +
                                       ds.record(slide).slide_id);
                loss_sum += lv;
                ++loss_n;
                backward(scale(*loss, Real(1) / static_cast<Real>(contrib)));
            }
            auto stats = model.params().adam_step(
                static_cast<Real>(lr), static_cast<Real>(tc.beta1),
                static_cast<Real>(tc.beta2), static_cast<Real>(tc.adam_eps));
            skipped += stats.skipped;
        }
        const double mean_loss = loss_n ? loss_sum / static_cast<double>(loss_n) : 0.0;
        report.loss_curve.push_back(mean_loss);
        report.skipped_updates += skipped;
        if (on_epoch) on_epoch({epoch, lr, mean_loss, skipped});
    }
    report.wall_seconds = watch.seconds();
    return report;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

enum class EvalMode { sampled, recurrent };

inline EvalMode parse_eval_mode(const std::string& s) {
    if (s == "sampled") return EvalMode::sampled;
    if (s == "recurrent") return EvalMode::recurrent;
    throw ConfigError("unknown eval mode: " + s);
}

// Raw head outputs (logits / z-space regression) for one slide.
template <typename Real>
std::vector<std::vector<double>> predict_outputs(const PathRwkv<Real>& model,
                                                 const TileBag& bag, EvalMode mode,
                                                 const TrainConfig& tc,
                                                 std::size_t bag_size,
                                                 std::uint64_t eval_seed) {
    NoGradGuard no_grad;
    if (mode == EvalMode::recurrent)
        return infer_slide_outputs(model, chunk_source(bag, bag_size));
    auto sub = sample_tiles(bag, tc.max_n_tiles, tc.sampling, eval_seed);
    auto preds = model.forward_slide(sub);
    std::vector<std::vector<double>> out;
    out.reserve(preds.size());
    for (auto& p : preds) out.emplace_back(p.value().begin(), p.value().end());
    return out;
}

template <typename Real>
std::vector<std::vector<double>> predict_outputs(const TileHeadBaseline<Real>& model,
                                                 const TileBag& bag, EvalMode mode,
                                                 const TrainConfig& tc, std::size_t,
                                                 std::uint64_t eval_seed) {
    NoGradGuard no_grad;
    const TileBag* use = &bag;
    TileBag sub;
    if (mode == EvalMode::sampled && bag.n > tc.max_n_tiles) {
        sub = sample_tiles(bag, tc.max_n_tiles, tc.sampling, eval_seed);
        use = &sub;
    }
    auto preds = model.forward_slide(*use);
    std::vector<std::vector<double>> out;
    out.reserve(preds.size());
    for (auto& p : preds) out.emplace_back(p.value().begin(), p.value().end());
    return out;
}

template <typename Real, typename Model>
MetricReport evaluate_model(const Model& model, const std::vector<TaskSpec>& tasks,
                            const LoadedDataset& ds, const std::vector<std::size_t>& subset,
                            EvalMode mode, const TrainConfig& tc, std::size_t bag_size,
                            int workers = 1) {
    if (subset.empty()) throw ConfigError("empty evaluation split");
    MetricReport report;
    Stopwatch watch;
    std::vector<std::vector<std::vector<double>>> outputs(subset.size());
    parallel_for(subset.size(), workers, [&](std::size_t i) {
        outputs[i] = predict_outputs(model, ds.bag(subset[i]), mode, tc, bag_size,
                                     mix_seed(tc.seed, 0xEBA1 + subset[i]));
    });

    for (std::size_t t = 0; t < tasks.size(); ++t) {
        const auto& task = tasks[t];
        TaskMetrics tm;
        if (task.kind == TaskKind::classification) {
            std::vector<int> truth, pred;
            std::vector<std::vector<double>> scores;
            for (std::size_t i = 0; i < subset.size(); ++i) {
                auto it = ds.record(subset[i]).labels.find(task.name);
                if (it == ds.record(subset[i]).labels.end()) continue;
                auto probs = softmax(outputs[i][t]);
                truth.push_back(static_cast<int>(std::lround(it->second)));
                pred.push_back(static_cast<int>(
                    std::max_element(probs.begin(), probs.end()) - probs.begin()));
                scores.push_back(std::move(probs));
            }
            tm.n = truth.size();
            if (!truth.empty()) {
                tm.accuracy = accuracy(pred, truth);
                try {
                    tm.auc = auc_macro_ovr(scores, truth, task.num_classes);
                } catch (const NumericError&) {
                }
            }
        } else {
            std::vector<double> ys, ps;
            for (std::size_t i = 0; i < subset.size(); ++i) {
                auto it = ds.record(subset[i]).labels.find(task.name);
                if (it == ds.record(subset[i]).labels.end()) continue;
                ys.push_back(it->second);
                ps.push_back(model.reg_stats().from_z(task.name, outputs[i][t][0]));
            }
            tm.n = ys.size();
            if (ys.size() >= 2) {
                try {
                    tm.correlation = pearson(ps, ys);
                } catch (const NumericError&) {
                }
            }
        }
        report.per_task[task.name] = tm;
    }
    report.wall_seconds = watch.seconds();
    return report;
}

}  // namespace prwk
