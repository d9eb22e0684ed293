#pragma once

// PathRwkv slide model: input projection with optional grid positional
// embedding, a stack of Time Mix / Channel Mix blocks, and the multi-task
// module. Also the SlideAve/SlideMax tile-head baselines. Both model kinds
// serialize to the PRWK checkpoint format with config and task statistics
// carried in reserved meta entries.

#include "pathrwkv/bagio.hpp"
#include "pathrwkv/data.hpp"
#include "pathrwkv/mtl.hpp"
#include "pathrwkv/rwkv.hpp"

namespace prwk {

struct ModelConfig {
    std::size_t d_in = 384;
    std::size_t d_model = 64;
    std::size_t depth = 2;
    std::size_t heads = 0;   // 0 = auto: d_model/64, min 1
    std::size_t r_lora = 32;
    std::size_t r_decay = 64;
    std::size_t d_cm = 0;    // 0 = auto: 2*d_model
    bool use_pe = true;
    MtlVariant variant = MtlVariant::ours;
    std::vector<TaskSpec> tasks;

    std::size_t resolved_heads() const {
        return heads ? heads : std::max<std::size_t>(1, d_model / 64);
    }
    std::size_t resolved_d_cm() const { return d_cm ? d_cm : 2 * d_model; }

    void validate() const {
        if (tasks.empty()) throw ConfigError("model needs at least one task");
        if (d_model == 0 || d_in == 0 || depth == 0)
            throw ConfigError("model dimensions must be positive");
        if (d_model % resolved_heads() != 0)
            throw ConfigError("d_model must be divisible by head count");
        if (use_pe && d_model % 4 != 0)
            throw ConfigError("positional embedding dim must be divisible by 4");
        for (const auto& t : tasks) {
            if (t.kind == TaskKind::classification && t.num_classes < 2)
                throw ConfigError("classification task " + t.name + " needs >= 2 classes");
        }
    }
};

// Per-task z-score statistics for regression targets, learned from the
// training split and stored in the checkpoint.
struct RegStats {
    std::map<std::string, std::pair<double, double>> by_task;  // mean, std

    double to_z(const std::string& task, double y) const {
        auto it = by_task.find(task);
        if (it == by_task.end()) return y;
        return (y - it->second.first) / it->second.second;
    }
    double from_z(const std::string& task, double z) const {
        auto it = by_task.find(task);
        if (it == by_task.end()) return z;
        return z * it->second.second + it->second.first;
    }
};

template <typename Real>
class PathRwkv {
public:
    PathRwkv(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
        cfg_.validate();
        Rng rng(seed);
        const std::size_t d = cfg_.d_model;
        const std::size_t h = cfg_.resolved_heads();
        const double in_std = 1.0 / std::sqrt(static_cast<double>(cfg_.d_in));
        const double d_std = 1.0 / std::sqrt(static_cast<double>(d));

        w_in_ = store_.add("in.w", detail::randn_tensor<Real>({cfg_.d_in, d}, rng, in_std));
        b_in_ = store_.add("in.b", Tensor<Real>::zeros({d}));
        for (std::size_t b = 0; b < cfg_.depth; ++b) {
            blocks_.push_back(make_block_params(store_, "blocks." + std::to_string(b) + ".",
                                                d, h, cfg_.r_lora, cfg_.r_decay,
                                                cfg_.resolved_d_cm(), rng));
        }
        ln_out_g_ = store_.add("ln_out.g", Tensor<Real>::filled({d}, Real(1)));
        ln_out_b_ = store_.add("ln_out.b", Tensor<Real>::zeros({d}));

        const std::size_t t_count = cfg_.tasks.size();
        if (cfg_.variant == MtlVariant::ours) {
            proj_w_ = store_.add("mtl.proj_w",
                                 detail::randn_tensor<Real>({d, d * t_count}, rng, d_std));
            proj_b_ = store_.add("mtl.proj_b", Tensor<Real>::zeros({d * t_count}));
        } else if (cfg_.variant == MtlVariant::through) {
            mtl_tokens_ = store_.add("mtl.tokens",
                                     detail::randn_tensor<Real>({t_count, d}, rng, 0.3));
        }
        for (std::size_t t = 0; t < t_count; ++t) {
            const auto& task = cfg_.tasks[t];
            const std::size_t k = static_cast<std::size_t>(task.head_width());
            head_w_.push_back(store_.add("head." + task.name + ".w",
                                         detail::randn_tensor<Real>({d, k}, rng, d_std)));
            head_b_.push_back(
                store_.add("head." + task.name + ".b", Tensor<Real>::zeros({k})));
        }
    }

    const ModelConfig& config() const { return cfg_; }
    ParamStore<Real>& params() { return store_; }
    const ParamStore<Real>& params() const { return store_; }
    RegStats& reg_stats() { return reg_stats_; }
    const RegStats& reg_stats() const { return reg_stats_; }

    RwkvState<Real> fresh_state() const {
        RwkvState<Real> s;
        s.reset(cfg_.depth, cfg_.d_model, cfg_.resolved_heads());
        return s;
    }

    // Input projection plus positional embedding.
    Tensor<Real> embed(const float* features, std::size_t n,
                       std::span<const GridCoord> coords) const {
        auto x = Tensor<Real>::zeros({n, cfg_.d_in});
        auto xv = x.value();
        for (std::size_t i = 0; i < n * cfg_.d_in; ++i)
            xv[i] = static_cast<Real>(features[i]);
        auto proj = add(matmul(x, w_in_), b_in_);
        if (!cfg_.use_pe) return proj;
        return add(proj, positional_embedding<Real>(coords, cfg_.d_model, true));
    }

    Tensor<Real> embed(const TileBag& bag) const {
        if (bag.d_in != cfg_.d_in)
            throw DataError("bag feature dim " + std::to_string(bag.d_in) +
                            " does not match model d_in " + std::to_string(cfg_.d_in));
        return embed(bag.features.data(), bag.n, bag.coords);
    }

    // Blocks plus final layer norm, advancing the carried state.
    Tensor<Real> backbone_chunk(const Tensor<Real>& x, RwkvState<Real>& state) const {
        if (state.blocks.size() != cfg_.depth)
            throw ContractError("backbone_chunk: state depth mismatch");
        Tensor<Real> h = x;
        for (std::size_t b = 0; b < cfg_.depth; ++b)
            h = block_forward(h, state.blocks[b], blocks_[b]);
        return layer_norm(h, ln_out_g_, ln_out_b_);
    }

    // Per-task per-tile feature streams; defined for the 'ours' variant,
    // which is the streamable aggregation path.
    std::vector<Tensor<Real>> per_tile_task_features(const Tensor<Real>& y) const {
        if (cfg_.variant != MtlVariant::ours)
            throw ContractError("per-tile task features exist only for the ours variant");
        return mtl_project(y, proj_w_, proj_b_, cfg_.tasks.size());
    }

    Tensor<Real> mtl_token_rows() const {
        if (cfg_.variant != MtlVariant::through)
            throw ContractError("mtl tokens exist only for the through variant");
        return mtl_tokens_;
    }

    std::vector<Tensor<Real>> heads_from_features(
        const std::vector<Tensor<Real>>& feats) const {
        if (feats.size() != cfg_.tasks.size())
            throw ContractError("feature/task count mismatch");
        std::vector<Tensor<Real>> preds;
        preds.reserve(feats.size());
        for (std::size_t t = 0; t < feats.size(); ++t)
            preds.push_back(head_forward(feats[t], head_w_[t], head_b_[t]));
        return preds;
    }

    // Single-chunk forward over one (possibly sampled) bag; fresh state.
    std::vector<Tensor<Real>> forward_slide(const TileBag& bag) const {
        auto state = fresh_state();
        auto x = embed(bag);
        const std::size_t n = bag.n;
        if (cfg_.variant == MtlVariant::through)
            x = concat_rows(x, mtl_tokens_);
        auto y = backbone_chunk(x, state);
        std::vector<Tensor<Real>> feats;
        switch (cfg_.variant) {
            case MtlVariant::ours: {
                auto streams = per_tile_task_features(y);
                for (auto& s : streams) feats.push_back(select_max_tile(s));
                break;
            }
            case MtlVariant::to: {
                auto m = col_mean(y);
                feats.assign(cfg_.tasks.size(), m);
                break;
            }
            case MtlVariant::through: {
                for (std::size_t t = 0; t < cfg_.tasks.size(); ++t)
                    feats.push_back(slice_rows(y, n + t, n + t + 1));
                break;
            }
        }
        return heads_from_features(feats);
    }

    CheckpointMap to_checkpoint() const {
        CheckpointMap m = snapshot_params(store_);
        m["meta.format"] = {{1}, {1.0f}};
        m["meta.arch"] = {{1}, {0.0f}};
        m["meta.model"] = {{9},
                           {static_cast<float>(cfg_.d_in), static_cast<float>(cfg_.d_model),
                            static_cast<float>(cfg_.depth),
                            static_cast<float>(cfg_.resolved_heads()),
                            static_cast<float>(cfg_.r_lora),
                            static_cast<float>(cfg_.r_decay),
                            static_cast<float>(cfg_.resolved_d_cm()),
                            cfg_.use_pe ? 1.0f : 0.0f,
                            static_cast<float>(static_cast<int>(cfg_.variant))}};
        write_task_meta(m, cfg_.tasks, reg_stats_);
        return m;
    }

    static PathRwkv from_checkpoint(const CheckpointMap& m) {
        auto arch = m.find("meta.arch");
        if (arch == m.end() || arch->second.data.empty() || arch->second.data[0] != 0.0f)
            throw DataError("checkpoint does not hold a PathRwkv model");
        auto it = m.find("meta.model");
        if (it == m.end() || it->second.data.size() != 9)
            throw DataError("checkpoint missing model meta entry");
        const auto& v = it->second.data;
        ModelConfig cfg;
        cfg.d_in = static_cast<std::size_t>(v[0]);
        cfg.d_model = static_cast<std::size_t>(v[1]);
        cfg.depth = static_cast<std::size_t>(v[2]);
        cfg.heads = static_cast<std::size_t>(v[3]);
        cfg.r_lora = static_cast<std::size_t>(v[4]);
        cfg.r_decay = static_cast<std::size_t>(v[5]);
        cfg.d_cm = static_cast<std::size_t>(v[6]);
        cfg.use_pe = v[7] != 0.0f;
        cfg.variant = static_cast<MtlVariant>(static_cast<int>(v[8]));
        RegStats stats;
        cfg.tasks = read_task_meta(m, stats);
        PathRwkv model(cfg, 0);
        restore_params(model.store_, m);
        model.reg_stats_ = std::move(stats);
        return model;
    }

    static void write_task_meta(CheckpointMap& m, const std::vector<TaskSpec>& tasks,
                                const RegStats& stats) {
        for (std::size_t i = 0; i < tasks.size(); ++i) {
            const auto& t = tasks[i];
            char idx[8];
            std::snprintf(idx, sizeof(idx), "%02zu", i);
            double mean = 0, std = 1;
            if (auto it = stats.by_task.find(t.name); it != stats.by_task.end()) {
                mean = it->second.first;
                std = it->second.second;
            }
            m["meta.task." + std::string(idx) + "." + t.name] = {
                {4},
                {t.kind == TaskKind::classification ? 0.0f : 1.0f,
                 static_cast<float>(t.num_classes), static_cast<float>(mean),
                 static_cast<float>(std)}};
        }
    }

    static std::vector<TaskSpec> read_task_meta(const CheckpointMap& m, RegStats& stats) {
        std::vector<TaskSpec> tasks;
        for (const auto& [key, arr] : m) {
            if (key.rfind("meta.task.", 0) != 0) continue;
            // key layout: meta.task.<idx>.<name>
            const std::size_t dot = key.find('.', 10);
            if (dot == std::string::npos || arr.data.size() != 4)
                throw DataError("malformed task meta entry: " + key);
            TaskSpec t;
            t.name = key.substr(dot + 1);
            t.kind = arr.data[0] == 0.0f ? TaskKind::classification : TaskKind::regression;
            t.num_classes = static_cast<int>(arr.data[1]);
            if (t.kind == TaskKind::regression)
                stats.by_task[t.name] = {arr.data[2], arr.data[3]};
            tasks.push_back(std::move(t));
        }
        if (tasks.empty()) throw DataError("checkpoint has no task meta entries");
        return tasks;  // map iteration is ordered by the zero-padded index
    }

private:
    ModelConfig cfg_;
    ParamStore<Real> store_;
    Tensor<Real> w_in_, b_in_, ln_out_g_, ln_out_b_;
    std::vector<BlockParams<Real>> blocks_;
    Tensor<Real> proj_w_, proj_b_;
    Tensor<Real> mtl_tokens_;
    std::vector<Tensor<Real>> head_w_, head_b_;
    RegStats reg_stats_;
};

// ---------------------------------------------------------------------------
// SlideAve / SlideMax baselines: per-task linear heads applied to every tile
// embedding, aggregated by column mean / max of the tile-level outputs.
// ---------------------------------------------------------------------------

enum class TileAgg { mean, max };

template <typename Real>
class TileHeadBaseline {
public:
    TileHeadBaseline(std::vector<TaskSpec> tasks, std::size_t d_in, TileAgg agg,
                     std::uint64_t seed)
        : tasks_(std::move(tasks)), d_in_(d_in), agg_(agg) {
        Rng rng(seed);
        const double std = 1.0 / std::sqrt(static_cast<double>(d_in));
        for (const auto& t : tasks_) {
            const std::size_t k = static_cast<std::size_t>(t.head_width());
            head_w_.push_back(store_.add("tile_head." + t.name + ".w",
                                         detail::randn_tensor<Real>({d_in, k}, rng, std)));
            head_b_.push_back(
                store_.add("tile_head." + t.name + ".b", Tensor<Real>::zeros({k})));
        }
    }

    const std::vector<TaskSpec>& tasks() const { return tasks_; }
    ParamStore<Real>& params() { return store_; }
    RegStats& reg_stats() { return reg_stats_; }
    const RegStats& reg_stats() const { return reg_stats_; }
    TileAgg agg() const { return agg_; }

    std::vector<Tensor<Real>> forward_slide(const TileBag& bag) const {
        if (bag.d_in != d_in_)
            throw DataError("bag feature dim does not match baseline d_in");
        auto x = Tensor<Real>::zeros({bag.n, d_in_});
        auto xv = x.value();
        for (std::size_t i = 0; i < bag.n * d_in_; ++i)
            xv[i] = static_cast<Real>(bag.features[i]);
        std::vector<Tensor<Real>> preds;
        for (std::size_t t = 0; t < tasks_.size(); ++t) {
            auto tile_logits = add(matmul(x, head_w_[t]), head_b_[t]);  // [n x K]
            auto agg = agg_ == TileAgg::mean ? col_mean(tile_logits)
                                             : col_max(tile_logits);
            preds.push_back(detail::as_row(agg));
        }
        return preds;
    }

    CheckpointMap to_checkpoint() const {
        CheckpointMap m = snapshot_params(store_);
        m["meta.format"] = {{1}, {1.0f}};
        m["meta.arch"] = {{1}, {agg_ == TileAgg::mean ? 1.0f : 2.0f}};
        m["meta.baseline"] = {{1}, {static_cast<float>(d_in_)}};
        PathRwkv<Real>::write_task_meta(m, tasks_, reg_stats_);
        return m;
    }

    static TileHeadBaseline from_checkpoint(const CheckpointMap& m) {
        auto arch = m.find("meta.arch");
        if (arch == m.end() || arch->second.data.empty() ||
            (arch->second.data[0] != 1.0f && arch->second.data[0] != 2.0f))
            throw DataError("checkpoint does not hold a tile-head baseline");
        auto it = m.find("meta.baseline");
        if (it == m.end() || it->second.data.size() != 1)
            throw DataError("checkpoint missing baseline meta entry");
        RegStats stats;
        auto tasks = PathRwkv<Real>::read_task_meta(m, stats);
        TileHeadBaseline model(tasks, static_cast<std::size_t>(it->second.data[0]),
                               arch->second.data[0] == 1.0f ? TileAgg::mean : TileAgg::max,
                               0);
        restore_params(model.store_, m);
        model.reg_stats_ = std::move(stats);
        return model;
    }

private:
    std::vector<TaskSpec> tasks_;
    std::size_t d_in_;
    TileAgg agg_;
    ParamStore<Real> store_;
    std::vector<Tensor<Real>> head_w_, head_b_;
    RegStats reg_stats_;
};

}  // namespace prwk
