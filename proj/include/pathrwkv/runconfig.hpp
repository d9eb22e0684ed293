#pragma once

// Flat key/value run configuration: JSON document, every key defaulted,
// unknown keys rejected. The canonical form (sorted keys, defaults filled)
// hashes identically regardless of key order in the source file.

#include <json.hpp>

#include "pathrwkv/dataset.hpp"

namespace prwk {

struct RunConfig {
    // global
    std::uint64_t seed = 42;
    std::string precision = "f32";  // f32 | f64
    int workers = 1;
    // model
    std::size_t d_in = 384;
    std::size_t d_model = 64;
    std::size_t depth = 2;
    std::size_t heads = 0;
    std::size_t r_lora = 32;
    std::size_t r_decay = 64;
    std::size_t d_cm = 0;
    bool pe = true;
    std::string mtl_variant = "ours";
    std::string tasks = "witness:cls2,grade:cls4,fraction:reg,extent:reg";
    std::string model_kind = "pathrwkv";  // pathrwkv | slide_ave | slide_max
    // training
    int epochs = 100;
    int warmup_epochs = 20;
    double base_lr = 1e-4;
    double lr_floor = 0.01;
    int batch_size = 4;
    std::size_t max_n_tiles = 2000;
    std::string sampling = "random";
    std::string split = "0.7/0.1/0.2";
    // data generation
    std::size_t slides = 200;
    std::size_t grid_w = 20;
    std::size_t grid_h = 20;
    std::size_t tile_px = 16;
    double witness_rate = 0.05;
    double noise_sigma = 0.002;
    double blank_rate = 0.03;
    double neg_fraction = 0.5;
    double missing_rate = 0.0;
    std::uint64_t embedder_seed = 7;
    // inference / evaluation
    std::string mode = "recurrent";
    std::size_t bag_size = 512;
    std::string eval_split = "test";
    // paths
    std::string data_dir = "data";
    std::string out_dir = "runs";
    // bench / ablation
    std::string bench_n_grid = "1000,2000,4000,8000,16000,32000";
    std::size_t bench_d_ref = 32;
    std::string ablate_grid = "";

    // ---- typed views ----
    ModelConfig model_config() const {
        ModelConfig mc;
        mc.d_in = d_in;
        mc.d_model = d_model;
        mc.depth = depth;
        mc.heads = heads;
        mc.r_lora = r_lora;
        mc.r_decay = r_decay;
        mc.d_cm = d_cm;
        mc.use_pe = pe;
        mc.variant = parse_mtl_variant(mtl_variant);
        mc.tasks = parse_task_specs(tasks);
        return mc;
    }
    TrainConfig train_config() const {
        TrainConfig tc;
        tc.epochs = epochs;
        tc.warmup_epochs = warmup_epochs;
        tc.base_lr = base_lr;
        tc.lr_floor = lr_floor;
        tc.batch_size = batch_size;
        tc.max_n_tiles = max_n_tiles;
        tc.sampling = parse_sample_method(sampling);
        tc.seed = seed;
        return tc;
    }
    GenConfig gen_config() const {
        GenConfig gc;
        gc.slides = slides;
        gc.grid_w = grid_w;
        gc.grid_h = grid_h;
        gc.tile_px = tile_px;
        gc.witness_rate = witness_rate;
        gc.noise_sigma = noise_sigma;
        gc.blank_rate = blank_rate;
        gc.neg_fraction = neg_fraction;
        gc.missing_rate = missing_rate;
        gc.d_in = d_in;
        gc.seed = seed;
        gc.embedder_seed = embedder_seed;
        return gc;
    }
};

namespace detail {

template <typename T>
void cfg_field(nlohmann::json& j, const char* key, T& value, bool to_json) {
    if (to_json) {
        j[key] = value;
    } else if (j.contains(key)) {
        try {
            value = j.at(key).get<T>();
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("bad value for config key '") + key +
                              "': " + e.what());
        }
        j.erase(key);
    }
}

inline void cfg_visit(nlohmann::json& j, RunConfig& c, bool to_json) {
    cfg_field(j, "seed", c.seed, to_json);
    cfg_field(j, "precision", c.precision, to_json);
    cfg_field(j, "workers", c.workers, to_json);
    cfg_field(j, "d_in", c.d_in, to_json);
    cfg_field(j, "d_model", c.d_model, to_json);
    cfg_field(j, "depth", c.depth, to_json);
    cfg_field(j, "heads", c.heads, to_json);
    cfg_field(j, "r_lora", c.r_lora, to_json);
    cfg_field(j, "r_decay", c.r_decay, to_json);
    cfg_field(j, "d_cm", c.d_cm, to_json);
    cfg_field(j, "pe", c.pe, to_json);
    cfg_field(j, "mtl_variant", c.mtl_variant, to_json);
    cfg_field(j, "tasks", c.tasks, to_json);
    cfg_field(j, "model_kind", c.model_kind, to_json);
    cfg_field(j, "epochs", c.epochs, to_json);
    cfg_field(j, "warmup_epochs", c.warmup_epochs, to_json);
    cfg_field(j, "base_lr", c.base_lr, to_json);
    cfg_field(j, "lr_floor", c.lr_floor, to_json);
    cfg_field(j, "batch_size", c.batch_size, to_json);
    cfg_field(j, "max_n_tiles", c.max_n_tiles, to_json);
    cfg_field(j, "sampling", c.sampling, to_json);
    cfg_field(j, "split", c.split, to_json);
    cfg_field(j, "slides", c.slides, to_json);
    cfg_field(j, "grid_w", c.grid_w, to_json);
    cfg_field(j, "grid_h", c.grid_h, to_json);
    cfg_field(j, "tile_px", c.tile_px, to_json);
    cfg_field(j, "witness_rate", c.witness_rate, to_json);
    cfg_field(j, "noise_sigma", c.noise_sigma, to_json);
    cfg_field(j, "blank_rate", c.blank_rate, to_json);
    cfg_field(j, "neg_fraction", c.neg_fraction, to_json);
    cfg_field(j, "missing_rate", c.missing_rate, to_json);
    cfg_field(j, "embedder_seed", c.embedder_seed, to_json);
    cfg_field(j, "mode", c.mode, to_json);
    cfg_field(j, "bag_size", c.bag_size, to_json);
    cfg_field(j, "eval_split", c.eval_split, to_json);
    cfg_field(j, "data_dir", c.data_dir, to_json);
    cfg_field(j, "out_dir", c.out_dir, to_json);
    cfg_field(j, "bench_n_grid", c.bench_n_grid, to_json);
    cfg_field(j, "bench_d_ref", c.bench_d_ref, to_json);
    cfg_field(j, "ablate_grid", c.ablate_grid, to_json);
}

}  // namespace detail

inline RunConfig parse_run_config(const nlohmann::json& doc) {
    if (!doc.is_object()) throw ConfigError("config must be a JSON object");
    nlohmann::json j = doc;
    RunConfig c;
    detail::cfg_visit(j, c, false);
    if (!j.empty()) {
        std::string keys;
        for (auto it = j.begin(); it != j.end(); ++it) {
            if (!keys.empty()) keys += ", ";
            keys += it.key();
        }
        throw ConfigError("unknown config key(s): " + keys);
    }
    return c;
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file: " + path);
    nlohmann::json doc;
    try {
        is >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config parse error in " + path + ": " + e.what());
    }
    return parse_run_config(doc);
}

// Canonical form: all keys present, sorted (nlohmann objects iterate sorted).
inline nlohmann::json canonical_json(const RunConfig& c) {
    nlohmann::json j = nlohmann::json::object();
    detail::cfg_visit(j, const_cast<RunConfig&>(c), true);
    return j;
}

inline std::string config_hash(const RunConfig& c) {
    return to_hex(fnv1a64(canonical_json(c).dump()));
}

}  // namespace prwk
