#pragma once

// Synthetic dataset generation: per-slide witness densities (half the slides
// are witness-free), tile image synthesis, filtering, stub embedding, and
// bag + manifest output. Deterministic per seed, independent of worker count.

#include "pathrwkv/bagio.hpp"
#include "pathrwkv/train.hpp"

namespace prwk {

struct GenConfig {
    std::size_t slides = 200;
    std::size_t grid_w = 20;
    std::size_t grid_h = 20;
    std::size_t tile_px = 16;
    double witness_rate = 0.05;  // per-slide density upper bound
    double noise_sigma = 0.002;
    double blank_rate = 0.03;
    double neg_fraction = 0.5;   // slides generated with zero witness density
    double missing_rate = 0.0;   // chance of blanking each secondary label
    std::size_t d_in = 384;
    std::uint64_t seed = 42;
    std::uint64_t embedder_seed = 7;

    void validate() const {
        if (slides == 0) throw ConfigError("gen: slide count must be >= 1");
        if (grid_w * grid_h == 0) throw ConfigError("gen: empty grid");
        if (witness_rate < 0 || witness_rate > 1)
            throw ConfigError("gen: witness_rate must be in [0,1]");
    }
};

struct GenSummary {
    std::size_t slides = 0;
    std::size_t total_tiles = 0;
    std::size_t kept_tiles = 0;
    std::size_t positive_slides = 0;
    std::uint64_t manifest_hash = 0;
    double seconds = 0;
};

inline GenSummary generate_dataset(const GenConfig& cfg, const std::string& out_dir,
                                   int workers = 1, bool force = false) {
    cfg.validate();
    namespace fs = std::filesystem;
    const fs::path dir(out_dir);
    if (fs::exists(dir) && !fs::is_empty(dir)) {
        if (!force)
            throw ConfigError("output directory " + out_dir +
                              " is not empty (use --force to overwrite)");
        fs::remove_all(dir);
    }
    fs::create_directories(dir);

    Stopwatch watch;
    StubEmbedder embedder(cfg.d_in, cfg.tile_px, cfg.embedder_seed);

    struct PerSlide {
        SlideRecord record;
        std::size_t raw_tiles = 0;
        std::size_t kept = 0;
        bool positive = false;
    };
    std::vector<PerSlide> results(cfg.slides);

    parallel_for(cfg.slides, workers, [&](std::size_t i) {
        Rng slide_rng(mix_seed(cfg.seed, 0xD5A1 + i));
        SyntheticSlideSpec spec;
        spec.grid_w = cfg.grid_w;
        spec.grid_h = cfg.grid_h;
        spec.tile_px = cfg.tile_px;
        spec.noise_sigma = cfg.noise_sigma;
        spec.blank_rate = cfg.blank_rate;
        spec.seed = mix_seed(cfg.seed, 0x711E + i);
        // positive slides span two orders of magnitude in witness density, so
        // the weakest carry only a handful of witness tiles
        spec.witness_rate = uniform01(slide_rng) < cfg.neg_fraction
                                ? 0.0
                                : cfg.witness_rate * uniform(slide_rng, 0.02, 1.0);

        auto sample = generate_slide(spec);
        auto kept = filter_tiles(sample.tiles);

        TileBag bag;
        char name[32];
        std::snprintf(name, sizeof(name), "slide_%04zu", i);
        bag.slide_id = name;
        bag.d_in = cfg.d_in;
        bag.n = kept.size();
        bag.features.reserve(kept.size() * cfg.d_in);
        bag.coords.reserve(kept.size());
        for (std::size_t k : kept) {
            auto f = embedder.embed(sample.tiles[k]);
            bag.features.insert(bag.features.end(), f.begin(), f.end());
            bag.coords.push_back(sample.coords[k]);
        }
        const std::string file = bag.slide_id + std::string(".prwk");
        write_bag((dir / file).string(), bag);

        PerSlide r;
        r.record.slide_id = bag.slide_id;
        r.record.path = file;
        r.record.n_tiles = bag.n;
        r.record.labels = sample.labels;
        if (cfg.missing_rate > 0) {
            // never blank the primary witness label; training requires >= 1 label
            for (auto it = r.record.labels.begin(); it != r.record.labels.end();) {
                if (it->first != "witness" && uniform01(slide_rng) < cfg.missing_rate)
                    it = r.record.labels.erase(it);
                else
                    ++it;
            }
        }
        r.raw_tiles = cfg.grid_w * cfg.grid_h;
        r.kept = bag.n;
        r.positive = sample.labels.at("witness") > 0.5;
        results[i] = std::move(r);
    });

    Manifest manifest;
    for (const auto& t : synthetic_tasks()) manifest.task_names.push_back(t.name);
    GenSummary summary;
    summary.slides = cfg.slides;
    for (auto& r : results) {
        manifest.records.push_back(std::move(r.record));
        summary.total_tiles += r.raw_tiles;
        summary.kept_tiles += r.kept;
        summary.positive_slides += r.positive ? 1 : 0;
    }
    const std::string manifest_path = (dir / "manifest.tsv").string();
    write_manifest(manifest_path, manifest);

    std::ifstream is(manifest_path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(is)),
                      std::istreambuf_iterator<char>());
    summary.manifest_hash = fnv1a64(bytes);
    summary.seconds = watch.seconds();
    return summary;
}

inline std::vector<TaskSpec> parse_task_specs(const std::string& spec) {
    std::vector<TaskSpec> tasks;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        const auto colon = item.find(':');
        if (colon == std::string::npos)
            throw ConfigError("task spec needs name:kind, got '" + item + "'");
        TaskSpec t;
        t.name = item.substr(0, colon);
        const std::string kind = item.substr(colon + 1);
        if (kind == "reg") {
            t.kind = TaskKind::regression;
            t.num_classes = 1;
        } else if (kind.rfind("cls", 0) == 0) {
            t.kind = TaskKind::classification;
            t.num_classes = std::stoi(kind.substr(3));
            if (t.num_classes < 2)
                throw ConfigError("classification task " + t.name + " needs >= 2 classes");
        } else {
            throw ConfigError("unknown task kind '" + kind + "' for task " + t.name);
        }
        tasks.push_back(std::move(t));
    }
    if (tasks.empty()) throw ConfigError("empty task list");
    return tasks;
}

inline std::string task_specs_to_string(const std::vector<TaskSpec>& tasks) {
    std::string out;
    for (const auto& t : tasks) {
        if (!out.empty()) out += ",";
        out += t.name + ":" +
               (t.kind == TaskKind::regression ? "reg"
                                               : "cls" + std::to_string(t.num_classes));
    }
    return out;
}

}  // namespace prwk
