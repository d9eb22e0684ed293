// prwk: synthetic slide generation, training, inference, verification,
// ablations, and scaling benches for the PathRwkv pipeline.
//
// Exit codes: 0 success, 1 usage/config, 2 data/format, 3 numeric failure,
// 4 property failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <iostream>

#include "pathrwkv/ablation.hpp"
#include "pathrwkv/verify.hpp"

using nlohmann::json;
using namespace prwk;

namespace {

struct CliOverrides {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> mode;
    std::optional<std::size_t> bag_size;
    std::optional<std::size_t> max_n_tiles;
    std::optional<int> epochs;
    std::optional<int> workers;
    std::optional<std::string> precision;
    std::optional<std::string> data_dir;
    std::optional<std::string> out_dir;
    std::optional<std::string> grid;
    bool force = false;
};

void add_common_flags(CLI::App* cmd, CliOverrides& ov) {
    cmd->add_option("--config", ov.config_path, "JSON run configuration file")
        ->envname("PRWK_CONFIG");
    cmd->add_option("--seed", ov.seed, "random seed")->envname("PRWK_SEED");
    cmd->add_option("--workers", ov.workers, "parallel worker cap (default 1)")
        ->envname("PRWK_WORKERS");
    cmd->add_option("--precision", ov.precision, "f32 or f64")->envname("PRWK_PRECISION");
    cmd->add_option("--data-dir", ov.data_dir, "dataset directory")
        ->envname("PRWK_DATA_DIR");
    cmd->add_option("--out-dir", ov.out_dir, "output directory")->envname("PRWK_OUT_DIR");
}

RunConfig resolve_config(const CliOverrides& ov) {
    RunConfig rc = ov.config_path.empty() ? RunConfig{} : load_run_config(ov.config_path);
    if (ov.seed) rc.seed = *ov.seed;
    if (ov.mode) rc.mode = *ov.mode;
    if (ov.bag_size) rc.bag_size = *ov.bag_size;
    if (ov.max_n_tiles) rc.max_n_tiles = *ov.max_n_tiles;
    if (ov.epochs) rc.epochs = *ov.epochs;
    if (ov.workers) rc.workers = *ov.workers;
    if (ov.precision) rc.precision = *ov.precision;
    if (ov.data_dir) rc.data_dir = *ov.data_dir;
    if (ov.out_dir) rc.out_dir = *ov.out_dir;
    if (ov.grid) rc.ablate_grid = *ov.grid;
    if (rc.precision != "f32" && rc.precision != "f64")
        throw ConfigError("precision must be f32 or f64, got " + rc.precision);
    // short smoke runs: keep the warmup fraction when --epochs undercuts it
    if (ov.epochs && rc.warmup_epochs >= rc.epochs) rc.warmup_epochs = rc.epochs / 5;
    return rc;
}

json metrics_to_json(const MetricReport& rep) {
    json out = json::object();
    for (const auto& [name, m] : rep.per_task) {
        json t = json::object();
        if (m.accuracy) t["accuracy"] = *m.accuracy;
        if (m.auc) t["auc"] = *m.auc;
        if (m.correlation) t["correlation"] = *m.correlation;
        t["n"] = m.n;
        out[name] = t;
    }
    return out;
}

void print_metrics(const std::vector<TaskSpec>& tasks, const MetricReport& rep,
                   const std::string& heading) {
    Table t;
    t.title = heading;
    t.columns.push_back("split");
    detail::metric_columns(tasks, t.columns);
    std::vector<std::string> row{heading};
    detail::metric_cells(tasks, rep, row);
    t.rows.push_back(row);
    t.print(std::cout);
}

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------

int cmd_gen(const RunConfig& rc, bool force) {
    if (rc.slides == 0) throw ConfigError("gen: slide count must be >= 1");
    auto summary = generate_dataset(rc.gen_config(), rc.data_dir, rc.workers, force);
    std::cout << "dataset " << rc.data_dir << ": " << summary.slides << " slides, "
              << summary.kept_tiles << "/" << summary.total_tiles << " tiles kept, "
              << summary.positive_slides << " positive\n"
              << "manifest hash " << to_hex(summary.manifest_hash) << ", "
              << summary.seconds << " s\n";
    return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

template <typename Real, typename Model>
int train_and_report(Model& model, const std::vector<TaskSpec>& tasks, const RunConfig& rc,
                     const LoadedDataset& ds, const SplitIdx& split) {
    namespace fs = std::filesystem;
    fs::create_directories(rc.out_dir);
    const std::string summary_path = (fs::path(rc.out_dir) / "summary.jsonl").string();
    std::ofstream summary(summary_path, std::ios::trunc);
    const std::string hash = config_hash(rc);

    TrainConfig tc = rc.train_config();
    Stopwatch watch;
    auto rep = train_model<Real>(model, tasks, ds, split.train, tc,
                                 [&](const EpochInfo& e) {
                                     json line = {{"event", "epoch"},
                                                  {"epoch", e.epoch},
                                                  {"lr", e.lr},
                                                  {"train_loss", e.mean_loss},
                                                  {"skipped_params", e.skipped_params}};
                                     summary << line.dump() << '\n';
                                     if (e.epoch % 10 == 0 || e.epoch + 1 == tc.epochs)
                                         std::cout << "epoch " << e.epoch << " lr " << e.lr
                                                   << " loss " << e.mean_loss << '\n';
                                 });

    const auto& eval_idx = split.val.empty() ? split.test : split.val;
    MetricReport val;
    if (!eval_idx.empty())
        val = evaluate_model<Real>(model, tasks, ds, eval_idx, parse_eval_mode(rc.mode),
                                   tc, rc.bag_size, rc.workers);

    const std::string ckpt_path = (fs::path(rc.out_dir) / "checkpoint.prwk").string();
    save_checkpoint(ckpt_path, model.to_checkpoint());

    json final_line = {{"event", "final"},
                       {"config_hash", hash},
                       {"seed", rc.seed},
                       {"train_loss", rep.loss_curve.empty() ? 0.0 : rep.loss_curve.back()},
                       {"wall_seconds", watch.seconds()},
                       {"peak_tensor_bytes", tensor_mem().peak()},
                       {"checkpoint", ckpt_path},
                       {"metrics", metrics_to_json(val)}};
    summary << final_line.dump() << '\n';

    std::cout << "checkpoint written to " << ckpt_path << "\n"
              << "summary written to " << summary_path << "\n";
    if (!eval_idx.empty()) {
        const std::string label = split.val.empty() ? "test" : "val";
        print_metrics(tasks, val, label);
        Table t;
        t.columns.push_back("split");
        detail::metric_columns(tasks, t.columns);
        std::vector<std::string> row{label};
        detail::metric_cells(tasks, val, row);
        t.rows.push_back(row);
        std::ofstream os((fs::path(rc.out_dir) / "metrics.tsv").string(), std::ios::trunc);
        os << t.tsv();
    }
    return 0;
}

void require_tasks_in_manifest(const std::vector<TaskSpec>& tasks, const Manifest& m) {
    for (const auto& t : tasks) {
        if (std::find(m.task_names.begin(), m.task_names.end(), t.name) ==
            m.task_names.end())
            throw ConfigError("task '" + t.name + "' has no column in the manifest");
    }
}

template <typename Real>
int do_train(const RunConfig& rc) {
    auto ds = load_dataset(rc.data_dir + "/manifest.tsv", rc.workers);
    auto split = split_dataset(ds.size(), rc.split, rc.seed);
    auto tasks = parse_task_specs(rc.tasks);
    require_tasks_in_manifest(tasks, ds.manifest);
    if (rc.model_kind == "pathrwkv") {
        ModelConfig mc = rc.model_config();
        PathRwkv<Real> model(mc, rc.seed);
        return train_and_report<Real>(model, tasks, rc, ds, split);
    }
    if (rc.model_kind == "slide_ave" || rc.model_kind == "slide_max") {
        TileHeadBaseline<Real> model(tasks, rc.d_in,
                                     rc.model_kind == "slide_ave" ? TileAgg::mean
                                                                  : TileAgg::max,
                                     rc.seed);
        return train_and_report<Real>(model, tasks, rc, ds, split);
    }
    throw ConfigError("unknown model_kind: " + rc.model_kind);
}

// ---------------------------------------------------------------------------
// infer
// ---------------------------------------------------------------------------

template <typename Real>
json predictions_json(const PathRwkv<Real>& model,
                      const std::vector<std::vector<double>>& outputs) {
    json tasks = json::object();
    const auto& specs = model.config().tasks;
    for (std::size_t t = 0; t < specs.size(); ++t) {
        if (specs[t].kind == TaskKind::classification) {
            auto probs = softmax(outputs[t]);
            tasks[specs[t].name] = {{"probs", probs}};
        } else {
            tasks[specs[t].name] = {
                {"value", model.reg_stats().from_z(specs[t].name, outputs[t][0])}};
        }
    }
    return tasks;
}

template <typename Real>
int do_infer(const RunConfig& rc, const std::string& ckpt_path, const std::string& bag_path) {
    auto ckpt = load_checkpoint(ckpt_path);
    auto model = PathRwkv<Real>::from_checkpoint(ckpt);
    const auto mode = parse_eval_mode(rc.mode);

    std::vector<std::vector<double>> outputs;
    if (mode == EvalMode::recurrent) {
        outputs = infer_slide_outputs(
            model, file_source(bag_path, rc.bag_size, model.config().d_in));
    } else {
        auto bag = read_bag(bag_path);
        TrainConfig tc = rc.train_config();
        outputs = predict_outputs(model, bag, EvalMode::sampled, tc, rc.bag_size,
                                  mix_seed(rc.seed, 0x1f));
    }

    auto tasks_json = predictions_json(model, outputs);
    const auto& specs = model.config().tasks;
    for (std::size_t t = 0; t < specs.size(); ++t) {
        std::cout << specs[t].name << ": ";
        if (specs[t].kind == TaskKind::classification) {
            auto probs =
                tasks_json[specs[t].name]["probs"].template get<std::vector<double>>();
            const std::size_t best = static_cast<std::size_t>(
                std::max_element(probs.begin(), probs.end()) - probs.begin());
            std::cout << "class " << best << " (probs";
            for (double p : probs) std::cout << " " << p;
            std::cout << ")";
        } else {
            std::cout << tasks_json[specs[t].name]["value"].template get<double>();
        }
        std::cout << '\n';
    }
    json line = {{"slide", std::filesystem::path(bag_path).stem().string()},
                 {"mode", rc.mode},
                 {"bag_size", rc.bag_size},
                 {"tasks", tasks_json}};
    std::cout << line.dump() << '\n';
    return 0;
}

// ---------------------------------------------------------------------------
// verify / ablate / bench
// ---------------------------------------------------------------------------

int do_verify(const RunConfig& rc, const std::string& level) {
    if (level != "fast" && level != "full")
        throw ConfigError("verify level must be fast or full");
    VerifyOptions opt;
    opt.full = level == "full";
    opt.seed = rc.seed;
    auto results = run_verification(opt);
    bool all = true;
    for (const auto& r : results) {
        std::cout << (r.pass ? "PASS " : "FAIL ") << r.name << " [" << r.detail
                  << "] (" << r.seconds << " s, seed " << r.seed << ")\n";
        all = all && r.pass;
    }
    if (!all) {
        std::cout << "verification failed\n";
        return 4;
    }
    std::cout << "all properties hold\n";
    return 0;
}

template <typename Real>
int do_ablate(const RunConfig& rc, const std::string& axis_name) {
    auto axis = parse_ablation_axis(axis_name);
    auto ds = load_dataset(rc.data_dir + "/manifest.tsv", rc.workers);
    require_tasks_in_manifest(parse_task_specs(rc.tasks), ds.manifest);
    auto table = run_ablation<Real>(axis, rc, ds);
    table.print(std::cout);
    namespace fs = std::filesystem;
    fs::create_directories(rc.out_dir);
    const std::string path =
        (fs::path(rc.out_dir) / ("ablate_" + axis_name + ".tsv")).string();
    std::ofstream os(path, std::ios::trunc);
    os << table.tsv();
    std::cout << "table written to " << path << '\n';
    return 0;
}

int do_bench(const RunConfig& rc) {
    auto grid = detail::parse_size_list(rc.bench_n_grid);
    ModelConfig mc = rc.model_config();
    auto rep = bench_scaling(mc, grid, rc.bag_size, rc.bench_d_ref, rc.seed);
    auto table = bench_table(rep);
    table.print(std::cout);
    std::cout << "log-log slopes: recurrent " << rep.slope_recurrent << ", quadratic "
              << rep.slope_quadratic << "; peak-memory spread " << rep.mem_spread
              << '\n';
    namespace fs = std::filesystem;
    fs::create_directories(rc.out_dir);
    const std::string path = (fs::path(rc.out_dir) / "bench.tsv").string();
    std::ofstream os(path, std::ios::trunc);
    os << table.tsv();
    std::cout << "table written to " << path << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"PathRwkv slide-model pipeline"};
    app.require_subcommand(1);

    CliOverrides ov;
    std::string infer_ckpt, infer_bag, verify_level = "fast", ablate_axis;

    auto* gen = app.add_subcommand("gen", "generate a synthetic slide dataset");
    add_common_flags(gen, ov);
    gen->add_flag("--force", ov.force, "overwrite a non-empty output directory")
        ->envname("PRWK_FORCE");

    auto* train = app.add_subcommand("train", "train a model and write a checkpoint");
    add_common_flags(train, ov);
    train->add_option("--epochs", ov.epochs, "training epochs")->envname("PRWK_EPOCHS");
    train->add_option("--max-n-tiles", ov.max_n_tiles, "tile cap per slide")
        ->envname("PRWK_MAX_N_TILES");
    train->add_option("--mode", ov.mode, "evaluation mode: sampled|recurrent")
        ->envname("PRWK_MODE");
    train->add_option("--bag-size", ov.bag_size, "recurrent inference bag size")
        ->envname("PRWK_BAG_SIZE");

    auto* infer = app.add_subcommand("infer", "predict one slide from a bag file");
    add_common_flags(infer, ov);
    infer->add_option("checkpoint", infer_ckpt, "checkpoint file")->required();
    infer->add_option("bag", infer_bag, "tile bag file")->required();
    infer->add_option("--mode", ov.mode, "sampled|recurrent (default recurrent)")
        ->envname("PRWK_MODE");
    infer->add_option("--bag-size", ov.bag_size, "bag size for recurrent mode")
        ->envname("PRWK_BAG_SIZE");
    infer->add_option("--max-n-tiles", ov.max_n_tiles, "tile cap in sampled mode")
        ->envname("PRWK_MAX_N_TILES");

    auto* verify = app.add_subcommand("verify", "run the property suites");
    add_common_flags(verify, ov);
    verify->add_option("--level", verify_level, "fast|full")->envname("PRWK_LEVEL");

    auto* ablate = app.add_subcommand("ablate", "run one ablation axis");
    add_common_flags(ablate, ov);
    ablate->add_option("axis", ablate_axis,
                       "sampling|structure|max_n_tiles|mtl_grouping|mtl_design|pe|dim")
        ->required();
    ablate->add_option("--grid", ov.grid, "comma-separated grid override");
    ablate->add_option("--epochs", ov.epochs, "training epochs")->envname("PRWK_EPOCHS");
    ablate->add_option("--mode", ov.mode, "evaluation mode")->envname("PRWK_MODE");

    auto* bench = app.add_subcommand("bench", "inference scaling benchmark");
    add_common_flags(bench, ov);
    bench->add_option("--bag-size", ov.bag_size, "inference bag size")
        ->envname("PRWK_BAG_SIZE");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) ? 1 : 0;
    }

    try {
        RunConfig rc = resolve_config(ov);
        const bool f64 = rc.precision == "f64";
        if (gen->parsed()) return cmd_gen(rc, ov.force);
        if (train->parsed()) return f64 ? do_train<double>(rc) : do_train<float>(rc);
        if (infer->parsed())
            return f64 ? do_infer<double>(rc, infer_ckpt, infer_bag)
                       : do_infer<float>(rc, infer_ckpt, infer_bag);
        if (verify->parsed()) return do_verify(rc, verify_level);
        if (ablate->parsed())
            return f64 ? do_ablate<double>(rc, ablate_axis)
                       : do_ablate<float>(rc, ablate_axis);
        if (bench->parsed()) return do_bench(rc);
        std::cerr << "no subcommand\n";
        return 1;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
