#pragma once

// Experiment grids over one configuration axis at a time, with shared seeds
// across cells. Each row reports the per-task metrics of a fresh train +
// test-split evaluation, in the shape of the usual ablation tables.

#include <iomanip>
#include <iostream>

#include "pathrwkv/runconfig.hpp"
#include "pathrwkv/verify.hpp"

namespace prwk {

struct Table {
    std::string title;
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    std::string tsv() const {
        std::ostringstream os;
        for (std::size_t i = 0; i < columns.size(); ++i)
            os << (i ? "\t" : "") << columns[i];
        os << '\n';
        for (const auto& r : rows) {
            for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "\t" : "") << r[i];
            os << '\n';
        }
        return os.str();
    }

    void print(std::ostream& os) const {
        std::vector<std::size_t> width(columns.size(), 0);
        for (std::size_t i = 0; i < columns.size(); ++i) width[i] = columns[i].size();
        for (const auto& r : rows)
            for (std::size_t i = 0; i < r.size() && i < width.size(); ++i)
                width[i] = std::max(width[i], r[i].size());
        if (!title.empty()) os << "# " << title << '\n';
        auto line = [&](const std::vector<std::string>& cells) {
            for (std::size_t i = 0; i < cells.size(); ++i)
                os << std::left << std::setw(static_cast<int>(width[i]) + 2) << cells[i];
            os << '\n';
        };
        line(columns);
        for (const auto& r : rows) line(r);
    }
};

enum class AblationAxis { sampling, structure, max_n_tiles, mtl_grouping, mtl_design, pe, dim };

inline AblationAxis parse_ablation_axis(const std::string& s) {
    if (s == "sampling") return AblationAxis::sampling;
    if (s == "structure") return AblationAxis::structure;
    if (s == "max_n_tiles") return AblationAxis::max_n_tiles;
    if (s == "mtl_grouping") return AblationAxis::mtl_grouping;
    if (s == "mtl_design") return AblationAxis::mtl_design;
    if (s == "pe") return AblationAxis::pe;
    if (s == "dim") return AblationAxis::dim;
    throw ConfigError("unknown ablation axis: " + s);
}

namespace detail {

inline std::vector<std::size_t> parse_size_list(const std::string& csv) {
    std::vector<std::size_t> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(static_cast<std::size_t>(std::stoull(item)));
    return out;
}

inline std::string fmt_metric(const std::optional<double>& v) {
    if (!v) return "-";
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%.4f", *v);
    return buf;
}

// Metric columns in task order: Acc + AUC for classification, Corr for
// regression.
inline void metric_columns(const std::vector<TaskSpec>& tasks,
                           std::vector<std::string>& cols) {
    for (const auto& t : tasks) {
        if (t.kind == TaskKind::classification) {
            cols.push_back(t.name + ".acc");
            cols.push_back(t.name + ".auc");
        } else {
            cols.push_back(t.name + ".corr");
        }
    }
}

inline void metric_cells(const std::vector<TaskSpec>& tasks, const MetricReport& rep,
                         std::vector<std::string>& row) {
    for (const auto& t : tasks) {
        auto it = rep.per_task.find(t.name);
        const TaskMetrics none{};
        const TaskMetrics& m = it != rep.per_task.end() ? it->second : none;
        if (t.kind == TaskKind::classification) {
            row.push_back(fmt_metric(m.accuracy));
            row.push_back(fmt_metric(m.auc));
        } else {
            row.push_back(fmt_metric(m.correlation));
        }
    }
}

// One train + evaluate cycle restricted to `tasks`.
template <typename Real>
MetricReport ablation_cell(const RunConfig& rc, const std::vector<TaskSpec>& tasks,
                           const LoadedDataset& ds, const SplitIdx& split,
                           EvalMode eval_mode) {
    ModelConfig mc = rc.model_config();
    mc.tasks = tasks;
    mc.validate();
    PathRwkv<Real> model(mc, rc.seed);
    TrainConfig tc = rc.train_config();
    train_model<Real>(model, tasks, ds, split.train, tc);
    return evaluate_model<Real>(model, tasks, ds, split.test, eval_mode, tc, rc.bag_size,
                                rc.workers);
}

inline std::string initials_label(const std::vector<TaskSpec>& subset) {
    std::string s = "MTL-";
    for (const auto& t : subset) s += static_cast<char>(std::toupper(t.name[0]));
    return s;
}

}  // namespace detail

template <typename Real>
Table run_ablation(AblationAxis axis, const RunConfig& base, const LoadedDataset& ds) {
    const auto tasks = parse_task_specs(base.tasks);
    const SplitIdx split = split_dataset(ds.size(), base.split, base.seed);
    const EvalMode mode = parse_eval_mode(base.mode);

    Table table;
    table.columns.push_back("config");
    detail::metric_columns(tasks, table.columns);

    auto add_row = [&](const std::string& label, const MetricReport& rep) {
        std::vector<std::string> row{label};
        detail::metric_cells(tasks, rep, row);
        table.rows.push_back(std::move(row));
    };

    switch (axis) {
        case AblationAxis::sampling: {
            table.title = "tile sampling method";
            for (const char* method : {"z_order", "random"}) {
                RunConfig rc = base;
                rc.sampling = method;
                add_row(std::string("Sample ") + (method == std::string("z_order")
                                                      ? "Z-Order"
                                                      : "Random"),
                        detail::ablation_cell<Real>(rc, tasks, ds, split, mode));
            }
            break;
        }
        case AblationAxis::structure: {
            // one training, both inference structures over the same weights
            table.title = "inference structure (shared weights)";
            ModelConfig mc = base.model_config();
            PathRwkv<Real> model(mc, base.seed);
            TrainConfig tc = base.train_config();
            train_model<Real>(model, tasks, ds, split.train, tc);
            add_row("Structure Sample",
                    evaluate_model<Real>(model, tasks, ds, split.test, EvalMode::sampled,
                                         tc, base.bag_size, base.workers));
            add_row("Structure Recurrent",
                    evaluate_model<Real>(model, tasks, ds, split.test, EvalMode::recurrent,
                                         tc, base.bag_size, base.workers));
            break;
        }
        case AblationAxis::max_n_tiles: {
            table.title = "max tiles per slide during training";
            auto grid = detail::parse_size_list(
                base.ablate_grid.empty() ? "1000,2000,5000" : base.ablate_grid);
            for (std::size_t m : grid) {
                RunConfig rc = base;
                rc.max_n_tiles = m;
                add_row("Max-N-Tiles " + std::to_string(m),
                        detail::ablation_cell<Real>(rc, tasks, ds, split, mode));
            }
            break;
        }
        case AblationAxis::mtl_grouping: {
            table.title = "task grouping";
            // task subsets trained jointly; metrics collected per task from
            // whichever run trained it
            auto run_partition = [&](const std::string& label,
                                     const std::vector<std::vector<std::size_t>>& groups) {
                MetricReport merged;
                for (const auto& g : groups) {
                    std::vector<TaskSpec> subset;
                    for (std::size_t idx : g) subset.push_back(tasks[idx]);
                    auto rep = detail::ablation_cell<Real>(base, subset, ds, split, mode);
                    for (auto& [name, m] : rep.per_task) merged.per_task[name] = m;
                }
                add_row(label, merged);
            };

            {
                std::vector<std::vector<std::size_t>> singles;
                for (std::size_t i = 0; i < tasks.size(); ++i) singles.push_back({i});
                run_partition("STL", singles);
            }
            if (tasks.size() == 4) {
                run_partition(detail::initials_label({tasks[0], tasks[1]}) + "+" +
                                  detail::initials_label({tasks[2], tasks[3]}).substr(4),
                              {{0, 1}, {2, 3}});
                run_partition(detail::initials_label({tasks[0], tasks[2]}) + "+" +
                                  detail::initials_label({tasks[1], tasks[3]}).substr(4),
                              {{0, 2}, {1, 3}});
                run_partition(detail::initials_label({tasks[0], tasks[3]}) + "+" +
                                  detail::initials_label({tasks[1], tasks[2]}).substr(4),
                              {{0, 3}, {1, 2}});
            }
            if (tasks.size() >= 3) {
                for (std::size_t skip = tasks.size(); skip-- > 0;) {
                    std::vector<std::size_t> g;
                    std::vector<TaskSpec> subset;
                    for (std::size_t i = 0; i < tasks.size(); ++i)
                        if (i != skip) {
                            g.push_back(i);
                            subset.push_back(tasks[i]);
                        }
                    run_partition(detail::initials_label(subset), {g});
                }
            }
            {
                std::vector<std::size_t> all;
                for (std::size_t i = 0; i < tasks.size(); ++i) all.push_back(i);
                run_partition("MTL-All", {all});
            }
            break;
        }
        case AblationAxis::mtl_design: {
            table.title = "MTL head design";
            for (const char* variant : {"through", "to", "ours"}) {
                RunConfig rc = base;
                rc.mtl_variant = variant;
                std::string label = variant;
                label[0] = static_cast<char>(std::toupper(label[0]));
                add_row("MTL-" + label,
                        detail::ablation_cell<Real>(rc, tasks, ds, split, mode));
            }
            break;
        }
        case AblationAxis::pe: {
            table.title = "positional embedding";
            for (bool on : {false, true}) {
                RunConfig rc = base;
                rc.pe = on;
                add_row(on ? "W/PE" : "O/PE",
                        detail::ablation_cell<Real>(rc, tasks, ds, split, mode));
            }
            break;
        }
        case AblationAxis::dim: {
            table.title = "embedding dimension";
            auto grid = detail::parse_size_list(
                base.ablate_grid.empty() ? "32,48,64,96" : base.ablate_grid);
            for (std::size_t d : grid) {
                RunConfig rc = base;
                rc.d_model = d;
                add_row("D-" + std::to_string(d),
                        detail::ablation_cell<Real>(rc, tasks, ds, split, mode));
            }
            break;
        }
    }
    return table;
}

inline Table bench_table(const BenchReport& rep) {
    Table t;
    t.title = "inference scaling (bag size " + std::to_string(rep.bag_size) + ")";
    t.columns = {"n_tiles", "recurrent_s", "quadratic_ref_s", "peak_bytes"};
    for (const auto& r : rep.rows) {
        char rs[24], qs[24];
        std::snprintf(rs, sizeof(rs), "%.4f", r.recurrent_seconds);
        std::snprintf(qs, sizeof(qs), "%.4f", r.quadratic_seconds);
        t.rows.push_back({std::to_string(r.n_tiles), rs, qs, std::to_string(r.peak_bytes)});
    }
    return t;
}

}  // namespace prwk
