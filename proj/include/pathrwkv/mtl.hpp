#pragma once

// Multi-task head machinery: shared projection into per-task feature
// streams, feature-wise max tile selection, per-task heads, and the
// missing-label-aware loss sum.

#include <map>
#include <optional>

#include "pathrwkv/tensor.hpp"

namespace prwk {

enum class TaskKind { classification, regression };

struct TaskSpec {
    std::string name;
    TaskKind kind = TaskKind::classification;
    int num_classes = 2;  // ignored for regression

    // classification uses cross entropy, regression mean absolute error
    int head_width() const { return kind == TaskKind::classification ? num_classes : 1; }
};

// Per-task optional labels. Classification labels are integral class
// indices, regression labels raw-scale reals.
using LabelSet = std::map<std::string, double>;

enum class MtlVariant { through, to, ours };

inline const char* mtl_variant_name(MtlVariant v) {
    switch (v) {
        case MtlVariant::through: return "through";
        case MtlVariant::to: return "to";
        case MtlVariant::ours: return "ours";
    }
    return "?";
}

inline MtlVariant parse_mtl_variant(const std::string& s) {
    if (s == "through") return MtlVariant::through;
    if (s == "to") return MtlVariant::to;
    if (s == "ours") return MtlVariant::ours;
    throw ConfigError("unknown mtl variant: " + s);
}

// Linear D -> D*T, reshaped as T per-task [N x D] streams. Column block t of
// the weight is exactly task t's projection.
template <typename Real>
std::vector<Tensor<Real>> mtl_project(const Tensor<Real>& x, const Tensor<Real>& proj_w,
                                      const Tensor<Real>& proj_b, std::size_t tasks) {
    if (tasks == 0) throw ContractError("mtl_project: task count must be >= 1");
    const std::size_t d = x.dim(1);
    if (proj_w.dim(0) != d || proj_w.dim(1) != d * tasks || proj_b.numel() != d * tasks)
        throw ShapeError("mtl_project: projection shape mismatch");
    auto wide = add(matmul(x, proj_w), proj_b);
    std::vector<Tensor<Real>> out;
    out.reserve(tasks);
    for (std::size_t t = 0; t < tasks; ++t)
        out.push_back(slice_cols(wide, t * d, (t + 1) * d));
    return out;
}

// Feature-wise max over the tile axis; the streamable half of the
// aggregation contract.
template <typename Real>
Tensor<Real> select_max_tile(const Tensor<Real>& task_feat) {
    return col_max(task_feat);
}

namespace detail {

// 1 x D copy that forwards gradients to the source vector.
template <typename Real>
Tensor<Real> as_row(const Tensor<Real>& v) {
    if (v.rank() == 2) return v;
    auto out = Tensor<Real>::zeros({1, v.numel()});
    std::copy(v.value().begin(), v.value().end(), out.value().begin());
    out.attach({v},
               [](typename Tensor<Real>::Node& self) {
                   auto& p = *self.parents[0];
                   if (!p.requires_grad) return;
                   p.ensure_grad();
                   for (std::size_t i = 0; i < p.grad.size(); ++i)
                       p.grad[i] += self.grad[i];
               },
               "as_row");
    return out;
}

}  // namespace detail

// Linear head: D -> num_classes logits, or D -> 1 for regression.
template <typename Real>
Tensor<Real> head_forward(const Tensor<Real>& feat, const Tensor<Real>& head_w,
                          const Tensor<Real>& head_b) {
    if (feat.numel() != head_w.dim(0) || head_w.dim(1) != head_b.numel())
        throw ShapeError("head_forward: feature/head shape mismatch");
    return add(matmul(detail::as_row(feat), head_w), head_b);
}

// Loss for one task given its prediction tensor (logits or scalar).
template <typename Real>
Tensor<Real> task_loss(const Tensor<Real>& pred, const TaskSpec& task, double label) {
    if (task.kind == TaskKind::classification) {
        const long cls = std::lround(label);
        if (cls < 0 || cls >= task.num_classes)
            throw ContractError("label " + std::to_string(cls) + " out of range for task " +
                                task.name);
        return cross_entropy_logits(pred, static_cast<std::size_t>(cls));
    }
    return mae_loss(pred, static_cast<Real>(label));
}

// Sum of losses over tasks with labels present; absent tasks contribute
// nothing and their heads receive no gradient. Returns nullopt (skip-sample
// signal) when every label is missing.
template <typename Real>
std::optional<Tensor<Real>> total_loss(const std::vector<Tensor<Real>>& preds,
                                       const LabelSet& labels,
                                       const std::vector<TaskSpec>& tasks) {
    if (preds.size() != tasks.size())
        throw ContractError("total_loss: prediction/task count mismatch");
    std::optional<Tensor<Real>> total;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        auto it = labels.find(tasks[i].name);
        if (it == labels.end()) continue;
        auto l = task_loss(preds[i], tasks[i], it->second);
        total = total ? add(*total, l) : l;
    }
    return total;
}

}  // namespace prwk
