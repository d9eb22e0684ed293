#pragma once

// Evaluation metrics: Pearson correlation, rank-based AUC with tie halving,
// accuracy, and macro one-vs-rest AUC for multiclass tasks.

#include <numeric>

#include "pathrwkv/common.hpp"

namespace prwk {

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw ContractError("pearson: length mismatch");
    const std::size_t n = x.size();
    if (n < 2) throw ContractError("pearson: need at least two points");
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0)
        throw NumericError("pearson undefined for constant input");
    return sxy / std::sqrt(sxx * syy);
}

// Mann-Whitney estimator; ties contribute 1/2. Rank-based, O(n log n).
inline double auc_binary(const std::vector<double>& scores,
                         const std::vector<int>& labels) {
    if (scores.size() != labels.size()) throw ContractError("auc: length mismatch");
    const std::size_t n = scores.size();
    std::size_t pos = 0;
    for (int l : labels) pos += (l != 0);
    const std::size_t neg = n - pos;
    if (pos == 0 || neg == 0)
        throw NumericError("auc undefined: both classes must be present");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    // average ranks across ties
    std::vector<double> rank(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
        for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
        i = j + 1;
    }
    double pos_rank_sum = 0;
    for (std::size_t k = 0; k < n; ++k)
        if (labels[k] != 0) pos_rank_sum += rank[k];
    const double u = pos_rank_sum - static_cast<double>(pos) *
                                        (static_cast<double>(pos) + 1.0) / 2.0;
    return u / (static_cast<double>(pos) * static_cast<double>(neg));
}

// Macro average of one-vs-rest AUCs over classes present in the labels.
inline double auc_macro_ovr(const std::vector<std::vector<double>>& class_scores,
                            const std::vector<int>& labels, int num_classes) {
    double total = 0;
    int counted = 0;
    for (int c = 0; c < num_classes; ++c) {
        std::vector<int> ovr(labels.size());
        bool has_pos = false, has_neg = false;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            ovr[i] = labels[i] == c ? 1 : 0;
            (ovr[i] ? has_pos : has_neg) = true;
        }
        if (!has_pos || !has_neg) continue;
        std::vector<double> sc(labels.size());
        for (std::size_t i = 0; i < labels.size(); ++i) sc[i] = class_scores[i].at(c);
        total += auc_binary(sc, ovr);
        ++counted;
    }
    if (counted == 0) throw NumericError("auc undefined: single-class labels");
    return total / counted;
}

inline double accuracy(const std::vector<int>& pred, const std::vector<int>& truth) {
    if (pred.size() != truth.size() || pred.empty())
        throw ContractError("accuracy: bad inputs");
    std::size_t hit = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == truth[i];
    return static_cast<double>(hit) / static_cast<double>(pred.size());
}

inline std::vector<double> softmax(const std::vector<double>& logits) {
    double mx = logits.at(0);
    for (double v : logits) mx = std::max(mx, v);
    std::vector<double> out(logits.size());
    double z = 0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - mx);
        z += out[i];
    }
    for (auto& v : out) v /= z;
    return out;
}

}  // namespace prwk
