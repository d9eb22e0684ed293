#pragma once

// Named parameter store with Adam moments, plus the warmup+cosine schedule.

#include <map>
#include <string>

#include "pathrwkv/tensor.hpp"

namespace prwk {

struct AdamStats {
    std::size_t updated = 0;
    std::size_t skipped = 0;  // parameters without a gradient (masked tasks)
    std::vector<std::string> skipped_names;
};

template <typename Real>
class ParamStore {
public:
    Tensor<Real>& add(const std::string& name, Tensor<Real> t) {
        t.set_requires_grad(true);
        auto [it, fresh] = params_.emplace(name, std::move(t));
        if (!fresh) throw ContractError("duplicate parameter name: " + name);
        return it->second;
    }

    Tensor<Real>& at(const std::string& name) {
        auto it = params_.find(name);
        if (it == params_.end()) throw ContractError("unknown parameter: " + name);
        return it->second;
    }
    const Tensor<Real>& at(const std::string& name) const {
        auto it = params_.find(name);
        if (it == params_.end()) throw ContractError("unknown parameter: " + name);
        return it->second;
    }
    bool contains(const std::string& name) const { return params_.count(name) != 0; }

    // Sorted map: deterministic iteration order for updates and checkpoints.
    std::map<std::string, Tensor<Real>>& params() { return params_; }
    const std::map<std::string, Tensor<Real>>& params() const { return params_; }

    long long step_count() const { return step_; }

    std::size_t scalar_count() const {
        std::size_t n = 0;
        for (const auto& [k, v] : params_) n += v.numel();
        return n;
    }

    void zero_grads() {
        for (auto& [k, v] : params_) v.zero_grad();
    }

    // Bias-corrected Adam; gradients are cleared afterward. Parameters whose
    // gradient is absent are skipped (missing-task masking leaves whole heads
    // untouched).
    AdamStats adam_step(Real lr, Real beta1 = Real(0.9), Real beta2 = Real(0.999),
                        Real eps = Real(1e-8)) {
        AdamStats stats;
        ++step_;
        const Real bc1 = Real(1) - std::pow(beta1, static_cast<Real>(step_));
        const Real bc2 = Real(1) - std::pow(beta2, static_cast<Real>(step_));
        for (auto& [name, p] : params_) {
            if (!p.has_grad()) {
                ++stats.skipped;
                stats.skipped_names.push_back(name);
                continue;
            }
            auto& m = moments_m_[name];
            auto& v = moments_v_[name];
            if (m.size() != p.numel()) m.assign(p.numel(), Real(0));
            if (v.size() != p.numel()) v.assign(p.numel(), Real(0));
            auto val = p.value();
            auto g = p.grad();
            for (std::size_t i = 0; i < val.size(); ++i) {
                m[i] = beta1 * m[i] + (Real(1) - beta1) * g[i];
                v[i] = beta2 * v[i] + (Real(1) - beta2) * g[i] * g[i];
                const Real mhat = m[i] / bc1;
                const Real vhat = v[i] / bc2;
                val[i] -= lr * mhat / (std::sqrt(vhat) + eps);
            }
            p.zero_grad();
            ++stats.updated;
        }
        return stats;
    }

private:
    std::map<std::string, Tensor<Real>> params_;
    std::map<std::string, std::vector<Real>> moments_m_, moments_v_;
    long long step_ = 0;
};

// Linear ramp to base_lr over the warmup epochs, then cosine down to
// floor_factor * base_lr at the final epoch.
struct LrSchedule {
    double base_lr = 1e-4;
    int warmup_epochs = 20;
    int total_epochs = 100;
    double floor_factor = 0.01;

    LrSchedule() = default;
    LrSchedule(double base, int warmup, int total, double floor)
        : base_lr(base), warmup_epochs(warmup), total_epochs(total), floor_factor(floor) {
        if (floor_factor <= 0.0 || floor_factor > 1.0)
            throw ConfigError("lr floor_factor must be in (0, 1]");
        if (warmup_epochs < 0 || warmup_epochs >= total_epochs)
            throw ConfigError("warmup_epochs must be < total_epochs");
    }
};

inline double lr_at(const LrSchedule& s, int epoch) {
    if (epoch < 0 || epoch >= s.total_epochs)
        throw ContractError("lr_at epoch " + std::to_string(epoch) + " out of range");
    if (epoch < s.warmup_epochs)
        return s.base_lr * static_cast<double>(epoch + 1) /
               static_cast<double>(s.warmup_epochs);
    const int span = s.total_epochs - 1 - s.warmup_epochs;
    if (span <= 0) return s.base_lr * s.floor_factor;
    const double t = static_cast<double>(epoch - s.warmup_epochs) / span;
    const double cosine = 0.5 * (1.0 + std::cos(3.14159265358979323846 * t));
    return s.base_lr * (s.floor_factor + (1.0 - s.floor_factor) * cosine);
}

}  // namespace prwk
