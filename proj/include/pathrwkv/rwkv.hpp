#pragma once

// Time Mix and Channel Mix blocks with dual execution: one call processes a
// whole chunk (training), and carried per-block state makes split chunks
// reproduce the single-chunk result exactly. The wkv recurrence is a fused
// op with a hand-derived reverse pass; everything else composes from tensor
// primitives.

#include "pathrwkv/optim.hpp"

namespace prwk {

template <typename Real>
struct BlockState {
    std::vector<Real> ts_time;  // last token seen by Time Mix (post-LN input)
    std::vector<Real> ts_chan;  // last token seen by Channel Mix
    std::vector<Real> wkv;      // H matrices of d_head x d_head, flattened
    bool fresh = true;

    void reset(std::size_t d_model, std::size_t heads) {
        const std::size_t dh = d_model / heads;
        ts_time.assign(d_model, Real(0));
        ts_chan.assign(d_model, Real(0));
        wkv.assign(heads * dh * dh, Real(0));
        fresh = true;
    }
    bool initialized() const { return !ts_time.empty(); }
};

template <typename Real>
struct RwkvState {
    std::vector<BlockState<Real>> blocks;
    void reset(std::size_t depth, std::size_t d_model, std::size_t heads) {
        blocks.resize(depth);
        for (auto& b : blocks) b.reset(d_model, heads);
    }
};

template <typename Real>
struct BlockParams {
    // token-shift interpolation
    Tensor<Real> mu_x, mu_r, mu_k, mu_v, mu_w, mu_g;                    // [D]
    Tensor<Real> lora_a_r, lora_a_k, lora_a_v, lora_a_w, lora_a_g;      // [D x r]
    Tensor<Real> lora_b_r, lora_b_k, lora_b_v, lora_b_w, lora_b_g;      // [r x D]
    // decay and bonus
    Tensor<Real> w0;                  // [D]
    Tensor<Real> decay_a, decay_b;    // [D x rd], [rd x D]
    Tensor<Real> bonus_u;             // [D]
    // projections
    Tensor<Real> w_r, w_k, w_v, w_g, w_o;  // [D x D]
    Tensor<Real> gn_gamma, gn_beta;        // [D], per-head group norm
    Tensor<Real> ln1_g, ln1_b, ln2_g, ln2_b;
    // channel mix
    Tensor<Real> cm_mu_k, cm_mu_r;  // [D]
    Tensor<Real> cm_w_k;            // [D x Dcm]
    Tensor<Real> cm_w_v;            // [Dcm x D]
    Tensor<Real> cm_w_r;            // [D x D]

    std::size_t d_model = 0, heads = 1;
};

// ---------------------------------------------------------------------------
// wkv scan: per head h with d = D/H, state S in R^{d x d},
//   y_t = r_t (S_{t-1} + diag(u) k_t^T v_t)
//   S_t = diag(w_t) S_{t-1} + k_t^T v_t
// Pre-update states are saved for the reverse pass while grads are enabled.
// ---------------------------------------------------------------------------

template <typename Real>
Tensor<Real> wkv_scan(const Tensor<Real>& r, const Tensor<Real>& k,
                      const Tensor<Real>& v, const Tensor<Real>& w,
                      const Tensor<Real>& u, std::size_t heads,
                      const std::vector<Real>& state_in,
                      std::vector<Real>* state_out = nullptr) {
    const std::size_t n = r.dim(0), d_model = r.dim(1);
    if (d_model % heads != 0) throw ShapeError("wkv_scan: dim not divisible by heads");
    const std::size_t dh = d_model / heads;
    if (state_in.size() != heads * dh * dh)
        throw ContractError("wkv_scan: state slot has wrong size");
    for (const auto* t : {&k, &v, &w})
        if (t->shape() != r.shape()) throw ShapeError("wkv_scan: operand shape mismatch");
    if (u.numel() != d_model) throw ShapeError("wkv_scan: bonus size mismatch");

    auto out = Tensor<Real>::zeros(r.shape());
    const bool record = grad_mode() && (r.requires_grad() || k.requires_grad() ||
                                        v.requires_grad() || w.requires_grad() ||
                                        u.requires_grad());

    std::vector<Real> state = state_in;
    Buffer<Real> saved;  // S_{t-1} per token, only when recording
    if (record) saved.assign(n * heads * dh * dh);

    const Real* rv = r.value().data();
    const Real* kv = k.value().data();
    const Real* vv = v.value().data();
    const Real* wv = w.value().data();
    const Real* uv = u.value().data();
    Real* yv = out.value().data();

    for (std::size_t t = 0; t < n; ++t) {
        if (record)
            std::copy(state.begin(), state.end(),
                      saved.data() + t * heads * dh * dh);
        for (std::size_t h = 0; h < heads; ++h) {
            Real* S = state.data() + h * dh * dh;
            const Real* rt = rv + t * d_model + h * dh;
            const Real* kt = kv + t * d_model + h * dh;
            const Real* vt = vv + t * d_model + h * dh;
            const Real* wt = wv + t * d_model + h * dh;
            const Real* uh = uv + h * dh;
            Real* yt = yv + t * d_model + h * dh;
            for (std::size_t i = 0; i < dh; ++i) {
                const Real ri = rt[i];
                const Real ki = kt[i];
                const Real ruki = ri * uh[i] * ki;
                const Real wi = wt[i];
                Real* Si = S + i * dh;
                for (std::size_t j = 0; j < dh; ++j) {
                    const Real a = ki * vt[j];
                    yt[j] += ri * Si[j] + ruki * vt[j];
                    Si[j] = wi * Si[j] + a;
                }
            }
        }
    }
    if (state_out) *state_out = state;

    if (record) {
        out.attach(
            {r, k, v, w, u},
            [n, d_model, heads, dh, saved = std::move(saved)](
                typename Tensor<Real>::Node& self) {
                auto& pr = *self.parents[0];
                auto& pk = *self.parents[1];
                auto& pv = *self.parents[2];
                auto& pw = *self.parents[3];
                auto& pu = *self.parents[4];
                for (auto* p : {&pr, &pk, &pv, &pw, &pu})
                    if (p->requires_grad) p->ensure_grad();
                const Real* g = self.grad.data();
                std::vector<Real> ds(heads * dh * dh, Real(0));
                std::vector<Real> dstk(dh);
                for (std::size_t ti = n; ti-- > 0;) {
                    for (std::size_t h = 0; h < heads; ++h) {
                        const Real* Spre = saved.data() + (ti * heads + h) * dh * dh;
                        Real* dS = ds.data() + h * dh * dh;
                        const std::size_t base = ti * d_model + h * dh;
                        const Real* rt = pr.value.data() + base;
                        const Real* kt = pk.value.data() + base;
                        const Real* vt = pv.value.data() + base;
                        const Real* wt = pw.value.data() + base;
                        const Real* uh = pu.value.data() + h * dh;
                        const Real* gy = g + base;

                        Real dyv = 0;  // dot(dy, v_t)
                        for (std::size_t j = 0; j < dh; ++j) dyv += gy[j] * vt[j];
                        Real ruk = 0;  // sum_i r_i u_i k_i
                        std::fill(dstk.begin(), dstk.end(), Real(0));
                        for (std::size_t i = 0; i < dh; ++i) {
                            const Real* Si = Spre + i * dh;
                            Real* dSi = dS + i * dh;
                            const Real ri = rt[i];
                            const Real ki = kt[i];
                            const Real ui = uh[i];
                            ruk += ri * ui * ki;
                            Real dot_s_dy = 0, dot_ds_s = 0, dot_ds_v = 0;
                            for (std::size_t j = 0; j < dh; ++j) {
                                dot_s_dy += Si[j] * gy[j];
                                dot_ds_s += dSi[j] * Si[j];
                                dot_ds_v += dSi[j] * vt[j];
                                dstk[j] += dSi[j] * ki;
                            }
                            if (pr.requires_grad)
                                pr.grad[base + i] += dot_s_dy + ui * ki * dyv;
                            if (pu.requires_grad)
                                pu.grad[h * dh + i] += ri * ki * dyv;
                            if (pw.requires_grad) pw.grad[base + i] += dot_ds_s;
                            if (pk.requires_grad)
                                pk.grad[base + i] += ri * ui * dyv + dot_ds_v;
                            // dS_{t-1} = diag(w_t) dS_t + r_t^T dy_t
                            const Real wi = wt[i];
                            for (std::size_t j = 0; j < dh; ++j)
                                dSi[j] = wi * dSi[j] + ri * gy[j];
                        }
                        if (pv.requires_grad) {
                            for (std::size_t j = 0; j < dh; ++j)
                                pv.grad[base + j] += gy[j] * ruk + dstk[j];
                        }
                    }
                }
            },
            "wkv_scan");
    }
    return out;
}

// ---------------------------------------------------------------------------
// ddlerp: data-dependent interpolation toward the previous token.
//   m = x + mu_x (xprev - x)
//   out = x + (mu_i + tanh(m A) B) (xprev - x)
// ---------------------------------------------------------------------------

template <typename Real>
Tensor<Real> ddlerp(const Tensor<Real>& x, const Tensor<Real>& x_prev,
                    const Tensor<Real>& mu_x, const Tensor<Real>& mu_i,
                    const Tensor<Real>& lora_a, const Tensor<Real>& lora_b) {
    auto diff = sub(x_prev, x);
    auto m = add(x, mul(diff, mu_x));
    auto mix = add(matmul(tanh_op(matmul(m, lora_a)), lora_b), mu_i);
    return add(x, mul(diff, mix));
}

template <typename Real>
Tensor<Real> lerp_prev(const Tensor<Real>& x, const Tensor<Real>& x_prev,
                       const Tensor<Real>& mu) {
    return add(x, mul(sub(x_prev, x), mu));
}

template <typename Real>
Tensor<Real> layer_norm(const Tensor<Real>& x, const Tensor<Real>& gamma,
                        const Tensor<Real>& beta) {
    return group_norm(x, gamma, beta, 1);
}

namespace detail {

template <typename Real>
Tensor<Real> const_row(const std::vector<Real>& v) {
    auto t = Tensor<Real>::zeros({v.size()});
    std::copy(v.begin(), v.end(), t.value().begin());
    return t;
}

template <typename Real>
void store_last_row(const Tensor<Real>& x, std::vector<Real>& dst) {
    const std::size_t n = x.dim(0), d = x.dim(1);
    dst.assign(x.value().begin() + static_cast<long>((n - 1) * d),
               x.value().begin() + static_cast<long>(n * d));
}

}  // namespace detail

// Time Mix over a chunk of rows; semantically identical to processing rows
// one at a time. Advances ts_time and the wkv state.
template <typename Real>
Tensor<Real> time_mix_chunk(const Tensor<Real>& x, BlockState<Real>& state,
                            const BlockParams<Real>& p) {
    if (!state.initialized()) throw ContractError("time_mix_chunk: state not initialized");
    if (x.rank() != 2 || x.dim(1) != p.d_model)
        throw ShapeError("time_mix_chunk input " + shape_str(x.shape()));
    if (x.dim(0) == 0) throw ContractError("time_mix_chunk: empty chunk");

    auto x_prev = row_shift(x, detail::const_row(state.ts_time));
    auto xr = ddlerp(x, x_prev, p.mu_x, p.mu_r, p.lora_a_r, p.lora_b_r);
    auto xk = ddlerp(x, x_prev, p.mu_x, p.mu_k, p.lora_a_k, p.lora_b_k);
    auto xv = ddlerp(x, x_prev, p.mu_x, p.mu_v, p.lora_a_v, p.lora_b_v);
    auto xw = ddlerp(x, x_prev, p.mu_x, p.mu_w, p.lora_a_w, p.lora_b_w);
    auto xg = ddlerp(x, x_prev, p.mu_x, p.mu_g, p.lora_a_g, p.lora_b_g);

    auto r = matmul(xr, p.w_r);
    auto k = matmul(xk, p.w_k);
    auto v = matmul(xv, p.w_v);
    auto g = silu(matmul(xg, p.w_g));
    auto decay = add(matmul(tanh_op(matmul(xw, p.decay_a)), p.decay_b), p.w0);
    auto w = neg_exp_exp(decay);

    std::vector<Real> state_out;
    auto y = wkv_scan(r, k, v, w, p.bonus_u, p.heads, state.wkv, &state_out);
    auto out = matmul(mul(group_norm(y, p.gn_gamma, p.gn_beta, p.heads), g), p.w_o);

    state.wkv = std::move(state_out);
    detail::store_last_row(x, state.ts_time);
    state.fresh = false;
    return out;
}

template <typename Real>
Tensor<Real> channel_mix_chunk(const Tensor<Real>& x, BlockState<Real>& state,
                               const BlockParams<Real>& p) {
    if (!state.initialized()) throw ContractError("channel_mix_chunk: state not initialized");
    if (x.dim(0) == 0) throw ContractError("channel_mix_chunk: empty chunk");
    auto x_prev = row_shift(x, detail::const_row(state.ts_chan));
    auto xk = lerp_prev(x, x_prev, p.cm_mu_k);
    auto xr = lerp_prev(x, x_prev, p.cm_mu_r);
    auto out = mul(sigmoid(matmul(xr, p.cm_w_r)),
                   matmul(relu_squared(matmul(xk, p.cm_w_k)), p.cm_w_v));
    detail::store_last_row(x, state.ts_chan);
    return out;
}

// Single-token forms of the mixes.
template <typename Real>
std::vector<Real> time_mix_step(const std::vector<Real>& x_t, BlockState<Real>& state,
                                const BlockParams<Real>& p) {
    auto xt = Tensor<Real>::from_vector({1, x_t.size()}, x_t);
    auto y = time_mix_chunk(xt, state, p);
    return {y.value().begin(), y.value().end()};
}

template <typename Real>
std::vector<Real> channel_mix_step(const std::vector<Real>& x_t, BlockState<Real>& state,
                                   const BlockParams<Real>& p) {
    auto xt = Tensor<Real>::from_vector({1, x_t.size()}, x_t);
    auto y = channel_mix_chunk(xt, state, p);
    return {y.value().begin(), y.value().end()};
}

// Pre-norm residual wiring: x + TM(LN1(x)), then + CM(LN2(.)).
template <typename Real>
Tensor<Real> block_forward(const Tensor<Real>& x, BlockState<Real>& state,
                           const BlockParams<Real>& p) {
    auto h = add(x, time_mix_chunk(layer_norm(x, p.ln1_g, p.ln1_b), state, p));
    return add(h, channel_mix_chunk(layer_norm(h, p.ln2_g, p.ln2_b), state, p));
}

// ---------------------------------------------------------------------------
// Parameter construction
// ---------------------------------------------------------------------------

namespace detail {

template <typename Real>
Tensor<Real> randn_tensor(Shape shape, Rng& rng, double stddev) {
    auto t = Tensor<Real>::zeros(std::move(shape));
    for (auto& v : t.value()) v = static_cast<Real>(gaussian(rng) * stddev);
    return t;
}

template <typename Real>
Tensor<Real> uniform_tensor(Shape shape, Rng& rng, double lo, double hi) {
    auto t = Tensor<Real>::zeros(std::move(shape));
    for (auto& v : t.value()) v = static_cast<Real>(uniform(rng, lo, hi));
    return t;
}

}  // namespace detail

template <typename Real>
BlockParams<Real> make_block_params(ParamStore<Real>& store, const std::string& prefix,
                                    std::size_t d, std::size_t heads, std::size_t r_lora,
                                    std::size_t r_decay, std::size_t d_cm, Rng& rng) {
    if (heads == 0 || d % heads != 0)
        throw ConfigError("d_model must be divisible by head count");
    if (r_lora == 0 || r_decay == 0) throw ConfigError("LoRA ranks must be positive");
    using detail::randn_tensor;
    using detail::uniform_tensor;
    BlockParams<Real> p;
    p.d_model = d;
    p.heads = heads;
    const double proj_std = 1.0 / std::sqrt(static_cast<double>(d));
    const double lora_std = 0.1 / std::sqrt(static_cast<double>(d));

    auto reg = [&](const char* name, Tensor<Real> t) -> Tensor<Real> {
        return store.add(prefix + name, std::move(t));
    };

    p.mu_x = reg("mu_x", uniform_tensor<Real>({d}, rng, 0.3, 0.7));
    p.mu_r = reg("mu_r", uniform_tensor<Real>({d}, rng, 0.3, 0.7));
    p.mu_k = reg("mu_k", uniform_tensor<Real>({d}, rng, 0.3, 0.7));
    p.mu_v = reg("mu_v", uniform_tensor<Real>({d}, rng, 0.3, 0.7));
    p.mu_w = reg("mu_w", uniform_tensor<Real>({d}, rng, 0.3, 0.7));
    p.mu_g = reg("mu_g", uniform_tensor<Real>({d}, rng, 0.3, 0.7));

    p.lora_a_r = reg("lora_a_r", randn_tensor<Real>({d, r_lora}, rng, lora_std));
    p.lora_a_k = reg("lora_a_k", randn_tensor<Real>({d, r_lora}, rng, lora_std));
    p.lora_a_v = reg("lora_a_v", randn_tensor<Real>({d, r_lora}, rng, lora_std));
    p.lora_a_w = reg("lora_a_w", randn_tensor<Real>({d, r_lora}, rng, lora_std));
    p.lora_a_g = reg("lora_a_g", randn_tensor<Real>({d, r_lora}, rng, lora_std));
    p.lora_b_r = reg("lora_b_r", Tensor<Real>::zeros({r_lora, d}));
    p.lora_b_k = reg("lora_b_k", Tensor<Real>::zeros({r_lora, d}));
    p.lora_b_v = reg("lora_b_v", Tensor<Real>::zeros({r_lora, d}));
    p.lora_b_w = reg("lora_b_w", Tensor<Real>::zeros({r_lora, d}));
    p.lora_b_g = reg("lora_b_g", Tensor<Real>::zeros({r_lora, d}));

    // Per-channel decay bases spread across timescales: w = exp(-exp(w0))
    // spans ~0.998 (long memory) down to ~0.07 (short).
    auto w0 = Tensor<Real>::zeros({d});
    for (std::size_t i = 0; i < d; ++i) {
        const double t = d > 1 ? static_cast<double>(i) / (d - 1) : 0.5;
        w0.value()[i] = static_cast<Real>(-6.0 + 7.0 * t);
    }
    p.w0 = reg("w0", std::move(w0));
    p.decay_a = reg("decay_a", randn_tensor<Real>({d, r_decay}, rng, lora_std));
    p.decay_b = reg("decay_b", Tensor<Real>::zeros({r_decay, d}));
    p.bonus_u = reg("bonus_u", randn_tensor<Real>({d}, rng, 0.3));

    p.w_r = reg("w_r", randn_tensor<Real>({d, d}, rng, proj_std));
    p.w_k = reg("w_k", randn_tensor<Real>({d, d}, rng, proj_std));
    p.w_v = reg("w_v", randn_tensor<Real>({d, d}, rng, proj_std));
    p.w_g = reg("w_g", randn_tensor<Real>({d, d}, rng, proj_std));
    p.w_o = reg("w_o", Tensor<Real>::zeros({d, d}));

    p.gn_gamma = reg("gn_gamma", Tensor<Real>::filled({d}, Real(1)));
    p.gn_beta = reg("gn_beta", Tensor<Real>::zeros({d}));
    p.ln1_g = reg("ln1_g", Tensor<Real>::filled({d}, Real(1)));
    p.ln1_b = reg("ln1_b", Tensor<Real>::zeros({d}));
    p.ln2_g = reg("ln2_g", Tensor<Real>::filled({d}, Real(1)));
    p.ln2_b = reg("ln2_b", Tensor<Real>::zeros({d}));

    p.cm_mu_k = reg("cm_mu_k", uniform_tensor<Real>({d}, rng, 0.3, 0.7));
    p.cm_mu_r = reg("cm_mu_r", uniform_tensor<Real>({d}, rng, 0.3, 0.7));
    p.cm_w_k = reg("cm_w_k", randn_tensor<Real>({d, d_cm}, rng, proj_std));
    p.cm_w_v = reg("cm_w_v", Tensor<Real>::zeros({d_cm, d}));
    p.cm_w_r = reg("cm_w_r", randn_tensor<Real>({d, d}, rng, proj_std));
    return p;
}

}  // namespace prwk
