#pragma once

// Dense tensors with reverse-mode differentiation. Values are contiguous
// row-major; the scalar type is a template parameter (float by default,
// double for the verification suites). Ops record a tape node only while
// gradients are enabled, so inference builds no graph.

#include <cstring>
#include <functional>
#include <memory>
#include <mutex>
#include <numeric>
#include <span>
#include <unordered_set>

#include "pathrwkv/common.hpp"

#ifdef PRWK_USE_CBLAS
#include <cblas.h>
#endif

namespace prwk {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t e : s) n *= e;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

// Tensor payload buffer; registers its bytes with the global counter so
// peak live footprint can be measured.
template <typename Real>
class Buffer {
public:
    Buffer() = default;
    explicit Buffer(std::size_t n, Real fill = Real(0)) { assign(n, fill); }
    Buffer(const Buffer& o) { assign_copy(o.data_); }
    Buffer(Buffer&& o) noexcept : data_(std::move(o.data_)) {}
    Buffer& operator=(const Buffer& o) {
        if (this != &o) {
            release();
            assign_copy(o.data_);
        }
        return *this;
    }
    Buffer& operator=(Buffer&& o) noexcept {
        if (this != &o) {
            release();
            data_ = std::move(o.data_);
        }
        return *this;
    }
    ~Buffer() { release(); }

    void assign(std::size_t n, Real fill = Real(0)) {
        release();
        data_.assign(n, fill);
        tensor_mem().add(n * sizeof(Real));
    }
    void clear() { release(); }

    bool empty() const { return data_.empty(); }
    std::size_t size() const { return data_.size(); }
    Real* data() { return data_.data(); }
    const Real* data() const { return data_.data(); }
    Real& operator[](std::size_t i) { return data_[i]; }
    Real operator[](std::size_t i) const { return data_[i]; }
    std::vector<Real>& vec() { return data_; }
    const std::vector<Real>& vec() const { return data_; }

private:
    void assign_copy(const std::vector<Real>& src) {
        data_ = src;
        tensor_mem().add(data_.size() * sizeof(Real));
    }
    void release() {
        if (!data_.empty()) {
            tensor_mem().sub(data_.size() * sizeof(Real));
            data_.clear();
            data_.shrink_to_fit();
        }
    }
    std::vector<Real> data_;
};

inline bool& grad_mode() {
    thread_local bool enabled = true;
    return enabled;
}

struct NoGradGuard {
    NoGradGuard() : prev(grad_mode()) { grad_mode() = false; }
    ~NoGradGuard() { grad_mode() = prev; }
    bool prev;
};

template <typename Real>
class Tensor {
public:
    struct Node {
        Shape shape;
        Buffer<Real> value;
        Buffer<Real> grad;  // empty until backward touches it
        bool requires_grad = false;
        std::vector<std::shared_ptr<Node>> parents;
        std::function<void(Node&)> backward;
        const char* op = "";

        std::size_t numel() const { return value.size(); }
        void ensure_grad() {
            if (grad.empty() && numel() > 0) grad.assign(numel(), Real(0));
        }
    };

    Tensor() = default;

    static Tensor zeros(Shape shape) { return filled(std::move(shape), Real(0)); }

    static Tensor filled(Shape shape, Real v) {
        Tensor t;
        t.n_ = std::make_shared<Node>();
        t.n_->shape = std::move(shape);
        t.n_->value.assign(shape_numel(t.n_->shape), v);
        return t;
    }

    static Tensor scalar(Real v) { return filled({1}, v); }

    static Tensor from_vector(Shape shape, std::vector<Real> data) {
        if (shape_numel(shape) != data.size())
            throw ShapeError("tensor data size " + std::to_string(data.size()) +
                             " does not match shape " + shape_str(shape));
        Tensor t = zeros(std::move(shape));
        std::copy(data.begin(), data.end(), t.n_->value.data());
        return t;
    }

    bool defined() const { return n_ != nullptr; }
    const Shape& shape() const { return n_->shape; }
    std::size_t numel() const { return n_->value.size(); }
    std::size_t dim(std::size_t i) const { return n_->shape.at(i); }
    std::size_t rank() const { return n_->shape.size(); }

    std::span<Real> value() { return {n_->value.data(), n_->value.size()}; }
    std::span<const Real> value() const { return {n_->value.data(), n_->value.size()}; }
    std::span<const Real> grad() const { return {n_->grad.data(), n_->grad.size()}; }
    bool has_grad() const { return defined() && !n_->grad.empty(); }
    void zero_grad() { n_->grad.clear(); }

    Real item() const {
        if (numel() != 1) throw ContractError("item() on non-scalar tensor");
        return n_->value[0];
    }

    bool requires_grad() const { return defined() && n_->requires_grad; }
    Tensor& set_requires_grad(bool b = true) {
        n_->requires_grad = b;
        return *this;
    }

    // Value copy detached from the graph.
    Tensor detach_copy() const {
        Tensor t = zeros(shape());
        std::copy(value().begin(), value().end(), t.value().begin());
        return t;
    }

    std::shared_ptr<Node> node() const { return n_; }

    // Hook for fused ops (wkv scan, norms): link parents and a backward fn.
    void attach(std::vector<Tensor> parents, std::function<void(Node&)> bw,
                const char* name) {
        if (!grad_mode()) return;
        bool need = false;
        for (const auto& p : parents) need = need || p.requires_grad();
        if (!need) return;
        n_->requires_grad = true;
        n_->parents.reserve(parents.size());
        for (auto& p : parents) n_->parents.push_back(p.n_);
        n_->backward = std::move(bw);
        n_->op = name;
    }

private:
    std::shared_ptr<Node> n_;
};

// ---------------------------------------------------------------------------
// gemm kernel: CBLAS when available, blocked loops otherwise. The triple-loop
// reference lives in the tests, not here.
// ---------------------------------------------------------------------------

namespace detail {

inline void blas_single_thread() {
#ifdef PRWK_USE_CBLAS
    static std::once_flag once;
    std::call_once(once, [] { openblas_set_num_threads(1); });
#endif
}

// C[m x n] (+)= op(A) * op(B); A is lhs with leading dim lda, row-major.
template <typename Real>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          const Real* a, std::size_t lda, const Real* b, std::size_t ldb, Real beta,
          Real* c, std::size_t ldc) {
#ifdef PRWK_USE_CBLAS
    blas_single_thread();
    if constexpr (std::is_same_v<Real, float>) {
        cblas_sgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
                    trans_b ? CblasTrans : CblasNoTrans, static_cast<int>(m),
                    static_cast<int>(n), static_cast<int>(k), 1.0f, a,
                    static_cast<int>(lda), b, static_cast<int>(ldb), beta, c,
                    static_cast<int>(ldc));
        return;
    } else if constexpr (std::is_same_v<Real, double>) {
        cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
                    trans_b ? CblasTrans : CblasNoTrans, static_cast<int>(m),
                    static_cast<int>(n), static_cast<int>(k), 1.0, a,
                    static_cast<int>(lda), b, static_cast<int>(ldb), beta, c,
                    static_cast<int>(ldc));
        return;
    }
#endif
    auto at = [&](std::size_t i, std::size_t p) {
        return trans_a ? a[p * lda + i] : a[i * lda + p];
    };
    auto bt = [&](std::size_t p, std::size_t j) {
        return trans_b ? b[j * ldb + p] : b[p * ldb + j];
    };
    for (std::size_t i = 0; i < m; ++i) {
        Real* crow = c + i * ldc;
        if (beta == Real(0)) {
            std::fill(crow, crow + n, Real(0));
        } else if (beta != Real(1)) {
            for (std::size_t j = 0; j < n; ++j) crow[j] *= beta;
        }
        for (std::size_t p = 0; p < k; ++p) {
            const Real av = at(i, p);
            if (av == Real(0)) continue;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * bt(p, j);
        }
    }
}

// Broadcast check: b may equal a, be a trailing suffix of a, or be scalar.
inline bool broadcast_ok(const Shape& a, const Shape& b) {
    if (shape_numel(b) == 1) return true;
    if (b.size() > a.size()) return false;
    for (std::size_t i = 0; i < b.size(); ++i) {
        if (b[b.size() - 1 - i] != a[a.size() - 1 - i]) return false;
    }
    return true;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

template <typename Real>
Tensor<Real> matmul(const Tensor<Real>& a, const Tensor<Real>& b) {
    if (a.rank() != 2 || b.rank() != 2)
        throw ShapeError("matmul expects rank-2 tensors, got " + shape_str(a.shape()) +
                         " and " + shape_str(b.shape()));
    const std::size_t m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
    if (k != k2)
        throw ShapeError("matmul inner extents differ: " + shape_str(a.shape()) + " * " +
                         shape_str(b.shape()));
    auto out = Tensor<Real>::zeros({m, n});
    detail::gemm<Real>(false, false, m, n, k, a.value().data(), k, b.value().data(), n,
                       Real(0), out.value().data(), n);
    out.attach({a, b},
               [m, n, k](typename Tensor<Real>::Node& self) {
                   auto& pa = *self.parents[0];
                   auto& pb = *self.parents[1];
                   if (pa.requires_grad) {
                       pa.ensure_grad();
                       // dA += dC * B^T
                       detail::gemm<Real>(false, true, m, k, n, self.grad.data(), n,
                                          pb.value.data(), n, Real(1), pa.grad.data(), k);
                   }
                   if (pb.requires_grad) {
                       pb.ensure_grad();
                       // dB += A^T * dC
                       detail::gemm<Real>(true, false, k, n, m, pa.value.data(), k,
                                          self.grad.data(), n, Real(1), pb.grad.data(), n);
                   }
               },
               "matmul");
    return out;
}

namespace detail {

// Shared skeleton for binary elementwise ops with trailing broadcast of b.
template <typename Real, typename FwdFn, typename BwdFn>
Tensor<Real> binary_op(const Tensor<Real>& a, const Tensor<Real>& b, FwdFn fwd,
                       BwdFn bwd, const char* name) {
    if (!broadcast_ok(a.shape(), b.shape()))
        throw ShapeError(std::string(name) + ": shapes " + shape_str(a.shape()) +
                         " and " + shape_str(b.shape()) + " are not broadcastable");
    const std::size_t n = a.numel();
    const std::size_t bn = std::max<std::size_t>(b.numel(), 1);
    auto out = Tensor<Real>::zeros(a.shape());
    const Real* av = a.value().data();
    const Real* bv = b.value().data();
    Real* ov = out.value().data();
    for (std::size_t i = 0; i < n; ++i) ov[i] = fwd(av[i], bv[i % bn]);
    out.attach({a, b},
               [n, bn, bwd](typename Tensor<Real>::Node& self) {
                   auto& pa = *self.parents[0];
                   auto& pb = *self.parents[1];
                   const Real* g = self.grad.data();
                   const Real* av2 = pa.value.data();
                   const Real* bv2 = pb.value.data();
                   Real* ga = nullptr;
                   Real* gb = nullptr;
                   if (pa.requires_grad) {
                       pa.ensure_grad();
                       ga = pa.grad.data();
                   }
                   if (pb.requires_grad) {
                       pb.ensure_grad();
                       gb = pb.grad.data();
                   }
                   for (std::size_t i = 0; i < n; ++i) {
                       Real da, db;
                       bwd(av2[i], bv2[i % bn], g[i], da, db);
                       if (ga) ga[i] += da;
                       if (gb) gb[i % bn] += db;  // reduces over broadcast dims
                   }
               },
               name);
    return out;
}

template <typename Real, typename FwdFn, typename BwdFn>
Tensor<Real> unary_op(const Tensor<Real>& a, FwdFn fwd, BwdFn bwd, const char* name) {
    const std::size_t n = a.numel();
    auto out = Tensor<Real>::zeros(a.shape());
    const Real* av = a.value().data();
    Real* ov = out.value().data();
    for (std::size_t i = 0; i < n; ++i) ov[i] = fwd(av[i]);
    out.attach({a},
               [n, bwd](typename Tensor<Real>::Node& self) {
                   auto& pa = *self.parents[0];
                   if (!pa.requires_grad) return;
                   pa.ensure_grad();
                   const Real* g = self.grad.data();
                   const Real* x = pa.value.data();
                   const Real* y = self.value.data();
                   Real* ga = pa.grad.data();
                   for (std::size_t i = 0; i < n; ++i) ga[i] += bwd(x[i], y[i]) * g[i];
               },
               name);
    return out;
}

}  // namespace detail

template <typename Real>
Tensor<Real> add(const Tensor<Real>& a, const Tensor<Real>& b) {
    return detail::binary_op<Real>(
        a, b, [](Real x, Real y) { return x + y; },
        [](Real, Real, Real g, Real& da, Real& db) {
            da = g;
            db = g;
        },
        "add");
}

template <typename Real>
Tensor<Real> sub(const Tensor<Real>& a, const Tensor<Real>& b) {
    return detail::binary_op<Real>(
        a, b, [](Real x, Real y) { return x - y; },
        [](Real, Real, Real g, Real& da, Real& db) {
            da = g;
            db = -g;
        },
        "sub");
}

template <typename Real>
Tensor<Real> mul(const Tensor<Real>& a, const Tensor<Real>& b) {
    return detail::binary_op<Real>(
        a, b, [](Real x, Real y) { return x * y; },
        [](Real x, Real y, Real g, Real& da, Real& db) {
            da = g * y;
            db = g * x;
        },
        "mul");
}

template <typename Real>
Tensor<Real> scale(const Tensor<Real>& a, Real c) {
    return detail::unary_op<Real>(
        a, [c](Real x) { return c * x; }, [c](Real, Real) { return c; }, "scale");
}

template <typename Real>
Tensor<Real> sigmoid(const Tensor<Real>& a) {
    return detail::unary_op<Real>(
        a,
        [](Real x) {
            return x >= Real(0) ? Real(1) / (Real(1) + std::exp(-x))
                                : std::exp(x) / (Real(1) + std::exp(x));
        },
        [](Real, Real y) { return y * (Real(1) - y); }, "sigmoid");
}

template <typename Real>
Tensor<Real> tanh_op(const Tensor<Real>& a) {
    return detail::unary_op<Real>(
        a, [](Real x) { return std::tanh(x); },
        [](Real, Real y) { return Real(1) - y * y; }, "tanh");
}

template <typename Real>
Tensor<Real> silu(const Tensor<Real>& a) {
    return detail::unary_op<Real>(
        a,
        [](Real x) {
            const Real s = x >= Real(0) ? Real(1) / (Real(1) + std::exp(-x))
                                        : std::exp(x) / (Real(1) + std::exp(x));
            return x * s;
        },
        [](Real x, Real) {
            const Real s = x >= Real(0) ? Real(1) / (Real(1) + std::exp(-x))
                                        : std::exp(x) / (Real(1) + std::exp(x));
            return s + x * s * (Real(1) - s);
        },
        "silu");
}

template <typename Real>
Tensor<Real> relu_squared(const Tensor<Real>& a) {
    return detail::unary_op<Real>(
        a, [](Real x) { return x > Real(0) ? x * x : Real(0); },
        [](Real x, Real) { return x > Real(0) ? Real(2) * x : Real(0); }, "relu_squared");
}

template <typename Real>
Tensor<Real> exp_op(const Tensor<Real>& a) {
    return detail::unary_op<Real>(
        a, [](Real x) { return std::exp(x); }, [](Real, Real y) { return y; }, "exp");
}

// exp(-exp(d)): maps the unconstrained decay to (0, 1).
template <typename Real>
Tensor<Real> neg_exp_exp(const Tensor<Real>& a) {
    return detail::unary_op<Real>(
        a, [](Real x) { return std::exp(-std::exp(x)); },
        [](Real x, Real y) { return -std::exp(x) * y; }, "neg_exp_exp");
}

// Rows shifted down by one: out[0] = first_row (carried state), out[t] = x[t-1].
template <typename Real>
Tensor<Real> row_shift(const Tensor<Real>& x, const Tensor<Real>& first_row) {
    if (x.rank() != 2 || first_row.numel() != x.dim(1))
        throw ShapeError("row_shift: got " + shape_str(x.shape()) + " with first row " +
                         shape_str(first_row.shape()));
    if (x.dim(0) == 0) throw ContractError("row_shift on empty chunk");
    const std::size_t n = x.dim(0), d = x.dim(1);
    auto out = Tensor<Real>::zeros(x.shape());
    std::copy(first_row.value().begin(), first_row.value().end(), out.value().begin());
    if (n > 1)
        std::copy(x.value().begin(), x.value().begin() + static_cast<long>((n - 1) * d),
                  out.value().begin() + static_cast<long>(d));
    out.attach({x, first_row},
               [n, d](typename Tensor<Real>::Node& self) {
                   auto& px = *self.parents[0];
                   auto& pf = *self.parents[1];
                   const Real* g = self.grad.data();
                   if (px.requires_grad) {
                       px.ensure_grad();
                       Real* gx = px.grad.data();
                       for (std::size_t t = 1; t < n; ++t)
                           for (std::size_t j = 0; j < d; ++j)
                               gx[(t - 1) * d + j] += g[t * d + j];
                   }
                   if (pf.requires_grad) {
                       pf.ensure_grad();
                       Real* gf = pf.grad.data();
                       for (std::size_t j = 0; j < d; ++j) gf[j] += g[j];
                   }
               },
               "row_shift");
    return out;
}

template <typename Real>
Tensor<Real> concat_rows(const Tensor<Real>& a, const Tensor<Real>& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(1))
        throw ShapeError("concat_rows: " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    const std::size_t na = a.dim(0), nb = b.dim(0), d = a.dim(1);
    auto out = Tensor<Real>::zeros({na + nb, d});
    std::copy(a.value().begin(), a.value().end(), out.value().begin());
    std::copy(b.value().begin(), b.value().end(),
              out.value().begin() + static_cast<long>(na * d));
    out.attach({a, b},
               [na, nb, d](typename Tensor<Real>::Node& self) {
                   auto& pa = *self.parents[0];
                   auto& pb = *self.parents[1];
                   const Real* g = self.grad.data();
                   if (pa.requires_grad) {
                       pa.ensure_grad();
                       for (std::size_t i = 0; i < na * d; ++i) pa.grad[i] += g[i];
                   }
                   if (pb.requires_grad) {
                       pb.ensure_grad();
                       for (std::size_t i = 0; i < nb * d; ++i)
                           pb.grad[i] += g[na * d + i];
                   }
               },
               "concat_rows");
    return out;
}

template <typename Real>
Tensor<Real> slice_rows(const Tensor<Real>& x, std::size_t r0, std::size_t r1) {
    if (x.rank() != 2 || r0 > r1 || r1 > x.dim(0))
        throw ShapeError("slice_rows out of range for " + shape_str(x.shape()));
    const std::size_t d = x.dim(1), n = r1 - r0;
    auto out = Tensor<Real>::zeros({n, d});
    std::copy(x.value().begin() + static_cast<long>(r0 * d),
              x.value().begin() + static_cast<long>(r1 * d), out.value().begin());
    out.attach({x},
               [r0, n, d](typename Tensor<Real>::Node& self) {
                   auto& px = *self.parents[0];
                   if (!px.requires_grad) return;
                   px.ensure_grad();
                   const Real* g = self.grad.data();
                   for (std::size_t i = 0; i < n * d; ++i) px.grad[r0 * d + i] += g[i];
               },
               "slice_rows");
    return out;
}

template <typename Real>
Tensor<Real> slice_cols(const Tensor<Real>& x, std::size_t c0, std::size_t c1) {
    if (x.rank() != 2 || c0 > c1 || c1 > x.dim(1))
        throw ShapeError("slice_cols out of range for " + shape_str(x.shape()));
    const std::size_t n = x.dim(0), d = x.dim(1), w = c1 - c0;
    auto out = Tensor<Real>::zeros({n, w});
    for (std::size_t i = 0; i < n; ++i)
        std::copy(x.value().begin() + static_cast<long>(i * d + c0),
                  x.value().begin() + static_cast<long>(i * d + c1),
                  out.value().begin() + static_cast<long>(i * w));
    out.attach({x},
               [n, d, c0, w](typename Tensor<Real>::Node& self) {
                   auto& px = *self.parents[0];
                   if (!px.requires_grad) return;
                   px.ensure_grad();
                   const Real* g = self.grad.data();
                   for (std::size_t i = 0; i < n; ++i)
                       for (std::size_t j = 0; j < w; ++j)
                           px.grad[i * d + c0 + j] += g[i * w + j];
               },
               "slice_cols");
    return out;
}

// Column-wise max over rows; gradient routes to each column's argmax row.
template <typename Real>
Tensor<Real> col_max(const Tensor<Real>& x) {
    if (x.rank() != 2 || x.dim(0) == 0)
        throw ContractError("col_max needs a non-empty rank-2 tensor");
    const std::size_t n = x.dim(0), d = x.dim(1);
    auto out = Tensor<Real>::zeros({d});
    std::vector<std::size_t> argmax(d, 0);
    const Real* xv = x.value().data();
    for (std::size_t j = 0; j < d; ++j) {
        Real best = xv[j];
        std::size_t bi = 0;
        for (std::size_t i = 1; i < n; ++i) {
            if (xv[i * d + j] > best) {
                best = xv[i * d + j];
                bi = i;
            }
        }
        out.value()[j] = best;
        argmax[j] = bi;
    }
    out.attach({x},
               [d, argmax = std::move(argmax)](typename Tensor<Real>::Node& self) {
                   auto& px = *self.parents[0];
                   if (!px.requires_grad) return;
                   px.ensure_grad();
                   for (std::size_t j = 0; j < d; ++j)
                       px.grad[argmax[j] * d + j] += self.grad[j];
               },
               "col_max");
    return out;
}

template <typename Real>
Tensor<Real> col_mean(const Tensor<Real>& x) {
    if (x.rank() != 2 || x.dim(0) == 0)
        throw ContractError("col_mean needs a non-empty rank-2 tensor");
    const std::size_t n = x.dim(0), d = x.dim(1);
    auto out = Tensor<Real>::zeros({d});
    const Real* xv = x.value().data();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) out.value()[j] += xv[i * d + j];
    const Real inv = Real(1) / static_cast<Real>(n);
    for (std::size_t j = 0; j < d; ++j) out.value()[j] *= inv;
    out.attach({x},
               [n, d, inv](typename Tensor<Real>::Node& self) {
                   auto& px = *self.parents[0];
                   if (!px.requires_grad) return;
                   px.ensure_grad();
                   for (std::size_t i = 0; i < n; ++i)
                       for (std::size_t j = 0; j < d; ++j)
                           px.grad[i * d + j] += self.grad[j] * inv;
               },
               "col_mean");
    return out;
}

template <typename Real>
Tensor<Real> sum_all(const Tensor<Real>& x) {
    auto out = Tensor<Real>::zeros({1});
    Real s = 0;
    for (Real v : x.value()) s += v;
    out.value()[0] = s;
    out.attach({x},
               [](typename Tensor<Real>::Node& self) {
                   auto& px = *self.parents[0];
                   if (!px.requires_grad) return;
                   px.ensure_grad();
                   const Real g = self.grad[0];
                   for (std::size_t i = 0; i < px.grad.size(); ++i) px.grad[i] += g;
               },
               "sum_all");
    return out;
}

// Per-row group normalization with per-channel scale/shift. groups == 1 is
// plain layer norm over the row.
template <typename Real>
Tensor<Real> group_norm(const Tensor<Real>& x, const Tensor<Real>& gamma,
                        const Tensor<Real>& beta, std::size_t groups,
                        Real eps = Real(1e-5)) {
    if (x.rank() != 2) throw ShapeError("group_norm expects rank-2 input");
    const std::size_t n = x.dim(0), d = x.dim(1);
    if (d % groups != 0 || gamma.numel() != d || beta.numel() != d)
        throw ShapeError("group_norm: dim " + std::to_string(d) + " groups " +
                         std::to_string(groups));
    const std::size_t gs = d / groups;
    auto out = Tensor<Real>::zeros(x.shape());
    Buffer<Real> xhat(n * d), inv_sigma(n * groups);
    const Real* xv = x.value().data();
    const Real* gv = gamma.value().data();
    const Real* bv = beta.value().data();
    Real* ov = out.value().data();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t g = 0; g < groups; ++g) {
            const Real* row = xv + i * d + g * gs;
            Real mean = 0;
            for (std::size_t j = 0; j < gs; ++j) mean += row[j];
            mean /= static_cast<Real>(gs);
            Real var = 0;
            for (std::size_t j = 0; j < gs; ++j) {
                const Real c = row[j] - mean;
                var += c * c;
            }
            var /= static_cast<Real>(gs);
            const Real is = Real(1) / std::sqrt(var + eps);
            inv_sigma[i * groups + g] = is;
            for (std::size_t j = 0; j < gs; ++j) {
                const std::size_t col = g * gs + j;
                const Real xh = (row[j] - mean) * is;
                xhat[i * d + col] = xh;
                ov[i * d + col] = xh * gv[col] + bv[col];
            }
        }
    }
    out.attach(
        {x, gamma, beta},
        [n, d, groups, gs, xhat = std::move(xhat),
         inv_sigma = std::move(inv_sigma)](typename Tensor<Real>::Node& self) {
            auto& px = *self.parents[0];
            auto& pg = *self.parents[1];
            auto& pb = *self.parents[2];
            const Real* g = self.grad.data();
            const Real* gv2 = pg.value.data();
            Real* gx = nullptr;
            if (px.requires_grad) {
                px.ensure_grad();
                gx = px.grad.data();
            }
            Real* gg = nullptr;
            Real* gb = nullptr;
            if (pg.requires_grad) {
                pg.ensure_grad();
                gg = pg.grad.data();
            }
            if (pb.requires_grad) {
                pb.ensure_grad();
                gb = pb.grad.data();
            }
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t grp = 0; grp < groups; ++grp) {
                    const Real is = inv_sigma[i * groups + grp];
                    Real sum_dy = 0, sum_dy_xhat = 0;
                    for (std::size_t j = 0; j < gs; ++j) {
                        const std::size_t col = grp * gs + j;
                        const Real dy = g[i * d + col] * gv2[col];
                        sum_dy += dy;
                        sum_dy_xhat += dy * xhat[i * d + col];
                    }
                    const Real inv_gs = Real(1) / static_cast<Real>(gs);
                    for (std::size_t j = 0; j < gs; ++j) {
                        const std::size_t col = grp * gs + j;
                        const Real xh = xhat[i * d + col];
                        const Real dy = g[i * d + col] * gv2[col];
                        if (gx)
                            gx[i * d + col] +=
                                is * (dy - inv_gs * sum_dy - xh * inv_gs * sum_dy_xhat);
                        if (gg) gg[col] += g[i * d + col] * xh;
                        if (gb) gb[col] += g[i * d + col];
                    }
                }
            }
        },
        "group_norm");
    return out;
}

// Cross entropy from logits for a single sample. Stable log-sum-exp.
template <typename Real>
Tensor<Real> cross_entropy_logits(const Tensor<Real>& logits, std::size_t label) {
    const std::size_t k = logits.numel();
    if (label >= k) throw ContractError("cross_entropy label out of range");
    const Real* lv = logits.value().data();
    Real mx = lv[0];
    for (std::size_t i = 1; i < k; ++i) mx = std::max(mx, lv[i]);
    Real lse = 0;
    for (std::size_t i = 0; i < k; ++i) lse += std::exp(lv[i] - mx);
    lse = mx + std::log(lse);
    auto out = Tensor<Real>::scalar(lse - lv[label]);
    out.attach({logits},
               [k, label, lse](typename Tensor<Real>::Node& self) {
                   auto& pl = *self.parents[0];
                   if (!pl.requires_grad) return;
                   pl.ensure_grad();
                   const Real g = self.grad[0];
                   for (std::size_t i = 0; i < k; ++i) {
                       const Real p = std::exp(pl.value[i] - lse);
                       pl.grad[i] += g * (p - (i == label ? Real(1) : Real(0)));
                   }
               },
               "cross_entropy");
    return out;
}

template <typename Real>
Tensor<Real> mae_loss(const Tensor<Real>& pred, Real target) {
    if (pred.numel() != 1) throw ContractError("mae_loss expects scalar prediction");
    const Real diff = pred.value()[0] - target;
    auto out = Tensor<Real>::scalar(std::abs(diff));
    out.attach({pred},
               [diff](typename Tensor<Real>::Node& self) {
                   auto& pp = *self.parents[0];
                   if (!pp.requires_grad) return;
                   pp.ensure_grad();
                   const Real s = diff > Real(0) ? Real(1) : (diff < Real(0) ? Real(-1) : Real(0));
                   pp.grad[0] += self.grad[0] * s;
               },
               "mae");
    return out;
}

// ---------------------------------------------------------------------------
// Reverse pass. Repeated calls without zeroing accumulate into existing grads.
// ---------------------------------------------------------------------------

template <typename Real>
void backward(const Tensor<Real>& loss) {
    if (!loss.defined() || loss.numel() != 1)
        throw ContractError("backward requires a scalar loss tensor");
    using Node = typename Tensor<Real>::Node;
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    // Iterative post-order DFS over parents.
    std::vector<std::pair<std::shared_ptr<Node>, std::size_t>> stack;
    stack.emplace_back(loss.node(), 0);
    seen.insert(loss.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            auto child = node->parents[next++];
            if (child->requires_grad && seen.insert(child.get()).second)
                stack.emplace_back(std::move(child), 0);
        } else {
            order.push_back(node.get());
            stack.pop_back();
        }
    }
    // Interior grads are per-pass scratch; only leaves (parameters) accumulate
    // across repeated backward calls.
    for (Node* n : order) {
        if (n->backward && !n->grad.empty())
            std::fill(n->grad.data(), n->grad.data() + n->grad.size(), Real(0));
    }
    loss.node()->ensure_grad();
    loss.node()->grad[0] += Real(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward && !n->grad.empty()) n->backward(*n);
    }
}

}  // namespace prwk
