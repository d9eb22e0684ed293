#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <mutex>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace prwk {

// ---------------------------------------------------------------------------
// Errors, keyed to process exit codes:
//   1 usage/config, 2 data/format, 3 numeric failure, 4 property failure.
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
public:
    Error(int exit_code, const std::string& msg)
        : std::runtime_error(msg), exit_code_(exit_code) {}
    int exit_code() const noexcept { return exit_code_; }

private:
    int exit_code_;
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error(1, msg) {}
};

// Shape mismatches between tensor operands.
struct ShapeError : Error {
    explicit ShapeError(const std::string& msg) : Error(1, msg) {}
};

// Violated operation precondition (non-scalar loss, out-of-range epoch, ...).
struct ContractError : Error {
    explicit ContractError(const std::string& msg) : Error(1, msg) {}
};

// Bad files, manifests, checkpoints; carries a byte offset when known.
struct DataError : Error {
    explicit DataError(const std::string& msg, long long byte_offset = -1)
        : Error(2, byte_offset >= 0
                       ? msg + " (byte offset " + std::to_string(byte_offset) + ")"
                       : msg),
          offset(byte_offset) {}
    long long offset;
};

// Non-finite losses, undefined metrics.
struct NumericError : Error {
    explicit NumericError(const std::string& msg) : Error(3, msg) {}
};

struct PropertyError : Error {
    explicit PropertyError(const std::string& msg) : Error(4, msg) {}
};

// ---------------------------------------------------------------------------
// Deterministic random numbers. std::mt19937_64 has a standardized output
// sequence; the distribution transforms below are hand-rolled so that
// streams are identical across standard libraries.
// ---------------------------------------------------------------------------

using Rng = std::mt19937_64;

inline double uniform01(Rng& rng) {
    // 53-bit mantissa draw in [0, 1).
    return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
}

inline double uniform(Rng& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

// Box-Muller without cached spare, so the stream has no hidden state.
inline double gaussian(Rng& rng) {
    double u1 = uniform01(rng);
    double u2 = uniform01(rng);
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
}

// Unbiased bounded draw in [0, n) via rejection.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
    if (n == 0) return 0;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
        x = rng();
    } while (x >= limit);
    return x % n;
}

template <typename T>
void shuffle_inplace(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(uniform_index(rng, i));
        std::swap(v[i - 1], v[j]);
    }
}

// k distinct indices from [0, n), returned in increasing order.
inline std::vector<std::size_t> sample_without_replacement(Rng& rng, std::size_t n,
                                                           std::size_t k) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = 0; i < k && i < n; ++i) {
        std::size_t j = i + static_cast<std::size_t>(uniform_index(rng, n - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(std::min(k, n));
    std::sort(idx.begin(), idx.end());
    return idx;
}

// splitmix64-style combiner for deriving per-(epoch, slide) streams.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t x = a + 0x9e3779b97f4a7c15ull * (b + 0x632be59bd9b4e019ull);
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ull;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebull;
    x ^= x >> 31;
    return x;
}

// ---------------------------------------------------------------------------
// Live-bytes counter for tensor payloads; peak watermark backs the
// inference-memory checks and the scaling bench.
// ---------------------------------------------------------------------------

class MemCounter {
public:
    void add(std::size_t bytes) {
        const long long now = live_.fetch_add(static_cast<long long>(bytes)) +
                              static_cast<long long>(bytes);
        long long prev = peak_.load();
        while (now > prev && !peak_.compare_exchange_weak(prev, now)) {
        }
    }
    void sub(std::size_t bytes) { live_.fetch_sub(static_cast<long long>(bytes)); }
    long long live() const { return live_.load(); }
    long long peak() const { return peak_.load(); }
    void reset_peak() { peak_.store(live_.load()); }

private:
    std::atomic<long long> live_{0};
    std::atomic<long long> peak_{0};
};

inline MemCounter& tensor_mem() {
    static MemCounter counter;
    return counter;
}

// ---------------------------------------------------------------------------
// Misc
// ---------------------------------------------------------------------------

inline std::uint64_t fnv1a64(std::string_view bytes,
                             std::uint64_t seed = 14695981039346656037ull) {
    std::uint64_t h = seed;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

class Stopwatch {
public:
    Stopwatch() : start_(clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(clock::now() - start_).count();
    }
    void restart() { start_ = clock::now(); }

private:
    using clock = std::chrono::steady_clock;
    clock::time_point start_;
};

// Index-sharded parallel loop; results written by index stay deterministic
// regardless of the worker count.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
    if (workers <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
    std::atomic<std::size_t> cursor{0};
    std::vector<std::thread> pool;
    std::exception_ptr error;
    std::mutex error_mu;
    pool.reserve(w);
    for (std::size_t t = 0; t < w; ++t) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = cursor.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mu);
                    if (!error) error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

inline std::string to_hex(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[static_cast<std::size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return s;
}

}  // namespace prwk
