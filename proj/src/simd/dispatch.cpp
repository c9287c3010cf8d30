#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <string>
#include <vector>

#include "dcgan/errors.hpp"
#include "kernels.hpp"

namespace dcgan::simd {

namespace detail {
#ifndef DCGAN_HAVE_AVX2_KERNELS
const KernelTable* avx2_kernels() { return nullptr; }
#endif
#ifndef DCGAN_HAVE_AVX512_KERNELS
const KernelTable* avx512_kernels() { return nullptr; }
#endif
#ifndef DCGAN_HAVE_NEON_KERNELS
const KernelTable* neon_kernels() { return nullptr; }
#endif
}  // namespace detail

namespace {

using detail::kMr;
using detail::kNr;

// Cache blocking. kMc is a multiple of kMr and kNc of kNr.
constexpr std::size_t kKc = 256;
constexpr std::size_t kMc = 96;
constexpr std::size_t kNc = 2048;

std::atomic<int> g_active{-1};

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

bool cpu_has_avx512() {
#if defined(__x86_64__) || defined(__i386__)
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx512f");
#else
    return false;
#endif
}

const detail::KernelTable& table_for(Backend backend) {
    const detail::KernelTable* table = nullptr;
    switch (backend) {
        case Backend::scalar: return detail::scalar_kernels();
        case Backend::avx2: table = cpu_has_avx2() ? detail::avx2_kernels() : nullptr; break;
        case Backend::avx512: table = cpu_has_avx512() ? detail::avx512_kernels() : nullptr; break;
        case Backend::neon: table = detail::neon_kernels(); break;
    }
    if (!table) throw ValidationError("SIMD backend '" + std::string(backend_name(backend)) + "' is not available");
    return *table;
}

void pack_a(const MatrixRef& a, std::size_t row0, std::size_t col0, std::size_t mc, std::size_t kc, double* out) {
    for (std::size_t ip = 0; ip < mc; ip += kMr) {
        const std::size_t rows = std::min(kMr, mc - ip);
        for (std::size_t p = 0; p < kc; ++p) {
            const double* src = a.data + static_cast<std::ptrdiff_t>(row0 + ip) * a.row_stride +
                                static_cast<std::ptrdiff_t>(col0 + p) * a.col_stride;
            std::size_t i = 0;
            for (; i < rows; ++i) out[i] = src[static_cast<std::ptrdiff_t>(i) * a.row_stride];
            for (; i < kMr; ++i) out[i] = 0.0;
            out += kMr;
        }
    }
}

void pack_b(const MatrixRef& b, std::size_t row0, std::size_t col0, std::size_t kc, std::size_t nc, double* out) {
    for (std::size_t jp = 0; jp < nc; jp += kNr) {
        const std::size_t cols = std::min(kNr, nc - jp);
        for (std::size_t p = 0; p < kc; ++p) {
            const double* src = b.data + static_cast<std::ptrdiff_t>(row0 + p) * b.row_stride +
                                static_cast<std::ptrdiff_t>(col0 + jp) * b.col_stride;
            std::size_t j = 0;
            if (b.col_stride == 1) {
                for (; j < cols; ++j) out[j] = src[j];
            } else {
                for (; j < cols; ++j) out[j] = src[static_cast<std::ptrdiff_t>(j) * b.col_stride];
            }
            for (; j < kNr; ++j) out[j] = 0.0;
            out += kNr;
        }
    }
}

template <typename PackB>
void gemm_impl(const detail::KernelTable& kernels, std::size_t m, std::size_t n, std::size_t k, MatrixRef a,
               const PackB& pack_b_block, double* c, std::size_t ldc, bool accumulate) {
    if (!accumulate)
        for (std::size_t i = 0; i < m; ++i) std::fill(c + i * ldc, c + i * ldc + n, 0.0);
    if (m == 0 || n == 0 || k == 0) return;

    thread_local std::vector<double> a_pack;
    thread_local std::vector<double> b_pack;
    a_pack.resize(((kMc + kMr - 1) / kMr) * kMr * kKc);
    b_pack.resize(((kNc + kNr - 1) / kNr) * kNr * kKc);
    double edge[kMr * kNr];

    for (std::size_t jc = 0; jc < n; jc += kNc) {
        const std::size_t nc = std::min(kNc, n - jc);
        for (std::size_t pc = 0; pc < k; pc += kKc) {
            const std::size_t kc = std::min(kKc, k - pc);
            pack_b_block(pc, jc, kc, nc, b_pack.data());
            for (std::size_t ic = 0; ic < m; ic += kMc) {
                const std::size_t mc = std::min(kMc, m - ic);
                pack_a(a, ic, pc, mc, kc, a_pack.data());
                for (std::size_t jr = 0; jr < nc; jr += kNr) {
                    const std::size_t nr = std::min(kNr, nc - jr);
                    const double* bp = b_pack.data() + (jr / kNr) * kc * kNr;
                    for (std::size_t ir = 0; ir < mc; ir += kMr) {
                        const std::size_t mr = std::min(kMr, mc - ir);
                        const double* ap = a_pack.data() + (ir / kMr) * kc * kMr;
                        double* ct = c + (ic + ir) * ldc + jc + jr;
                        if (mr == kMr && nr == kNr) {
                            kernels.gemm_micro(kc, ap, bp, ct, ldc);
                        } else {
                            std::fill(std::begin(edge), std::end(edge), 0.0);
                            kernels.gemm_micro(kc, ap, bp, edge, kNr);
                            for (std::size_t i = 0; i < mr; ++i)
                                for (std::size_t j = 0; j < nr; ++j) ct[i * ldc + j] += edge[i * kNr + j];
                        }
                    }
                }
            }
        }
    }
}

}  // namespace

std::string_view backend_name(Backend backend) {
    switch (backend) {
        case Backend::scalar: return "scalar";
        case Backend::avx2: return "avx2";
        case Backend::avx512: return "avx512";
        case Backend::neon: return "neon";
    }
    return "unknown";
}

std::optional<Backend> parse_backend(std::string_view name) {
    if (name == "scalar") return Backend::scalar;
    if (name == "avx2") return Backend::avx2;
    if (name == "avx512") return Backend::avx512;
    if (name == "neon") return Backend::neon;
    return std::nullopt;
}

bool backend_supported(Backend backend) {
    switch (backend) {
        case Backend::scalar: return true;
        case Backend::avx2: return detail::avx2_kernels() != nullptr && cpu_has_avx2();
        case Backend::avx512: return detail::avx512_kernels() != nullptr && cpu_has_avx512();
        case Backend::neon: return detail::neon_kernels() != nullptr;
    }
    return false;
}

Backend best_backend() {
    if (backend_supported(Backend::avx512)) return Backend::avx512;
    if (backend_supported(Backend::avx2)) return Backend::avx2;
    if (backend_supported(Backend::neon)) return Backend::neon;
    return Backend::scalar;
}

Backend active_backend() {
    int current = g_active.load(std::memory_order_acquire);
    if (current >= 0) return static_cast<Backend>(current);

    Backend chosen = best_backend();
    if (const char* env = std::getenv("DCGAN_SIMD")) {
        auto requested = parse_backend(env);
        if (!requested || !backend_supported(*requested))
            throw ValidationError(std::string("DCGAN_SIMD=") + env + " is not an available backend");
        chosen = *requested;
    }
    int expected = -1;
    g_active.compare_exchange_strong(expected, static_cast<int>(chosen), std::memory_order_acq_rel);
    return static_cast<Backend>(g_active.load(std::memory_order_acquire));
}

void set_backend(Backend backend) {
    table_for(backend);
    g_active.store(static_cast<int>(backend), std::memory_order_release);
}

ScopedBackend::ScopedBackend(Backend backend) : previous_(active_backend()) { set_backend(backend); }

ScopedBackend::~ScopedBackend() { g_active.store(static_cast<int>(previous_), std::memory_order_release); }

void gemm(std::size_t m, std::size_t n, std::size_t k, MatrixRef a, MatrixRef b, double* c, std::size_t ldc,
          bool accumulate) {
    gemm(active_backend(), m, n, k, a, b, c, ldc, accumulate);
}

void gemm(Backend backend, std::size_t m, std::size_t n, std::size_t k, MatrixRef a, MatrixRef b, double* c,
          std::size_t ldc, bool accumulate) {
    const auto pack = [&b](std::size_t k0, std::size_t n0, std::size_t kc, std::size_t nc, double* out) {
        pack_b(b, k0, n0, kc, nc, out);
    };
    gemm_impl(table_for(backend), m, n, k, a, pack, c, ldc, accumulate);
}

void gemm_packed(std::size_t m, std::size_t n, std::size_t k, MatrixRef a, const BPacker& b, double* c,
                 std::size_t ldc, bool accumulate) {
    gemm_packed(active_backend(), m, n, k, a, b, c, ldc, accumulate);
}

void gemm_packed(Backend backend, std::size_t m, std::size_t n, std::size_t k, MatrixRef a, const BPacker& b,
                 double* c, std::size_t ldc, bool accumulate) {
    gemm_impl(table_for(backend), m, n, k, a, b, c, ldc, accumulate);
}

void adam_update(std::span<double> param, std::span<const double> grad, std::span<double> m, std::span<double> v,
                 const AdamCoefficients& coeff) {
    adam_update(active_backend(), param, grad, m, v, coeff);
}

void adam_update(Backend backend, std::span<double> param, std::span<const double> grad, std::span<double> m,
                 std::span<double> v, const AdamCoefficients& coeff) {
    if (grad.size() != param.size() || m.size() != param.size() || v.size() != param.size())
        throw DimensionError("adam_update: parameter, gradient and moment lengths differ");
    table_for(backend).adam(param.data(), grad.data(), m.data(), v.data(), param.size(), coeff);
}

}  // namespace dcgan::simd
