// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.
#include <immintrin.h>

#include "kernels.hpp"

namespace dcgan::simd::detail {
namespace {

static_assert(kMr == 6 && kNr == 8, "AVX2 micro-kernel is written for a 6x8 tile");

void gemm_micro_avx2(std::size_t kc, const double* a, const double* b, double* c, std::size_t ldc) {
    __m256d c00 = _mm256_setzero_pd(), c01 = _mm256_setzero_pd();
    __m256d c10 = _mm256_setzero_pd(), c11 = _mm256_setzero_pd();
    __m256d c20 = _mm256_setzero_pd(), c21 = _mm256_setzero_pd();
    __m256d c30 = _mm256_setzero_pd(), c31 = _mm256_setzero_pd();
    __m256d c40 = _mm256_setzero_pd(), c41 = _mm256_setzero_pd();
    __m256d c50 = _mm256_setzero_pd(), c51 = _mm256_setzero_pd();

    for (std::size_t p = 0; p < kc; ++p) {
        const __m256d b0 = _mm256_loadu_pd(b);
        const __m256d b1 = _mm256_loadu_pd(b + 4);
        __m256d ai;
        ai = _mm256_broadcast_sd(a + 0);
        c00 = _mm256_fmadd_pd(ai, b0, c00);
        c01 = _mm256_fmadd_pd(ai, b1, c01);
        ai = _mm256_broadcast_sd(a + 1);
        c10 = _mm256_fmadd_pd(ai, b0, c10);
        c11 = _mm256_fmadd_pd(ai, b1, c11);
        ai = _mm256_broadcast_sd(a + 2);
        c20 = _mm256_fmadd_pd(ai, b0, c20);
        c21 = _mm256_fmadd_pd(ai, b1, c21);
        ai = _mm256_broadcast_sd(a + 3);
        c30 = _mm256_fmadd_pd(ai, b0, c30);
        c31 = _mm256_fmadd_pd(ai, b1, c31);
        ai = _mm256_broadcast_sd(a + 4);
        c40 = _mm256_fmadd_pd(ai, b0, c40);
        c41 = _mm256_fmadd_pd(ai, b1, c41);
        ai = _mm256_broadcast_sd(a + 5);
        c50 = _mm256_fmadd_pd(ai, b0, c50);
        c51 = _mm256_fmadd_pd(ai, b1, c51);
        a += kMr;
        b += kNr;
    }

    auto store_row = [ldc, c](std::size_t row, __m256d lo, __m256d hi) {
        double* dst = c + row * ldc;
        _mm256_storeu_pd(dst, _mm256_add_pd(_mm256_loadu_pd(dst), lo));
        _mm256_storeu_pd(dst + 4, _mm256_add_pd(_mm256_loadu_pd(dst + 4), hi));
    };
    store_row(0, c00, c01);
    store_row(1, c10, c11);
    store_row(2, c20, c21);
    store_row(3, c30, c31);
    store_row(4, c40, c41);
    store_row(5, c50, c51);
}

// Same operation order as the scalar reference, no FMA, so results match bit for bit.
void adam_avx2(double* param, const double* grad, double* m, double* v, std::size_t n, const AdamCoefficients& k) {
    const __m256d beta1 = _mm256_set1_pd(k.beta1);
    const __m256d beta2 = _mm256_set1_pd(k.beta2);
    const __m256d one_minus_b1 = _mm256_set1_pd(1.0 - k.beta1);
    const __m256d one_minus_b2 = _mm256_set1_pd(1.0 - k.beta2);
    const __m256d bc1 = _mm256_set1_pd(k.bias_correction1);
    const __m256d bc2 = _mm256_set1_pd(k.bias_correction2);
    const __m256d lr = _mm256_set1_pd(k.lr);
    const __m256d eps = _mm256_set1_pd(k.eps);

    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d g = _mm256_loadu_pd(grad + i);
        const __m256d mi = _mm256_add_pd(_mm256_mul_pd(beta1, _mm256_loadu_pd(m + i)), _mm256_mul_pd(one_minus_b1, g));
        const __m256d vi = _mm256_add_pd(_mm256_mul_pd(beta2, _mm256_loadu_pd(v + i)),
                                         _mm256_mul_pd(one_minus_b2, _mm256_mul_pd(g, g)));
        _mm256_storeu_pd(m + i, mi);
        _mm256_storeu_pd(v + i, vi);
        const __m256d m_hat = _mm256_div_pd(mi, bc1);
        const __m256d v_hat = _mm256_div_pd(vi, bc2);
        const __m256d step = _mm256_div_pd(_mm256_mul_pd(lr, m_hat), _mm256_add_pd(_mm256_sqrt_pd(v_hat), eps));
        _mm256_storeu_pd(param + i, _mm256_sub_pd(_mm256_loadu_pd(param + i), step));
    }
    if (i < n) scalar_kernels().adam(param + i, grad + i, m + i, v + i, n - i, k);
}

}  // namespace

const KernelTable* avx2_kernels() {
    static const KernelTable table{gemm_micro_avx2, adam_avx2};
    return &table;
}

}  // namespace dcgan::simd::detail
