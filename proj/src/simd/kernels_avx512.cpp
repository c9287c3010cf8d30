// Compiled with -mavx512f; only reached after a runtime CPU check.
#include <immintrin.h>

#include "kernels.hpp"

namespace dcgan::simd::detail {
namespace {

static_assert(kMr == 6 && kNr == 8, "AVX-512 micro-kernel is written for a 6x8 tile");

void gemm_micro_avx512(std::size_t kc, const double* a, const double* b, double* c, std::size_t ldc) {
    __m512d c0 = _mm512_setzero_pd(), c1 = _mm512_setzero_pd(), c2 = _mm512_setzero_pd();
    __m512d c3 = _mm512_setzero_pd(), c4 = _mm512_setzero_pd(), c5 = _mm512_setzero_pd();

    for (std::size_t p = 0; p < kc; ++p) {
        const __m512d bv = _mm512_loadu_pd(b);
        c0 = _mm512_fmadd_pd(_mm512_set1_pd(a[0]), bv, c0);
        c1 = _mm512_fmadd_pd(_mm512_set1_pd(a[1]), bv, c1);
        c2 = _mm512_fmadd_pd(_mm512_set1_pd(a[2]), bv, c2);
        c3 = _mm512_fmadd_pd(_mm512_set1_pd(a[3]), bv, c3);
        c4 = _mm512_fmadd_pd(_mm512_set1_pd(a[4]), bv, c4);
        c5 = _mm512_fmadd_pd(_mm512_set1_pd(a[5]), bv, c5);
        a += kMr;
        b += kNr;
    }

    auto store_row = [ldc, c](std::size_t row, __m512d acc) {
        double* dst = c + row * ldc;
        _mm512_storeu_pd(dst, _mm512_add_pd(_mm512_loadu_pd(dst), acc));
    };
    store_row(0, c0);
    store_row(1, c1);
    store_row(2, c2);
    store_row(3, c3);
    store_row(4, c4);
    store_row(5, c5);
}

// Same operation order as the scalar reference, no FMA, so results match bit for bit.
void adam_avx512(double* param, const double* grad, double* m, double* v, std::size_t n,
                 const AdamCoefficients& k) {
    const __m512d beta1 = _mm512_set1_pd(k.beta1);
    const __m512d beta2 = _mm512_set1_pd(k.beta2);
    const __m512d one_minus_b1 = _mm512_set1_pd(1.0 - k.beta1);
    const __m512d one_minus_b2 = _mm512_set1_pd(1.0 - k.beta2);
    const __m512d bc1 = _mm512_set1_pd(k.bias_correction1);
    const __m512d bc2 = _mm512_set1_pd(k.bias_correction2);
    const __m512d lr = _mm512_set1_pd(k.lr);
    const __m512d eps = _mm512_set1_pd(k.eps);

    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m512d g = _mm512_loadu_pd(grad + i);
        const __m512d mi = _mm512_add_pd(_mm512_mul_pd(beta1, _mm512_loadu_pd(m + i)), _mm512_mul_pd(one_minus_b1, g));
        const __m512d vi = _mm512_add_pd(_mm512_mul_pd(beta2, _mm512_loadu_pd(v + i)),
                                         _mm512_mul_pd(one_minus_b2, _mm512_mul_pd(g, g)));
        _mm512_storeu_pd(m + i, mi);
        _mm512_storeu_pd(v + i, vi);
        const __m512d m_hat = _mm512_div_pd(mi, bc1);
        const __m512d v_hat = _mm512_div_pd(vi, bc2);
        const __m512d step = _mm512_div_pd(_mm512_mul_pd(lr, m_hat), _mm512_add_pd(_mm512_sqrt_pd(v_hat), eps));
        _mm512_storeu_pd(param + i, _mm512_sub_pd(_mm512_loadu_pd(param + i), step));
    }
    if (i < n) scalar_kernels().adam(param + i, grad + i, m + i, v + i, n - i, k);
}

}  // namespace

const KernelTable* avx512_kernels() {
    static const KernelTable table{gemm_micro_avx512, adam_avx512};
    return &table;
}

}  // namespace dcgan::simd::detail
