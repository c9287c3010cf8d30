// AArch64 only; NEON is part of the base ISA there so no runtime probe is needed.
#include <arm_neon.h>

#include "kernels.hpp"

namespace dcgan::simd::detail {
namespace {

static_assert(kMr == 6 && kNr == 8, "NEON micro-kernel is written for a 6x8 tile");

void gemm_micro_neon(std::size_t kc, const double* a, const double* b, double* c, std::size_t ldc) {
    float64x2_t acc[kMr][4];
    for (auto& row : acc)
        for (auto& q : row) q = vdupq_n_f64(0.0);

    for (std::size_t p = 0; p < kc; ++p) {
        const float64x2_t b0 = vld1q_f64(b);
        const float64x2_t b1 = vld1q_f64(b + 2);
        const float64x2_t b2 = vld1q_f64(b + 4);
        const float64x2_t b3 = vld1q_f64(b + 6);
        for (std::size_t i = 0; i < kMr; ++i) {
            const float64x2_t ai = vdupq_n_f64(a[i]);
            acc[i][0] = vfmaq_f64(acc[i][0], ai, b0);
            acc[i][1] = vfmaq_f64(acc[i][1], ai, b1);
            acc[i][2] = vfmaq_f64(acc[i][2], ai, b2);
            acc[i][3] = vfmaq_f64(acc[i][3], ai, b3);
        }
        a += kMr;
        b += kNr;
    }
    for (std::size_t i = 0; i < kMr; ++i) {
        double* dst = c + i * ldc;
        for (std::size_t q = 0; q < 4; ++q) vst1q_f64(dst + 2 * q, vaddq_f64(vld1q_f64(dst + 2 * q), acc[i][q]));
    }
}

void adam_neon(double* param, const double* grad, double* m, double* v, std::size_t n, const AdamCoefficients& k) {
    const float64x2_t beta1 = vdupq_n_f64(k.beta1);
    const float64x2_t beta2 = vdupq_n_f64(k.beta2);
    const float64x2_t one_minus_b1 = vdupq_n_f64(1.0 - k.beta1);
    const float64x2_t one_minus_b2 = vdupq_n_f64(1.0 - k.beta2);
    const float64x2_t bc1 = vdupq_n_f64(k.bias_correction1);
    const float64x2_t bc2 = vdupq_n_f64(k.bias_correction2);
    const float64x2_t lr = vdupq_n_f64(k.lr);
    const float64x2_t eps = vdupq_n_f64(k.eps);

    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const float64x2_t g = vld1q_f64(grad + i);
        const float64x2_t mi = vaddq_f64(vmulq_f64(beta1, vld1q_f64(m + i)), vmulq_f64(one_minus_b1, g));
        const float64x2_t vi = vaddq_f64(vmulq_f64(beta2, vld1q_f64(v + i)), vmulq_f64(one_minus_b2, vmulq_f64(g, g)));
        vst1q_f64(m + i, mi);
        vst1q_f64(v + i, vi);
        const float64x2_t m_hat = vdivq_f64(mi, bc1);
        const float64x2_t v_hat = vdivq_f64(vi, bc2);
        const float64x2_t step = vdivq_f64(vmulq_f64(lr, m_hat), vaddq_f64(vsqrtq_f64(v_hat), eps));
        vst1q_f64(param + i, vsubq_f64(vld1q_f64(param + i), step));
    }
    if (i < n) scalar_kernels().adam(param + i, grad + i, m + i, v + i, n - i, k);
}

}  // namespace

const KernelTable* neon_kernels() {
    static const KernelTable table{gemm_micro_neon, adam_neon};
    return &table;
}

}  // namespace dcgan::simd::detail
