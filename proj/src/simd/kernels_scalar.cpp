#include <cmath>

#include "kernels.hpp"

namespace dcgan::simd::detail {
namespace {

void gemm_micro_scalar(std::size_t kc, const double* a, const double* b, double* c, std::size_t ldc) {
    double acc[kMr][kNr] = {};
    for (std::size_t p = 0; p < kc; ++p) {
        for (std::size_t i = 0; i < kMr; ++i) {
            const double ai = a[i];
            for (std::size_t j = 0; j < kNr; ++j) acc[i][j] += ai * b[j];
        }
        a += kMr;
        b += kNr;
    }
    for (std::size_t i = 0; i < kMr; ++i)
        for (std::size_t j = 0; j < kNr; ++j) c[i * ldc + j] += acc[i][j];
}

void adam_scalar(double* param, const double* grad, double* m, double* v, std::size_t n, const AdamCoefficients& k) {
    const double one_minus_b1 = 1.0 - k.beta1;
    const double one_minus_b2 = 1.0 - k.beta2;
    for (std::size_t i = 0; i < n; ++i) {
        const double g = grad[i];
        m[i] = k.beta1 * m[i] + one_minus_b1 * g;
        v[i] = k.beta2 * v[i] + one_minus_b2 * (g * g);
        const double m_hat = m[i] / k.bias_correction1;
        const double v_hat = v[i] / k.bias_correction2;
        param[i] = param[i] - (k.lr * m_hat) / (std::sqrt(v_hat) + k.eps);
    }
}

}  // namespace

const KernelTable& scalar_kernels() {
    static const KernelTable table{gemm_micro_scalar, adam_scalar};
    return table;
}

}  // namespace dcgan::simd::detail
