#pragma once

#include <cstddef>

#include "dcgan/simd.hpp"

namespace dcgan::simd::detail {

// Register tile of the GEMM micro-kernel. Packed A panels hold kMr rows per
// k step, packed B panels kNr columns per k step.
inline constexpr std::size_t kMr = 6;
inline constexpr std::size_t kNr = kPanelWidth;

// C[kMr x kNr] += A_panel * B_panel over kc steps.
using MicroKernel = void (*)(std::size_t kc, const double* a_panel, const double* b_panel, double* c,
                             std::size_t ldc);

using AdamKernel = void (*)(double* param, const double* grad, double* m, double* v, std::size_t n,
                            const AdamCoefficients& coeff);

struct KernelTable {
    MicroKernel gemm_micro;
    AdamKernel adam;
};

const KernelTable& scalar_kernels();
// nullptr when the variant was not compiled for this target.
const KernelTable* avx2_kernels();
const KernelTable* avx512_kernels();
const KernelTable* neon_kernels();

}  // namespace dcgan::simd::detail
