#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string_view>

// Data-parallel inner loops with one scalar reference implementation and
// per-ISA variants. The backend is chosen once at runtime (best supported,
// or DCGAN_SIMD=scalar|avx2|avx512|neon) and can be switched explicitly for
// equivalence testing.

namespace dcgan::simd {

enum class Backend { scalar, avx2, avx512, neon };

std::string_view backend_name(Backend backend);
std::optional<Backend> parse_backend(std::string_view name);

/// Compiled into this binary and supported by the running CPU.
bool backend_supported(Backend backend);
Backend best_backend();
Backend active_backend();
/// Throws ValidationError if the backend is not supported here.
void set_backend(Backend backend);

/// Switches the process-wide backend for the lifetime of the guard.
class ScopedBackend {
public:
    explicit ScopedBackend(Backend backend);
    ~ScopedBackend();
    ScopedBackend(const ScopedBackend&) = delete;
    ScopedBackend& operator=(const ScopedBackend&) = delete;

private:
    Backend previous_;
};

/// Strided read-only view of a logical matrix: element (i, j) lives at
/// data[i * row_stride + j * col_stride]. Transposes are free.
struct MatrixRef {
    const double* data;
    std::ptrdiff_t row_stride;
    std::ptrdiff_t col_stride;

    static MatrixRef row_major(const double* data, std::size_t cols) {
        return {data, static_cast<std::ptrdiff_t>(cols), 1};
    }
    /// View of the transpose of a row-major (rows x cols) matrix.
    static MatrixRef transposed(const double* data, std::size_t cols) {
        return {data, 1, static_cast<std::ptrdiff_t>(cols)};
    }
};

/// C (m x n, row-major with leading dimension ldc) = [C +] A (m x k) * B (k x n).
///
/// Summation order along k is fixed by the blocking, so repeated calls with
/// the same backend and sizes are bit-identical. Backends differ in rounding
/// (the vector micro-kernels use fused multiply-add).
void gemm(std::size_t m, std::size_t n, std::size_t k, MatrixRef a, MatrixRef b, double* c, std::size_t ldc,
          bool accumulate);
void gemm(Backend backend, std::size_t m, std::size_t n, std::size_t k, MatrixRef a, MatrixRef b, double* c,
          std::size_t ldc, bool accumulate);

/// Width of the column panels a BPacker fills.
inline constexpr std::size_t kPanelWidth = 8;

/// Fills the packed form of B rows [k0, k0 + kc) x columns [n0, n0 + nc):
/// consecutive panels of kPanelWidth columns, each stored k-major
/// (kc groups of kPanelWidth values), the last panel zero-padded.
using BPacker = std::function<void(std::size_t k0, std::size_t n0, std::size_t kc, std::size_t nc, double* panels)>;

/// As gemm(), with B supplied implicitly through a packer so it never has to
/// exist as a dense matrix (convolution windows are packed from the image).
void gemm_packed(std::size_t m, std::size_t n, std::size_t k, MatrixRef a, const BPacker& b, double* c,
                 std::size_t ldc, bool accumulate);
void gemm_packed(Backend backend, std::size_t m, std::size_t n, std::size_t k, MatrixRef a, const BPacker& b,
                 double* c, std::size_t ldc, bool accumulate);

struct AdamCoefficients {
    double lr;
    double beta1;
    double beta2;
    double eps;
    double bias_correction1;  // 1 - beta1^t
    double bias_correction2;  // 1 - beta2^t
};

/// One bias-corrected Adam update over flat arrays of equal length.
/// All backends perform the same IEEE operations in the same order and are
/// bit-identical to the scalar reference.
void adam_update(std::span<double> param, std::span<const double> grad, std::span<double> m, std::span<double> v,
                 const AdamCoefficients& coeff);
void adam_update(Backend backend, std::span<double> param, std::span<const double> grad, std::span<double> m,
                 std::span<double> v, const AdamCoefficients& coeff);

}  // namespace dcgan::simd
