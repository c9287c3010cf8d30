#include "dcgan/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "dcgan/errors.hpp"
#include "dcgan/simd.hpp"

namespace dcgan {

namespace {

using simd::MatrixRef;

// Input-gradient columns are materialized (for col2im) in sample groups of
// at most this many doubles.
constexpr std::size_t kColumnBudget = std::size_t{1} << 18;
// Below this many output channels an unrolled GEMM is mostly tile padding.
constexpr std::size_t kDirectMaxOutputs = 3;

struct ConvGeometry {
    std::size_t n, c, h, w;
    std::size_t o, k;
    std::size_t stride, pad;
    std::size_t ho, wo;

    std::size_t window() const { return c * k * k; }
    std::size_t plane() const { return ho * wo; }
    std::size_t group_size() const {
        const std::size_t per_sample = window() * plane();
        return std::clamp<std::size_t>(kColumnBudget / std::max<std::size_t>(per_sample, 1), 1, n);
    }
};

ConvGeometry conv_geometry(const Tensor& input, const Tensor& kernel, std::size_t stride, std::size_t pad) {
    require_rank(input, 4, "conv2d input");
    require_rank(kernel, 4, "conv2d kernel");
    if (stride == 0) throw DimensionError("conv2d stride must be >= 1");
    if (kernel.dim(2) != kernel.dim(3))
        throw DimensionError("conv2d kernel must be square, got " + shape_to_string(kernel.shape()));
    if (kernel.dim(1) != input.dim(1))
        throw DimensionError("conv2d kernel expects " + std::to_string(kernel.dim(1)) + " input channels, input has " +
                             std::to_string(input.dim(1)));
    ConvGeometry g{input.dim(0), input.dim(1), input.dim(2), input.dim(3), kernel.dim(0), kernel.dim(2),
                   stride,       pad,          0,            0};
    g.ho = conv_output_extent(g.h, g.k, stride, pad);
    g.wo = conv_output_extent(g.w, g.k, stride, pad);
    return g;
}

void col2im_accumulate(const ConvGeometry& g, const double* cols, std::size_t s0, std::size_t count, double* grad) {
    const std::size_t row_len = count * g.plane();
    for (std::size_t c = 0; c < g.c; ++c) {
        for (std::size_t ki = 0; ki < g.k; ++ki) {
            for (std::size_t kj = 0; kj < g.k; ++kj) {
                const double* row = cols + ((c * g.k + ki) * g.k + kj) * row_len;
                for (std::size_t s = 0; s < count; ++s) {
                    double* plane = grad + ((s0 + s) * g.c + c) * g.h * g.w;
                    for (std::size_t oh = 0; oh < g.ho; ++oh) {
                        const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * g.stride + ki) -
                                                  static_cast<std::ptrdiff_t>(g.pad);
                        if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.h)) continue;
                        const double* src = row + s * g.plane() + oh * g.wo;
                        double* dst = plane + static_cast<std::size_t>(ih) * g.w;
                        for (std::size_t ow = 0; ow < g.wo; ++ow) {
                            const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow * g.stride + kj) -
                                                      static_cast<std::ptrdiff_t>(g.pad);
                            if (iw >= 0 && iw < static_cast<std::ptrdiff_t>(g.w)) dst[iw] += src[ow];
                        }
                    }
                }
            }
        }
    }
}

// Output columns ow whose input column ow*stride + kj - pad lies inside [0, w).
struct ColumnRange {
    std::size_t lo, hi;
};

ColumnRange valid_columns(const ConvGeometry& g, std::size_t kj) {
    std::size_t lo = 0;
    if (kj < g.pad) lo = (g.pad - kj + g.stride - 1) / g.stride;
    const std::ptrdiff_t last = static_cast<std::ptrdiff_t>(g.w) - 1 + static_cast<std::ptrdiff_t>(g.pad) -
                                static_cast<std::ptrdiff_t>(kj);
    std::size_t hi = last < 0 ? 0 : std::min(g.wo, static_cast<std::size_t>(last) / g.stride + 1);
    return {lo, std::max(lo, hi)};
}

// The unrolled window matrix has one row per (c, ki, kj) and one column per
// output position (s, oh, ow); entries are padded input pixels. The packers
// below fill GEMM panels of it, or of its transpose, directly from the image.

struct WindowRow {
    std::size_t channel_offset;
    std::size_t ki, kj;
};

WindowRow window_row(const ConvGeometry& g, std::size_t r) {
    const std::size_t kk = g.k * g.k;
    return {(r / kk) * g.h * g.w, (r % kk) / g.k, r % g.k};
}

void advance(const ConvGeometry& g, WindowRow& row) {
    if (++row.kj < g.k) return;
    row.kj = 0;
    if (++row.ki < g.k) return;
    row.ki = 0;
    row.channel_offset += g.h * g.w;
}

// Consecutive output positions sharing one output row.
struct Run {
    std::size_t first;  // index relative to the packed block
    std::size_t sample_offset;
    std::size_t oh, ow, len;
};

std::vector<Run> output_runs(const ConvGeometry& g, std::size_t j0, std::size_t count) {
    std::vector<Run> runs;
    std::size_t j = j0;
    while (j < j0 + count) {
        const std::size_t s = j / g.plane();
        const std::size_t q = j % g.plane();
        const std::size_t ow = q % g.wo;
        const std::size_t len = std::min(g.wo - ow, j0 + count - j);
        runs.push_back({j - j0, s * g.c * g.h * g.w, q / g.wo, ow, len});
        j += len;
    }
    return runs;
}

// Copies window values of one (c, ki, kj) along a run into dst[i * step].
void gather_run(const ConvGeometry& g, const double* input, const WindowRow& row, const Run& run,
                const ColumnRange& valid, double* dst, std::size_t step) {
    const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(run.oh * g.stride + row.ki) - static_cast<std::ptrdiff_t>(g.pad);
    const std::size_t end = run.ow + run.len;
    if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.h)) {
        for (std::size_t i = 0; i < run.len; ++i) dst[i * step] = 0.0;
        return;
    }
    const double* src = input + run.sample_offset + row.channel_offset + static_cast<std::size_t>(ih) * g.w;
    const std::size_t lo = std::clamp(valid.lo, run.ow, end);
    const std::size_t hi = std::clamp(valid.hi, lo, end);
    std::size_t ow = run.ow;
    for (; ow < lo; ++ow) dst[(ow - run.ow) * step] = 0.0;
    if (g.stride == 1) {
        const double* shifted = src + row.kj - g.pad;  // only dereferenced at valid ow
        for (; ow < hi; ++ow) dst[(ow - run.ow) * step] = shifted[ow];
    } else {
        for (; ow < hi; ++ow) dst[(ow - run.ow) * step] = src[ow * g.stride + row.kj - g.pad];
    }
    for (; ow < end; ++ow) dst[(ow - run.ow) * step] = 0.0;
}

constexpr std::size_t kPanel = simd::kPanelWidth;

std::vector<ColumnRange> valid_columns_per_tap(const ConvGeometry& g) {
    std::vector<ColumnRange> valid(g.k);
    for (std::size_t kj = 0; kj < g.k; ++kj) valid[kj] = valid_columns(g, kj);
    return valid;
}

// Panels of the window matrix: rows r0.., columns j0...
void pack_windows(const ConvGeometry& g, const double* input, std::size_t r0, std::size_t j0, std::size_t kc,
                  std::size_t nc, double* out) {
    const auto valid = valid_columns_per_tap(g);
    for (std::size_t jp = 0; jp < nc; jp += kPanel) {
        const std::size_t cols = std::min(kPanel, nc - jp);
        const std::vector<Run> runs = output_runs(g, j0 + jp, cols);
        WindowRow row = window_row(g, r0);
        for (std::size_t p = 0; p < kc; ++p) {
            for (const Run& run : runs) gather_run(g, input, row, run, valid[row.kj], out + run.first, 1);
            for (std::size_t j = cols; j < kPanel; ++j) out[j] = 0.0;
            out += kPanel;
            advance(g, row);
        }
    }
}

// Panels of the transposed window matrix: rows are output positions j0..,
// columns are window rows r0...
void pack_windows_transposed(const ConvGeometry& g, const double* input, std::size_t j0, std::size_t r0,
                             std::size_t kc, std::size_t nc, double* out) {
    const auto valid = valid_columns_per_tap(g);
    const std::vector<Run> runs = output_runs(g, j0, kc);
    WindowRow row = window_row(g, r0);
    for (std::size_t rp = 0; rp < nc; rp += kPanel) {
        const std::size_t cols = std::min(kPanel, nc - rp);
        for (std::size_t r = 0; r < kPanel; ++r) {
            if (r >= cols) {
                for (std::size_t p = 0; p < kc; ++p) out[p * kPanel + r] = 0.0;
                continue;
            }
            for (const Run& run : runs)
                gather_run(g, input, row, run, valid[row.kj], out + run.first * kPanel + r, kPanel);
            advance(g, row);
        }
        out += kc * kPanel;
    }
}

// [N, O, plane] <-> [O, N * plane]
void channels_to_rows(const ConvGeometry& g, const double* src, double* dst) {
    for (std::size_t s = 0; s < g.n; ++s)
        for (std::size_t o = 0; o < g.o; ++o)
            std::copy(src + (s * g.o + o) * g.plane(), src + (s * g.o + o + 1) * g.plane(),
                      dst + (o * g.n + s) * g.plane());
}

// Forward convolution via the packed window matrix, without bias.
Tensor conv_gemm_forward(const ConvGeometry& g, const double* input, const double* kernel) {
    const std::size_t cols_n = g.n * g.plane();
    thread_local std::vector<double> rows;
    rows.resize(g.o * cols_n);
    const simd::BPacker pack = [&](std::size_t k0, std::size_t n0, std::size_t kc, std::size_t nc, double* out) {
        pack_windows(g, input, k0, n0, kc, nc, out);
    };
    simd::gemm_packed(g.o, cols_n, g.window(), MatrixRef::row_major(kernel, g.window()), pack, rows.data(), cols_n,
                      false);
    Tensor out({g.n, g.o, g.ho, g.wo});
    for (std::size_t o = 0; o < g.o; ++o)
        for (std::size_t s = 0; s < g.n; ++s)
            std::copy(rows.data() + (o * g.n + s) * g.plane(), rows.data() + (o * g.n + s + 1) * g.plane(),
                      out.data() + (s * g.o + o) * g.plane());
    return out;
}

// Calls f(out_row_offset, in_row_offset, ow_range) for every valid (oh, ih) pair of tap (ki, kj).
template <typename F>
void for_each_tap_row(const ConvGeometry& g, std::size_t ki, std::size_t kj, F&& f) {
    const ColumnRange cols = valid_columns(g, kj);
    if (cols.lo >= cols.hi) return;
    for (std::size_t oh = 0; oh < g.ho; ++oh) {
        const std::ptrdiff_t ih =
            static_cast<std::ptrdiff_t>(oh * g.stride + ki) - static_cast<std::ptrdiff_t>(g.pad);
        if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.h)) continue;
        f(oh * g.wo, static_cast<std::size_t>(ih) * g.w, cols);
    }
}

std::ptrdiff_t input_column(const ConvGeometry& g, std::size_t ow, std::size_t kj) {
    return static_cast<std::ptrdiff_t>(ow * g.stride + kj) - static_cast<std::ptrdiff_t>(g.pad);
}

void conv_direct_forward(const ConvGeometry& g, const double* in, const double* kernel, double* out) {
    for (std::size_t s = 0; s < g.n; ++s)
        for (std::size_t o = 0; o < g.o; ++o) {
            double* dst = out + (s * g.o + o) * g.plane();
            for (std::size_t c = 0; c < g.c; ++c) {
                const double* src = in + (s * g.c + c) * g.h * g.w;
                for (std::size_t ki = 0; ki < g.k; ++ki)
                    for (std::size_t kj = 0; kj < g.k; ++kj) {
                        const double wv = kernel[((o * g.c + c) * g.k + ki) * g.k + kj];
                        for_each_tap_row(g, ki, kj, [&](std::size_t orow, std::size_t irow, ColumnRange r) {
                            const double* row = src + irow;
                            double* acc = dst + orow;
                            if (g.stride == 1) {
                                const double* shifted = row + input_column(g, 0, kj);
                                for (std::size_t ow = r.lo; ow < r.hi; ++ow) acc[ow] += wv * shifted[ow];
                            } else {
                                for (std::size_t ow = r.lo; ow < r.hi; ++ow) acc[ow] += wv * row[input_column(g, ow, kj)];
                            }
                        });
                    }
            }
        }
}

void conv_direct_input_grad(const ConvGeometry& g, const double* grad_out, const double* kernel, double* grad_in) {
    for (std::size_t s = 0; s < g.n; ++s)
        for (std::size_t c = 0; c < g.c; ++c) {
            double* dst = grad_in + (s * g.c + c) * g.h * g.w;
            for (std::size_t o = 0; o < g.o; ++o) {
                const double* src = grad_out + (s * g.o + o) * g.plane();
                for (std::size_t ki = 0; ki < g.k; ++ki)
                    for (std::size_t kj = 0; kj < g.k; ++kj) {
                        const double wv = kernel[((o * g.c + c) * g.k + ki) * g.k + kj];
                        for_each_tap_row(g, ki, kj, [&](std::size_t orow, std::size_t irow, ColumnRange r) {
                            const double* go = src + orow;
                            double* row = dst + irow;
                            if (g.stride == 1) {
                                double* shifted = row + input_column(g, 0, kj);
                                for (std::size_t ow = r.lo; ow < r.hi; ++ow) shifted[ow] += wv * go[ow];
                            } else {
                                for (std::size_t ow = r.lo; ow < r.hi; ++ow) row[input_column(g, ow, kj)] += wv * go[ow];
                            }
                        });
                    }
            }
        }
}

void conv_direct_kernel_grad(const ConvGeometry& g, const double* grad_out, const double* in, double* grad_kernel) {
    for (std::size_t o = 0; o < g.o; ++o)
        for (std::size_t c = 0; c < g.c; ++c)
            for (std::size_t ki = 0; ki < g.k; ++ki)
                for (std::size_t kj = 0; kj < g.k; ++kj) {
                    double sum = 0.0;
                    for (std::size_t s = 0; s < g.n; ++s) {
                        const double* go = grad_out + (s * g.o + o) * g.plane();
                        const double* src = in + (s * g.c + c) * g.h * g.w;
                        for_each_tap_row(g, ki, kj, [&](std::size_t orow, std::size_t irow, ColumnRange r) {
                            const double* gr = go + orow;
                            const double* row = src + irow;
                            for (std::size_t ow = r.lo; ow < r.hi; ++ow) sum += gr[ow] * row[input_column(g, ow, kj)];
                        });
                    }
                    grad_kernel[((o * g.c + c) * g.k + ki) * g.k + kj] = sum;
                }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (a.shape() != b.shape())
        throw DimensionError(std::string(what) + ": shape mismatch " + shape_to_string(a.shape()) + " vs " +
                             shape_to_string(b.shape()));
}

Tensor checked(Tensor t, const char* what) {
    t.require_finite(what);
    return t;
}

}  // namespace

std::size_t conv_output_extent(std::size_t extent, std::size_t kernel, std::size_t stride, std::size_t pad) {
    if (stride == 0) throw DimensionError("stride must be >= 1");
    if (kernel == 0 || kernel > extent + 2 * pad)
        throw DimensionError("kernel size " + std::to_string(kernel) + " does not fit extent " +
                             std::to_string(extent) + " with padding " + std::to_string(pad));
    return (extent + 2 * pad - kernel) / stride + 1;
}


Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, std::size_t stride, std::size_t pad) {
    const ConvGeometry g = conv_geometry(input, kernel, stride, pad);
    if (bias.shape() != Shape{g.o})
        throw DimensionError("conv2d bias must have shape [" + std::to_string(g.o) + "], got " +
                             shape_to_string(bias.shape()));

    Tensor out;
    if (g.o <= kDirectMaxOutputs) {
        out = Tensor({g.n, g.o, g.ho, g.wo});
        conv_direct_forward(g, input.data(), kernel.data(), out.data());
    } else {
        out = conv_gemm_forward(g, input.data(), kernel.data());
    }
    for (std::size_t p = 0; p < g.n * g.o; ++p) {
        double* dst = out.data() + p * g.plane();
        const double b = bias[p % g.o];
        for (std::size_t i = 0; i < g.plane(); ++i) dst[i] += b;
    }
    return checked(std::move(out), "conv2d");
}

namespace {

// For stride 1 the input gradient is itself a convolution of grad_out with
// the spatially flipped, channel-transposed kernel and padding k - 1 - pad.
Tensor conv_input_grad_stride1(const ConvGeometry& g, const Tensor& grad_out, const Tensor& kernel) {
    Tensor flipped({g.c, g.o, g.k, g.k});
    for (std::size_t o = 0; o < g.o; ++o)
        for (std::size_t c = 0; c < g.c; ++c)
            for (std::size_t ki = 0; ki < g.k; ++ki)
                for (std::size_t kj = 0; kj < g.k; ++kj)
                    flipped.at(c, o, g.k - 1 - ki, g.k - 1 - kj) = kernel.at(o, c, ki, kj);
    ConvGeometry t{g.n, g.o, g.ho, g.wo, g.c, g.k, 1, g.k - 1 - g.pad, g.h, g.w};
    return conv_gemm_forward(t, grad_out.data(), flipped.data());
}

Tensor conv_input_grad_unrolled(const ConvGeometry& g, const double* gout_rows, const Tensor& kernel) {
    Tensor grad(Shape{g.n, g.c, g.h, g.w});
    const std::size_t group = g.group_size();
    const std::size_t total = g.n * g.plane();
    std::vector<double> cols;
    for (std::size_t s0 = 0; s0 < g.n; s0 += group) {
        const std::size_t count = std::min(group, g.n - s0);
        const std::size_t cols_n = count * g.plane();
        cols.resize(g.window() * cols_n);
        const MatrixRef gout{gout_rows + s0 * g.plane(), static_cast<std::ptrdiff_t>(total), 1};
        simd::gemm(g.window(), cols_n, g.o, MatrixRef::transposed(kernel.data(), g.window()), gout, cols.data(),
                   cols_n, false);
        col2im_accumulate(g, cols.data(), s0, count, grad.data());
    }
    return grad;
}

}  // namespace

Conv2dGrads conv2d_backward(const Tensor& grad_out, const Tensor& input, const Tensor& kernel, std::size_t stride,
                            std::size_t pad, bool need_input_grad, bool need_param_grads) {
    const ConvGeometry g = conv_geometry(input, kernel, stride, pad);
    if (grad_out.shape() != Shape{g.n, g.o, g.ho, g.wo})
        throw DimensionError("conv2d_backward: grad_out shape " + shape_to_string(grad_out.shape()) +
                             " does not match conv2d output " + shape_to_string({g.n, g.o, g.ho, g.wo}));

    Conv2dGrads grads;
    if (!need_input_grad && !need_param_grads) return grads;

    if (g.o <= kDirectMaxOutputs) {
        if (need_param_grads) {
            grads.kernel = Tensor(kernel.shape());
            conv_direct_kernel_grad(g, grad_out.data(), input.data(), grads.kernel.data());
        }
        if (need_input_grad) {
            grads.input = Tensor(input.shape());
            conv_direct_input_grad(g, grad_out.data(), kernel.data(), grads.input.data());
        }
    } else {
        const std::size_t total = g.n * g.plane();
        thread_local std::vector<double> gout_rows;
        gout_rows.resize(g.o * total);
        channels_to_rows(g, grad_out.data(), gout_rows.data());
        if (need_param_grads) {
            grads.kernel = Tensor(kernel.shape());
            const simd::BPacker pack = [&](std::size_t k0, std::size_t n0, std::size_t kc, std::size_t nc,
                                           double* out) { pack_windows_transposed(g, input.data(), k0, n0, kc, nc, out); };
            simd::gemm_packed(g.o, g.window(), total, MatrixRef::row_major(gout_rows.data(), total), pack,
                              grads.kernel.data(), g.window(), false);
        }
        if (need_input_grad) {
            grads.input = stride == 1 && pad < g.k ? conv_input_grad_stride1(g, grad_out, kernel)
                                                   : conv_input_grad_unrolled(g, gout_rows.data(), kernel);
        }
    }

    if (need_param_grads) {
        grads.bias = Tensor({g.o});
        for (std::size_t o = 0; o < g.o; ++o) {
            double sum = 0.0;
            for (std::size_t s = 0; s < g.n; ++s) {
                const double* src = grad_out.data() + (s * g.o + o) * g.plane();
                for (std::size_t i = 0; i < g.plane(); ++i) sum += src[i];
            }
            grads.bias[o] = sum;
        }
        grads.kernel.require_finite("conv2d_backward kernel gradient");
        grads.bias.require_finite("conv2d_backward bias gradient");
    }
    if (need_input_grad) grads.input.require_finite("conv2d_backward input gradient");
    return grads;
}

Tensor upsample_nearest_2x(const Tensor& input) {
    require_rank(input, 4, "upsample input");
    const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
    Tensor out({n, c, 2 * h, 2 * w});
    for (std::size_t p = 0; p < n * c; ++p) {
        const double* src = input.data() + p * h * w;
        double* dst = out.data() + p * 4 * h * w;
        for (std::size_t i = 0; i < 2 * h; ++i) {
            const double* row = src + (i / 2) * w;
            double* out_row = dst + i * 2 * w;
            for (std::size_t j = 0; j < 2 * w; ++j) out_row[j] = row[j / 2];
        }
    }
    return out;
}

Tensor upsample_nearest_2x_backward(const Tensor& grad_out) {
    require_rank(grad_out, 4, "upsample gradient");
    const std::size_t n = grad_out.dim(0), c = grad_out.dim(1), h2 = grad_out.dim(2), w2 = grad_out.dim(3);
    if (h2 % 2 || w2 % 2) throw DimensionError("upsample gradient must have even spatial extents");
    const std::size_t h = h2 / 2, w = w2 / 2;
    Tensor grad({n, c, h, w});
    for (std::size_t p = 0; p < n * c; ++p) {
        const double* src = grad_out.data() + p * h2 * w2;
        double* dst = grad.data() + p * h * w;
        for (std::size_t i = 0; i < h; ++i)
            for (std::size_t j = 0; j < w; ++j) {
                const double* top = src + (2 * i) * w2 + 2 * j;
                const double* bottom = top + w2;
                dst[i * w + j] = (top[0] + top[1]) + (bottom[0] + bottom[1]);
            }
    }
    return checked(std::move(grad), "upsample_nearest_2x_backward");
}

Tensor avg_pool_2x(const Tensor& input) {
    Tensor sum = upsample_nearest_2x_backward(input);
    for (double& v : sum.values()) v *= 0.25;
    return sum;
}

Tensor dense(const Tensor& input, const Tensor& weight, const Tensor& bias) {
    require_rank(input, 2, "dense input");
    require_rank(weight, 2, "dense weight");
    const std::size_t n = input.dim(0), f = input.dim(1), g = weight.dim(1);
    if (weight.dim(0) != f)
        throw DimensionError("dense: input has " + std::to_string(f) + " features, weight expects " +
                             std::to_string(weight.dim(0)));
    if (bias.shape() != Shape{g})
        throw DimensionError("dense bias must have shape [" + std::to_string(g) + "], got " +
                             shape_to_string(bias.shape()));
    Tensor out({n, g});
    simd::gemm(n, g, f, MatrixRef::row_major(input.data(), f), MatrixRef::row_major(weight.data(), g), out.data(), g,
               false);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < g; ++j) out[i * g + j] += bias[j];
    return checked(std::move(out), "dense");
}

DenseGrads dense_backward(const Tensor& grad_out, const Tensor& input, const Tensor& weight, bool need_input_grad) {
    require_rank(input, 2, "dense input");
    require_rank(weight, 2, "dense weight");
    const std::size_t n = input.dim(0), f = input.dim(1), g = weight.dim(1);
    if (weight.dim(0) != f) throw DimensionError("dense_backward: input/weight mismatch");
    if (grad_out.shape() != Shape{n, g})
        throw DimensionError("dense_backward: grad_out shape " + shape_to_string(grad_out.shape()) +
                             " does not match output " + shape_to_string({n, g}));

    DenseGrads grads;
    grads.weight = Tensor({f, g});
    simd::gemm(f, g, n, MatrixRef::transposed(input.data(), f), MatrixRef::row_major(grad_out.data(), g),
               grads.weight.data(), g, false);
    grads.bias = Tensor({g});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < g; ++j) grads.bias[j] += grad_out[i * g + j];
    if (need_input_grad) {
        grads.input = Tensor({n, f});
        simd::gemm(n, f, g, MatrixRef::row_major(grad_out.data(), g), MatrixRef::transposed(weight.data(), g),
                   grads.input.data(), f, false);
        grads.input.require_finite("dense_backward input gradient");
    }
    grads.weight.require_finite("dense_backward weight gradient");
    grads.bias.require_finite("dense_backward bias gradient");
    return grads;
}

double sigmoid(double x) {
    constexpr double lo = std::numeric_limits<double>::min();
    constexpr double hi = 1.0 - 0x1.0p-53;
    double y;
    if (x >= 0.0) {
        y = 1.0 / (1.0 + std::exp(-x));
    } else {
        const double e = std::exp(x);
        y = e / (1.0 + e);
    }
    return std::clamp(y, lo, hi);
}

double sigmoid_complement(double x) { return sigmoid(-x); }

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double log_sigmoid(double x) { return -softplus(-x); }

Tensor activate(const Activation& act, const Tensor& input) {
    Tensor out(input.shape());
    const auto in = input.values();
    auto dst = out.values();
    switch (act.kind) {
        case ActivationKind::leaky_relu:
            if (!(act.alpha >= 0.0 && act.alpha < 1.0))
                throw ValidationError("leaky_relu slope must lie in [0, 1), got " + std::to_string(act.alpha));
            for (std::size_t i = 0; i < in.size(); ++i) dst[i] = in[i] >= 0.0 ? in[i] : act.alpha * in[i];
            break;
        case ActivationKind::tanh:
            for (std::size_t i = 0; i < in.size(); ++i) dst[i] = std::tanh(in[i]);
            break;
        case ActivationKind::sigmoid:
            for (std::size_t i = 0; i < in.size(); ++i) dst[i] = sigmoid(in[i]);
            break;
    }
    return checked(std::move(out), "activation");
}

Tensor activate_backward(const Activation& act, const Tensor& input, const Tensor& output, const Tensor& grad_out) {
    require_same_shape(input, grad_out, "activate_backward");
    require_same_shape(input, output, "activate_backward");
    Tensor grad(input.shape());
    const auto x = input.values();
    const auto y = output.values();
    const auto g = grad_out.values();
    auto dst = grad.values();
    switch (act.kind) {
        case ActivationKind::leaky_relu:
            for (std::size_t i = 0; i < x.size(); ++i) dst[i] = x[i] >= 0.0 ? g[i] : act.alpha * g[i];
            break;
        case ActivationKind::tanh:
            for (std::size_t i = 0; i < x.size(); ++i) dst[i] = g[i] * (1.0 - y[i] * y[i]);
            break;
        case ActivationKind::sigmoid:
            for (std::size_t i = 0; i < x.size(); ++i) dst[i] = g[i] * (y[i] * (1.0 - y[i]));
            break;
    }
    return checked(std::move(grad), "activate_backward");
}

namespace {

void validate_targets(const Tensor& target) {
    for (double y : target.values())
        if (y != 0.0 && y != 1.0)
            throw ValidationError("binary cross-entropy targets must be 0 or 1, got " + std::to_string(y));
}

}  // namespace

LossResult bce_with_logits(const Tensor& logits, const Tensor& target) {
    require_same_shape(logits, target, "bce_with_logits");
    validate_targets(target);
    logits.require_finite("bce_with_logits logits");
    const double inv_m = 1.0 / static_cast<double>(logits.size());
    LossResult result;
    result.grad = Tensor(logits.shape());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        const double z = logits[i];
        const double y = target[i];
        // -[y log s(z) + (1-y) log(1-s(z))] = max(z,0) - z*y + log1p(exp(-|z|))
        sum += softplus(z) - z * y;
        const double p = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
        result.grad[i] = (p - y) * inv_m;
    }
    result.loss = sum * inv_m;
    if (!std::isfinite(result.loss)) throw NumericalError("bce_with_logits: non-finite loss");
    result.grad.require_finite("bce_with_logits gradient");
    return result;
}

LossResult bce_loss(const Tensor& pred, const Tensor& target) {
    require_same_shape(pred, target, "bce_loss");
    for (double p : pred.values())
        if (!(p > 0.0 && p < 1.0))
            throw ValidationError("bce_loss predictions must lie in (0, 1), got " + std::to_string(p));

    Tensor logits(pred.shape());
    for (std::size_t i = 0; i < pred.size(); ++i) logits[i] = std::log(pred[i]) - std::log1p(-pred[i]);
    LossResult result = bce_with_logits(logits, target);

    // Chain through the logit using p itself rather than sigmoid(logit(p)).
    const double inv_m = 1.0 / static_cast<double>(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double p = pred[i];
        const double y = target[i];
        result.grad[i] = (p - y) / (p * (1.0 - p)) * inv_m;
    }
    result.grad.require_finite("bce_loss gradient");
    return result;
}

}  // namespace dcgan
