#pragma once

// Independent reference implementations used only by tests.

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>

#include "dcgan/fid.hpp"
#include "dcgan/rng.hpp"
#include "dcgan/tensor.hpp"

namespace dcgan::oracle {

inline Eigen::MatrixXd to_eigen(const Tensor& t) {
    Eigen::MatrixXd m(t.dim(0), t.dim(1));
    for (std::size_t i = 0; i < t.dim(0); ++i)
        for (std::size_t j = 0; j < t.dim(1); ++j) m(i, j) = t[i * t.dim(1) + j];
    return m;
}

inline Tensor from_eigen(const Eigen::MatrixXd& m) {
    Tensor t({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())});
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) t[i * m.cols() + j] = m(i, j);
    return t;
}

/// Denman-Beavers iteration: Y -> (Y + Z^-1) / 2, Z -> (Z + Y^-1) / 2 from
/// Y = A, Z = I; Y converges to the principal square root of A.
inline Eigen::MatrixXd denman_beavers_sqrt(const Eigen::MatrixXd& a, int max_iterations = 100) {
    Eigen::MatrixXd y = a;
    Eigen::MatrixXd z = Eigen::MatrixXd::Identity(a.rows(), a.cols());
    for (int it = 0; it < max_iterations; ++it) {
        const Eigen::MatrixXd y_inv = y.partialPivLu().inverse();
        const Eigen::MatrixXd z_inv = z.partialPivLu().inverse();
        const Eigen::MatrixXd y_next = 0.5 * (y + z_inv);
        const Eigen::MatrixXd z_next = 0.5 * (z + y_inv);
        const double change = (y_next - y).norm() / y_next.norm();
        y = y_next;
        z = z_next;
        if (change < 1e-15) break;
    }
    return y;
}

/// Random SPD matrix M^T M + shift * I with M entries ~ Normal(0, 1).
inline Eigen::MatrixXd random_spd(std::size_t d, Rng& rng, double shift = 0.1) {
    Eigen::MatrixXd m(d, d);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
    return m.transpose() * m + shift * Eigen::MatrixXd::Identity(d, d);
}

/// Frechet distance with the cross term Tr((Sx Sg)^1/2) taken from the
/// eigenvalues of the non-symmetric product (similar to a PSD matrix, so they
/// are real and non-negative up to rounding).
inline double naive_frechet_distance(const Eigen::VectorXd& mu_x, const Eigen::MatrixXd& sx, const Eigen::VectorXd& mu_g,
                                     const Eigen::MatrixXd& sg) {
    Eigen::EigenSolver<Eigen::MatrixXd> solver(sx * sg, false);
    double cross = 0.0;
    for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i)
        cross += std::sqrt(std::complex<double>(solver.eigenvalues()(i))).real();
    return (mu_x - mu_g).squaredNorm() + sx.trace() + sg.trace() - 2.0 * cross;
}

inline GaussianStats make_stats(const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma) {
    GaussianStats s;
    s.mu = Tensor({static_cast<std::size_t>(mu.size())});
    for (Eigen::Index i = 0; i < mu.size(); ++i) s.mu[i] = mu(i);
    s.sigma = from_eigen(sigma);
    return s;
}

/// Direct seven-loop convolution with zero padding.
inline Tensor naive_conv2d(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t stride, std::size_t pad) {
    const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), wd = x.dim(3);
    const std::size_t o = w.dim(0), k = w.dim(2);
    const std::size_t oh = (h + 2 * pad - k) / stride + 1, ow = (wd + 2 * pad - k) / stride + 1;
    Tensor y({n, o, oh, ow});
    for (std::size_t ni = 0; ni < n; ++ni)
        for (std::size_t oi = 0; oi < o; ++oi)
            for (std::size_t r = 0; r < oh; ++r)
                for (std::size_t q = 0; q < ow; ++q) {
                    double acc = b[oi];
                    for (std::size_t ci = 0; ci < c; ++ci)
                        for (std::size_t i = 0; i < k; ++i)
                            for (std::size_t j = 0; j < k; ++j) {
                                const long yy = static_cast<long>(r * stride + i) - static_cast<long>(pad);
                                const long xx = static_cast<long>(q * stride + j) - static_cast<long>(pad);
                                if (yy < 0 || xx < 0 || yy >= static_cast<long>(h) || xx >= static_cast<long>(wd)) continue;
                                acc += x.at(ni, ci, yy, xx) * w.at(oi, ci, i, j);
                            }
                    y.at(ni, oi, r, q) = acc;
                }
    return y;
}

/// Adjoint of naive_conv2d, by scattering each output gradient.
struct NaiveConvGrads {
    Tensor input, kernel, bias;
};
inline NaiveConvGrads naive_conv2d_backward(const Tensor& gy, const Tensor& x, const Tensor& w, std::size_t stride,
                                            std::size_t pad) {
    const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), wd = x.dim(3);
    const std::size_t o = w.dim(0), k = w.dim(2);
    NaiveConvGrads g{Tensor(x.shape()), Tensor(w.shape()), Tensor({o})};
    for (std::size_t ni = 0; ni < n; ++ni)
        for (std::size_t oi = 0; oi < o; ++oi)
            for (std::size_t r = 0; r < gy.dim(2); ++r)
                for (std::size_t q = 0; q < gy.dim(3); ++q) {
                    const double go = gy.at(ni, oi, r, q);
                    g.bias[oi] += go;
                    for (std::size_t ci = 0; ci < c; ++ci)
                        for (std::size_t i = 0; i < k; ++i)
                            for (std::size_t j = 0; j < k; ++j) {
                                const long yy = static_cast<long>(r * stride + i) - static_cast<long>(pad);
                                const long xx = static_cast<long>(q * stride + j) - static_cast<long>(pad);
                                if (yy < 0 || xx < 0 || yy >= static_cast<long>(h) || xx >= static_cast<long>(wd)) continue;
                                g.input.at(ni, ci, yy, xx) += go * w.at(oi, ci, i, j);
                                g.kernel.at(oi, ci, i, j) += go * x.at(ni, ci, yy, xx);
                            }
                }
    return g;
}

inline Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
    Tensor t(std::move(shape));
    for (auto& v : t.values()) v = scale * rng.normal();
    return t;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) throw std::logic_error("shape mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

inline double max_abs(const Tensor& a) {
    double m = 0.0;
    for (double v : a.values()) m = std::max(m, std::abs(v));
    return m;
}

}  // namespace dcgan::oracle
