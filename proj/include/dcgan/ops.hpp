#pragma once

#include <cstddef>

#include "dcgan/tensor.hpp"

// Forward operators and their exact analytic gradients. Everything here is a
// pure function of its arguments: safe to call concurrently, deterministic
// for a fixed SIMD backend. Outputs are checked for NaN/Inf.

namespace dcgan {

/// input [N,C,H,W], kernel [O,C,k,k], bias [O] -> [N,O,H',W'] with
/// H' = (H + 2*pad - k) / stride + 1. Zero padding.
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, std::size_t stride, std::size_t pad);

struct Conv2dGrads {
    Tensor input;   // empty when not requested
    Tensor kernel;
    Tensor bias;
};

/// Kernel and bias gradients are skipped (left empty) when need_param_grads is false.
Conv2dGrads conv2d_backward(const Tensor& grad_out, const Tensor& input, const Tensor& kernel, std::size_t stride,
                            std::size_t pad, bool need_input_grad = true, bool need_param_grads = true);

/// Output spatial extent of a convolution; throws DimensionError when the kernel does not fit.
std::size_t conv_output_extent(std::size_t extent, std::size_t kernel, std::size_t stride, std::size_t pad);

Tensor upsample_nearest_2x(const Tensor& input);
/// Each source pixel receives the sum of the four output gradients it fed.
Tensor upsample_nearest_2x_backward(const Tensor& grad_out);
/// 2x2 mean pooling; exact left inverse of upsample_nearest_2x.
Tensor avg_pool_2x(const Tensor& input);

/// input [N,F] * weight [F,G] + bias [G] -> [N,G].
Tensor dense(const Tensor& input, const Tensor& weight, const Tensor& bias);

struct DenseGrads {
    Tensor input;
    Tensor weight;
    Tensor bias;
};

DenseGrads dense_backward(const Tensor& grad_out, const Tensor& input, const Tensor& weight,
                          bool need_input_grad = true);

enum class ActivationKind { leaky_relu, tanh, sigmoid };

struct Activation {
    ActivationKind kind = ActivationKind::leaky_relu;
    double alpha = 0.2;  // leaky_relu slope for x < 0

    static Activation leaky_relu(double alpha = 0.2) { return {ActivationKind::leaky_relu, alpha}; }
    static Activation tanh() { return {ActivationKind::tanh, 0.0}; }
    static Activation sigmoid() { return {ActivationKind::sigmoid, 0.0}; }
};

Tensor activate(const Activation& act, const Tensor& input);
/// Elementwise derivative times grad_out. `output` must be activate(act, input).
/// The leaky_relu derivative at exactly 0 is 1.
Tensor activate_backward(const Activation& act, const Tensor& input, const Tensor& output, const Tensor& grad_out);

/// Logistic function clamped into the open interval (0, 1).
double sigmoid(double x);
/// 1 - sigmoid(x) without cancellation.
double sigmoid_complement(double x);
/// log(1 + exp(x)) without overflow.
double softplus(double x);
/// log(sigmoid(x)) = -softplus(-x).
double log_sigmoid(double x);

struct LossResult {
    double loss = 0.0;
    Tensor grad;  // d loss / d input, same shape as the input
};

/// Mean binary cross-entropy of probabilities `pred` against {0,1} targets.
/// Evaluated through the logit of `pred` so saturated predictions stay finite.
LossResult bce_loss(const Tensor& pred, const Tensor& target);

/// Mean binary cross-entropy of sigmoid(logits) against {0,1} targets; the
/// gradient is with respect to the logits.
LossResult bce_with_logits(const Tensor& logits, const Tensor& target);

}  // namespace dcgan
