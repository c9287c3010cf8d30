#pragma once

#include <cstdint>

#include "dcgan/parameters.hpp"

namespace dcgan {

struct AdamConfig {
    double lr = 2e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// First and second moments aligned with a ParameterSet, plus the step count.
struct AdamState {
    ParameterSet m;
    ParameterSet v;
    std::uint64_t t = 0;

    static AdamState for_params(const ParameterSet& params);
};

/// One bias-corrected Adam step: t <- t + 1, then every parameter moves by
/// -lr * m_hat / (sqrt(v_hat) + eps). A non-finite gradient aborts before
/// anything is modified and names the offending parameter.
void adam_step(ParameterSet& params, const ParameterSet& grads, AdamState& state, const AdamConfig& config);

}  // namespace dcgan
