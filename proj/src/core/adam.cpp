#include "dcgan/adam.hpp"

#include <cmath>

#include "dcgan/errors.hpp"
#include "dcgan/simd.hpp"

namespace dcgan {

AdamState AdamState::for_params(const ParameterSet& params) {
    return AdamState{params.zeros_like(), params.zeros_like(), 0};
}

void adam_step(ParameterSet& params, const ParameterSet& grads, AdamState& state, const AdamConfig& config) {
    params.require_same_layout(grads, "adam_step gradients");
    params.require_same_layout(state.m, "adam_step first moments");
    params.require_same_layout(state.v, "adam_step second moments");
    if (!(config.lr > 0.0) || !(config.beta1 >= 0.0 && config.beta1 < 1.0) ||
        !(config.beta2 >= 0.0 && config.beta2 < 1.0) || !(config.eps > 0.0))
        throw ValidationError("adam_step: invalid hyperparameters");
    for (const auto& g : grads)
        if (!g.value.all_finite()) throw NumericalError("adam_step: non-finite gradient for parameter '" + g.name + "'");

    state.t += 1;
    const double t = static_cast<double>(state.t);
    const simd::AdamCoefficients coeff{config.lr,
                                       config.beta1,
                                       config.beta2,
                                       config.eps,
                                       1.0 - std::pow(config.beta1, t),
                                       1.0 - std::pow(config.beta2, t)};
    for (std::size_t i = 0; i < params.size(); ++i) {
        simd::adam_update(params[i].value.values(), grads[i].value.values(), state.m[i].value.values(),
                          state.v[i].value.values(), coeff);
        params[i].value.require_finite("adam_step parameter '" + params[i].name + "'");
    }
}

}  // namespace dcgan
