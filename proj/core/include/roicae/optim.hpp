#pragma once

#include <map>
#include <string>

#include "roicae/tensor.hpp"

namespace roicae {

using ParamMap = std::map<std::string, Tensor>;

/// Bias-corrected Adam. Accumulators are created lazily on the first step
/// and mirror parameter shapes; `t` increases by one per step.
struct AdamState {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::int64_t t = 0;
    ParamMap m;
    ParamMap v;

    explicit AdamState(double learning_rate = 1e-4) : lr(learning_rate) {
        if (learning_rate <= 0.0) throw std::invalid_argument("adam: learning rate must be positive");
    }
};

/// One Adam update over all parameters. Throws on NaN gradients, naming the
/// offending parameter.
void adam_step(ParamMap& params, const ParamMap& grads, AdamState& state);

/// L2 norm over the concatenation of the selected gradient tensors.
double grad_global_norm(const ParamMap& grads);

}  // namespace roicae
