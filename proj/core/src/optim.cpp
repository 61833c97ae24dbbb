#include "roicae/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace roicae {

void adam_step(ParamMap& params, const ParamMap& grads, AdamState& state) {
    for (const auto& [name, g] : grads) {
        if (!g.all_finite())
            throw std::runtime_error("adam: non-finite gradient for parameter '" + name + "'");
    }
    state.t += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    for (auto& [name, p] : params) {
        auto git = grads.find(name);
        if (git == grads.end()) continue;  // unreachable parameter: no update
        const Tensor& g = git->second;
        if (!g.same_shape(p))
            throw std::invalid_argument("adam: gradient shape mismatch for '" + name + "'");
        auto& m = state.m.try_emplace(name, Tensor::zeros(p.shape)).first->second;
        auto& v = state.v.try_emplace(name, Tensor::zeros(p.shape)).first->second;
        for (std::size_t i = 0; i < p.data.size(); ++i) {
            m.data[i] = state.beta1 * m.data[i] + (1.0 - state.beta1) * g.data[i];
            v.data[i] = state.beta2 * v.data[i] + (1.0 - state.beta2) * g.data[i] * g.data[i];
            const double mhat = m.data[i] / bc1;
            const double vhat = v.data[i] / bc2;
            p.data[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
}

double grad_global_norm(const ParamMap& grads) {
    if (grads.empty()) throw std::invalid_argument("grad_global_norm: empty parameter set");
    double acc = 0.0;
    for (const auto& [name, g] : grads)
        for (double v : g.data) acc += v * v;
    return std::sqrt(acc);
}

}  // namespace roicae
