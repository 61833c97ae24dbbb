#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "roicae/rng.hpp"
#include "roicae/tape.hpp"
#include "roicae/tensor.hpp"

namespace testutil {

using roicae::Rng;
using roicae::Tape;
using roicae::Tensor;

inline Tensor random_tensor(std::vector<int> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    for (double& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

/// Vector-norm relative error between two gradients.
inline double grad_rel_err(const std::vector<double>& a, const std::vector<double>& b) {
    double diff = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff += (a[i] - b[i]) * (a[i] - b[i]);
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    const double denom = std::max({std::sqrt(na), std::sqrt(nb), 1e-12});
    return std::sqrt(diff) / denom;
}

/// Central finite differences of a scalar-valued function of several tensors,
/// compared against tape gradients. `build` must create the graph on the tape
/// from leaves in the given order and return the scalar loss node.
/// Returns the worst relative error over all checked inputs.
inline double fd_check(std::vector<Tensor> inputs,
                       const std::function<Tape::NodeId(Tape&, const std::vector<Tape::NodeId>&)>& build,
                       double h = 1e-5) {
    Tape tape;
    std::vector<Tape::NodeId> ids;
    for (const auto& in : inputs) ids.push_back(tape.leaf(in));
    Tape::NodeId loss = build(tape, ids);
    tape.backward(loss);

    double worst = 0.0;
    for (std::size_t which = 0; which < inputs.size(); ++which) {
        std::vector<double> analytic = tape.grad(ids[which]).data;
        std::vector<double> fd(analytic.size());
        for (std::size_t i = 0; i < fd.size(); ++i) {
            auto eval = [&](double delta) {
                std::vector<Tensor> shifted = inputs;
                shifted[which].data[i] += delta;
                Tape t2;
                std::vector<Tape::NodeId> ids2;
                for (const auto& in : shifted) ids2.push_back(t2.leaf(in));
                return t2.val(build(t2, ids2)).data[0];
            };
            fd[i] = (eval(h) - eval(-h)) / (2.0 * h);
        }
        worst = std::max(worst, grad_rel_err(analytic, fd));
    }
    return worst;
}

}  // namespace testutil
