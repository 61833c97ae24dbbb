#pragma once

#include <functional>
#include <string>
#include <vector>

#include "roicae/tensor.hpp"

namespace roicae {

/// Reverse-mode tape. Nodes are created in topological order by the op
/// builders below; `backward` walks the tape in reverse and accumulates
/// gradients into every node (leaves included). The tape is rebuilt per
/// batch; there is no persistent graph.
class Tape {
public:
    using NodeId = int;

    NodeId leaf(Tensor value, std::string tag = "leaf");

    const Tensor& val(NodeId id) const { return nodes_[static_cast<std::size_t>(id)].value; }
    const Tensor& grad(NodeId id) const { return nodes_[static_cast<std::size_t>(id)].grad; }
    Tensor& grad_mut(NodeId id) { return nodes_[static_cast<std::size_t>(id)].grad; }
    std::size_t node_count() const { return nodes_.size(); }

    /// Backprop from a scalar loss node. Throws if the loss is not 1-element.
    void backward(NodeId loss);

    // --- convolution ---
    // kernel: OutC x InC x kH x kW (cross-correlation)
    NodeId conv2d(NodeId input, NodeId kernel, NodeId bias, int stride, int padding);
    // kernel: InC x OutC x kH x kW; adjoint of conv2d with the same kernel block
    NodeId conv_transpose2d(NodeId input, NodeId kernel, NodeId bias, int stride, int padding);
    // 3x3 fixed kernel, replicate padding, same output size; kernel is a constant
    NodeId filter3x3_replicate(NodeId input, const double k[9]);
    // separable blur with a constant 1-D window, valid region only
    NodeId separable_filter_valid(NodeId input, const std::vector<double>& window);
    // 2x2 average pooling, stride 2 (floor)
    NodeId avg_pool2(NodeId input);

    // --- pointwise ---
    NodeId leaky_relu(NodeId x, double alpha);
    NodeId sigmoid(NodeId x);
    NodeId abs(NodeId x);
    NodeId square(NodeId x);
    NodeId sqrt(NodeId x);
    NodeId clamp_min(NodeId x, double lo);

    // --- elementwise binary (same shape) ---
    NodeId add(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    NodeId mul(NodeId a, NodeId b);
    NodeId div(NodeId a, NodeId b);

    // --- scalar-constant arithmetic ---
    NodeId add_const(NodeId x, double c);
    NodeId mul_const(NodeId x, double c);
    NodeId pow_const(NodeId x, double p);

    // --- linear algebra ---
    // x: N x C, w: M x C, b: M -> N x M
    NodeId linear(NodeId x, NodeId w, NodeId b);
    NodeId reshape(NodeId x, std::vector<int> new_shape);

    // --- reductions / broadcasts ---
    NodeId sum_all(NodeId x);
    NodeId mean_all(NodeId x);
    // N,C,H,W -> N,C plane means
    NodeId global_avg_pool(NodeId x);
    // N,...  -> N per-image maxima (subgradient to first argmax)
    NodeId amax_per_image(NodeId x);
    // y[n,...] = x[n,...] / s[n]; s has shape (N)
    NodeId div_per_image(NodeId x, NodeId s);

private:
    struct Node {
        Tensor value;
        Tensor grad;
        std::vector<NodeId> parents;
        std::function<void(Tape&, NodeId)> back;
        std::string tag;
    };

    NodeId push(Tensor value, std::vector<NodeId> parents,
                std::function<void(Tape&, NodeId)> back, std::string tag);

    std::vector<Node> nodes_;
};

// Forward-only conv kernels shared by the tape and by plain (metric) code.
namespace detail {
Tensor conv2d_forward(const Tensor& x, const Tensor& k, const Tensor& b, int stride, int pad);
void conv2d_backward(const Tensor& x, const Tensor& k, const Tensor& gy, int stride, int pad,
                     Tensor& gx, Tensor& gk, Tensor& gb);
Tensor conv_transpose2d_forward(const Tensor& x, const Tensor& k, const Tensor& b, int stride, int pad);
void conv_transpose2d_backward(const Tensor& x, const Tensor& k, const Tensor& gy, int stride, int pad,
                               Tensor& gx, Tensor& gk, Tensor& gb);
}  // namespace detail

}  // namespace roicae
