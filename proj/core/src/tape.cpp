#include "roicae/tape.hpp"

#include <cmath>
#include <stdexcept>

namespace roicae {

namespace detail {

Tensor conv2d_forward(const Tensor& x, const Tensor& k, const Tensor& b, int stride, int pad) {
    if (x.ndim() != 4 || k.ndim() != 4)
        throw std::invalid_argument("conv2d: expected 4-D input and kernel, got " +
                                    shape_to_string(x.shape) + " / " + shape_to_string(k.shape));
    const int N = x.dim(0), Cin = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int Cout = k.dim(0), kh = k.dim(2), kw = k.dim(3);
    if (k.dim(1) != Cin)
        throw std::invalid_argument("conv2d: kernel expects " + std::to_string(k.dim(1)) +
                                    " input channels, input has " + std::to_string(Cin));
    if (b.size() != Cout)
        throw std::invalid_argument("conv2d: bias length " + std::to_string(b.size()) +
                                    " != output channels " + std::to_string(Cout));
    if (stride < 1 || pad < 0) throw std::invalid_argument("conv2d: bad stride/padding");
    const int Ho = (H + 2 * pad - kh) / stride + 1;
    const int Wo = (W + 2 * pad - kw) / stride + 1;
    if (Ho < 1 || Wo < 1)
        throw std::invalid_argument("conv2d: kernel larger than padded input (H axis " +
                                    std::to_string(H + 2 * pad) + " vs " + std::to_string(kh) + ")");
    Tensor y({N, Cout, Ho, Wo});
    const double* xd = x.data.data();
    const double* kd = k.data.data();
    double* yd = y.data.data();
    // bounds hoisted out of the inner loops: valid output ranges per kernel tap
    const auto lo_for = [](int pad_m_k, int s) { return pad_m_k <= 0 ? 0 : (pad_m_k + s - 1) / s; };
    for (int n = 0; n < N; ++n)
        for (int oc = 0; oc < Cout; ++oc) {
            double* yplane = yd + (static_cast<std::size_t>(n) * Cout + oc) *
                                      static_cast<std::size_t>(Ho) * Wo;
            std::fill(yplane, yplane + static_cast<std::size_t>(Ho) * Wo,
                      b.data[static_cast<std::size_t>(oc)]);
            for (int ic = 0; ic < Cin; ++ic) {
                const double* xplane = xd + (static_cast<std::size_t>(n) * Cin + ic) *
                                                static_cast<std::size_t>(H) * W;
                const double* kblock = kd + (static_cast<std::size_t>(oc) * Cin + ic) *
                                                static_cast<std::size_t>(kh) * kw;
                for (int ky = 0; ky < kh; ++ky) {
                    const int oy_lo = lo_for(pad - ky, stride);
                    const int oy_hi = std::min(Ho - 1, (H - 1 + pad - ky) / stride);
                    for (int oy = oy_lo; oy <= oy_hi; ++oy) {
                        const double* xrow = xplane + static_cast<std::size_t>(oy * stride - pad + ky) * W;
                        double* yrow = yplane + static_cast<std::size_t>(oy) * Wo;
                        for (int kx = 0; kx < kw; ++kx) {
                            const double kv = kblock[ky * kw + kx];
                            const int ox_lo = lo_for(pad - kx, stride);
                            const int ox_hi = std::min(Wo - 1, (W - 1 + pad - kx) / stride);
                            const double* xoff = xrow + kx - pad;
                            for (int ox = ox_lo; ox <= ox_hi; ++ox) yrow[ox] += kv * xoff[ox * stride];
                        }
                    }
                }
            }
        }
    return y;
}

void conv2d_backward(const Tensor& x, const Tensor& k, const Tensor& gy, int stride, int pad,
                     Tensor& gx, Tensor& gk, Tensor& gb) {
    const int N = x.dim(0), Cin = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int Cout = k.dim(0), kh = k.dim(2), kw = k.dim(3);
    const int Ho = gy.dim(2), Wo = gy.dim(3);
    const double* xd = x.data.data();
    const double* kd = k.data.data();
    const double* gyd = gy.data.data();
    double* gxd = gx.data.data();
    double* gkd = gk.data.data();
    const auto lo_for = [](int pad_m_k, int s) { return pad_m_k <= 0 ? 0 : (pad_m_k + s - 1) / s; };
    for (int n = 0; n < N; ++n)
        for (int oc = 0; oc < Cout; ++oc) {
            const double* gyplane = gyd + (static_cast<std::size_t>(n) * Cout + oc) *
                                              static_cast<std::size_t>(Ho) * Wo;
            double gb_acc = 0.0;
            for (std::size_t i = 0; i < static_cast<std::size_t>(Ho) * Wo; ++i) gb_acc += gyplane[i];
            gb.data[static_cast<std::size_t>(oc)] += gb_acc;
            for (int ic = 0; ic < Cin; ++ic) {
                const double* xplane = xd + (static_cast<std::size_t>(n) * Cin + ic) *
                                                static_cast<std::size_t>(H) * W;
                double* gxplane = gxd + (static_cast<std::size_t>(n) * Cin + ic) *
                                            static_cast<std::size_t>(H) * W;
                const double* kblock = kd + (static_cast<std::size_t>(oc) * Cin + ic) *
                                                static_cast<std::size_t>(kh) * kw;
                double* gkblock = gkd + (static_cast<std::size_t>(oc) * Cin + ic) *
                                            static_cast<std::size_t>(kh) * kw;
                for (int ky = 0; ky < kh; ++ky) {
                    const int oy_lo = lo_for(pad - ky, stride);
                    const int oy_hi = std::min(Ho - 1, (H - 1 + pad - ky) / stride);
                    for (int oy = oy_lo; oy <= oy_hi; ++oy) {
                        const int iy = oy * stride - pad + ky;
                        const double* gyrow = gyplane + static_cast<std::size_t>(oy) * Wo;
                        const double* xrow = xplane + static_cast<std::size_t>(iy) * W;
                        double* gxrow = gxplane + static_cast<std::size_t>(iy) * W;
                        for (int kx = 0; kx < kw; ++kx) {
                            const double kv = kblock[ky * kw + kx];
                            const int ox_lo = lo_for(pad - kx, stride);
                            const int ox_hi = std::min(Wo - 1, (W - 1 + pad - kx) / stride);
                            const int off = kx - pad;
                            double acc = 0.0;
                            for (int ox = ox_lo; ox <= ox_hi; ++ox) {
                                const double g = gyrow[ox];
                                acc += xrow[ox * stride + off] * g;
                                gxrow[ox * stride + off] += kv * g;
                            }
                            gkblock[ky * kw + kx] += acc;
                        }
                    }
                }
            }
        }
}

Tensor conv_transpose2d_forward(const Tensor& x, const Tensor& k, const Tensor& b, int stride, int pad) {
    if (x.ndim() != 4 || k.ndim() != 4)
        throw std::invalid_argument("conv_transpose2d: expected 4-D input and kernel");
    const int N = x.dim(0), Cin = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int Cout = k.dim(1), kh = k.dim(2), kw = k.dim(3);
    if (k.dim(0) != Cin)
        throw std::invalid_argument("conv_transpose2d: kernel expects " + std::to_string(k.dim(0)) +
                                    " input channels, input has " + std::to_string(Cin));
    if (b.size() != Cout)
        throw std::invalid_argument("conv_transpose2d: bias length mismatch");
    if (stride < 1 || pad < 0) throw std::invalid_argument("conv_transpose2d: bad stride/padding");
    const int Ho = (H - 1) * stride - 2 * pad + kh;
    const int Wo = (W - 1) * stride - 2 * pad + kw;
    if (Ho < 1 || Wo < 1) throw std::invalid_argument("conv_transpose2d: degenerate output size");
    Tensor y({N, Cout, Ho, Wo});
    const double* xd = x.data.data();
    const double* kd = k.data.data();
    double* yd = y.data.data();
    const auto lo_for = [](int pad_m_k, int s) { return pad_m_k <= 0 ? 0 : (pad_m_k + s - 1) / s; };
    for (int n = 0; n < N; ++n)
        for (int oc = 0; oc < Cout; ++oc) {
            double* yplane = yd + (static_cast<std::size_t>(n) * Cout + oc) *
                                      static_cast<std::size_t>(Ho) * Wo;
            std::fill(yplane, yplane + static_cast<std::size_t>(Ho) * Wo,
                      b.data[static_cast<std::size_t>(oc)]);
            for (int ic = 0; ic < Cin; ++ic) {
                const double* xplane = xd + (static_cast<std::size_t>(n) * Cin + ic) *
                                                static_cast<std::size_t>(H) * W;
                const double* kblock = kd + (static_cast<std::size_t>(ic) * Cout + oc) *
                                                static_cast<std::size_t>(kh) * kw;
                for (int ky = 0; ky < kh; ++ky) {
                    const int iy_lo = lo_for(pad - ky, stride);
                    const int iy_hi = std::min(H - 1, (Ho - 1 + pad - ky) / stride);
                    for (int iy = iy_lo; iy <= iy_hi; ++iy) {
                        const double* xrow = xplane + static_cast<std::size_t>(iy) * W;
                        double* yrow = yplane + static_cast<std::size_t>(iy * stride - pad + ky) * Wo;
                        for (int kx = 0; kx < kw; ++kx) {
                            const double kv = kblock[ky * kw + kx];
                            const int ix_lo = lo_for(pad - kx, stride);
                            const int ix_hi = std::min(W - 1, (Wo - 1 + pad - kx) / stride);
                            double* yoff = yrow + kx - pad;
                            for (int ix = ix_lo; ix <= ix_hi; ++ix) yoff[ix * stride] += kv * xrow[ix];
                        }
                    }
                }
            }
        }
    return y;
}

void conv_transpose2d_backward(const Tensor& x, const Tensor& k, const Tensor& gy, int stride, int pad,
                               Tensor& gx, Tensor& gk, Tensor& gb) {
    const int N = x.dim(0), Cin = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int Cout = k.dim(1), kh = k.dim(2), kw = k.dim(3);
    const int Ho = gy.dim(2), Wo = gy.dim(3);
    const double* xd = x.data.data();
    const double* kd = k.data.data();
    const double* gyd = gy.data.data();
    double* gxd = gx.data.data();
    double* gkd = gk.data.data();
    const auto lo_for = [](int pad_m_k, int s) { return pad_m_k <= 0 ? 0 : (pad_m_k + s - 1) / s; };
    for (int n = 0; n < N; ++n)
        for (int oc = 0; oc < Cout; ++oc) {
            const double* gyplane = gyd + (static_cast<std::size_t>(n) * Cout + oc) *
                                              static_cast<std::size_t>(Ho) * Wo;
            double gb_acc = 0.0;
            for (std::size_t i = 0; i < static_cast<std::size_t>(Ho) * Wo; ++i) gb_acc += gyplane[i];
            gb.data[static_cast<std::size_t>(oc)] += gb_acc;
            for (int ic = 0; ic < Cin; ++ic) {
                const double* xplane = xd + (static_cast<std::size_t>(n) * Cin + ic) *
                                                static_cast<std::size_t>(H) * W;
                double* gxplane = gxd + (static_cast<std::size_t>(n) * Cin + ic) *
                                            static_cast<std::size_t>(H) * W;
                const double* kblock = kd + (static_cast<std::size_t>(ic) * Cout + oc) *
                                                static_cast<std::size_t>(kh) * kw;
                double* gkblock = gkd + (static_cast<std::size_t>(ic) * Cout + oc) *
                                            static_cast<std::size_t>(kh) * kw;
                for (int ky = 0; ky < kh; ++ky) {
                    const int iy_lo = lo_for(pad - ky, stride);
                    const int iy_hi = std::min(H - 1, (Ho - 1 + pad - ky) / stride);
                    for (int iy = iy_lo; iy <= iy_hi; ++iy) {
                        const double* xrow = xplane + static_cast<std::size_t>(iy) * W;
                        double* gxrow = gxplane + static_cast<std::size_t>(iy) * W;
                        const double* gyrow =
                            gyplane + static_cast<std::size_t>(iy * stride - pad + ky) * Wo;
                        for (int kx = 0; kx < kw; ++kx) {
                            const double kv = kblock[ky * kw + kx];
                            const int ix_lo = lo_for(pad - kx, stride);
                            const int ix_hi = std::min(W - 1, (Wo - 1 + pad - kx) / stride);
                            const double* gyoff = gyrow + kx - pad;
                            double acc = 0.0;
                            for (int ix = ix_lo; ix <= ix_hi; ++ix) {
                                const double g = gyoff[ix * stride];
                                acc += xrow[ix] * g;
                                gxrow[ix] += kv * g;
                            }
                            gkblock[ky * kw + kx] += acc;
                        }
                    }
                }
            }
        }
}

}  // namespace detail

Tape::NodeId Tape::push(Tensor value, std::vector<NodeId> parents,
                        std::function<void(Tape&, NodeId)> back, std::string tag) {
    Node n;
    n.grad = Tensor::zeros(value.shape);
    n.value = std::move(value);
    n.parents = std::move(parents);
    n.back = std::move(back);
    n.tag = std::move(tag);
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size()) - 1;
}

Tape::NodeId Tape::leaf(Tensor value, std::string tag) {
    return push(std::move(value), {}, nullptr, std::move(tag));
}

void Tape::backward(NodeId loss) {
    if (val(loss).size() != 1)
        throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                    shape_to_string(val(loss).shape));
    nodes_[static_cast<std::size_t>(loss)].grad.data[0] = 1.0;
    for (NodeId i = loss; i >= 0; --i) {
        auto& n = nodes_[static_cast<std::size_t>(i)];
        if (n.back) n.back(*this, i);
    }
}

Tape::NodeId Tape::conv2d(NodeId input, NodeId kernel, NodeId bias, int stride, int padding) {
    Tensor y = detail::conv2d_forward(val(input), val(kernel), val(bias), stride, padding);
    return push(std::move(y), {input, kernel, bias},
                [input, kernel, bias, stride, padding](Tape& t, NodeId self) {
                    const Tensor& gy = t.grad(self);
                    detail::conv2d_backward(t.val(input), t.val(kernel), gy, stride, padding,
                                            t.grad_mut(input), t.grad_mut(kernel), t.grad_mut(bias));
                },
                "conv2d");
}

Tape::NodeId Tape::conv_transpose2d(NodeId input, NodeId kernel, NodeId bias, int stride, int padding) {
    Tensor y = detail::conv_transpose2d_forward(val(input), val(kernel), val(bias), stride, padding);
    return push(std::move(y), {input, kernel, bias},
                [input, kernel, bias, stride, padding](Tape& t, NodeId self) {
                    detail::conv_transpose2d_backward(t.val(input), t.val(kernel), t.grad(self),
                                                      stride, padding, t.grad_mut(input),
                                                      t.grad_mut(kernel), t.grad_mut(bias));
                },
                "conv_transpose2d");
}

Tape::NodeId Tape::filter3x3_replicate(NodeId input, const double k[9]) {
    const Tensor& x = val(input);
    if (x.ndim() != 4) throw std::invalid_argument("filter3x3: expected 4-D input");
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    std::vector<double> kc(k, k + 9);
    Tensor y({N, C, H, W});
    auto clampi = [](int v, int hi) { return v < 0 ? 0 : (v > hi ? hi : v); };
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c)
            for (int yy = 0; yy < H; ++yy)
                for (int xx = 0; xx < W; ++xx) {
                    double acc = 0.0;
                    for (int dy = -1; dy <= 1; ++dy)
                        for (int dx = -1; dx <= 1; ++dx)
                            acc += kc[static_cast<std::size_t>((dy + 1) * 3 + dx + 1)] *
                                   x.at4(n, c, clampi(yy + dy, H - 1), clampi(xx + dx, W - 1));
                    y.at4(n, c, yy, xx) = acc;
                }
    return push(std::move(y), {input},
                [input, kc, clampi](Tape& t, NodeId self) {
                    const Tensor& gy = t.grad(self);
                    Tensor& gx = t.grad_mut(input);
                    const int N = gy.dim(0), C = gy.dim(1), H = gy.dim(2), W = gy.dim(3);
                    for (int n = 0; n < N; ++n)
                        for (int c = 0; c < C; ++c)
                            for (int yy = 0; yy < H; ++yy)
                                for (int xx = 0; xx < W; ++xx) {
                                    const double g = gy.at4(n, c, yy, xx);
                                    if (g == 0.0) continue;
                                    for (int dy = -1; dy <= 1; ++dy)
                                        for (int dx = -1; dx <= 1; ++dx)
                                            gx.at4(n, c, clampi(yy + dy, H - 1), clampi(xx + dx, W - 1)) +=
                                                g * kc[static_cast<std::size_t>((dy + 1) * 3 + dx + 1)];
                                }
                },
                "filter3x3_replicate");
}

Tape::NodeId Tape::separable_filter_valid(NodeId input, const std::vector<double>& window) {
    const Tensor& x = val(input);
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int L = static_cast<int>(window.size());
    if (H < L || W < L)
        throw std::invalid_argument("separable_filter_valid: input " + shape_to_string(x.shape) +
                                    " smaller than window " + std::to_string(L));
    const int Wo = W - L + 1, Ho = H - L + 1;
    // horizontal pass
    Tensor tmp({N, C, H, Wo});
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c)
            for (int yy = 0; yy < H; ++yy)
                for (int xx = 0; xx < Wo; ++xx) {
                    double acc = 0.0;
                    for (int i = 0; i < L; ++i) acc += window[static_cast<std::size_t>(i)] * x.at4(n, c, yy, xx + i);
                    tmp.at4(n, c, yy, xx) = acc;
                }
    // vertical pass
    Tensor y({N, C, Ho, Wo});
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c)
            for (int yy = 0; yy < Ho; ++yy)
                for (int xx = 0; xx < Wo; ++xx) {
                    double acc = 0.0;
                    for (int j = 0; j < L; ++j) acc += window[static_cast<std::size_t>(j)] * tmp.at4(n, c, yy + j, xx);
                    y.at4(n, c, yy, xx) = acc;
                }
    std::vector<double> w = window;
    return push(std::move(y), {input},
                [input, w, L, Ho, Wo](Tape& t, NodeId self) {
                    const Tensor& gy = t.grad(self);
                    Tensor& gx = t.grad_mut(input);
                    const int N = gx.dim(0), C = gx.dim(1), H = gx.dim(2);
                    Tensor gtmp({N, C, H, Wo});
                    for (int n = 0; n < N; ++n)
                        for (int c = 0; c < C; ++c)
                            for (int yy = 0; yy < Ho; ++yy)
                                for (int xx = 0; xx < Wo; ++xx) {
                                    const double g = gy.at4(n, c, yy, xx);
                                    if (g == 0.0) continue;
                                    for (int j = 0; j < L; ++j)
                                        gtmp.at4(n, c, yy + j, xx) += g * w[static_cast<std::size_t>(j)];
                                }
                    for (int n = 0; n < N; ++n)
                        for (int c = 0; c < C; ++c)
                            for (int yy = 0; yy < H; ++yy)
                                for (int xx = 0; xx < Wo; ++xx) {
                                    const double g = gtmp.at4(n, c, yy, xx);
                                    if (g == 0.0) continue;
                                    for (int i = 0; i < L; ++i)
                                        gx.at4(n, c, yy, xx + i) += g * w[static_cast<std::size_t>(i)];
                                }
                },
                "separable_filter_valid");
}

Tape::NodeId Tape::avg_pool2(NodeId input) {
    const Tensor& x = val(input);
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int Ho = H / 2, Wo = W / 2;
    if (Ho < 1 || Wo < 1) throw std::invalid_argument("avg_pool2: input too small");
    Tensor y({N, C, Ho, Wo});
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c)
            for (int yy = 0; yy < Ho; ++yy)
                for (int xx = 0; xx < Wo; ++xx)
                    y.at4(n, c, yy, xx) = 0.25 * (x.at4(n, c, 2 * yy, 2 * xx) + x.at4(n, c, 2 * yy, 2 * xx + 1) +
                                                  x.at4(n, c, 2 * yy + 1, 2 * xx) + x.at4(n, c, 2 * yy + 1, 2 * xx + 1));
    return push(std::move(y), {input},
                [input](Tape& t, NodeId self) {
                    const Tensor& gy = t.grad(self);
                    Tensor& gx = t.grad_mut(input);
                    const int N = gy.dim(0), C = gy.dim(1), Ho = gy.dim(2), Wo = gy.dim(3);
                    for (int n = 0; n < N; ++n)
                        for (int c = 0; c < C; ++c)
                            for (int yy = 0; yy < Ho; ++yy)
                                for (int xx = 0; xx < Wo; ++xx) {
                                    const double g = 0.25 * gy.at4(n, c, yy, xx);
                                    gx.at4(n, c, 2 * yy, 2 * xx) += g;
                                    gx.at4(n, c, 2 * yy, 2 * xx + 1) += g;
                                    gx.at4(n, c, 2 * yy + 1, 2 * xx) += g;
                                    gx.at4(n, c, 2 * yy + 1, 2 * xx + 1) += g;
                                }
                },
                "avg_pool2");
}

Tape::NodeId Tape::leaky_relu(NodeId xid, double alpha) {
    if (alpha <= 0.0) throw std::invalid_argument("leaky_relu: alpha must be positive");
    const Tensor& x = val(xid);
    Tensor y(x.shape);
    for (std::size_t i = 0; i < x.data.size(); ++i)
        y.data[i] = x.data[i] >= 0.0 ? x.data[i] : alpha * x.data[i];
    return push(std::move(y), {xid},
                [xid, alpha](Tape& t, NodeId self) {
                    const Tensor& gy = t.grad(self);
                    const Tensor& x = t.val(xid);
                    Tensor& gx = t.grad_mut(xid);
                    for (std::size_t i = 0; i < gy.data.size(); ++i)
                        gx.data[i] += gy.data[i] * (x.data[i] >= 0.0 ? 1.0 : alpha);
                },
                "leaky_relu");
}

Tape::NodeId Tape::sigmoid(NodeId xid) {
    const Tensor& x = val(xid);
    Tensor y(x.shape);
    for (std::size_t i = 0; i < x.data.size(); ++i) y.data[i] = 1.0 / (1.0 + std::exp(-x.data[i]));
    return push(std::move(y), {xid},
                [xid](Tape& t, NodeId self) {
                    const Tensor& gy = t.grad(self);
                    const Tensor& y = t.val(self);
                    Tensor& gx = t.grad_mut(xid);
                    for (std::size_t i = 0; i < gy.data.size(); ++i)
                        gx.data[i] += gy.data[i] * y.data[i] * (1.0 - y.data[i]);
                },
                "sigmoid");
}

Tape::NodeId Tape::abs(NodeId xid) {
    const Tensor& x = val(xid);
    Tensor y(x.shape);
    for (std::size_t i = 0; i < x.data.size(); ++i) y.data[i] = std::fabs(x.data[i]);
    return push(std::move(y), {xid},
                [xid](Tape& t, NodeId self) {
                    const Tensor& gy = t.grad(self);
                    const Tensor& x = t.val(xid);
                    Tensor& gx = t.grad_mut(xid);
                    for (std::size_t i = 0; i < gy.data.size(); ++i)
                        gx.data[i] += gy.data[i] * (x.data[i] > 0.0 ? 1.0 : (x.data[i] < 0.0 ? -1.0 : 0.0));
                },
                "abs");
}

Tape::NodeId Tape::square(NodeId xid) {
    const Tensor& x = val(xid);
    Tensor y(x.shape);
    for (std::size_t i = 0; i < x.data.size(); ++i) y.data[i] = x.data[i] * x.data[i];
    return push(std::move(y), {xid},
                [xid](Tape& t, NodeId self) {
                    const Tensor& gy = t.grad(self);
                    const Tensor& x = t.val(xid);
                    Tensor& gx = t.grad_mut(xid);
                    for (std::size_t i = 0; i < gy.data.size(); ++i) gx.data[i] += 2.0 * gy.data[i] * x.data[i];
                },
                "square");
}

Tape::NodeId Tape::sqrt(NodeId xid) {
    const Tensor& x = val(xid);
    Tensor y(x.shape);
    for (std::size_t i = 0; i < x.data.size(); ++i) y.data[i] = std::sqrt(x.data[i]);
    return push(std::move(y), {xid},
                [xid](Tape& t, NodeId self) {
                    const Tensor& gy = t.grad(self);
                    const Tensor& y = t.val(self);
                    Tensor& gx = t.grad_mut(xid);
                    for (std::size_t i = 0; i < gy.data.size(); ++i) gx.data[i] += gy.data[i] * 0.5 / y.data[i];
                },
                "sqrt");
}

Tape::NodeId Tape::clamp_min(NodeId xid, double lo) {
    const Tensor& x = val(xid);
    Tensor y(x.shape);
    for (std::size_t i = 0; i < x.data.size(); ++i) y.data[i] = x.data[i] < lo ? lo : x.data[i];
    return push(std::move(y), {xid},
                [xid, lo](Tape& t, NodeId self) {
                    const Tensor& gy = t.grad(self);
                    const Tensor& x = t.val(xid);
                    Tensor& gx = t.grad_mut(xid);
                    for (std::size_t i = 0; i < gy.data.size(); ++i)
                        if (x.data[i] >= lo) gx.data[i] += gy.data[i];
                },
                "clamp_min");
}

namespace {
void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b))
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_to_string(a.shape) +
                                    " vs " + shape_to_string(b.shape));
}
}  // namespace

Tape::NodeId Tape::add(NodeId a, NodeId b) {
    require_same_shape(val(a), val(b), "add");
    Tensor y(val(a).shape);
    for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] = val(a).data[i] + val(b).data[i];
    return push(std::move(y), {a, b},
                [a, b](Tape& t, NodeId self) {
                    const Tensor& gy = t.grad(self);
                    for (std::size_t i = 0; i < gy.data.size(); ++i) {
                        t.grad_mut(a).data[i] += gy.data[i];
                        t.grad_mut(b).data[i] += gy.data[i];
                    }
                },
                "add");
}

Tape::NodeId Tape::sub(NodeId a, NodeId b) {
    require_same_shape(val(a), val(b), "sub");
    Tensor y(val(a).shape);
    for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] = val(a).data[i] - val(b).data[i];
    return push(std::move(y), {a, b},
                [a, b](Tape& t, NodeId self) {
                    const Tensor& gy = t.grad(self);
                    for (std::size_t i = 0; i < gy.data.size(); ++i) {
                        t.grad_mut(a).data[i] += gy.data[i];
                        t.grad_mut(b).data[i] -= gy.data[i];
                    }
                },
                "sub");
}

Tape::NodeId Tape::mul(NodeId a, NodeId b) {
    require_same_shape(val(a), val(b), "mul");
    Tensor y(val(a).shape);
    for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] = val(a).data[i] * val(b).data[i];
    return push(std::move(y), {a, b},
                [a, b](Tape& t, NodeId self) {
                    const Tensor& gy = t.grad(self);
                    const Tensor& av = t.val(a);
                    const Tensor& bv = t.val(b);
                    for (std::size_t i = 0; i < gy.data.size(); ++i) {
                        t.grad_mut(a).data[i] += gy.data[i] * bv.data[i];
                        t.grad_mut(b).data[i] += gy.data[i] * av.data[i];
                    }
                },
                "mul");
}

Tape::NodeId Tape::div(NodeId a, NodeId b) {
    require_same_shape(val(a), val(b), "div");
    Tensor y(val(a).shape);
    for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] = val(a).data[i] / val(b).data[i];
    return push(std::move(y), {a, b},
                [a, b](Tape& t, NodeId self) {
                    const Tensor& gy = t.grad(self);
                    const Tensor& av = t.val(a);
                    const Tensor& bv = t.val(b);
                    for (std::size_t i = 0; i < gy.data.size(); ++i) {
                        t.grad_mut(a).data[i] += gy.data[i] / bv.data[i];
                        t.grad_mut(b).data[i] -= gy.data[i] * av.data[i] / (bv.data[i] * bv.data[i]);
                    }
                },
                "div");
}

Tape::NodeId Tape::add_const(NodeId xid, double c) {
    Tensor y(val(xid).shape);
    for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] = val(xid).data[i] + c;
    return push(std::move(y), {xid},
                [xid](Tape& t, NodeId self) {
                    const Tensor& gy = t.grad(self);
                    for (std::size_t i = 0; i < gy.data.size(); ++i) t.grad_mut(xid).data[i] += gy.data[i];
                },
                "add_const");
}

Tape::NodeId Tape::mul_const(NodeId xid, double c) {
    Tensor y(val(xid).shape);
    for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] = val(xid).data[i] * c;
    return push(std::move(y), {xid},
                [xid, c](Tape& t, NodeId self) {
                    const Tensor& gy = t.grad(self);
                    for (std::size_t i = 0; i < gy.data.size(); ++i) t.grad_mut(xid).data[i] += gy.data[i] * c;
                },
                "mul_const");
}

Tape::NodeId Tape::pow_const(NodeId xid, double p) {
    const Tensor& x = val(xid);
    Tensor y(x.shape);
    for (std::size_t i = 0; i < x.data.size(); ++i) y.data[i] = std::pow(x.data[i], p);
    return push(std::move(y), {xid},
                [xid, p](Tape& t, NodeId self) {
                    const Tensor& gy = t.grad(self);
                    const Tensor& x = t.val(xid);
                    Tensor& gx = t.grad_mut(xid);
                    for (std::size_t i = 0; i < gy.data.size(); ++i)
                        gx.data[i] += gy.data[i] * p * std::pow(x.data[i], p - 1.0);
                },
                "pow_const");
}

Tape::NodeId Tape::linear(NodeId xid, NodeId wid, NodeId bid) {
    const Tensor& x = val(xid);
    const Tensor& w = val(wid);
    const Tensor& b = val(bid);
    if (x.ndim() != 2 || w.ndim() != 2)
        throw std::invalid_argument("linear: expected 2-D input and weight");
    const int N = x.dim(0), C = x.dim(1), M = w.dim(0);
    if (w.dim(1) != C)
        throw std::invalid_argument("linear: weight expects " + std::to_string(w.dim(1)) +
                                    " features, input has " + std::to_string(C));
    if (b.size() != M) throw std::invalid_argument("linear: bias length mismatch");
    Tensor y({N, M});
    for (int n = 0; n < N; ++n)
        for (int m = 0; m < M; ++m) {
            double acc = b.data[static_cast<std::size_t>(m)];
            for (int c = 0; c < C; ++c) acc += x.at2(n, c) * w.at2(m, c);
            y.at2(n, m) = acc;
        }
    return push(std::move(y), {xid, wid, bid},
                [xid, wid, bid](Tape& t, NodeId self) {
                    const Tensor& gy = t.grad(self);
                    const Tensor& x = t.val(xid);
                    const Tensor& w = t.val(wid);
                    Tensor& gx = t.grad_mut(xid);
                    Tensor& gw = t.grad_mut(wid);
                    Tensor& gb = t.grad_mut(bid);
                    const int N = x.dim(0), C = x.dim(1), M = w.dim(0);
                    for (int n = 0; n < N; ++n)
                        for (int m = 0; m < M; ++m) {
                            const double g = gy.at2(n, m);
                            if (g == 0.0) continue;
                            gb.data[static_cast<std::size_t>(m)] += g;
                            for (int c = 0; c < C; ++c) {
                                gx.at2(n, c) += g * w.at2(m, c);
                                gw.at2(m, c) += g * x.at2(n, c);
                            }
                        }
                },
                "linear");
}

Tape::NodeId Tape::reshape(NodeId xid, std::vector<int> new_shape) {
    const Tensor& x = val(xid);
    if (Tensor::count(new_shape) != x.size())
        throw std::invalid_argument("reshape: element count mismatch");
    Tensor y(new_shape, x.data);
    return push(std::move(y), {xid},
                [xid](Tape& t, NodeId self) {
                    const Tensor& gy = t.grad(self);
                    Tensor& gx = t.grad_mut(xid);
                    for (std::size_t i = 0; i < gy.data.size(); ++i) gx.data[i] += gy.data[i];
                },
                "reshape");
}

Tape::NodeId Tape::sum_all(NodeId xid) {
    double s = 0.0;
    for (double v : val(xid).data) s += v;
    return push(Tensor::scalar(s), {xid},
                [xid](Tape& t, NodeId self) {
                    const double g = t.grad(self).data[0];
                    for (double& gv : t.grad_mut(xid).data) gv += g;
                },
                "sum_all");
}

Tape::NodeId Tape::mean_all(NodeId xid) {
    const double inv = 1.0 / static_cast<double>(val(xid).size());
    double s = 0.0;
    for (double v : val(xid).data) s += v;
    return push(Tensor::scalar(s * inv), {xid},
                [xid, inv](Tape& t, NodeId self) {
                    const double g = t.grad(self).data[0] * inv;
                    for (double& gv : t.grad_mut(xid).data) gv += g;
                },
                "mean_all");
}

Tape::NodeId Tape::global_avg_pool(NodeId xid) {
    const Tensor& x = val(xid);
    if (x.ndim() != 4) throw std::invalid_argument("global_avg_pool: expected 4-D input");
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const double inv = 1.0 / (static_cast<double>(H) * W);
    Tensor y({N, C});
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
            double s = 0.0;
            for (int yy = 0; yy < H; ++yy)
                for (int xx = 0; xx < W; ++xx) s += x.at4(n, c, yy, xx);
            y.at2(n, c) = s * inv;
        }
    return push(std::move(y), {xid},
                [xid, inv](Tape& t, NodeId self) {
                    const Tensor& gy = t.grad(self);
                    Tensor& gx = t.grad_mut(xid);
                    const int N = gx.dim(0), C = gx.dim(1), H = gx.dim(2), W = gx.dim(3);
                    for (int n = 0; n < N; ++n)
                        for (int c = 0; c < C; ++c) {
                            const double g = gy.at2(n, c) * inv;
                            for (int yy = 0; yy < H; ++yy)
                                for (int xx = 0; xx < W; ++xx) gx.at4(n, c, yy, xx) += g;
                        }
                },
                "global_avg_pool");
}

Tape::NodeId Tape::amax_per_image(NodeId xid) {
    const Tensor& x = val(xid);
    const int N = x.dim(0);
    const std::int64_t per = x.size() / N;
    Tensor y({N});
    std::vector<std::int64_t> arg(static_cast<std::size_t>(N), 0);
    for (int n = 0; n < N; ++n) {
        const std::int64_t base = n * per;
        double best = x.data[static_cast<std::size_t>(base)];
        std::int64_t bi = base;
        for (std::int64_t i = base + 1; i < base + per; ++i)
            if (x.data[static_cast<std::size_t>(i)] > best) {
                best = x.data[static_cast<std::size_t>(i)];
                bi = i;
            }
        y.data[static_cast<std::size_t>(n)] = best;
        arg[static_cast<std::size_t>(n)] = bi;
    }
    return push(std::move(y), {xid},
                [xid, arg](Tape& t, NodeId self) {
                    const Tensor& gy = t.grad(self);
                    Tensor& gx = t.grad_mut(xid);
                    for (std::size_t n = 0; n < arg.size(); ++n)
                        gx.data[static_cast<std::size_t>(arg[n])] += gy.data[n];
                },
                "amax_per_image");
}

Tape::NodeId Tape::div_per_image(NodeId xid, NodeId sid) {
    const Tensor& x = val(xid);
    const Tensor& s = val(sid);
    const int N = x.dim(0);
    if (s.size() != N) throw std::invalid_argument("div_per_image: divisor length must be N");
    const std::int64_t per = x.size() / N;
    Tensor y(x.shape);
    for (int n = 0; n < N; ++n) {
        const double inv = 1.0 / s.data[static_cast<std::size_t>(n)];
        for (std::int64_t i = n * per; i < (n + 1) * per; ++i)
            y.data[static_cast<std::size_t>(i)] = x.data[static_cast<std::size_t>(i)] * inv;
    }
    return push(std::move(y), {xid, sid},
                [xid, sid, per](Tape& t, NodeId self) {
                    const Tensor& gy = t.grad(self);
                    const Tensor& x = t.val(xid);
                    const Tensor& s = t.val(sid);
                    Tensor& gx = t.grad_mut(xid);
                    Tensor& gs = t.grad_mut(sid);
                    const int N = x.dim(0);
                    for (int n = 0; n < N; ++n) {
                        const double sv = s.data[static_cast<std::size_t>(n)];
                        double acc = 0.0;
                        for (std::int64_t i = n * per; i < (n + 1) * per; ++i) {
                            const double g = gy.data[static_cast<std::size_t>(i)];
                            gx.data[static_cast<std::size_t>(i)] += g / sv;
                            acc += g * x.data[static_cast<std::size_t>(i)];
                        }
                        gs.data[static_cast<std::size_t>(n)] -= acc / (sv * sv);
                    }
                },
                "div_per_image");
}

bool Tensor::all_finite() const {
    for (double v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

std::string Tensor::shape_str() const { return shape_to_string(shape); }

}  // namespace roicae
