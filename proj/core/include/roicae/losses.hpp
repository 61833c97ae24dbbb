#pragma once

#include <string>
#include <utility>
#include <vector>

#include "roicae/preprocess.hpp"
#include "roicae/tape.hpp"
#include "roicae/tensor.hpp"

namespace roicae {

/// Phase-2 mixing weights (lambda_glob, lambda_l1, lambda_edge).
struct LossWeights {
    double glob = 1.0;
    double l1 = 0.0;
    double edge = 0.0;
};

/// Binary ROI mask over canvas pixels: p is inside iff its center lies
/// within the float box. Shape 1 x 1 x H x W. Throws if fewer than 4 pixels.
Tensor roi_mask(const RoiBox& box, int canvas_w, int canvas_h);

/// Per-pixel weights for a batch of masks: w[n][p] = mask_n[p] / (N * |Omega_n|),
/// so sum(|diff| * w) is the batch mean of per-sample masked means.
Tensor roi_weights(const std::vector<Tensor>& masks);

// ---- differentiable losses (tape graph builders) ----
// x, xhat: N x 1 x H x W nodes. `scales` 0 means auto (5 reduced until the
// min spatial dim supports the 11-tap window at the coarsest scale).

Tape::NodeId ms_ssim_node(Tape& t, Tape::NodeId x, Tape::NodeId xhat, int scales = 0);
Tape::NodeId phase1_loss_node(Tape& t, Tape::NodeId x, Tape::NodeId xhat, int scales = 0);
Tape::NodeId roi_l1_node(Tape& t, Tape::NodeId x, Tape::NodeId xhat, const Tensor& weights);
/// Normalized Sobel gradient magnitude map, in [0,1), per-image max
/// normalization; exactly 0 on constant images and invariant to positive
/// intensity scaling.
Tape::NodeId sobel_norm_node(Tape& t, Tape::NodeId img);
Tape::NodeId roi_edge_loss_node(Tape& t, Tape::NodeId x, Tape::NodeId xhat, const Tensor& weights);
Tape::NodeId phase2_total_node(Tape& t, Tape::NodeId x, Tape::NodeId xhat, const Tensor& weights,
                               const LossWeights& w, int scales = 0);

// ---- forward-only evaluation ----

double ms_ssim(const Tensor& x, const Tensor& xhat, int scales = 0);
double phase1_loss(const Tensor& x, const Tensor& xhat, int scales = 0);
double roi_l1(const Tensor& x, const Tensor& xhat, const Tensor& mask);
Tensor sobel_norm_magnitude(const Tensor& img);
double roi_edge_loss(const Tensor& x, const Tensor& xhat, const Tensor& mask);
double psnr(const Tensor& x, const Tensor& xhat);
/// Single-scale SSIM on the ROI crop expanded to at least 16x16.
double roi_ms_ssim(const Tensor& x, const Tensor& xhat, const RoiBox& roi);

// ---- rank / probability statistics ----

/// Mann-Whitney rank statistic; ties count one half.
double auroc(const std::vector<double>& scores_pos, const std::vector<double>& scores_neg);
/// (R^2, Spearman rho). Average-rank ties; rho of a constant vector is 0.
std::pair<double, double> rank_stats(const std::vector<double>& y_true, const std::vector<double>& y_pred);
/// (max softmax probability, entropy in nats).
std::pair<double, double> softmax_stats(const std::vector<double>& logits);

/// One evaluation row; serialized as CSV with the fixed column order
/// {id, site, split, psnr, ms_ssim, roi_mae, roi_ms_ssim, roi_edge_mae}.
struct MetricRecord {
    std::string id;
    std::string site;
    std::string split;
    double psnr = 0, ms_ssim = 0, roi_mae = 0, roi_ms_ssim = 0, roi_edge_mae = 0;
};

MetricRecord compute_metrics(const Tensor& x, const Tensor& xhat, const RoiBox& roi);

}  // namespace roicae
