#include "roicae/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace roicae {

namespace {

constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;
constexpr double kSobelEps = 1e-8;
constexpr double kClampFloor = 1e-6;
const double kMsSsimWeights[5] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};

std::vector<double> gaussian_window11() {
    std::vector<double> w(11);
    double sum = 0.0;
    for (int i = 0; i < 11; ++i) {
        const double d = i - 5.0;
        w[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
        sum += w[static_cast<std::size_t>(i)];
    }
    for (double& v : w) v /= sum;
    return w;
}

int auto_scales(int h, int w, int requested) {
    int scales = requested > 0 ? requested : 5;
    const int m = std::min(h, w);
    while (scales > 1 && m < 11 * (1 << (scales - 1))) --scales;
    if (m < 11) throw std::invalid_argument("ms_ssim: spatial dims below the 11-tap window");
    return scales;
}

const double kSobelX[9] = {-1, 0, 1, -2, 0, 2, -1, 0, 1};
const double kSobelY[9] = {-1, -2, -1, 0, 0, 0, 1, 2, 1};

}  // namespace

Tensor roi_mask(const RoiBox& box, int canvas_w, int canvas_h) {
    Tensor m({1, 1, canvas_h, canvas_w});
    std::int64_t count = 0;
    for (int y = 0; y < canvas_h; ++y)
        for (int x = 0; x < canvas_w; ++x) {
            const double cx = x + 0.5, cy = y + 0.5;
            if (cx >= box.x1 && cx < box.x2 && cy >= box.y1 && cy < box.y2) {
                m.at4(0, 0, y, x) = 1.0;
                ++count;
            }
        }
    if (count < 4)
        throw std::invalid_argument("roi_mask: mask covers " + std::to_string(count) +
                                    " pixels (minimum 4)");
    return m;
}

Tensor roi_weights(const std::vector<Tensor>& masks) {
    if (masks.empty()) throw std::invalid_argument("roi_weights: no masks");
    const int N = static_cast<int>(masks.size());
    const int H = masks[0].dim(2), W = masks[0].dim(3);
    Tensor w({N, 1, H, W});
    for (int n = 0; n < N; ++n) {
        const Tensor& m = masks[static_cast<std::size_t>(n)];
        if (m.dim(2) != H || m.dim(3) != W) throw std::invalid_argument("roi_weights: mask shape mismatch");
        double cnt = 0.0;
        for (double v : m.data) cnt += v;
        if (cnt < 1.0) throw std::invalid_argument("roi_weights: empty mask at index " + std::to_string(n));
        const double scale = 1.0 / (cnt * N);
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) w.at4(n, 0, y, x) = m.at4(0, 0, y, x) * scale;
    }
    return w;
}

Tape::NodeId ms_ssim_node(Tape& t, Tape::NodeId x, Tape::NodeId xhat, int scales) {
    const Tensor& xv = t.val(x);
    if (!xv.same_shape(t.val(xhat)))
        throw std::invalid_argument("ms_ssim: shape mismatch " + shape_to_string(xv.shape) + " vs " +
                                    shape_to_string(t.val(xhat).shape));
    const int M = auto_scales(xv.dim(2), xv.dim(3), scales);
    const std::vector<double> win = gaussian_window11();

    double wsum = 0.0;
    for (int j = 0; j < M; ++j) wsum += kMsSsimWeights[j];

    Tape::NodeId result = -1;
    Tape::NodeId cx = x, cy = xhat;
    for (int j = 0; j < M; ++j) {
        Tape::NodeId mu_x = t.separable_filter_valid(cx, win);
        Tape::NodeId mu_y = t.separable_filter_valid(cy, win);
        Tape::NodeId sxx = t.sub(t.separable_filter_valid(t.mul(cx, cx), win), t.square(mu_x));
        Tape::NodeId syy = t.sub(t.separable_filter_valid(t.mul(cy, cy), win), t.square(mu_y));
        Tape::NodeId sxy = t.sub(t.separable_filter_valid(t.mul(cx, cy), win), t.mul(mu_x, mu_y));
        Tape::NodeId cs_map = t.div(t.add_const(t.mul_const(sxy, 2.0), kC2),
                                    t.add_const(t.add(sxx, syy), kC2));
        Tape::NodeId term;
        if (j == M - 1) {
            Tape::NodeId l_map = t.div(t.add_const(t.mul_const(t.mul(mu_x, mu_y), 2.0), kC1),
                                       t.add_const(t.add(t.square(mu_x), t.square(mu_y)), kC1));
            term = t.mean_all(t.mul(l_map, cs_map));
        } else {
            term = t.mean_all(cs_map);
        }
        term = t.pow_const(t.clamp_min(term, kClampFloor), kMsSsimWeights[j] / wsum);
        result = (result < 0) ? term : t.mul(result, term);
        if (j < M - 1) {
            cx = t.avg_pool2(cx);
            cy = t.avg_pool2(cy);
        }
    }
    return result;
}

Tape::NodeId phase1_loss_node(Tape& t, Tape::NodeId x, Tape::NodeId xhat, int scales) {
    return t.add_const(t.mul_const(ms_ssim_node(t, x, xhat, scales), -1.0), 1.0);
}

Tape::NodeId roi_l1_node(Tape& t, Tape::NodeId x, Tape::NodeId xhat, const Tensor& weights) {
    Tape::NodeId w = t.leaf(weights, "roi_weights");
    return t.sum_all(t.mul(t.abs(t.sub(x, xhat)), w));
}

Tape::NodeId sobel_norm_node(Tape& t, Tape::NodeId img) {
    if (t.val(img).dim(1) != 1) throw std::invalid_argument("sobel: single-channel input required");
    Tape::NodeId gx = t.filter3x3_replicate(img, kSobelX);
    Tape::NodeId gy = t.filter3x3_replicate(img, kSobelY);
    Tape::NodeId q = t.add(t.square(gx), t.square(gy));
    // Per-image max normalization of the squared magnitude keeps the map
    // exactly invariant to positive intensity scaling and exactly zero on
    // constant images; the epsilon floor keeps the sqrt gradient finite.
    Tape::NodeId denom = t.add_const(t.amax_per_image(q), kSobelEps * kSobelEps);
    Tape::NodeId r = t.div_per_image(q, denom);
    return t.add_const(t.sqrt(t.add_const(r, kSobelEps * kSobelEps)), -kSobelEps);
}

Tape::NodeId roi_edge_loss_node(Tape& t, Tape::NodeId x, Tape::NodeId xhat, const Tensor& weights) {
    Tape::NodeId mx = sobel_norm_node(t, x);
    Tape::NodeId mh = sobel_norm_node(t, xhat);
    Tape::NodeId w = t.leaf(weights, "roi_weights");
    return t.sum_all(t.mul(t.abs(t.sub(mx, mh)), w));
}

Tape::NodeId phase2_total_node(Tape& t, Tape::NodeId x, Tape::NodeId xhat, const Tensor& weights,
                               const LossWeights& w, int scales) {
    if (w.glob < 0.0 || w.l1 < 0.0 || w.edge < 0.0)
        throw std::invalid_argument("phase2_total: negative loss weight");
    if (w.glob == 0.0 && w.l1 == 0.0 && w.edge == 0.0)
        throw std::invalid_argument("phase2_total: all loss weights are zero");
    Tape::NodeId acc = -1;
    auto accumulate = [&](Tape::NodeId term, double lambda) {
        Tape::NodeId scaled = t.mul_const(term, lambda);
        acc = (acc < 0) ? scaled : t.add(acc, scaled);
    };
    if (w.glob > 0.0) accumulate(phase1_loss_node(t, x, xhat, scales), w.glob);
    if (w.l1 > 0.0) accumulate(roi_l1_node(t, x, xhat, weights), w.l1);
    if (w.edge > 0.0) accumulate(roi_edge_loss_node(t, x, xhat, weights), w.edge);
    return acc;
}

// ---- forward-only wrappers ----

double ms_ssim(const Tensor& x, const Tensor& xhat, int scales) {
    Tape t;
    return t.val(ms_ssim_node(t, t.leaf(x), t.leaf(xhat), scales)).data[0];
}

double phase1_loss(const Tensor& x, const Tensor& xhat, int scales) {
    return 1.0 - ms_ssim(x, xhat, scales);
}

double roi_l1(const Tensor& x, const Tensor& xhat, const Tensor& mask) {
    Tape t;
    return t.val(roi_l1_node(t, t.leaf(x), t.leaf(xhat), roi_weights({mask}))).data[0];
}

Tensor sobel_norm_magnitude(const Tensor& img) {
    Tape t;
    return t.val(sobel_norm_node(t, t.leaf(img)));
}

double roi_edge_loss(const Tensor& x, const Tensor& xhat, const Tensor& mask) {
    Tape t;
    return t.val(roi_edge_loss_node(t, t.leaf(x), t.leaf(xhat), roi_weights({mask}))).data[0];
}

double psnr(const Tensor& x, const Tensor& xhat) {
    if (!x.same_shape(xhat)) throw std::invalid_argument("psnr: shape mismatch");
    double mse = 0.0;
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        const double d = x.data[i] - xhat.data[i];
        mse += d * d;
    }
    mse /= static_cast<double>(x.size());
    if (mse == 0.0) return 100.0;
    return std::min(100.0, 10.0 * std::log10(1.0 / mse));
}

double roi_ms_ssim(const Tensor& x, const Tensor& xhat, const RoiBox& roi) {
    if (x.ndim() != 4 || x.dim(0) != 1 || x.dim(1) != 1)
        throw std::invalid_argument("roi_ms_ssim: expected 1 x 1 x H x W image");
    const int H = x.dim(2), W = x.dim(3);
    int cx1 = static_cast<int>(std::floor(roi.x1));
    int cy1 = static_cast<int>(std::floor(roi.y1));
    int cx2 = static_cast<int>(std::ceil(roi.x2));
    int cy2 = static_cast<int>(std::ceil(roi.y2));
    auto expand = [](int& lo, int& hi, int minimum, int limit) {
        lo = std::clamp(lo, 0, limit);
        hi = std::clamp(hi, lo + 1, limit);
        while (hi - lo < minimum) {
            if (lo > 0) --lo;
            if (hi - lo < minimum && hi < limit) ++hi;
            if (lo == 0 && hi == limit) break;
        }
    };
    expand(cx1, cx2, 16, W);
    expand(cy1, cy2, 16, H);
    const int cw = cx2 - cx1, ch = cy2 - cy1;
    Tensor a({1, 1, ch, cw}), b({1, 1, ch, cw});
    for (int yy = 0; yy < ch; ++yy)
        for (int xx = 0; xx < cw; ++xx) {
            a.at4(0, 0, yy, xx) = x.at4(0, 0, cy1 + yy, cx1 + xx);
            b.at4(0, 0, yy, xx) = xhat.at4(0, 0, cy1 + yy, cx1 + xx);
        }
    return ms_ssim(a, b, 1);
}

// ---- rank statistics ----

namespace {
std::vector<double> average_ranks(const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0u);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
        const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
        i = j + 1;
    }
    return ranks;
}
}  // namespace

double auroc(const std::vector<double>& scores_pos, const std::vector<double>& scores_neg) {
    if (scores_pos.empty() || scores_neg.empty())
        throw std::invalid_argument("auroc: empty class");
    std::vector<double> all(scores_pos);
    all.insert(all.end(), scores_neg.begin(), scores_neg.end());
    const std::vector<double> ranks = average_ranks(all);
    const double np = static_cast<double>(scores_pos.size());
    const double nn = static_cast<double>(scores_neg.size());
    double rsum = 0.0;
    for (std::size_t i = 0; i < scores_pos.size(); ++i) rsum += ranks[i];
    return (rsum - np * (np + 1.0) / 2.0) / (np * nn);
}

std::pair<double, double> rank_stats(const std::vector<double>& y_true, const std::vector<double>& y_pred) {
    if (y_true.size() != y_pred.size() || y_true.size() < 3)
        throw std::invalid_argument("rank_stats: need >= 3 paired values");
    const double mean_t = std::accumulate(y_true.begin(), y_true.end(), 0.0) / static_cast<double>(y_true.size());
    double ss_tot = 0.0, ss_res = 0.0;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        ss_tot += (y_true[i] - mean_t) * (y_true[i] - mean_t);
        ss_res += (y_true[i] - y_pred[i]) * (y_true[i] - y_pred[i]);
    }
    if (ss_tot == 0.0) throw std::invalid_argument("rank_stats: constant target");
    const double r2 = 1.0 - ss_res / ss_tot;

    const std::vector<double> rt = average_ranks(y_true);
    const std::vector<double> rp = average_ranks(y_pred);
    const double n = static_cast<double>(rt.size());
    double mt = 0.0, mp = 0.0;
    for (std::size_t i = 0; i < rt.size(); ++i) {
        mt += rt[i];
        mp += rp[i];
    }
    mt /= n;
    mp /= n;
    double cov = 0.0, vt = 0.0, vp = 0.0;
    for (std::size_t i = 0; i < rt.size(); ++i) {
        cov += (rt[i] - mt) * (rp[i] - mp);
        vt += (rt[i] - mt) * (rt[i] - mt);
        vp += (rp[i] - mp) * (rp[i] - mp);
    }
    // rho of a constant prediction is 0 by convention
    const double rho = (vt == 0.0 || vp == 0.0) ? 0.0 : cov / std::sqrt(vt * vp);
    return {r2, rho};
}

std::pair<double, double> softmax_stats(const std::vector<double>& logits) {
    if (logits.size() < 2) throw std::invalid_argument("softmax_stats: need >= 2 classes");
    const double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double l : logits) z += std::exp(l - mx);
    double conf = 0.0, ent = 0.0;
    for (double l : logits) {
        const double p = std::exp(l - mx) / z;
        conf = std::max(conf, p);
        if (p > 0.0) ent -= p * std::log(p);
    }
    return {conf, ent};
}

MetricRecord compute_metrics(const Tensor& x, const Tensor& xhat, const RoiBox& roi) {
    MetricRecord r;
    const Tensor mask = roi_mask(roi, x.dim(3), x.dim(2));
    r.psnr = psnr(x, xhat);
    r.ms_ssim = ms_ssim(x, xhat);
    r.roi_mae = roi_l1(x, xhat, mask);
    r.roi_ms_ssim = roi_ms_ssim(x, xhat, roi);
    r.roi_edge_mae = roi_edge_loss(x, xhat, mask);
    return r;
}

}  // namespace roicae
