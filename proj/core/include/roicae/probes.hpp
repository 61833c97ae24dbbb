#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "roicae/cae.hpp"
#include "roicae/datasynth.hpp"
#include "roicae/losses.hpp"
#include "roicae/tensor.hpp"

namespace roicae {

/// Frozen-encoder per-sample record: everything the downstream probes need,
/// with no further access to the model.
struct LatentRecord {
    std::string id;
    std::string site;
    std::string split;
    std::vector<double> z;      // latent vector
    std::vector<double> z_roi;  // ROI-pooled bottleneck-channel means
    double r_roi = 0.0;         // ROI MAE of this sample's reconstruction
    double e_roi = 0.0;         // ROI edge MAE
    double z_norm = 0.0;
    double degradation = 0.0;
};

std::vector<LatentRecord> extract_latents(const Checkpoint& ckpt, const std::vector<Sample>& samples,
                                          const std::string& split_tag);

void write_latents_csv(const std::vector<LatentRecord>& records, const std::string& path);
std::vector<LatentRecord> read_latents_csv(const std::string& path);

/// q(x) = (r_roi, e_roi, ||z||2).
std::array<double, 3> qc_feature_vector(const LatentRecord& rec);

// ---- out-of-distribution scoring ----

struct GaussianFit {
    std::vector<double> mean;
    Tensor cov;       // dim x dim
    Tensor cov_chol;  // Cholesky factor of cov + tau*I
    double tau = 0.0;
    int dim = 0;
};

/// Pooled Gaussian over training latents; tau = 1e-6 * trace(cov)/dim unless
/// overridden (tau_scale multiplies that default).
GaussianFit fit_gaussian(const std::vector<std::vector<double>>& train_z, double tau_override = -1.0);

/// sqrt((z-mu)^T (cov+tau I)^-1 (z-mu)).
double mahalanobis_ood(const GaussianFit& fit, const std::vector<double>& z);

/// Mean Euclidean distance to the K nearest training latents (exhaustive).
double knn_ood(const std::vector<std::vector<double>>& train_z, const std::vector<double>& z, int k = 10);

// ---- provenance linear probe ----

struct SiteStat {
    std::string site;
    bool seen = false;
    double confidence_mean = 0.0, confidence_std = 0.0;
    double entropy_mean = 0.0, entropy_std = 0.0;
    int n = 0;
};

struct LinearProbeResult {
    std::vector<std::string> classes;  // seen sites, sorted
    double seen_accuracy = 0.0;
    std::vector<SiteStat> per_site;
    // per eval record, aligned with the eval input order
    std::vector<double> confidence;
    std::vector<double> entropy;
};

/// Multinomial logistic regression on z (Adam lr 1e-2, weight decay 1e-4,
/// 100 epochs, full batch, seeded init). Unseen-site records are scored but
/// never trained on.
LinearProbeResult linear_probe(const std::vector<LatentRecord>& train,
                               const std::vector<LatentRecord>& eval_records,
                               std::uint64_t seed = 7);

// ---- QC ridge probe ----

struct RidgeSiteStat {
    std::string site;
    double r2 = 0.0;
    double spearman = 0.0;
    int n = 0;
};

struct RidgeProbeResult {
    std::vector<double> w;  // on standardized features
    double intercept = 0.0;
    std::vector<RidgeSiteStat> per_site;
    std::vector<double> predictions;  // aligned with eval input order
};

/// Closed-form ridge w = (X^T X + alpha I)^-1 X^T y regressing e_roi from
/// the concatenated (z, z_roi) features, standardized on the train split only.
RidgeProbeResult ridge_qc_probe(const std::vector<LatentRecord>& train,
                                const std::vector<LatentRecord>& eval_records, double alpha = 1.0);

/// Plain-matrix ridge over rows x[i] (already standardized, no intercept
/// column; callers center y themselves). Returns one weight per feature.
std::vector<double> ridge_fit(const std::vector<std::vector<double>>& x, const std::vector<double>& y,
                              double alpha);

// ---- PCA / interpolation ----

struct PcaResult {
    std::vector<std::array<double, 2>> coords;  // per input record
    std::vector<double> explained_ratio;        // one per kept component
    std::vector<double> mean;
};

PcaResult pca_project(const std::vector<std::vector<double>>& latents, int dims = 2);

/// decode((1-t) z_a + t z_b), t = 0, 1/(steps-1), ..., 1.
std::vector<Tensor> latent_interpolate(const Checkpoint& ckpt, const std::vector<double>& z_a,
                                       const std::vector<double>& z_b, int steps);

// ---- aggregate probe report (per held-out-site protocol) ----

struct ProbeReport {
    std::string held_out_site;
    std::vector<SiteStat> provenance;
    double seen_accuracy = 0.0;
    double mahalanobis_auroc = 0.0;
    double knn_auroc = 0.0;
    std::vector<RidgeSiteStat> qc;
};

/// Full battery over stored records: provenance probe trained on seen-site
/// train records, OOD fits on seen-site train latents with the held-out site
/// as the positive class, ridge on train records.
ProbeReport run_probe_battery(const std::vector<LatentRecord>& records, const std::string& held_out_site,
                              std::uint64_t seed = 7);

std::string probe_report_to_json(const ProbeReport& rep);
ProbeReport probe_report_from_json(const std::string& text);
void write_probe_report_csv(const ProbeReport& rep, const std::string& path);

}  // namespace roicae
