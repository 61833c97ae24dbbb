#pragma once

#include <map>
#include <string>
#include <vector>

#include "roicae/cae.hpp"
#include "roicae/datasynth.hpp"
#include "roicae/probes.hpp"
#include "roicae/train.hpp"

namespace roicae {

/// One leave-one-site-out experiment. An empty held-out site selects the
/// in-distribution dev split (random test fraction over all sites) instead.
struct ProtocolSpec {
    std::string name;
    std::string held_out_site;
    std::vector<std::uint64_t> seeds;
    CaeConfig model;
    TrainConfig train;
    bool run_probes = true;
};

/// Fixed-horizon loss-term ablation from a shared Phase-1 checkpoint.
struct AblationSpec {
    std::string held_out_site;
    std::uint64_t seed = 1000;
    int horizon = 15;
    bool echo_test = false;
    CaeConfig model;
    TrainConfig train;
};

/// Four named presets: one hold-out per default site plus the dev split.
std::vector<ProtocolSpec> default_presets(const CaeConfig& model, const TrainConfig& train);

/// Random in-distribution split over all sites (val and test fractions 15%).
SplitPlan make_dev_split(const std::vector<ManifestEntry>& manifest, std::uint64_t seed);

/// Throws if any test id leaks into train/val of the same plan.
void assert_split_hygiene(const SplitPlan& plan);

struct MetricSummary {
    double psnr = 0, ms_ssim = 0, roi_mae = 0, roi_ms_ssim = 0, roi_edge_mae = 0;
};
MetricSummary summarize(const std::vector<MetricRecord>& records, const std::string& split);

struct SeedRun {
    std::uint64_t seed = 0;
    LossWeights weights;
    MetricSummary p1_val, p1_test, p2_val, p2_test;
};

struct ProtocolResult {
    std::string name;
    std::string held_out_site;
    std::vector<SeedRun> seeds;
    ProbeReport probes;
    bool has_probes = false;
};

/// Per seed: split, Phase-1 train, calibrate, Phase-2 train, evaluate both
/// checkpoints on val and test. Writes checkpoints, traces, metric CSVs,
/// latents and probe reports under out_dir/<protocol-name>/<seed>/.
ProtocolResult run_protocol(const ProtocolSpec& spec, const std::vector<ManifestEntry>& manifest,
                            const std::string& data_dir, const std::string& out_dir);

struct AblationRow {
    std::string subset;  // "none", "+L1", "+edge", "+L1+edge"
    LossWeights weights;
    MetricSummary val;
    MetricSummary test;  // filled only when echo_test
};

/// One row per term subset, all continuing the same Phase-1 checkpoint for a
/// fixed horizon with validation-loss selection.
std::vector<AblationRow> run_ablation(const AblationSpec& spec, const Checkpoint& p1,
                                      const std::vector<ManifestEntry>& manifest,
                                      const std::string& data_dir);

/// Fixed column order {id, site, split, psnr, ms_ssim, roi_mae, roi_ms_ssim,
/// roi_edge_mae}.
void write_metrics_csv(const std::vector<MetricRecord>& records, const std::string& path);
std::vector<MetricRecord> read_metrics_csv(const std::string& path);

/// Rebuild protocol results from a runs directory previously populated by
/// run_protocol (runs_dir/<protocol>/<seed>/metrics_p{1,2}.csv + probe
/// reports), for offline report emission.
std::vector<ProtocolResult> load_protocol_results(const std::string& runs_dir);

/// Table-style CSVs, aggregate deltas and static plot images under out_dir.
void emit_report(const std::vector<ProtocolResult>& protocols, const std::vector<AblationRow>& ablation,
                 const std::string& out_dir);

// Minimal raster plotting (grayscale PGM / color PPM) used by emit_report.
struct RasterImage {
    int width = 0, height = 0;
    std::vector<std::array<unsigned char, 3>> pix;  // row-major RGB

    RasterImage(int w, int h);
    void fill(unsigned char r, unsigned char g, unsigned char b);
    void set(int x, int y, unsigned char r, unsigned char g, unsigned char b);
    void vbar(int x0, int x1, int y0, int y1, unsigned char r, unsigned char g, unsigned char b);
    void write_ppm(const std::string& path) const;
};

void plot_histograms(const std::vector<std::pair<std::string, std::vector<double>>>& series,
                     const std::string& path, int bins = 24);
void plot_scatter(const std::vector<std::pair<std::string, std::vector<std::array<double, 2>>>>& series,
                  const std::string& path);
void write_image_strip(const std::vector<Tensor>& frames, const std::string& path);

}  // namespace roicae
