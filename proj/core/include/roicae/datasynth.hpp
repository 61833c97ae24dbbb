#pragma once

#include <string>
#include <vector>

#include "roicae/preprocess.hpp"
#include "roicae/rng.hpp"
#include "roicae/tensor.hpp"

namespace roicae {

/// Per-site appearance profile: the domain-shift axes (gain, dynamic-range
/// exponent, multiplicative speckle, vignetting, field-of-view inset).
struct SiteProfile {
    std::string id;
    double gain = 1.0;
    double gamma = 1.0;
    double speckle_sigma = 0.1;
    double speckle_corr_len = 2.0;  // px
    double vignette = 0.0;          // 0 = none
    double fov_inset = 0.0;         // fraction of min(W,H), in [0, 0.3]

    void validate() const;
};

/// Three default sites: A and B form a "near" pair, C is the "far" site.
std::vector<SiteProfile> default_profiles();

/// Geometry of one rendered phantom: bright head ellipse, dark NT band
/// bounded by two thin bright membranes, plain echo background.
struct PhantomParams {
    int width = 320, height = 200;
    double head_cx = 110, head_cy = 70, head_ax = 70, head_ay = 55;
    double band_cx = 200, band_cy = 150;
    double band_angle = 0.2;        // radians
    double band_len = 80;
    double band_thickness = 8;      // >= 3 px
    double band_interior = 0.05;
    double membrane_intensity = 0.6;  // >= interior + 0.2
    double membrane_width = 2.0;
    double background = 0.16;

    void validate() const;
};

/// Randomized parameters for one sample at the given raw resolution.
PhantomParams sample_phantom_params(Rng& rng, int width, int height);

/// Deterministic given the rng state. The returned box tightly bounds the
/// band plus membranes with a 4 px margin.
std::pair<RawImage, RoiBox> render_phantom(const PhantomParams& params, Rng& rng);

/// I' = clip(gain * I^gamma * (1 + sigma*degradation*n), 0, 1) with n a
/// zero-mean unit-std spatially correlated field, then vignette and
/// field-of-view inset.
RawImage apply_site_style(const RawImage& img, const SiteProfile& profile, Rng& rng,
                          double degradation = 1.0);

struct ManifestEntry {
    std::string id;
    std::string site;
    std::string path;  // relative to the manifest directory
    RoiBox roi;        // canvas coordinates
    int width = 0, height = 0;
    double degradation = 1.0;
};

/// Canvas-sized sample loaded into memory.
struct Sample {
    std::string id;
    std::string site;
    RoiBox roi;
    double degradation = 1.0;
    Tensor image;  // 1 x 1 x H x W in [0,1]
};

/// Writes one PGM per sample plus manifest.jsonl into out_dir.
/// Byte-identical output for identical seeds.
std::vector<ManifestEntry> generate_dataset(int n_per_site, const std::vector<SiteProfile>& profiles,
                                            int canvas_w, int canvas_h, std::uint64_t seed,
                                            const std::string& out_dir);

std::vector<ManifestEntry> load_manifest(const std::string& manifest_path);
Sample load_sample(const ManifestEntry& entry, const std::string& base_dir);
std::vector<Sample> load_samples(const std::vector<ManifestEntry>& entries, const std::string& base_dir);

struct SplitPlan {
    std::string held_out_site;
    std::vector<std::string> train_ids;
    std::vector<std::string> val_ids;
    std::vector<std::string> test_ids;
};

/// Leave-one-site-out split: test = held-out site, val = 15% of the rest.
SplitPlan make_split(const std::vector<ManifestEntry>& manifest, const std::string& held_out_site,
                     std::uint64_t seed);

// 8-bit PGM (P5) image files; values = round(255 * I).
void write_pgm(const RawImage& img, const std::string& path);
RawImage read_pgm(const std::string& path);

Tensor tensor_from_raw(const RawImage& img);

}  // namespace roicae
