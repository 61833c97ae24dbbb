#include "roicae/datasynth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace roicae {

namespace fs = std::filesystem;

void SiteProfile::validate() const {
    if (gain <= 0.0 || gamma <= 0.0 || speckle_sigma < 0.0)
        throw std::invalid_argument("site profile '" + id + "': gain/gamma must be positive, sigma >= 0");
    if (fov_inset < 0.0 || fov_inset > 0.3)
        throw std::invalid_argument("site profile '" + id + "': fov inset outside [0, 0.3]");
}

std::vector<SiteProfile> default_profiles() {
    // A/B are the near pair; C is the far site (low gain, heavy compression,
    // coarse speckle, strong vignette and inset).
    return {
        {"siteA", 1.00, 1.00, 0.12, 1.5, 0.10, 0.00},
        {"siteB", 0.92, 1.15, 0.16, 2.0, 0.15, 0.04},
        {"siteC", 0.55, 1.90, 0.32, 3.0, 0.45, 0.12},
    };
}

void PhantomParams::validate() const {
    if (width < 32 || height < 32) throw std::invalid_argument("phantom: image too small");
    if (band_thickness < 3.0) throw std::invalid_argument("phantom: NT band thickness below 3 px");
    if (membrane_intensity < band_interior + 0.2)
        throw std::invalid_argument("phantom: membranes must be >= 0.2 brighter than band interior");
}

PhantomParams sample_phantom_params(Rng& rng, int width, int height) {
    PhantomParams p;
    p.width = width;
    p.height = height;
    p.head_ax = width * rng.uniform(0.18, 0.24);
    p.head_ay = height * rng.uniform(0.24, 0.30);
    p.head_cx = p.head_ax + width * rng.uniform(0.02, 0.08);
    p.head_cy = p.head_ay + height * rng.uniform(0.02, 0.08);
    // band sits clear of the head so its membranes own the local edges
    p.band_cx = width * rng.uniform(0.62, 0.72);
    p.band_cy = height * rng.uniform(0.68, 0.78);
    p.band_angle = rng.uniform(-0.35, 0.35);
    p.band_len = width * rng.uniform(0.18, 0.26);
    p.band_thickness = rng.uniform(6.0, 12.0);
    p.band_interior = rng.uniform(0.03, 0.08);
    p.membrane_intensity = rng.uniform(0.55, 0.75);
    p.membrane_width = rng.uniform(1.8, 2.6);
    p.background = rng.uniform(0.13, 0.20);
    return p;
}

namespace {
double smoothstep(double edge, double x) {
    // 1 inside (x<0), 0 outside (x>edge), smooth in between
    if (x <= 0.0) return 1.0;
    if (x >= edge) return 0.0;
    const double u = 1.0 - x / edge;
    return u * u * (3.0 - 2.0 * u);
}
}  // namespace

std::pair<RawImage, RoiBox> render_phantom(const PhantomParams& p, Rng& rng) {
    p.validate();
    RawImage img(p.width, p.height);
    const double ca = std::cos(p.band_angle), sa = std::sin(p.band_angle);
    const double half_len = p.band_len / 2.0, half_th = p.band_thickness / 2.0;

    // slight deterministic low-frequency undulation of the background
    const double ph1 = rng.uniform(0.0, 6.28), ph2 = rng.uniform(0.0, 6.28);

    for (int y = 0; y < p.height; ++y)
        for (int x = 0; x < p.width; ++x) {
            double v = p.background *
                       (1.0 + 0.08 * std::sin(0.015 * x + ph1) * std::cos(0.02 * y + ph2));

            // head: bright skull ring with moderately bright interior
            const double ex = (x - p.head_cx) / p.head_ax;
            const double ey = (y - p.head_cy) / p.head_ay;
            const double ed = std::sqrt(ex * ex + ey * ey);
            if (ed < 1.0) {
                v = 0.30 + 0.06 * (1.0 - ed);
                if (ed > 0.85) v = 0.72;  // skull
            } else if (ed < 1.08) {
                v = p.background + (0.72 - p.background) * smoothstep(0.08, ed - 1.0);
            }

            // NT band: dark strip between two bright membranes
            const double rx = x - p.band_cx, ry = y - p.band_cy;
            const double along = rx * ca + ry * sa;
            const double across = -rx * sa + ry * ca;
            if (std::fabs(along) <= half_len) {
                const double d = std::fabs(across);
                if (d <= half_th) {
                    v = p.band_interior;
                } else if (d <= half_th + p.membrane_width) {
                    v = p.membrane_intensity;
                } else if (d <= half_th + p.membrane_width + 1.5) {
                    v = std::max(v, p.membrane_intensity * smoothstep(1.5, d - half_th - p.membrane_width));
                }
            }
            img.at(y, x) = std::clamp(v, 0.0, 1.0);
        }

    // bounding box of the rotated band rectangle (membranes included) + 4 px
    const double hx = half_len, hy = half_th + p.membrane_width;
    const double extent_x = std::fabs(hx * ca) + std::fabs(hy * sa);
    const double extent_y = std::fabs(hx * sa) + std::fabs(hy * ca);
    RoiBox box;
    box.x1 = p.band_cx - extent_x - 4.0;
    box.y1 = p.band_cy - extent_y - 4.0;
    box.x2 = p.band_cx + extent_x + 4.0;
    box.y2 = p.band_cy + extent_y + 4.0;
    return {std::move(img), box};
}

RawImage apply_site_style(const RawImage& img, const SiteProfile& profile, Rng& rng,
                          double degradation) {
    profile.validate();
    const int W = img.width, H = img.height;
    RawImage out(W, H);

    // correlated speckle: gaussian-smoothed white noise, standardized
    std::vector<double> noise(static_cast<std::size_t>(W) * H, 0.0);
    if (profile.speckle_sigma > 0.0) {
        std::vector<double> white(noise.size());
        for (double& v : white) v = rng.normal();
        const double s = profile.speckle_corr_len;
        const int rad = std::max(1, static_cast<int>(std::ceil(3.0 * s)));
        std::vector<double> kern(static_cast<std::size_t>(2 * rad + 1));
        double ksum = 0.0;
        for (int i = -rad; i <= rad; ++i) {
            kern[static_cast<std::size_t>(i + rad)] = std::exp(-0.5 * i * i / (s * s));
            ksum += kern[static_cast<std::size_t>(i + rad)];
        }
        for (double& k : kern) k /= ksum;
        std::vector<double> tmp(noise.size(), 0.0);
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                double acc = 0.0;
                for (int i = -rad; i <= rad; ++i) {
                    const int xx = std::clamp(x + i, 0, W - 1);
                    acc += kern[static_cast<std::size_t>(i + rad)] * white[static_cast<std::size_t>(y) * W + xx];
                }
                tmp[static_cast<std::size_t>(y) * W + x] = acc;
            }
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                double acc = 0.0;
                for (int i = -rad; i <= rad; ++i) {
                    const int yy = std::clamp(y + i, 0, H - 1);
                    acc += kern[static_cast<std::size_t>(i + rad)] * tmp[static_cast<std::size_t>(yy) * W + x];
                }
                noise[static_cast<std::size_t>(y) * W + x] = acc;
            }
        double mean = 0.0;
        for (double v : noise) mean += v;
        mean /= static_cast<double>(noise.size());
        double var = 0.0;
        for (double v : noise) var += (v - mean) * (v - mean);
        var /= static_cast<double>(noise.size());
        const double inv_std = var > 0.0 ? 1.0 / std::sqrt(var) : 0.0;
        for (double& v : noise) v = (v - mean) * inv_std;
    }

    const int inset = static_cast<int>(std::lround(profile.fov_inset * std::min(W, H)));
    const double cx = (W - 1) / 2.0, cy = (H - 1) / 2.0;
    const double rmax2 = cx * cx + cy * cy;
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            if (x < inset || x >= W - inset || y < inset || y >= H - inset) {
                out.at(y, x) = 0.0;
                continue;
            }
            double v = profile.gain * std::pow(img.at(y, x), profile.gamma) *
                       (1.0 + profile.speckle_sigma * degradation * noise[static_cast<std::size_t>(y) * W + x]);
            if (profile.vignette > 0.0) {
                const double r2 = ((x - cx) * (x - cx) + (y - cy) * (y - cy)) / rmax2;
                v *= 1.0 - profile.vignette * r2;
            }
            out.at(y, x) = std::clamp(v, 0.0, 1.0);
        }
    return out;
}

// ---- PGM ----

void write_pgm(const RawImage& img, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("write_pgm: cannot open " + path);
    f << "P5\n" << img.width << " " << img.height << "\n255\n";
    std::vector<unsigned char> row(static_cast<std::size_t>(img.width));
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x)
            row[static_cast<std::size_t>(x)] =
                static_cast<unsigned char>(std::lround(255.0 * std::clamp(img.at(y, x), 0.0, 1.0)));
        f.write(reinterpret_cast<const char*>(row.data()), img.width);
    }
    if (!f) throw std::runtime_error("write_pgm: write failed for " + path);
}

RawImage read_pgm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("read_pgm: cannot open " + path);
    std::string magic;
    int w = 0, h = 0, maxval = 0;
    f >> magic >> w >> h >> maxval;
    if (magic != "P5" || w <= 0 || h <= 0 || maxval != 255)
        throw std::runtime_error("read_pgm: unsupported PGM header in " + path);
    f.get();  // single whitespace after maxval
    RawImage img(w, h);
    std::vector<unsigned char> buf(static_cast<std::size_t>(w) * h);
    f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!f) throw std::runtime_error("read_pgm: truncated pixel data in " + path);
    for (std::size_t i = 0; i < buf.size(); ++i) img.pix[i] = buf[i] / 255.0;
    return img;
}

Tensor tensor_from_raw(const RawImage& img) {
    Tensor t({1, 1, img.height, img.width});
    t.data = img.pix;
    return t;
}

// ---- dataset generation ----

std::vector<ManifestEntry> generate_dataset(int n_per_site, const std::vector<SiteProfile>& profiles,
                                            int canvas_w, int canvas_h, std::uint64_t seed,
                                            const std::string& out_dir) {
    if (profiles.size() < 2) throw std::invalid_argument("generate_dataset: need >= 2 site profiles");
    if (n_per_site < 20) throw std::invalid_argument("generate_dataset: need >= 20 samples per site");
    for (const auto& p : profiles) p.validate();

    fs::create_directories(out_dir);
    Rng root(seed);
    std::vector<ManifestEntry> manifest;

    for (std::size_t si = 0; si < profiles.size(); ++si) {
        const SiteProfile& prof = profiles[si];
        for (int i = 0; i < n_per_site; ++i) {
            // bounded retry for the rare ROI that clips off-canvas
            for (int attempt = 0;; ++attempt) {
                if (attempt > 16)
                    throw std::runtime_error("generate_dataset: could not place a valid ROI for site " + prof.id);
                Rng rng = root.sub((si << 24) ^ static_cast<std::uint64_t>(i * 17 + attempt));
                const int raw_w = 280 + static_cast<int>(rng.uniform_int(81));
                const int raw_h = 180 + static_cast<int>(rng.uniform_int(61));
                PhantomParams params = sample_phantom_params(rng, raw_w, raw_h);
                const double degradation = rng.uniform(0.35, 1.8);
                // degradation degrades the anatomy itself, not just the
                // speckle: heavier degradation washes out the membrane
                // contrast, so ROI edge error tracks it by construction
                const double contrast = (params.membrane_intensity - params.band_interior) *
                                        std::clamp(1.55 - 0.6 * degradation, 0.45, 1.35);
                params.membrane_intensity =
                    params.band_interior + std::clamp(contrast, 0.2, 1.0 - params.band_interior);
                auto [raw, raw_roi] = render_phantom(params, rng);
                RawImage styled = apply_site_style(raw, prof, rng, degradation);
                auto [canvas, tf] = letterbox(styled, canvas_w, canvas_h);
                const RoiBox roi = remap_roi(raw_roi, tf);
                if (!validate_roi(roi, canvas_w, canvas_h)) continue;

                char idbuf[64];
                std::snprintf(idbuf, sizeof(idbuf), "%s_%04d", prof.id.c_str(), i);
                ManifestEntry e;
                e.id = idbuf;
                e.site = prof.id;
                e.path = e.id + ".pgm";
                e.roi = roi;
                e.width = canvas_w;
                e.height = canvas_h;
                e.degradation = degradation;
                write_pgm(canvas, (fs::path(out_dir) / e.path).string());
                manifest.push_back(std::move(e));
                break;
            }
        }
    }

    std::ofstream mf(fs::path(out_dir) / "manifest.jsonl");
    if (!mf) throw std::runtime_error("generate_dataset: cannot write manifest in " + out_dir);
    for (const auto& e : manifest) {
        nlohmann::json j;
        j["id"] = e.id;
        j["site"] = e.site;
        j["path"] = e.path;
        j["roi"] = {e.roi.x1, e.roi.y1, e.roi.x2, e.roi.y2};
        j["width"] = e.width;
        j["height"] = e.height;
        j["degradation"] = e.degradation;
        mf << j.dump() << "\n";
    }
    return manifest;
}

std::vector<ManifestEntry> load_manifest(const std::string& manifest_path) {
    std::ifstream f(manifest_path);
    if (!f) throw std::runtime_error("load_manifest: cannot open " + manifest_path);
    std::vector<ManifestEntry> out;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line);
        ManifestEntry e;
        e.id = j.at("id").get<std::string>();
        e.site = j.at("site").get<std::string>();
        e.path = j.at("path").get<std::string>();
        const auto& r = j.at("roi");
        e.roi = {r.at(0).get<double>(), r.at(1).get<double>(), r.at(2).get<double>(), r.at(3).get<double>()};
        e.width = j.at("width").get<int>();
        e.height = j.at("height").get<int>();
        e.degradation = j.value("degradation", 1.0);
        out.push_back(std::move(e));
    }
    return out;
}

Sample load_sample(const ManifestEntry& entry, const std::string& base_dir) {
    Sample s;
    s.id = entry.id;
    s.site = entry.site;
    s.roi = entry.roi;
    s.degradation = entry.degradation;
    s.image = tensor_from_raw(read_pgm((fs::path(base_dir) / entry.path).string()));
    return s;
}

std::vector<Sample> load_samples(const std::vector<ManifestEntry>& entries, const std::string& base_dir) {
    std::vector<Sample> out;
    out.reserve(entries.size());
    for (const auto& e : entries) out.push_back(load_sample(e, base_dir));
    return out;
}

SplitPlan make_split(const std::vector<ManifestEntry>& manifest, const std::string& held_out_site,
                     std::uint64_t seed) {
    SplitPlan plan;
    plan.held_out_site = held_out_site;
    std::vector<std::string> rest;
    for (const auto& e : manifest) {
        if (e.site == held_out_site)
            plan.test_ids.push_back(e.id);
        else
            rest.push_back(e.id);
    }
    if (plan.test_ids.empty())
        throw std::invalid_argument("make_split: unknown or empty held-out site '" + held_out_site + "'");
    Rng rng = Rng(seed).sub(0x5bde);
    rng.shuffle(rest);
    const std::size_t n_val = static_cast<std::size_t>(std::lround(0.15 * static_cast<double>(rest.size())));
    plan.val_ids.assign(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(n_val));
    plan.train_ids.assign(rest.begin() + static_cast<std::ptrdiff_t>(n_val), rest.end());
    return plan;
}

}  // namespace roicae
