#include "roicae/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace roicae {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::vector<ProtocolSpec> default_presets(const CaeConfig& model, const TrainConfig& train) {
    std::vector<ProtocolSpec> out;
    for (const auto* site : {"siteA", "siteB", "siteC"}) {
        ProtocolSpec p;
        p.name = std::string("holdout-") + site;
        p.held_out_site = site;
        p.seeds = train.seeds;
        p.model = model;
        p.train = train;
        out.push_back(std::move(p));
    }
    ProtocolSpec dev;
    dev.name = "dev";
    dev.held_out_site = "";
    dev.seeds = train.seeds;
    dev.model = model;
    dev.train = train;
    dev.run_probes = false;  // no unseen site in the dev split
    out.push_back(std::move(dev));
    return out;
}

SplitPlan make_dev_split(const std::vector<ManifestEntry>& manifest, std::uint64_t seed) {
    if (manifest.size() < 8) throw std::invalid_argument("dev split: need at least 8 samples");
    std::vector<std::string> ids;
    for (const auto& e : manifest) ids.push_back(e.id);
    Rng rng = Rng(seed).sub(0xDE5u);
    rng.shuffle(ids);
    const std::size_t n = ids.size();
    const std::size_t n_test = static_cast<std::size_t>(std::lround(0.15 * static_cast<double>(n)));
    const std::size_t n_val =
        static_cast<std::size_t>(std::lround(0.15 * static_cast<double>(n - n_test)));
    SplitPlan plan;
    plan.held_out_site = "";
    plan.test_ids.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_test));
    plan.val_ids.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_test),
                        ids.begin() + static_cast<std::ptrdiff_t>(n_test + n_val));
    plan.train_ids.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_test + n_val), ids.end());
    std::sort(plan.test_ids.begin(), plan.test_ids.end());
    std::sort(plan.val_ids.begin(), plan.val_ids.end());
    std::sort(plan.train_ids.begin(), plan.train_ids.end());
    return plan;
}

void assert_split_hygiene(const SplitPlan& plan) {
    std::set<std::string> train(plan.train_ids.begin(), plan.train_ids.end());
    std::set<std::string> val(plan.val_ids.begin(), plan.val_ids.end());
    for (const auto& id : plan.val_ids)
        if (train.count(id)) throw std::runtime_error("split hygiene: id in both train and val: " + id);
    for (const auto& id : plan.test_ids)
        if (train.count(id) || val.count(id))
            throw std::runtime_error("split hygiene: test id leaked into train/val: " + id);
}

MetricSummary summarize(const std::vector<MetricRecord>& records, const std::string& split) {
    MetricSummary s;
    int n = 0;
    for (const auto& r : records) {
        if (r.split != split) continue;
        s.psnr += r.psnr;
        s.ms_ssim += r.ms_ssim;
        s.roi_mae += r.roi_mae;
        s.roi_ms_ssim += r.roi_ms_ssim;
        s.roi_edge_mae += r.roi_edge_mae;
        ++n;
    }
    if (n == 0) throw std::invalid_argument("summarize: no records for split '" + split + "'");
    const double inv = 1.0 / static_cast<double>(n);
    s.psnr *= inv;
    s.ms_ssim *= inv;
    s.roi_mae *= inv;
    s.roi_ms_ssim *= inv;
    s.roi_edge_mae *= inv;
    return s;
}

void write_metrics_csv(const std::vector<MetricRecord>& records, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open metrics csv for writing: " + path);
    out << "id,site,split,psnr,ms_ssim,roi_mae,roi_ms_ssim,roi_edge_mae\n";
    char buf[256];
    for (const auto& r : records) {
        std::snprintf(buf, sizeof(buf), "%s,%s,%s,%.6f,%.6f,%.8f,%.6f,%.8f\n", r.id.c_str(),
                      r.site.c_str(), r.split.c_str(), r.psnr, r.ms_ssim, r.roi_mae, r.roi_ms_ssim,
                      r.roi_edge_mae);
        out << buf;
    }
}

std::vector<MetricRecord> read_metrics_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open metrics csv: " + path);
    std::string line;
    if (!std::getline(in, line) || line != "id,site,split,psnr,ms_ssim,roi_mae,roi_ms_ssim,roi_edge_mae")
        throw std::runtime_error("unexpected metrics csv header in " + path);
    std::vector<MetricRecord> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::size_t pos = 0;
        while (pos <= line.size()) {
            const std::size_t c = line.find(',', pos);
            f.push_back(line.substr(pos, c == std::string::npos ? std::string::npos : c - pos));
            if (c == std::string::npos) break;
            pos = c + 1;
        }
        if (f.size() != 8) throw std::runtime_error("malformed metrics csv row in " + path);
        MetricRecord r;
        r.id = f[0];
        r.site = f[1];
        r.split = f[2];
        r.psnr = std::stod(f[3]);
        r.ms_ssim = std::stod(f[4]);
        r.roi_mae = std::stod(f[5]);
        r.roi_ms_ssim = std::stod(f[6]);
        r.roi_edge_mae = std::stod(f[7]);
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<ProtocolResult> load_protocol_results(const std::string& runs_dir) {
    if (!fs::is_directory(runs_dir)) throw std::runtime_error("runs directory not found: " + runs_dir);
    std::vector<ProtocolResult> out;
    std::vector<fs::path> protos;
    for (const auto& e : fs::directory_iterator(runs_dir))
        if (e.is_directory()) protos.push_back(e.path());
    std::sort(protos.begin(), protos.end());
    for (const auto& pdir : protos) {
        ProtocolResult res;
        res.name = pdir.filename().string();
        std::vector<fs::path> seeds;
        for (const auto& e : fs::directory_iterator(pdir))
            if (e.is_directory() && fs::exists(e.path() / "metrics_p1.csv")) seeds.push_back(e.path());
        if (seeds.empty()) continue;
        std::sort(seeds.begin(), seeds.end());
        for (const auto& sdir : seeds) {
            SeedRun run;
            run.seed = std::stoull(sdir.filename().string());
            std::vector<MetricRecord> m1 = read_metrics_csv((sdir / "metrics_p1.csv").string());
            std::vector<MetricRecord> m2 = read_metrics_csv((sdir / "metrics_p2.csv").string());
            run.p1_val = summarize(m1, "val");
            run.p1_test = summarize(m1, "test");
            run.p2_val = summarize(m2, "val");
            run.p2_test = summarize(m2, "test");
            res.seeds.push_back(std::move(run));
            if (!res.has_probes && fs::exists(sdir / "probe_report.json")) {
                std::ifstream pj(sdir / "probe_report.json");
                std::string text((std::istreambuf_iterator<char>(pj)), std::istreambuf_iterator<char>());
                res.probes = probe_report_from_json(text);
                res.held_out_site = res.probes.held_out_site;
                res.has_probes = true;
            }
        }
        out.push_back(std::move(res));
    }
    if (out.empty()) throw std::runtime_error("no protocol runs found under " + runs_dir);
    return out;
}

namespace {

std::map<std::string, Sample> sample_map(const std::vector<ManifestEntry>& manifest,
                                         const std::string& data_dir) {
    std::map<std::string, Sample> out;
    for (const auto& e : manifest) out.emplace(e.id, load_sample(e, data_dir));
    return out;
}

std::vector<Sample> pick(const std::map<std::string, Sample>& samples,
                         const std::vector<std::string>& ids) {
    std::vector<Sample> out;
    for (const auto& id : ids) {
        auto it = samples.find(id);
        if (it == samples.end()) throw std::runtime_error("split references unknown sample id: " + id);
        out.push_back(it->second);
    }
    return out;
}

SplitPlan split_for(const std::string& held_out_site, const std::vector<ManifestEntry>& manifest,
                    std::uint64_t seed) {
    SplitPlan plan = held_out_site.empty() ? make_dev_split(manifest, seed)
                                           : make_split(manifest, held_out_site, seed);
    assert_split_hygiene(plan);
    return plan;
}

void write_run_plots(const Checkpoint& p2, const std::vector<LatentRecord>& records,
                     const std::string& held_out_site, const std::string& dir) {
    std::vector<std::string> sites;
    for (const auto& r : records)
        if (std::find(sites.begin(), sites.end(), r.site) == sites.end()) sites.push_back(r.site);
    std::sort(sites.begin(), sites.end());

    // linear-probe confidence per site
    std::vector<LatentRecord> probe_train;
    for (const auto& r : records)
        if (r.site != held_out_site && r.split == "train") probe_train.push_back(r);
    if (!held_out_site.empty() && !probe_train.empty()) {
        LinearProbeResult lin = linear_probe(probe_train, records);
        std::vector<std::pair<std::string, std::vector<double>>> conf;
        for (const auto& site : sites) {
            std::vector<double> vals;
            for (std::size_t i = 0; i < records.size(); ++i)
                if (records[i].site == site) vals.push_back(lin.confidence[i]);
            conf.emplace_back(site, std::move(vals));
        }
        plot_histograms(conf, dir + "/confidence_hist.ppm");

        std::vector<std::vector<double>> fit_z;
        for (const auto& r : probe_train) fit_z.push_back(r.z);
        GaussianFit fit = fit_gaussian(fit_z);
        std::vector<std::pair<std::string, std::vector<double>>> ood(2);
        ood[0].first = "seen";
        ood[1].first = "held-out";
        for (const auto& r : records) {
            if (r.site != held_out_site && r.split == "train") continue;
            ood[r.site == held_out_site ? 1 : 0].second.push_back(mahalanobis_ood(fit, r.z));
        }
        if (!ood[0].second.empty() && !ood[1].second.empty())
            plot_histograms(ood, dir + "/ood_scores.ppm");
    }

    std::vector<std::pair<std::string, std::vector<std::array<double, 2>>>> scatter;
    {
        std::vector<std::vector<double>> zs;
        for (const auto& r : records) zs.push_back(r.z);
        PcaResult pca = pca_project(zs, 2);
        for (const auto& site : sites) {
            std::vector<std::array<double, 2>> pts;
            for (std::size_t i = 0; i < records.size(); ++i)
                if (records[i].site == site) pts.push_back(pca.coords[i]);
            scatter.emplace_back(site, std::move(pts));
        }
    }
    plot_scatter(scatter, dir + "/pca_scatter.ppm");

    if (records.size() >= 2) {
        std::vector<Tensor> frames = latent_interpolate(p2, records.front().z, records.back().z, 7);
        write_image_strip(frames, dir + "/interpolation_strip.ppm");
    }
}

}  // namespace

ProtocolResult run_protocol(const ProtocolSpec& spec, const std::vector<ManifestEntry>& manifest,
                            const std::string& data_dir, const std::string& out_dir) {
    if (spec.seeds.empty()) throw std::invalid_argument("protocol " + spec.name + ": no seeds");
    spec.model.validate();
    spec.train.validate();
    std::map<std::string, Sample> samples = sample_map(manifest, data_dir);

    ProtocolResult result;
    result.name = spec.name;
    result.held_out_site = spec.held_out_site;

    bool first_seed = true;
    for (std::uint64_t seed : spec.seeds) {
        const fs::path run_dir = fs::path(out_dir) / spec.name / std::to_string(seed);
        fs::create_directories(run_dir);
        SplitPlan plan = split_for(spec.held_out_site, manifest, seed);
        {
            std::ofstream cf(run_dir / "config.json");
            json jm{{"height", spec.model.height},
                    {"width", spec.model.width},
                    {"channels", spec.model.channels},
                    {"bottleneck", spec.model.bottleneck},
                    {"latent_dim", spec.model.latent_dim}};
            json jc{{"protocol", spec.name},
                    {"held_out_site", spec.held_out_site},
                    {"seed", seed},
                    {"model", jm},
                    {"train", json::parse(train_config_to_json(spec.train))}};
            cf << jc.dump(2) << '\n';
        }
        {
            std::ofstream sf(run_dir / "split.json");
            json js{{"held_out_site", plan.held_out_site},
                    {"train", plan.train_ids},
                    {"val", plan.val_ids},
                    {"test", plan.test_ids}};
            sf << js.dump(2) << '\n';
        }

        Rng init_rng = Rng(seed).sub(0x171u);
        ParamMap init = init_cae_params(spec.model, init_rng);
        TrainResult p1;
        try {
            p1 = train_phase(spec.model, init, samples, plan, Phase::P1, spec.train, seed);
        } catch (const std::exception& e) {
            throw std::runtime_error("protocol " + spec.name + ", seed " + std::to_string(seed) +
                                     ", phase P1: " + e.what());
        }
        save_checkpoint(p1.best, (run_dir / "p1.ckpt").string());
        write_trace_csv(p1.trace, (run_dir / "trace_p1.csv").string());

        TrainResult p2;
        try {
            p2 = train_phase(spec.model, p1.best.params, samples, plan, Phase::P2, spec.train, seed);
        } catch (const std::exception& e) {
            throw std::runtime_error("protocol " + spec.name + ", seed " + std::to_string(seed) +
                                     ", phase P2: " + e.what());
        }
        save_checkpoint(p2.best, (run_dir / "p2.ckpt").string());
        write_trace_csv(p2.trace, (run_dir / "trace_p2.csv").string());
        {
            std::ofstream cf(run_dir / "calibration.json");
            json jc{{"g_glob", p2.calibration.g_glob},
                    {"g_l1", p2.calibration.g_l1},
                    {"g_edge", p2.calibration.g_edge},
                    {"lambda_glob", p2.calibration.weights.glob},
                    {"lambda_l1", p2.calibration.weights.l1},
                    {"lambda_edge", p2.calibration.weights.edge}};
            cf << jc.dump(2) << '\n';
        }

        std::vector<Sample> val_samples = pick(samples, plan.val_ids);
        std::vector<Sample> test_samples = pick(samples, plan.test_ids);
        auto eval_phase = [&](const ParamMap& params) {
            std::vector<MetricRecord> recs = evaluate_checkpoint(spec.model, params, val_samples, "val");
            std::vector<MetricRecord> test = evaluate_checkpoint(spec.model, params, test_samples, "test");
            recs.insert(recs.end(), test.begin(), test.end());
            return recs;
        };
        std::vector<MetricRecord> m1 = eval_phase(p1.best.params);
        std::vector<MetricRecord> m2 = eval_phase(p2.best.params);
        write_metrics_csv(m1, (run_dir / "metrics_p1.csv").string());
        write_metrics_csv(m2, (run_dir / "metrics_p2.csv").string());

        SeedRun run;
        run.seed = seed;
        run.weights = LossWeights{p2.best.w_glob, p2.best.w_l1, p2.best.w_edge};
        run.p1_val = summarize(m1, "val");
        run.p1_test = summarize(m1, "test");
        run.p2_val = summarize(m2, "val");
        run.p2_test = summarize(m2, "test");
        result.seeds.push_back(run);

        // frozen-encoder latents + probe battery (first seed carries the report)
        std::vector<Sample> train_samples = pick(samples, plan.train_ids);
        std::vector<LatentRecord> records = extract_latents(p2.best, train_samples, "train");
        std::vector<LatentRecord> more = extract_latents(p2.best, val_samples, "val");
        records.insert(records.end(), more.begin(), more.end());
        more = extract_latents(p2.best, test_samples, "test");
        records.insert(records.end(), more.begin(), more.end());
        write_latents_csv(records, (run_dir / "latents.csv").string());

        if (spec.run_probes && !spec.held_out_site.empty()) {
            ProbeReport rep = run_probe_battery(records, spec.held_out_site);
            std::ofstream pj(run_dir / "probe_report.json");
            pj << probe_report_to_json(rep) << '\n';
            write_probe_report_csv(rep, (run_dir / "probe_report.csv").string());
            if (first_seed) {
                result.probes = rep;
                result.has_probes = true;
            }
        }
        if (first_seed) write_run_plots(p2.best, records, spec.held_out_site, run_dir.string());
        first_seed = false;
    }
    return result;
}

std::vector<AblationRow> run_ablation(const AblationSpec& spec, const Checkpoint& p1,
                                      const std::vector<ManifestEntry>& manifest,
                                      const std::string& data_dir) {
    spec.model.validate();
    if (spec.horizon < 1) throw std::invalid_argument("ablation: horizon must be >= 1");
    if (p1.config != spec.model)
        throw std::invalid_argument("ablation: Phase-1 checkpoint does not match the model config");
    std::map<std::string, Sample> samples = sample_map(manifest, data_dir);
    SplitPlan plan = split_for(spec.held_out_site, manifest, spec.seed);
    std::vector<Sample> val_samples = pick(samples, plan.val_ids);
    std::vector<Sample> test_samples = pick(samples, plan.test_ids);

    struct Variant {
        const char* label;
        bool l1, edge;
    };
    const Variant variants[4] = {{"none", false, false}, {"+L1", true, false},
                                 {"+edge", false, true}, {"+L1+edge", true, true}};
    std::vector<AblationRow> rows;
    for (const auto& v : variants) {
        TrainConfig cfg = spec.train;
        cfg.term_glob = true;
        cfg.term_l1 = v.l1;
        cfg.term_edge = v.edge;
        TrainResult res = train_phase(spec.model, p1.params, samples, plan, Phase::P2, cfg, spec.seed,
                                      std::nullopt, spec.horizon, true);
        AblationRow row;
        row.subset = v.label;
        row.weights = res.calibration.weights;
        row.val = summarize(evaluate_checkpoint(spec.model, res.best.params, val_samples, "val"), "val");
        if (spec.echo_test)
            row.test =
                summarize(evaluate_checkpoint(spec.model, res.best.params, test_samples, "test"), "test");
        rows.push_back(std::move(row));
    }
    return rows;
}

namespace {

struct Agg {
    double mean = 0.0, std = 0.0;
    int n = 0;
};

Agg aggregate(const std::vector<double>& v) {
    Agg a;
    a.n = static_cast<int>(v.size());
    if (v.empty()) return a;
    a.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    if (v.size() >= 2) {
        double ss = 0.0;
        for (double x : v) ss += (x - a.mean) * (x - a.mean);
        a.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
    }
    return a;
}

std::string fmt_std(const Agg& a) {
    if (a.n < 2) return "n/a";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", a.std);
    return buf;
}

using Getter = double (*)(const MetricSummary&);
struct MetricCol {
    const char* name;
    Getter get;
    bool relative_delta;  // MAE metrics use relative % reduction
};
const MetricCol kCols[5] = {
    {"psnr", [](const MetricSummary& s) { return s.psnr; }, false},
    {"ms_ssim", [](const MetricSummary& s) { return s.ms_ssim; }, false},
    {"roi_mae", [](const MetricSummary& s) { return s.roi_mae; }, true},
    {"roi_ms_ssim", [](const MetricSummary& s) { return s.roi_ms_ssim; }, false},
    {"roi_edge_mae", [](const MetricSummary& s) { return s.roi_edge_mae; }, true},
};

}  // namespace

void emit_report(const std::vector<ProtocolResult>& protocols, const std::vector<AblationRow>& ablation,
                 const std::string& out_dir) {
    if (protocols.empty() && ablation.empty())
        throw std::invalid_argument("emit_report: nothing to report");
    fs::create_directories(out_dir);
    char buf[256];

    if (!protocols.empty()) {
        std::ofstream out(fs::path(out_dir) / "protocol_metrics.csv");
        if (!out) throw std::runtime_error("cannot write protocol_metrics.csv in " + out_dir);
        out << "protocol,phase,split,n_seeds";
        for (const auto& c : kCols) out << ',' << c.name << "_mean," << c.name << "_std";
        out << '\n';
        for (const auto& p : protocols) {
            for (const char* phase : {"P1", "P2"}) {
                for (const char* split : {"val", "test"}) {
                    out << p.name << ',' << phase << ',' << split << ',' << p.seeds.size();
                    for (const auto& c : kCols) {
                        std::vector<double> vals;
                        for (const auto& s : p.seeds) {
                            const MetricSummary& ms =
                                std::string(phase) == "P1"
                                    ? (std::string(split) == "val" ? s.p1_val : s.p1_test)
                                    : (std::string(split) == "val" ? s.p2_val : s.p2_test);
                            vals.push_back(c.get(ms));
                        }
                        Agg a = aggregate(vals);
                        std::snprintf(buf, sizeof(buf), ",%.6f,", a.mean);
                        out << buf << fmt_std(a);
                    }
                    out << '\n';
                }
            }
        }

        // aggregate deltas on the test split: relative % reduction for MAE
        // metrics, absolute P2-P1 otherwise
        std::ofstream dout(fs::path(out_dir) / "deltas.csv");
        dout << "protocol,metric,p1_mean,p2_mean,delta,convention\n";
        for (const auto& p : protocols) {
            for (const auto& c : kCols) {
                std::vector<double> v1, v2;
                for (const auto& s : p.seeds) {
                    v1.push_back(c.get(s.p1_test));
                    v2.push_back(c.get(s.p2_test));
                }
                const double m1 = aggregate(v1).mean, m2 = aggregate(v2).mean;
                double delta;
                const char* conv;
                if (c.relative_delta) {
                    delta = m1 != 0.0 ? 100.0 * (m1 - m2) / m1 : 0.0;
                    conv = "percent_reduction";
                } else {
                    delta = m2 - m1;
                    conv = "absolute";
                }
                std::snprintf(buf, sizeof(buf), "%s,%s,%.6f,%.6f,%.4f,%s\n", p.name.c_str(), c.name,
                              m1, m2, delta, conv);
                dout << buf;
            }
        }

        json probes = json::array();
        for (const auto& p : protocols)
            if (p.has_probes) probes.push_back(json::parse(probe_report_to_json(p.probes)));
        std::ofstream pj(fs::path(out_dir) / "probes.json");
        pj << probes.dump(2) << '\n';
    }

    if (!ablation.empty()) {
        std::ofstream out(fs::path(out_dir) / "ablation.csv");
        if (!out) throw std::runtime_error("cannot write ablation.csv in " + out_dir);
        out << "subset,lambda_glob,lambda_l1,lambda_edge,psnr,ms_ssim,roi_mae,roi_ms_ssim,roi_edge_mae\n";
        for (const auto& r : ablation) {
            std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%.6f,%.6f,%.6f,%.8f,%.6f,%.8f\n",
                          r.subset.c_str(), r.weights.glob, r.weights.l1, r.weights.edge, r.val.psnr,
                          r.val.ms_ssim, r.val.roi_mae, r.val.roi_ms_ssim, r.val.roi_edge_mae);
            out << buf;
        }
    }
}

// ---- raster plotting ----

RasterImage::RasterImage(int w, int h) : width(w), height(h) {
    if (w < 1 || h < 1) throw std::invalid_argument("raster: non-positive size");
    pix.assign(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), {255, 255, 255});
}

void RasterImage::fill(unsigned char r, unsigned char g, unsigned char b) {
    for (auto& p : pix) p = {r, g, b};
}

void RasterImage::set(int x, int y, unsigned char r, unsigned char g, unsigned char b) {
    if (x < 0 || y < 0 || x >= width || y >= height) return;
    pix[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)] = {
        r, g, b};
}

void RasterImage::vbar(int x0, int x1, int y0, int y1, unsigned char r, unsigned char g,
                       unsigned char b) {
    for (int y = std::max(0, y0); y <= std::min(height - 1, y1); ++y)
        for (int x = std::max(0, x0); x <= std::min(width - 1, x1); ++x) set(x, y, r, g, b);
}

void RasterImage::write_ppm(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open plot image for writing: " + path);
    out << "P6\n" << width << ' ' << height << "\n255\n";
    for (const auto& p : pix) out.write(reinterpret_cast<const char*>(p.data()), 3);
}

namespace {
const unsigned char kPalette[5][3] = {
    {31, 119, 180}, {255, 127, 14}, {44, 160, 44}, {214, 39, 40}, {148, 103, 189}};
}

void plot_histograms(const std::vector<std::pair<std::string, std::vector<double>>>& series,
                     const std::string& path, int bins) {
    if (series.empty() || bins < 2) throw std::invalid_argument("histogram: empty input");
    double lo = 0.0, hi = 1.0;
    bool any = false;
    for (const auto& [name, vals] : series)
        for (double v : vals) {
            if (!any) {
                lo = hi = v;
                any = true;
            }
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    if (!any) throw std::invalid_argument("histogram: no data points");
    if (hi <= lo) hi = lo + 1.0;

    const int ns = static_cast<int>(series.size());
    const int bar_w = 3, group_gap = 2;
    const int plot_h = 140, margin = 8;
    const int group_w = ns * bar_w + group_gap;
    RasterImage img(2 * margin + bins * group_w, plot_h + 2 * margin);
    std::vector<std::vector<int>> counts(static_cast<std::size_t>(ns),
                                         std::vector<int>(static_cast<std::size_t>(bins), 0));
    int max_count = 1;
    for (int s = 0; s < ns; ++s)
        for (double v : series[static_cast<std::size_t>(s)].second) {
            int b = static_cast<int>((v - lo) / (hi - lo) * bins);
            b = std::clamp(b, 0, bins - 1);
            int& c = counts[static_cast<std::size_t>(s)][static_cast<std::size_t>(b)];
            max_count = std::max(max_count, ++c);
        }
    for (int b = 0; b < bins; ++b)
        for (int s = 0; s < ns; ++s) {
            const int c = counts[static_cast<std::size_t>(s)][static_cast<std::size_t>(b)];
            if (c == 0) continue;
            const int h = std::max(1, c * plot_h / max_count);
            const int x0 = margin + b * group_w + s * bar_w;
            const auto& col = kPalette[s % 5];
            img.vbar(x0, x0 + bar_w - 1, margin + plot_h - h, margin + plot_h, col[0], col[1], col[2]);
        }
    img.write_ppm(path);
}

void plot_scatter(const std::vector<std::pair<std::string, std::vector<std::array<double, 2>>>>& series,
                  const std::string& path) {
    if (series.empty()) throw std::invalid_argument("scatter: empty input");
    double lox = 0, hix = 1, loy = 0, hiy = 1;
    bool any = false;
    for (const auto& [name, pts] : series)
        for (const auto& p : pts) {
            if (!any) {
                lox = hix = p[0];
                loy = hiy = p[1];
                any = true;
            }
            lox = std::min(lox, p[0]);
            hix = std::max(hix, p[0]);
            loy = std::min(loy, p[1]);
            hiy = std::max(hiy, p[1]);
        }
    if (!any) throw std::invalid_argument("scatter: no data points");
    if (hix <= lox) hix = lox + 1.0;
    if (hiy <= loy) hiy = loy + 1.0;

    const int size = 320, margin = 12;
    RasterImage img(size, size);
    for (std::size_t s = 0; s < series.size(); ++s) {
        const auto& col = kPalette[s % 5];
        for (const auto& p : series[s].second) {
            const int x = margin + static_cast<int>((p[0] - lox) / (hix - lox) * (size - 2 * margin));
            const int y =
                size - margin - static_cast<int>((p[1] - loy) / (hiy - loy) * (size - 2 * margin));
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) img.set(x + dx, y + dy, col[0], col[1], col[2]);
        }
    }
    img.write_ppm(path);
}

void write_image_strip(const std::vector<Tensor>& frames, const std::string& path) {
    if (frames.empty()) throw std::invalid_argument("image strip: no frames");
    const int h = frames.front().shape[2], w = frames.front().shape[3];
    const int gap = 2;
    RasterImage img(static_cast<int>(frames.size()) * (w + gap) - gap, h);
    img.fill(0, 0, 0);
    for (std::size_t f = 0; f < frames.size(); ++f) {
        const Tensor& t = frames[f];
        if (t.shape.size() != 4 || t.shape[2] != h || t.shape[3] != w)
            throw std::invalid_argument("image strip: inconsistent frame shapes");
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const double v = std::clamp(t.data[static_cast<std::size_t>(y * w + x)], 0.0, 1.0);
                const unsigned char g = static_cast<unsigned char>(std::lround(255.0 * v));
                img.set(static_cast<int>(f) * (w + gap) + x, y, g, g, g);
            }
    }
    img.write_ppm(path);
}

}  // namespace roicae
