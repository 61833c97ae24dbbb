// Command-line front end: dataset generation, two-phase training, weight
// calibration, ablations, probes and report emission.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "roicae/harness.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace roicae;

namespace {

std::pair<int, int> parse_canvas(const std::string& s) {
    const std::size_t x = s.find('x');
    if (x == std::string::npos) throw CLI::ValidationError("--canvas", "expected WxH, e.g. 160x112");
    return {std::stoi(s.substr(0, x)), std::stoi(s.substr(x + 1))};
}

TrainConfig load_train_config(const std::string& path) {
    if (path.empty()) return TrainConfig{};
    return train_config_from_json_file(path);
}

SplitPlan cli_split(const std::string& hold_out, const std::vector<ManifestEntry>& manifest,
                    std::uint64_t seed) {
    SplitPlan plan =
        hold_out.empty() ? make_dev_split(manifest, seed) : make_split(manifest, hold_out, seed);
    assert_split_hygiene(plan);
    return plan;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ROI-aware two-phase autoencoder toolkit"};
    app.require_subcommand(1);

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "Generate the synthetic multi-site phantom dataset");
    int sites = 3, per_site = 120;
    std::string canvas = "160x112", out_dir = "data";
    std::uint64_t seed = 1000;
    gen->add_option("--sites", sites, "Number of sites (2 or 3)")->check(CLI::Range(2, 3));
    gen->add_option("--per-site", per_site, "Samples per site")->check(CLI::PositiveNumber);
    gen->add_option("--canvas", canvas, "Canvas size WxH (multiples of 16)");
    gen->add_option("--seed", seed, "Root seed");
    gen->add_option("--out", out_dir, "Output directory");

    // train
    auto* train = app.add_subcommand("train", "Train one phase on a leave-one-site-out split");
    std::string manifest_path, hold_out, phase_str = "P1", config_path, from_ckpt, run_out = "run";
    train->add_option("--manifest", manifest_path, "manifest.jsonl path")->required();
    train->add_option("--hold-out", hold_out, "Held-out site id (empty = dev split)");
    train->add_option("--phase", phase_str, "P1 or P2")->check(CLI::IsMember({"P1", "P2"}));
    train->add_option("--seed", seed, "Seed");
    train->add_option("--config", config_path, "JSON training config");
    train->add_option("--from-checkpoint", from_ckpt, "Phase-1 checkpoint (required for P2)");
    train->add_option("--out", run_out, "Run output directory");

    // calibrate
    auto* cal = app.add_subcommand("calibrate", "Report gradient-calibrated Phase-2 loss weights");
    std::string ckpt_path;
    cal->add_option("--checkpoint", ckpt_path, "Phase-1 checkpoint")->required();
    cal->add_option("--manifest", manifest_path, "manifest.jsonl path")->required();
    cal->add_option("--hold-out", hold_out, "Held-out site id (empty = dev split)");
    cal->add_option("--seed", seed, "Seed (selects the calibration batch)");
    cal->add_option("--config", config_path, "JSON training config");

    // ablate
    auto* abl = app.add_subcommand("ablate", "Fixed-horizon Phase-2 loss-term ablation");
    int horizon = 15;
    bool echo_test = false;
    abl->add_option("--manifest", manifest_path, "manifest.jsonl path")->required();
    abl->add_option("--hold-out", hold_out, "Held-out site id")->required();
    abl->add_option("--horizon", horizon, "Epoch horizon")->check(CLI::PositiveNumber);
    abl->add_option("--from-checkpoint", from_ckpt, "Shared Phase-1 checkpoint")->required();
    abl->add_option("--seed", seed, "Seed");
    abl->add_option("--config", config_path, "JSON training config");
    abl->add_option("--out", run_out, "Output directory");
    abl->add_flag("--echo-test", echo_test, "Also report test-split metrics (report-only)");

    // probe
    auto* probe = app.add_subcommand("probe", "Frozen-latent probe battery");
    probe->add_option("--checkpoint", ckpt_path, "Phase-2 checkpoint")->required();
    probe->add_option("--manifest", manifest_path, "manifest.jsonl path")->required();
    probe->add_option("--hold-out", hold_out, "Held-out site id")->required();
    probe->add_option("--seed", seed, "Seed (split + probe init)");
    probe->add_option("--out", run_out, "Output directory");

    // report
    auto* rep = app.add_subcommand("report", "Aggregate run directories into report tables");
    std::string runs_dir;
    rep->add_option("--runs-dir", runs_dir, "Directory of protocol runs")->required();
    rep->add_option("--out", run_out, "Report output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            auto [cw, ch] = parse_canvas(canvas);
            std::vector<SiteProfile> profiles = default_profiles();
            profiles.resize(static_cast<std::size_t>(sites));
            fs::create_directories(out_dir);
            std::vector<ManifestEntry> entries =
                generate_dataset(per_site, profiles, cw, ch, seed, out_dir);
            std::cout << "wrote " << entries.size() << " samples to " << out_dir << "\n";
        } else if (train->parsed()) {
            TrainConfig cfg = load_train_config(config_path);
            std::vector<ManifestEntry> manifest = load_manifest(manifest_path);
            const std::string data_dir = fs::path(manifest_path).parent_path().string();
            SplitPlan plan = cli_split(hold_out, manifest, seed);
            std::map<std::string, Sample> samples;
            for (const auto& e : manifest) samples.emplace(e.id, load_sample(e, data_dir));

            const Phase phase = phase_str == "P1" ? Phase::P1 : Phase::P2;
            CaeConfig model;
            ParamMap start;
            if (phase == Phase::P2) {
                if (from_ckpt.empty())
                    throw std::runtime_error("P2 training requires --from-checkpoint (a P1 checkpoint)");
                Checkpoint p1 = load_checkpoint(from_ckpt);
                model = p1.config;
                start = p1.params;
            } else {
                Rng rng = Rng(seed).sub(0x171u);
                start = init_cae_params(model, rng);
            }
            TrainResult res = train_phase(model, start, samples, plan, phase, cfg, seed);
            fs::create_directories(run_out);
            const std::string tag = phase == Phase::P1 ? "p1" : "p2";
            save_checkpoint(res.best, (fs::path(run_out) / (tag + ".ckpt")).string());
            write_trace_csv(res.trace, (fs::path(run_out) / ("trace_" + tag + ".csv")).string());
            std::vector<Sample> val, test;
            for (const auto& id : plan.val_ids) val.push_back(samples.at(id));
            for (const auto& id : plan.test_ids) test.push_back(samples.at(id));
            std::vector<MetricRecord> recs = evaluate_checkpoint(model, res.best.params, val, "val");
            std::vector<MetricRecord> t = evaluate_checkpoint(model, res.best.params, test, "test");
            recs.insert(recs.end(), t.begin(), t.end());
            write_metrics_csv(recs, (fs::path(run_out) / ("metrics_" + tag + ".csv")).string());
            std::cout << "best epoch " << res.best.epoch << ", " << res.trace.size()
                      << " epochs run; artifacts in " << run_out << "\n";
        } else if (cal->parsed()) {
            TrainConfig cfg = load_train_config(config_path);
            Checkpoint p1 = load_checkpoint(ckpt_path);
            std::vector<ManifestEntry> manifest = load_manifest(manifest_path);
            const std::string data_dir = fs::path(manifest_path).parent_path().string();
            SplitPlan plan = cli_split(hold_out, manifest, seed);
            std::vector<Sample> calib;
            for (std::size_t i = 0; i < plan.val_ids.size() &&
                                    i < static_cast<std::size_t>(cfg.batch_size); ++i) {
                for (const auto& e : manifest)
                    if (e.id == plan.val_ids[i]) calib.push_back(load_sample(e, data_dir));
            }
            CalibrationReport rep2 = calibrate_weights(p1.config, p1.params, calib, cfg);
            json j{{"g_glob", rep2.g_glob},
                   {"g_l1", rep2.g_l1},
                   {"g_edge", rep2.g_edge},
                   {"lambda_glob", rep2.weights.glob},
                   {"lambda_l1", rep2.weights.l1},
                   {"lambda_edge", rep2.weights.edge}};
            std::cout << j.dump(2) << "\n";
        } else if (abl->parsed()) {
            AblationSpec spec;
            spec.held_out_site = hold_out;
            spec.seed = seed;
            spec.horizon = horizon;
            spec.echo_test = echo_test;
            spec.train = load_train_config(config_path);
            Checkpoint p1 = load_checkpoint(from_ckpt);
            spec.model = p1.config;
            std::vector<ManifestEntry> manifest = load_manifest(manifest_path);
            const std::string data_dir = fs::path(manifest_path).parent_path().string();
            std::vector<AblationRow> rows = run_ablation(spec, p1, manifest, data_dir);
            fs::create_directories(run_out);
            emit_report({}, rows, run_out);
            std::cout << "ablation table in " << run_out << "/ablation.csv\n";
        } else if (probe->parsed()) {
            Checkpoint ckpt = load_checkpoint(ckpt_path);
            std::vector<ManifestEntry> manifest = load_manifest(manifest_path);
            const std::string data_dir = fs::path(manifest_path).parent_path().string();
            SplitPlan plan = cli_split(hold_out, manifest, seed);
            std::map<std::string, Sample> samples;
            for (const auto& e : manifest) samples.emplace(e.id, load_sample(e, data_dir));
            std::vector<LatentRecord> records;
            auto add = [&](const std::vector<std::string>& ids, const char* tag) {
                std::vector<Sample> batch;
                for (const auto& id : ids) batch.push_back(samples.at(id));
                std::vector<LatentRecord> r = extract_latents(ckpt, batch, tag);
                records.insert(records.end(), r.begin(), r.end());
            };
            add(plan.train_ids, "train");
            add(plan.val_ids, "val");
            add(plan.test_ids, "test");
            fs::create_directories(run_out);
            write_latents_csv(records, (fs::path(run_out) / "latents.csv").string());
            ProbeReport battery = run_probe_battery(records, hold_out, seed);
            std::ofstream pj(fs::path(run_out) / "probe_report.json");
            pj << probe_report_to_json(battery) << '\n';
            write_probe_report_csv(battery, (fs::path(run_out) / "probe_report.csv").string());
            std::cout << probe_report_to_json(battery) << "\n";
        } else if (rep->parsed()) {
            std::vector<ProtocolResult> results = load_protocol_results(runs_dir);
            emit_report(results, {}, run_out);
            std::cout << "report tables in " << run_out << "\n";
        }
    } catch (const std::exception& e) {
        json err{{"error", e.what()}};
        std::cerr << err.dump() << "\n";
        return 1;
    }
    return 0;
}
