#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "roicae/harness.hpp"

using namespace roicae;
namespace fs = std::filesystem;

namespace {

std::vector<ManifestEntry> fake_manifest(int per_site) {
    std::vector<ManifestEntry> out;
    for (const std::string& site : {"siteA", "siteB", "siteC"})
        for (int i = 0; i < per_site; ++i) {
            ManifestEntry e;
            e.id = site + "_" + std::to_string(i);
            e.site = site;
            e.path = e.id + ".pgm";
            e.roi = RoiBox{10, 10, 40, 40};
            e.width = 160;
            e.height = 112;
            out.push_back(e);
        }
    return out;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

MetricRecord rec(const std::string& id, const std::string& split, double psnr, double mae) {
    MetricRecord r;
    r.id = id;
    r.site = "siteA";
    r.split = split;
    r.psnr = psnr;
    r.ms_ssim = 0.9;
    r.roi_mae = mae;
    r.roi_ms_ssim = 0.8;
    r.roi_edge_mae = mae * 2.0;
    return r;
}

}  // namespace

TEST_CASE("dev split: 15% test, 15% of the rest val, reproducible") {
    auto manifest = fake_manifest(40);  // 120 total
    SplitPlan plan = make_dev_split(manifest, 5);
    CHECK(plan.held_out_site.empty());
    CHECK(plan.test_ids.size() == 18);  // 15% of 120
    CHECK(plan.val_ids.size() == 15);   // 15% of 102
    CHECK(plan.train_ids.size() == 87);
    std::set<std::string> all;
    for (const auto& v : {plan.train_ids, plan.val_ids, plan.test_ids})
        for (const auto& id : v) CHECK(all.insert(id).second);
    CHECK(all.size() == 120);
    // every site appears in test (random, but 18 draws over 3 sites)
    std::set<std::string> test_sites;
    for (const auto& id : plan.test_ids) test_sites.insert(id.substr(0, 5));
    CHECK(test_sites.size() == 3);

    SplitPlan again = make_dev_split(manifest, 5);
    CHECK(again.test_ids == plan.test_ids);
    CHECK(again.val_ids == plan.val_ids);
    assert_split_hygiene(plan);
}

TEST_CASE("split hygiene detects leaks") {
    SplitPlan plan;
    plan.train_ids = {"a", "b"};
    plan.val_ids = {"c"};
    plan.test_ids = {"d"};
    assert_split_hygiene(plan);  // fine
    plan.val_ids.push_back("d");
    CHECK_THROWS(assert_split_hygiene(plan));
    plan.val_ids = {"c"};
    plan.train_ids.push_back("c");
    CHECK_THROWS(assert_split_hygiene(plan));
}

TEST_CASE("metrics csv: exact header and round-trip") {
    std::vector<MetricRecord> rows{rec("x1", "val", 25.0, 0.01), rec("x2", "test", 30.5, 0.005)};
    fs::path p = fs::temp_directory_path() / "roicae_test_metrics.csv";
    write_metrics_csv(rows, p.string());
    std::ifstream f(p);
    std::string header;
    std::getline(f, header);
    CHECK(header == "id,site,split,psnr,ms_ssim,roi_mae,roi_ms_ssim,roi_edge_mae");
    auto back = read_metrics_csv(p.string());
    REQUIRE(back.size() == 2);
    CHECK(back[0].id == "x1");
    CHECK(back[1].split == "test");
    CHECK(back[1].psnr == doctest::Approx(30.5));
    CHECK(back[0].roi_edge_mae == doctest::Approx(0.02));
    fs::remove(p);

    // header mismatch is rejected
    {
        std::ofstream bad(p);
        bad << "id,psnr\nx,1\n";
    }
    CHECK_THROWS(read_metrics_csv(p.string()));
    fs::remove(p);
}

TEST_CASE("summarize averages one split and ignores the other") {
    std::vector<MetricRecord> rows{rec("a", "val", 20.0, 0.02), rec("b", "val", 30.0, 0.04),
                                   rec("c", "test", 99.0, 0.5)};
    MetricSummary s = summarize(rows, "val");
    CHECK(s.psnr == doctest::Approx(25.0));
    CHECK(s.roi_mae == doctest::Approx(0.03));
    CHECK_THROWS(summarize(rows, "nope"));
}

TEST_CASE("emit_report: delta conventions and n/a std for single seeds") {
    ProtocolResult p;
    p.name = "holdout-siteC";
    p.held_out_site = "siteC";
    SeedRun run;
    run.seed = 1000;
    run.p1_test = MetricSummary{25.0, 0.90, 0.010, 0.80, 0.020};
    run.p2_test = MetricSummary{25.3, 0.91, 0.009, 0.82, 0.015};
    run.p1_val = run.p1_test;
    run.p2_val = run.p2_test;
    p.seeds = {run};

    fs::path out = fs::temp_directory_path() / "roicae_test_report";
    fs::remove_all(out);
    emit_report({p}, {}, out.string());

    const std::string metrics = slurp(out / "protocol_metrics.csv");
    CHECK(metrics.find("protocol,phase,split,n_seeds") == 0);
    CHECK(metrics.find("n/a") != std::string::npos);  // std undefined for 1 seed

    const std::string deltas = slurp(out / "deltas.csv");
    // roi_mae 0.010 -> 0.009 is a 10% reduction (relative convention)
    CHECK(deltas.find("holdout-siteC,roi_mae,0.010000,0.009000,10.0000,percent_reduction") !=
          std::string::npos);
    // psnr is absolute: +0.30
    CHECK(deltas.find("holdout-siteC,psnr,25.000000,25.300000,0.3000,absolute") != std::string::npos);
    fs::remove_all(out);

    CHECK_THROWS(emit_report({}, {}, out.string()));
}

TEST_CASE("emit_report: two seeds produce a real std and an ablation table") {
    ProtocolResult p;
    p.name = "dev";
    SeedRun r1, r2;
    r1.seed = 1000;
    r2.seed = 1001;
    r1.p1_test = r1.p1_val = MetricSummary{20.0, 0.9, 0.01, 0.8, 0.02};
    r1.p2_test = r1.p2_val = MetricSummary{22.0, 0.9, 0.01, 0.8, 0.02};
    r2.p1_test = r2.p1_val = MetricSummary{24.0, 0.9, 0.01, 0.8, 0.02};
    r2.p2_test = r2.p2_val = MetricSummary{26.0, 0.9, 0.01, 0.8, 0.02};
    p.seeds = {r1, r2};

    AblationRow row;
    row.subset = "+L1+edge";
    row.weights = LossWeights{0.5, 0.3, 0.2};
    row.val = MetricSummary{21.0, 0.9, 0.01, 0.8, 0.02};

    fs::path out = fs::temp_directory_path() / "roicae_test_report2";
    fs::remove_all(out);
    emit_report({p}, {row}, out.string());

    const std::string metrics = slurp(out / "protocol_metrics.csv");
    // psnr P1 test: mean 22, sample std sqrt(8) = 2.828427
    CHECK(metrics.find("22.000000,2.828427") != std::string::npos);
    const std::string abl = slurp(out / "ablation.csv");
    CHECK(abl.find("+L1+edge") != std::string::npos);
    CHECK(abl.find("0.5") != std::string::npos);
    fs::remove_all(out);
}

TEST_CASE("default presets cover each site plus the dev split") {
    CaeConfig model;
    TrainConfig train;
    auto presets = default_presets(model, train);
    REQUIRE(presets.size() == 4);
    std::set<std::string> held;
    int dev_count = 0;
    for (const auto& p : presets) {
        if (p.held_out_site.empty()) {
            ++dev_count;
            CHECK_FALSE(p.run_probes);  // no OOD positives without a held-out site
        } else {
            held.insert(p.held_out_site);
            CHECK(p.run_probes);
        }
        CHECK(!p.seeds.empty());
    }
    CHECK(dev_count == 1);
    CHECK(held.size() == 3);
}

TEST_CASE("raster plots: files exist and are valid ppm") {
    fs::path dir = fs::temp_directory_path() / "roicae_test_plots";
    fs::remove_all(dir);
    fs::create_directories(dir);

    plot_histograms({{"a", {0.1, 0.2, 0.2, 0.3}}, {"b", {0.7, 0.8, 0.9}}},
                    (dir / "hist.ppm").string());
    plot_scatter({{"a", {{0.0, 0.0}, {1.0, 1.0}}}, {"b", {{-1.0, 2.0}}}},
                 (dir / "scatter.ppm").string());
    Tensor f1 = Tensor::full({1, 1, 8, 8}, 0.2);
    Tensor f2 = Tensor::full({1, 1, 8, 8}, 0.8);
    write_image_strip({f1, f2}, (dir / "strip.ppm").string());

    for (const char* name : {"hist.ppm", "scatter.ppm", "strip.ppm"}) {
        const fs::path p = dir / name;
        REQUIRE(fs::exists(p));
        CHECK(fs::file_size(p) > 16);
        std::ifstream f(p, std::ios::binary);
        std::string magic(2, '\0');
        f.read(magic.data(), 2);
        CHECK(magic == "P6");
    }
    // strip geometry: two 8x8 frames with a 2 px gap
    std::ifstream f(dir / "strip.ppm", std::ios::binary);
    std::string magic, w, h;
    f >> magic >> w >> h;
    CHECK(w == "18");
    CHECK(h == "8");
    fs::remove_all(dir);
}
