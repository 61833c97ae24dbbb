#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "roicae/datasynth.hpp"
#include "roicae/losses.hpp"

using namespace roicae;
namespace fs = std::filesystem;

namespace {

std::string read_all(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

std::string dir_fingerprint(const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::string out;
    for (const auto& f : files) {
        out += f.filename().string();
        out += '\0';
        out += read_all(f);
        out += '\0';
    }
    return out;
}

fs::path fresh_dir(const std::string& tag) {
    fs::path p = fs::temp_directory_path() / ("roicae_test_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

double mean_pix(const RawImage& img) {
    double s = 0.0;
    for (double v : img.pix) s += v;
    return s / static_cast<double>(img.pix.size());
}

}  // namespace

TEST_CASE("generate_dataset: counts, valid ROIs, byte-identical regeneration") {
    auto profiles = default_profiles();
    REQUIRE(profiles.size() == 3);
    fs::path d1 = fresh_dir("gen1");
    auto manifest = generate_dataset(20, profiles, 160, 112, 77, d1.string());
    CHECK(manifest.size() == 60);

    std::set<std::string> ids;
    int per_site[3] = {0, 0, 0};
    for (const auto& e : manifest) {
        ids.insert(e.id);
        for (std::size_t s = 0; s < 3; ++s)
            if (e.site == profiles[s].id) ++per_site[s];
        CHECK(validate_roi(e.roi, 160, 112));
        CHECK(e.width == 160);
        CHECK(e.height == 112);
        CHECK(e.degradation >= 0.0);
    }
    CHECK(ids.size() == 60);  // unique ids
    for (int c : per_site) CHECK(c == 20);

    fs::path d2 = fresh_dir("gen2");
    generate_dataset(20, profiles, 160, 112, 77, d2.string());
    CHECK(dir_fingerprint(d1) == dir_fingerprint(d2));

    fs::path d3 = fresh_dir("gen3");
    generate_dataset(20, profiles, 160, 112, 78, d3.string());
    CHECK(dir_fingerprint(d1) != dir_fingerprint(d3));

    // manifest loads back and samples are canvas-shaped in [0,1]
    auto loaded = load_manifest((d1 / "manifest.jsonl").string());
    REQUIRE(loaded.size() == 60);
    Sample s = load_sample(loaded[0], d1.string());
    CHECK(s.image.shape == std::vector<int>{1, 1, 112, 160});
    for (double v : s.image.data) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
    fs::remove_all(d1);
    fs::remove_all(d2);
    fs::remove_all(d3);
}

TEST_CASE("generate_dataset rejects tiny sites") {
    CHECK_THROWS(generate_dataset(10, default_profiles(), 160, 112, 1, fresh_dir("small").string()));
}

TEST_CASE("phantom params respect membrane contrast and band thickness") {
    Rng rng(5);
    for (int i = 0; i < 50; ++i) {
        PhantomParams p = sample_phantom_params(rng, 320, 200);
        p.validate();
        CHECK(p.membrane_intensity >= p.band_interior + 0.2);
        CHECK(p.band_thickness >= 3.0);
    }
    PhantomParams bad;
    bad.membrane_intensity = bad.band_interior + 0.1;
    CHECK_THROWS(bad.validate());
}

TEST_CASE("rendered phantom: ROI bounds the band, membranes brighter than interior") {
    Rng rng(6);
    PhantomParams p = sample_phantom_params(rng, 320, 200);
    auto [img, roi] = render_phantom(p, rng);
    CHECK(img.width == 320);
    CHECK(img.height == 200);
    CHECK(roi.x2 > roi.x1 + 2.0);
    CHECK(roi.y2 > roi.y1 + 2.0);
    // band center lies inside the ROI
    CHECK(p.band_cx > roi.x1);
    CHECK(p.band_cx < roi.x2);
    CHECK(p.band_cy > roi.y1);
    CHECK(p.band_cy < roi.y2);
    // sample at band center: interior is dark relative to the membranes
    const int cy = static_cast<int>(p.band_cy), cx = static_cast<int>(p.band_cx);
    CHECK(img.at(cy, cx) < p.band_interior + 0.1);
}

TEST_CASE("apply_site_style: neutral profile is the identity") {
    Rng rng(7);
    RawImage img(40, 30);
    for (double& v : img.pix) v = rng.uniform(0.05, 0.95);
    SiteProfile neutral;
    neutral.id = "neutral";
    neutral.speckle_sigma = 0.0;
    Rng styled_rng(1);
    RawImage out = apply_site_style(img, neutral, styled_rng);
    for (std::size_t i = 0; i < img.pix.size(); ++i)
        CHECK(out.pix[i] == doctest::Approx(img.pix[i]).epsilon(1e-12));
}

TEST_CASE("apply_site_style: gamma and gain act pointwise") {
    RawImage img(8, 8);
    for (double& v : img.pix) v = 0.25;
    SiteProfile p;
    p.id = "g";
    p.gamma = 0.5;
    p.speckle_sigma = 0.0;
    Rng r(2);
    RawImage out = apply_site_style(img, p, r);
    CHECK(out.pix[0] == doctest::Approx(0.5).epsilon(1e-12));  // 0.25^0.5

    p.gamma = 1.0;
    p.gain = 2.0;
    Rng r2(2);
    RawImage out2 = apply_site_style(img, p, r2);
    CHECK(out2.pix[0] == doctest::Approx(0.5).epsilon(1e-12));  // clip(2 * 0.25)
}

TEST_CASE("apply_site_style: speckle is mean-preserving to ~2%") {
    RawImage img(64, 64);
    for (double& v : img.pix) v = 0.4;
    SiteProfile p;
    p.id = "s";
    p.speckle_sigma = 0.15;
    double acc = 0.0;
    for (int trial = 0; trial < 30; ++trial) {
        Rng r(static_cast<std::uint64_t>(trial) + 1);
        acc += mean_pix(apply_site_style(img, p, r));
    }
    CHECK(acc / 30.0 == doctest::Approx(0.4).epsilon(0.02));
    // degradation 0 turns the speckle off entirely
    Rng r(9);
    RawImage clean = apply_site_style(img, p, r, 0.0);
    for (double v : clean.pix) CHECK(v == doctest::Approx(0.4).epsilon(1e-12));
}

TEST_CASE("pgm round-trip is exact at 8-bit resolution") {
    Rng rng(8);
    RawImage img(33, 21);
    for (double& v : img.pix) v = rng.uniform();
    fs::path p = fs::temp_directory_path() / "roicae_test_rt.pgm";
    write_pgm(img, p.string());
    RawImage back = read_pgm(p.string());
    REQUIRE(back.width == 33);
    REQUIRE(back.height == 21);
    for (std::size_t i = 0; i < img.pix.size(); ++i) {
        const double q = std::round(img.pix[i] * 255.0) / 255.0;
        CHECK(back.pix[i] == doctest::Approx(q).epsilon(1e-12));
    }
    fs::remove(p);
}

TEST_CASE("make_split: leave-one-site-out with 15% validation") {
    fs::path d = fresh_dir("split");
    auto profiles = default_profiles();
    auto manifest = generate_dataset(40, profiles, 160, 112, 3, d.string());
    SplitPlan plan = make_split(manifest, profiles[2].id, 1000);
    CHECK(plan.test_ids.size() == 40);
    CHECK(plan.val_ids.size() == 12);   // 15% of 80
    CHECK(plan.train_ids.size() == 68);

    std::set<std::string> all;
    for (const auto& v : {plan.train_ids, plan.val_ids, plan.test_ids})
        for (const auto& id : v) CHECK(all.insert(id).second);  // disjoint
    CHECK(all.size() == manifest.size());                       // exhaustive

    // held-out site only ever appears in test
    std::set<std::string> heldout_ids;
    for (const auto& e : manifest)
        if (e.site == profiles[2].id) heldout_ids.insert(e.id);
    for (const auto& id : plan.test_ids) CHECK(heldout_ids.count(id) == 1);

    // same seed reproduces, different seed reshuffles train/val
    SplitPlan again = make_split(manifest, profiles[2].id, 1000);
    CHECK(again.train_ids == plan.train_ids);
    CHECK(again.val_ids == plan.val_ids);
    SplitPlan other = make_split(manifest, profiles[2].id, 1001);
    CHECK(other.val_ids != plan.val_ids);

    CHECK_THROWS(make_split(manifest, "no-such-site", 1));
    fs::remove_all(d);
}

TEST_CASE("site shift is detectable from raw pixel means (near pair vs far site)") {
    fs::path d = fresh_dir("shift");
    auto profiles = default_profiles();
    auto manifest = generate_dataset(25, profiles, 160, 112, 12, d.string());
    auto samples = load_samples(manifest, d.string());
    std::vector<double> mean_a, mean_c;
    for (const auto& s : samples) {
        double m = 0.0;
        for (double v : s.image.data) m += v;
        m /= static_cast<double>(s.image.data.size());
        if (s.site == profiles[0].id) mean_a.push_back(m);
        if (s.site == profiles[2].id) mean_c.push_back(m);
    }
    const double separability = auroc(mean_a, mean_c);
    CHECK(std::max(separability, 1.0 - separability) > 0.8);
    fs::remove_all(d);
}
