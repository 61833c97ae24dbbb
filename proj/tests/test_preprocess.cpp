#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "roicae/preprocess.hpp"
#include "roicae/rng.hpp"

using namespace roicae;

namespace {

RawImage random_image(int w, int h, Rng& rng) {
    RawImage img(w, h);
    for (double& v : img.pix) v = rng.uniform();
    return img;
}

}  // namespace

TEST_CASE("letterbox of a canvas-sized image is the identity") {
    Rng rng(1);
    RawImage img = random_image(160, 112, rng);
    auto [canvas, t] = letterbox(img, 160, 112);
    CHECK(t.scale == doctest::Approx(1.0));
    CHECK(t.dx == doctest::Approx(0.0));
    CHECK(t.dy == doctest::Approx(0.0));
    double max_diff = 0.0;
    for (std::size_t i = 0; i < img.pix.size(); ++i)
        max_diff = std::max(max_diff, std::abs(img.pix[i] - canvas.pix[i]));
    CHECK(max_diff < 1e-12);
}

TEST_CASE("letterbox 100x100 into 160x112: s=1.12, centered horizontally") {
    Rng rng(2);
    RawImage img = random_image(100, 100, rng);
    auto [canvas, t] = letterbox(img, 160, 112);
    CHECK(t.scale == doctest::Approx(1.12));
    CHECK(t.dx == doctest::Approx(24.0));
    CHECK(t.dy == doctest::Approx(0.0));
    CHECK(canvas.width == 160);
    CHECK(canvas.height == 112);
    // padding columns are zero (black)
    for (int y = 0; y < 112; ++y) {
        CHECK(canvas.at(y, 0) == 0.0);
        CHECK(canvas.at(y, 159) == 0.0);
    }
}

TEST_CASE("letterbox rejects degenerate inputs and bad canvases") {
    Rng rng(3);
    RawImage tiny = random_image(4, 20, rng);
    CHECK_THROWS(letterbox(tiny, 160, 112));
    RawImage ok = random_image(50, 40, rng);
    CHECK_THROWS(letterbox(ok, 150, 112));  // not divisible by 16
    CHECK_THROWS(letterbox(ok, 0, 112));
}

TEST_CASE("remap_roi affine examples") {
    LetterboxTransform ident{1.0, 0.0, 0.0, 160, 112};
    RoiBox b{10, 10, 20, 20};
    RoiBox r = remap_roi(b, ident);
    CHECK(r.x1 == doctest::Approx(10.0));
    CHECK(r.y2 == doctest::Approx(20.0));

    LetterboxTransform doubled{2.0, 0.0, 0.0, 160, 112};
    r = remap_roi(b, doubled);
    CHECK(r.x1 == doctest::Approx(20.0));
    CHECK(r.x2 == doctest::Approx(40.0));
    CHECK(r.y1 == doctest::Approx(20.0));

    LetterboxTransform shifted{1.0, 24.0, 0.0, 160, 112};
    r = remap_roi(b, shifted);
    CHECK(r.x1 == doctest::Approx(34.0));
    CHECK(r.x2 == doctest::Approx(44.0));
    CHECK(r.y1 == doctest::Approx(10.0));
}

TEST_CASE("validate_roi follows the 2 px rule") {
    CHECK(validate_roi(RoiBox{0, 0, 160, 112}, 160, 112));
    CHECK_FALSE(validate_roi(RoiBox{-30, 10, -5, 20}, 160, 112));  // fully left of canvas
    CHECK_FALSE(validate_roi(RoiBox{10, 10, 11.5, 30}, 160, 112)); // width 1.5 px
    CHECK(validate_roi(RoiBox{10, 10, 12.5, 30}, 160, 112));
    CHECK_FALSE(validate_roi(RoiBox{10, 110.5, 30, 120}, 160, 112));  // <2 px after clipping
}

TEST_CASE("round-trip: 500 random triples within 0.51 px") {
    Rng rng(1234);
    const int canvases[3][2] = {{160, 112}, {128, 96}, {192, 128}};
    int checked = 0;
    for (int trial = 0; trial < 500; ++trial) {
        const int w = 60 + static_cast<int>(rng.uniform_int(400));
        const int h = 60 + static_cast<int>(rng.uniform_int(300));
        const auto& cv = canvases[rng.uniform_int(3)];
        RawImage img(w, h);  // content irrelevant for the transform
        auto [canvas, t] = letterbox(img, cv[0], cv[1]);

        const double x1 = rng.uniform(0.0, w - 3.0);
        const double y1 = rng.uniform(0.0, h - 3.0);
        RoiBox box{x1, y1, x1 + rng.uniform(2.0, w - x1), y1 + rng.uniform(2.0, h - y1)};
        RoiBox mapped = remap_roi(box, t);
        // only boxes that stayed fully inside the canvas are invertible
        if (mapped.x1 <= 0.0 || mapped.y1 <= 0.0 || mapped.x2 >= cv[0] || mapped.y2 >= cv[1]) continue;
        const double ix1 = (mapped.x1 - t.dx) / t.scale;
        const double iy1 = (mapped.y1 - t.dy) / t.scale;
        const double ix2 = (mapped.x2 - t.dx) / t.scale;
        const double iy2 = (mapped.y2 - t.dy) / t.scale;
        CHECK(std::abs(ix1 - box.x1) <= 0.51);
        CHECK(std::abs(iy1 - box.y1) <= 0.51);
        CHECK(std::abs(ix2 - box.x2) <= 0.51);
        CHECK(std::abs(iy2 - box.y2) <= 0.51);
        ++checked;
    }
    CHECK(checked > 300);  // the filter must not eat the test
}

TEST_CASE("aspect preservation within 1%") {
    Rng rng(99);
    for (int trial = 0; trial < 50; ++trial) {
        const int w = 80 + static_cast<int>(rng.uniform_int(300));
        const int h = 80 + static_cast<int>(rng.uniform_int(300));
        RawImage img(w, h);
        auto [canvas, t] = letterbox(img, 160, 112);
        const double content_w = t.scale * w;
        const double content_h = t.scale * h;
        CHECK(content_w / content_h == doctest::Approx(static_cast<double>(w) / h).epsilon(0.01));
        CHECK(content_w <= 160.0 + 1e-9);
        CHECK(content_h <= 112.0 + 1e-9);
    }
}
