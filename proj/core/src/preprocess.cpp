#include "roicae/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace roicae {

namespace {
double bilinear_sample(const RawImage& img, double rx, double ry) {
    // half-pixel centers; edge clamp
    const int W = img.width, H = img.height;
    double fx = std::clamp(rx, 0.0, static_cast<double>(W - 1));
    double fy = std::clamp(ry, 0.0, static_cast<double>(H - 1));
    const int x0 = std::min(static_cast<int>(std::floor(fx)), W - 1);
    const int y0 = std::min(static_cast<int>(std::floor(fy)), H - 1);
    const int x1 = std::min(x0 + 1, W - 1);
    const int y1 = std::min(y0 + 1, H - 1);
    const double ax = fx - x0;
    const double ay = fy - y0;
    return (1.0 - ay) * ((1.0 - ax) * img.at(y0, x0) + ax * img.at(y0, x1)) +
           ay * ((1.0 - ax) * img.at(y1, x0) + ax * img.at(y1, x1));
}
}  // namespace

std::pair<RawImage, LetterboxTransform> letterbox(const RawImage& img, int canvas_w, int canvas_h) {
    if (img.width < 8 || img.height < 8)
        throw std::invalid_argument("letterbox: degenerate input dimensions " +
                                    std::to_string(img.width) + "x" + std::to_string(img.height));
    if (canvas_w < 16 || canvas_h < 16 || canvas_w % 16 != 0 || canvas_h % 16 != 0)
        throw std::invalid_argument("letterbox: canvas must be >=16x16 and divisible by 16, got " +
                                    std::to_string(canvas_w) + "x" + std::to_string(canvas_h));

    LetterboxTransform t;
    t.canvas_w = canvas_w;
    t.canvas_h = canvas_h;
    t.scale = std::min(static_cast<double>(canvas_w) / img.width, static_cast<double>(canvas_h) / img.height);
    t.dx = (canvas_w - t.scale * img.width) / 2.0;
    t.dy = (canvas_h - t.scale * img.height) / 2.0;

    RawImage out(canvas_w, canvas_h);
    for (int cy = 0; cy < canvas_h; ++cy)
        for (int cx = 0; cx < canvas_w; ++cx) {
            const double ux = cx + 0.5 - t.dx;  // position within the content strip
            const double uy = cy + 0.5 - t.dy;
            if (ux < 0.0 || ux > t.scale * img.width || uy < 0.0 || uy > t.scale * img.height)
                continue;  // zero padding
            out.at(cy, cx) = bilinear_sample(img, ux / t.scale - 0.5, uy / t.scale - 0.5);
        }
    return {std::move(out), t};
}

RoiBox remap_roi(const RoiBox& box, const LetterboxTransform& t) {
    RoiBox r;
    r.x1 = t.scale * box.x1 + t.dx;
    r.y1 = t.scale * box.y1 + t.dy;
    r.x2 = t.scale * box.x2 + t.dx;
    r.y2 = t.scale * box.y2 + t.dy;
    r.x1 = std::clamp(r.x1, 0.0, static_cast<double>(t.canvas_w));
    r.x2 = std::clamp(r.x2, 0.0, static_cast<double>(t.canvas_w));
    r.y1 = std::clamp(r.y1, 0.0, static_cast<double>(t.canvas_h));
    r.y2 = std::clamp(r.y2, 0.0, static_cast<double>(t.canvas_h));
    return r;
}

bool validate_roi(const RoiBox& box, int canvas_w, int canvas_h) {
    const double x1 = std::clamp(box.x1, 0.0, static_cast<double>(canvas_w));
    const double x2 = std::clamp(box.x2, 0.0, static_cast<double>(canvas_w));
    const double y1 = std::clamp(box.y1, 0.0, static_cast<double>(canvas_h));
    const double y2 = std::clamp(box.y2, 0.0, static_cast<double>(canvas_h));
    return (x2 - x1) >= 2.0 && (y2 - y1) >= 2.0;
}

}  // namespace roicae
