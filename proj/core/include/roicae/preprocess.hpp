#pragma once

#include <utility>
#include <vector>

#include "roicae/tensor.hpp"

namespace roicae {

/// Grayscale image with intensities in [0,1], row-major.
struct RawImage {
    int width = 0;
    int height = 0;
    std::vector<double> pix;

    RawImage() = default;
    RawImage(int w, int h) : width(w), height(h), pix(static_cast<std::size_t>(w) * h, 0.0) {}

    double& at(int y, int x) { return pix[static_cast<std::size_t>(y) * width + x]; }
    double at(int y, int x) const { return pix[static_cast<std::size_t>(y) * width + x]; }
};

/// Axis-aligned box in pixel coordinates, x1 < x2 and y1 < y2.
struct RoiBox {
    double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

    double width() const { return x2 - x1; }
    double height() const { return y2 - y1; }
    bool valid() const { return x1 < x2 && y1 < y2 && width() * height() >= 1.0; }
};

/// Affine map between raw and canvas coordinates: p' = s * p + delta.
struct LetterboxTransform {
    double scale = 1.0;
    double dx = 0.0;
    double dy = 0.0;
    int canvas_w = 0;
    int canvas_h = 0;
};

/// Aspect-preserving resize onto a fixed canvas with symmetric zero padding.
/// Canvas dimensions must be >=16 and divisible by 16 (the CAE contract).
/// Bilinear interpolation with the half-pixel-center convention, so resizing
/// a canvas-sized image (s=1) is the identity on pixel values.
std::pair<RawImage, LetterboxTransform> letterbox(const RawImage& img, int canvas_w, int canvas_h);

/// Affine corner remap into canvas coordinates, clipped to the canvas.
RoiBox remap_roi(const RoiBox& box, const LetterboxTransform& t);

/// False iff the canvas-clipped box is degenerate (<2 px on a side) or lies
/// fully outside the canvas.
bool validate_roi(const RoiBox& box, int canvas_w, int canvas_h);

}  // namespace roicae
