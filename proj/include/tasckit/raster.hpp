#pragma once

#include <cstdint>
#include <vector>

#include "tasckit/error.hpp"

namespace tasckit {

// Binary raster, row-major, one byte per pixel (0 or 1).
struct HardMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;

    HardMask() = default;
    HardMask(int w, int h, bool fill = false);
    HardMask(int w, int h, std::vector<std::uint8_t> values);

    bool at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x] != 0; }
    void set(int x, int y, bool v) { data[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0; }
    std::size_t pixel_count() const { return data.size(); }
    // Number of set pixels.
    std::size_t area() const;
    bool empty_mask() const { return area() == 0; }
};

// Confidence raster, row-major, values in [0, 1].
struct SoftMask {
    int width = 0;
    int height = 0;
    std::vector<double> data;

    SoftMask() = default;
    SoftMask(int w, int h, double fill = 0.0);
    SoftMask(int w, int h, std::vector<double> values);

    double at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
    double& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
    std::size_t pixel_count() const { return data.size(); }
};

// Axis-aligned box in continuous pixel coordinates, origin top-left,
// (x1, y1) exclusive. Requires x0 < x1 and y0 < y1.
struct BBox {
    double x0 = 0.0;
    double y0 = 0.0;
    double x1 = 0.0;
    double y1 = 0.0;

    BBox() = default;
    BBox(double x0, double y0, double x1, double y1);

    double width() const { return x1 - x0; }
    double height() const { return y1 - y0; }
    double area() const { return width() * height(); }
};

// Per-pixel category ids; id 0 is void/unlabeled.
struct LabelMap {
    int width = 0;
    int height = 0;
    std::vector<std::uint32_t> ids;

    LabelMap() = default;
    LabelMap(int w, int h, std::uint32_t fill = 0);

    std::uint32_t at(int x, int y) const { return ids[static_cast<std::size_t>(y) * width + x]; }
    std::uint32_t& at(int x, int y) { return ids[static_cast<std::size_t>(y) * width + x]; }
};

// |a ∩ b| / |a ∪ b|; 0 when both masks are empty. Masks must share dimensions.
double iou_hard(const HardMask& a, const HardMask& b);

// Rectangle intersection-over-union.
double iou_box(const BBox& a, const BBox& b);

// |a ∩ b| / |a|; 0 when a is empty. Masks must share dimensions.
double coverage(const HardMask& a, const HardMask& b);

// Bilinear interpolation with half-pixel-center sampling: output pixel i
// samples the input at (i + 0.5) * in/out - 0.5, clamped to the input grid.
// Output values stay within the input's [min, max].
SoftMask bilinear_resize(const SoftMask& m, int out_w, int out_h);

// Pixel is set iff its value is strictly greater than t.
HardMask threshold(const SoftMask& m, double t);

}  // namespace tasckit
