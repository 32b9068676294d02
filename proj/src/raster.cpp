#include "tasckit/raster.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace tasckit {

namespace {

void check_dims(int w, int h, const char* what) {
    if (w < 1 || h < 1) {
        throw InvariantError(std::string(what) + ": dimensions must be at least 1x1, got " +
                             std::to_string(w) + "x" + std::to_string(h));
    }
}

void check_same_dims(int aw, int ah, int bw, int bh, const char* op) {
    if (aw != bw || ah != bh) {
        throw InvariantError(std::string(op) + ": dimension mismatch (" + std::to_string(aw) + "x" +
                             std::to_string(ah) + " vs " + std::to_string(bw) + "x" +
                             std::to_string(bh) + ")");
    }
}

}  // namespace

HardMask::HardMask(int w, int h, bool fill) : width(w), height(h) {
    check_dims(w, h, "HardMask");
    data.assign(static_cast<std::size_t>(w) * h, fill ? 1 : 0);
}

HardMask::HardMask(int w, int h, std::vector<std::uint8_t> values)
    : width(w), height(h), data(std::move(values)) {
    check_dims(w, h, "HardMask");
    if (data.size() != static_cast<std::size_t>(w) * h) {
        throw InvariantError("HardMask: data length does not match width*height");
    }
    for (auto& v : data) {
        if (v > 1) throw InvariantError("HardMask: values must be 0 or 1");
    }
}

std::size_t HardMask::area() const {
    return static_cast<std::size_t>(std::count(data.begin(), data.end(), std::uint8_t{1}));
}

SoftMask::SoftMask(int w, int h, double fill) : width(w), height(h) {
    check_dims(w, h, "SoftMask");
    if (!(fill >= 0.0 && fill <= 1.0)) throw InvariantError("SoftMask: fill outside [0,1]");
    data.assign(static_cast<std::size_t>(w) * h, fill);
}

SoftMask::SoftMask(int w, int h, std::vector<double> values)
    : width(w), height(h), data(std::move(values)) {
    check_dims(w, h, "SoftMask");
    if (data.size() != static_cast<std::size_t>(w) * h) {
        throw InvariantError("SoftMask: data length does not match width*height");
    }
    for (double v : data) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw InvariantError("SoftMask: value " + std::to_string(v) + " outside [0,1]");
        }
    }
}

BBox::BBox(double bx0, double by0, double bx1, double by1) : x0(bx0), y0(by0), x1(bx1), y1(by1) {
    if (!(std::isfinite(x0) && std::isfinite(y0) && std::isfinite(x1) && std::isfinite(y1))) {
        throw InvariantError("BBox: coordinates must be finite");
    }
    if (!(x0 < x1 && y0 < y1)) {
        throw InvariantError("BBox: requires x0 < x1 and y0 < y1");
    }
}

LabelMap::LabelMap(int w, int h, std::uint32_t fill) : width(w), height(h) {
    check_dims(w, h, "LabelMap");
    ids.assign(static_cast<std::size_t>(w) * h, fill);
}

double iou_hard(const HardMask& a, const HardMask& b) {
    check_same_dims(a.width, a.height, b.width, b.height, "iou_hard");
    std::size_t inter = 0;
    std::size_t uni = 0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const bool pa = a.data[i] != 0;
        const bool pb = b.data[i] != 0;
        inter += pa && pb;
        uni += pa || pb;
    }
    if (uni == 0) return 0.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

double iou_box(const BBox& a, const BBox& b) {
    const double ix = std::min(a.x1, b.x1) - std::max(a.x0, b.x0);
    const double iy = std::min(a.y1, b.y1) - std::max(a.y0, b.y0);
    if (ix <= 0.0 || iy <= 0.0) return 0.0;
    const double inter = ix * iy;
    const double uni = a.area() + b.area() - inter;
    return inter / uni;
}

double coverage(const HardMask& a, const HardMask& b) {
    check_same_dims(a.width, a.height, b.width, b.height, "coverage");
    std::size_t inter = 0;
    std::size_t area_a = 0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const bool pa = a.data[i] != 0;
        area_a += pa;
        inter += pa && (b.data[i] != 0);
    }
    if (area_a == 0) return 0.0;
    return static_cast<double>(inter) / static_cast<double>(area_a);
}

SoftMask bilinear_resize(const SoftMask& m, int out_w, int out_h) {
    check_dims(out_w, out_h, "bilinear_resize output");
    if (out_w == m.width && out_h == m.height) return m;

    const double scale_x = static_cast<double>(m.width) / out_w;
    const double scale_y = static_cast<double>(m.height) / out_h;

    SoftMask out(out_w, out_h, 0.0);
    for (int oy = 0; oy < out_h; ++oy) {
        double sy = (oy + 0.5) * scale_y - 0.5;
        sy = std::clamp(sy, 0.0, static_cast<double>(m.height - 1));
        int y0 = static_cast<int>(sy);
        if (y0 > m.height - 2) y0 = m.height - 2;
        if (y0 < 0) y0 = 0;
        const int y1 = std::min(y0 + 1, m.height - 1);
        const double fy = sy - y0;

        for (int ox = 0; ox < out_w; ++ox) {
            double sx = (ox + 0.5) * scale_x - 0.5;
            sx = std::clamp(sx, 0.0, static_cast<double>(m.width - 1));
            int x0 = static_cast<int>(sx);
            if (x0 > m.width - 2) x0 = m.width - 2;
            if (x0 < 0) x0 = 0;
            const int x1 = std::min(x0 + 1, m.width - 1);
            const double fx = sx - x0;

            const double v00 = m.at(x0, y0);
            const double v10 = m.at(x1, y0);
            const double v01 = m.at(x0, y1);
            const double v11 = m.at(x1, y1);
            const double top = v00 + (v10 - v00) * fx;
            const double bot = v01 + (v11 - v01) * fx;
            double v = top + (bot - top) * fy;

            // The exact value is a convex combination of the four neighbors;
            // clamp away rounding dust so the input's bounds are preserved.
            const double lo = std::min(std::min(v00, v10), std::min(v01, v11));
            const double hi = std::max(std::max(v00, v10), std::max(v01, v11));
            v = std::clamp(v, lo, hi);
            out.at(ox, oy) = v;
        }
    }
    return out;
}

HardMask threshold(const SoftMask& m, double t) {
    if (!(t >= 0.0 && t <= 1.0)) throw InvariantError("threshold: t outside [0,1]");
    HardMask out(m.width, m.height, false);
    for (std::size_t i = 0; i < m.data.size(); ++i) {
        out.data[i] = m.data[i] > t ? 1 : 0;
    }
    return out;
}

}  // namespace tasckit
