#include "tasckit/tasc.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace tasckit {

namespace {

constexpr double kScoreSumTolerance = 1e-3;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

void check_canvas(int w, int h) {
    if (w < 1 || h < 1) {
        throw InvariantError("canvas dimensions must be at least 1x1");
    }
}

// Clipped paste region of an instance on a w x h canvas, plus the resized
// mask for the full (unclipped) extent.
struct PasteRegion {
    PixelExtent extent;           // full, unclipped
    int cx0 = 0, cy0 = 0, cx1 = 0, cy1 = 0;  // clipped to the canvas
    bool covers_canvas_pixels = false;
};

PasteRegion paste_region(const Instance& inst, int image_w, int image_h) {
    const BBox& b = inst.box;
    if (b.x1 <= 0.0 || b.y1 <= 0.0 || b.x0 >= image_w || b.y0 >= image_h) {
        throw InvariantError("instance box lies entirely outside the image canvas");
    }
    PasteRegion r;
    r.extent = pixel_extent(b);
    r.cx0 = std::max(r.extent.x0, 0);
    r.cy0 = std::max(r.extent.y0, 0);
    r.cx1 = std::min(r.extent.x1, image_w);
    r.cy1 = std::min(r.extent.y1, image_h);
    r.covers_canvas_pixels = r.cx0 < r.cx1 && r.cy0 < r.cy1;
    return r;
}

}  // namespace

PixelExtent pixel_extent(const BBox& box) {
    PixelExtent e;
    e.x0 = static_cast<int>(std::floor(box.x0 + 0.5));
    e.y0 = static_cast<int>(std::floor(box.y0 + 0.5));
    e.x1 = static_cast<int>(std::floor(box.x1 + 0.5));
    e.y1 = static_cast<int>(std::floor(box.y1 + 0.5));
    if (e.x1 <= e.x0) e.x1 = e.x0 + 1;
    if (e.y1 <= e.y0) e.y1 = e.y0 + 1;
    return e;
}

ScoreVolume::ScoreVolume(int w, int h, int classes) : width(w), height(h), num_classes(classes) {
    if (w < 1 || h < 1 || classes < 1) {
        throw InvariantError("ScoreVolume: dimensions and class count must be at least 1");
    }
    data.assign(static_cast<std::size_t>(w) * h * classes, 0.0);
}

ScoreVolume::ScoreVolume(int w, int h, int classes, std::vector<double> values)
    : width(w), height(h), num_classes(classes), data(std::move(values)) {
    if (w < 1 || h < 1 || classes < 1) {
        throw InvariantError("ScoreVolume: dimensions and class count must be at least 1");
    }
    if (data.size() != static_cast<std::size_t>(w) * h * classes) {
        throw InvariantError("ScoreVolume: data length does not match width*height*classes");
    }
    validate();
}

void ScoreVolume::validate() const {
    for (double v : data) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw InvariantError("ScoreVolume: score " + std::to_string(v) + " outside [0,1]");
        }
    }
    const std::size_t plane = plane_size();
    for (std::size_t p = 0; p < plane; ++p) {
        double sum = 0.0;
        for (int c = 0; c < num_classes; ++c) {
            sum += data[static_cast<std::size_t>(c) * plane + p];
        }
        if (std::abs(sum - 1.0) > kScoreSumTolerance) {
            throw InvariantError("ScoreVolume: per-pixel scores must sum to 1 (got " +
                                 std::to_string(sum) + ")");
        }
    }
}

SoftMask stuff_side_mask(const ScoreVolume& scores, const Ontology& o) {
    if (static_cast<std::size_t>(scores.num_classes) != o.size()) {
        throw InvariantError("stuff_side_mask: score volume has " +
                             std::to_string(scores.num_classes) + " classes, ontology has " +
                             std::to_string(o.size()));
    }
    const auto& cats = o.categories();
    const std::size_t plane = scores.plane_size();
    SoftMask out(scores.width, scores.height, 0.0);
    for (std::size_t p = 0; p < plane; ++p) {
        double best = scores.data[p];
        std::uint32_t best_id = cats[0].id;
        bool best_thing = cats[0].is_thing;
        for (int c = 1; c < scores.num_classes; ++c) {
            const double v = scores.data[static_cast<std::size_t>(c) * plane + p];
            if (v > best || (v == best && cats[c].id < best_id)) {
                best = v;
                best_id = cats[c].id;
                best_thing = cats[c].is_thing;
            }
        }
        if (best > 0.5 && best_thing) {
            out.data[p] = best;
        }
    }
    return out;
}

SoftMask roi_flatten(const std::vector<Instance>& instances, int image_w, int image_h,
                     const TascConfig& cfg, FlattenMode mode) {
    check_canvas(image_w, image_h);
    const std::size_t n = static_cast<std::size_t>(image_w) * image_h;
    std::vector<double> sum(n, 0.0);
    std::vector<int> count(n, 0);

    for (const Instance& inst : instances) {
        const PasteRegion r = paste_region(inst, image_w, image_h);
        if (!r.covers_canvas_pixels) continue;
        const SoftMask resized = bilinear_resize(inst.mask, r.extent.width(), r.extent.height());
        for (int y = r.cy0; y < r.cy1; ++y) {
            for (int x = r.cx0; x < r.cx1; ++x) {
                const double v = resized.at(x - r.extent.x0, y - r.extent.y0);
                const std::size_t p = static_cast<std::size_t>(y) * image_w + x;
                if (mode == FlattenMode::hard) {
                    if (v > cfg.mask_threshold) {
                        sum[p] += 1.0;
                        count[p] += 1;
                    }
                } else {
                    sum[p] += sigmoid(cfg.soft_steepness * (v - cfg.mask_threshold));
                    count[p] += 1;  // covering boxes, constant w.r.t. mask values
                }
            }
        }
    }

    SoftMask out(image_w, image_h, 0.0);
    for (std::size_t p = 0; p < n; ++p) {
        if (count[p] > 0) out.data[p] = sum[p] / count[p];
    }
    return out;
}

std::vector<InstanceMaskGrad> roi_flatten_soft_grad(const std::vector<Instance>& instances,
                                                    int image_w, int image_h,
                                                    const TascConfig& cfg) {
    check_canvas(image_w, image_h);
    if (!(cfg.soft_steepness > 0.0)) {
        throw InvariantError("roi_flatten_soft_grad: soft_steepness must be positive");
    }

    // Covering-box count per pixel; the soft normalizer.
    std::vector<int> count(static_cast<std::size_t>(image_w) * image_h, 0);
    std::vector<PasteRegion> regions;
    regions.reserve(instances.size());
    for (const Instance& inst : instances) {
        const PasteRegion r = paste_region(inst, image_w, image_h);
        regions.push_back(r);
        if (!r.covers_canvas_pixels) continue;
        for (int y = r.cy0; y < r.cy1; ++y) {
            for (int x = r.cx0; x < r.cx1; ++x) {
                ++count[static_cast<std::size_t>(y) * image_w + x];
            }
        }
    }

    std::vector<InstanceMaskGrad> grads(instances.size());
    for (std::size_t i = 0; i < instances.size(); ++i) {
        const Instance& inst = instances[i];
        const PasteRegion& r = regions[i];
        InstanceMaskGrad& g = grads[i];
        g.mask_width = inst.mask.width;
        g.mask_height = inst.mask.height;
        if (!r.covers_canvas_pixels) continue;

        const int ew = r.extent.width();
        const int eh = r.extent.height();
        const double scale_x = static_cast<double>(inst.mask.width) / ew;
        const double scale_y = static_cast<double>(inst.mask.height) / eh;

        for (int y = r.cy0; y < r.cy1; ++y) {
            const int ry = y - r.extent.y0;
            double sy = (ry + 0.5) * scale_y - 0.5;
            sy = std::clamp(sy, 0.0, static_cast<double>(inst.mask.height - 1));
            int y0 = static_cast<int>(sy);
            if (y0 > inst.mask.height - 2) y0 = inst.mask.height - 2;
            if (y0 < 0) y0 = 0;
            const int y1 = std::min(y0 + 1, inst.mask.height - 1);
            const double fy = sy - y0;

            for (int x = r.cx0; x < r.cx1; ++x) {
                const int rx = x - r.extent.x0;
                double sx = (rx + 0.5) * scale_x - 0.5;
                sx = std::clamp(sx, 0.0, static_cast<double>(inst.mask.width - 1));
                int x0 = static_cast<int>(sx);
                if (x0 > inst.mask.width - 2) x0 = inst.mask.width - 2;
                if (x0 < 0) x0 = 0;
                const int x1 = std::min(x0 + 1, inst.mask.width - 1);
                const double fx = sx - x0;

                // Bilinear weights; duplicate cells (clamped edges) merge.
                struct CellW {
                    int cell;
                    double w;
                };
                CellW cells[4] = {
                    {y0 * inst.mask.width + x0, (1.0 - fx) * (1.0 - fy)},
                    {y0 * inst.mask.width + x1, fx * (1.0 - fy)},
                    {y1 * inst.mask.width + x0, (1.0 - fx) * fy},
                    {y1 * inst.mask.width + x1, fx * fy},
                };
                double value = 0.0;
                for (const CellW& c : cells) {
                    value += c.w * inst.mask.data[c.cell];
                }

                const std::size_t p = static_cast<std::size_t>(y) * image_w + x;
                const double z = cfg.soft_steepness * (value - cfg.mask_threshold);
                const double s = sigmoid(z);
                const double outer = s * (1.0 - s) * cfg.soft_steepness / count[p];

                // Merge duplicates so each (pixel, cell) appears once.
                std::sort(std::begin(cells), std::end(cells),
                          [](const CellW& a, const CellW& b) { return a.cell < b.cell; });
                for (int k = 0; k < 4; ++k) {
                    double w = cells[k].w;
                    while (k + 1 < 4 && cells[k + 1].cell == cells[k].cell) {
                        w += cells[k + 1].w;
                        ++k;
                    }
                    if (w > 0.0) {
                        g.entries.push_back({static_cast<int>(p), cells[k].cell, outer * w});
                    }
                }
            }
        }
        std::sort(g.entries.begin(), g.entries.end(),
                  [](const InstanceMaskGrad::Entry& a, const InstanceMaskGrad::Entry& b) {
                      return a.pixel != b.pixel ? a.pixel < b.pixel : a.cell < b.cell;
                  });
    }
    return grads;
}

double tasc_residual(const SoftMask& stuff_mask, const SoftMask& things_mask,
                     const TascConfig& cfg) {
    if (stuff_mask.width != things_mask.width || stuff_mask.height != things_mask.height) {
        throw InvariantError("tasc_residual: mask dimension mismatch");
    }
    if (!(cfg.lambda >= 0.0) || !std::isfinite(cfg.lambda)) {
        throw InvariantError("tasc_residual: lambda must be finite and non-negative");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < stuff_mask.data.size(); ++i) {
        const double d = stuff_mask.data[i] - things_mask.data[i];
        acc += d * d;
    }
    return cfg.lambda * (acc / static_cast<double>(stuff_mask.data.size()));
}

SoftMask residual_image(const SoftMask& stuff_mask, const SoftMask& things_mask) {
    if (stuff_mask.width != things_mask.width || stuff_mask.height != things_mask.height) {
        throw InvariantError("residual_image: mask dimension mismatch");
    }
    SoftMask out(stuff_mask.width, stuff_mask.height, 0.0);
    for (std::size_t i = 0; i < stuff_mask.data.size(); ++i) {
        out.data[i] = std::abs(stuff_mask.data[i] - things_mask.data[i]);
    }
    return out;
}

HardMask rasterize_instance(const Instance& inst, int image_w, int image_h,
                            double mask_threshold) {
    check_canvas(image_w, image_h);
    const PasteRegion r = paste_region(inst, image_w, image_h);
    HardMask out(image_w, image_h, false);
    if (!r.covers_canvas_pixels) return out;
    const SoftMask resized = bilinear_resize(inst.mask, r.extent.width(), r.extent.height());
    for (int y = r.cy0; y < r.cy1; ++y) {
        for (int x = r.cx0; x < r.cx1; ++x) {
            if (resized.at(x - r.extent.x0, y - r.extent.y0) > mask_threshold) {
                out.set(x, y, true);
            }
        }
    }
    return out;
}

}  // namespace tasckit
