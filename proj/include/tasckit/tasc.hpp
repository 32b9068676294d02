#pragma once

#include <cstdint>
#include <vector>

#include "tasckit/ontology.hpp"
#include "tasckit/raster.hpp"

namespace tasckit {

// Dense per-pixel class scores, one plane per catalog category (catalog
// order). Values are normalized to [0, 1] and sum to 1 per pixel; the 0.5
// cutoffs below are only meaningful under that contract.
struct ScoreVolume {
    int width = 0;
    int height = 0;
    int num_classes = 0;
    std::vector<double> data;  // class-major planes, row-major in-plane

    ScoreVolume() = default;
    // Zero-filled builder; call validate() after filling.
    ScoreVolume(int w, int h, int classes);
    ScoreVolume(int w, int h, int classes, std::vector<double> values);

    double at(int cls, int x, int y) const {
        return data[(static_cast<std::size_t>(cls) * height + y) * width + x];
    }
    double& at(int cls, int x, int y) {
        return data[(static_cast<std::size_t>(cls) * height + y) * width + x];
    }
    std::size_t plane_size() const { return static_cast<std::size_t>(width) * height; }

    // Checks the range and per-pixel normalization invariants.
    void validate() const;
};

// One detected object. The mask is a local foreground confidence raster at
// an arbitrary resolution; it gets resized to the box extent when pasted
// into image space. assigned_category records which class channel the mask
// was taken from (the predicted class unless a ground-truth assignment was
// supplied upstream).
struct Instance {
    BBox box;
    std::uint32_t category = 0;
    double confidence = 0.0;
    SoftMask mask;
    std::uint32_t assigned_category = 0;
};

struct TascConfig {
    double lambda = 1.0;          // residual weight; 0 disables the residual
    double mask_threshold = 0.5;  // hard cutoff / soft relaxation midpoint
    double soft_steepness = 10.0; // logistic steepness in soft mode
};

enum class FlattenMode { hard, soft };

// Half-open pixel range covered by a box (round-half-up on both edges,
// at least one pixel per axis). Not clipped to any canvas.
struct PixelExtent {
    int x0 = 0;
    int y0 = 0;
    int x1 = 0;
    int y1 = 0;

    int width() const { return x1 - x0; }
    int height() const { return y1 - y0; }
};

PixelExtent pixel_extent(const BBox& box);

// Things/stuff confidence mask from the dense scores: a pixel whose argmax
// class is a thing with score above 0.5 keeps that score, everything else
// is 0. Argmax ties break toward the lowest category id.
SoftMask stuff_side_mask(const ScoreVolume& scores, const Ontology& o);

// Assembles per-instance local masks into one global confidence mask:
// each mask is resized to its box extent and pasted onto a zero canvas;
// contributions are thresholded {0,1} values in hard mode and
// sigmoid(steepness * (value - threshold)) in soft mode; every pixel is
// then normalized by its instance count (post-threshold contributors in
// hard mode, covering boxes in soft mode). Pixels with no contributor
// stay 0. Boxes that miss the canvas entirely are an error.
SoftMask roi_flatten(const std::vector<Instance>& instances, int image_w, int image_h,
                     const TascConfig& cfg, FlattenMode mode);

// Sparse partial derivatives of every roi_flatten(soft) output pixel with
// respect to every local-mask cell; only cells whose bilinear footprint
// touches the pixel carry an entry.
struct InstanceMaskGrad {
    int mask_width = 0;
    int mask_height = 0;
    struct Entry {
        int pixel = 0;  // row-major index into the output canvas
        int cell = 0;   // row-major index into the instance's local mask
        double value = 0.0;
    };
    std::vector<Entry> entries;  // sorted by (pixel, cell)
};

std::vector<InstanceMaskGrad> roi_flatten_soft_grad(const std::vector<Instance>& instances,
                                                    int image_w, int image_h,
                                                    const TascConfig& cfg);

// lambda * mean((stuff - things)^2) over pixels.
double tasc_residual(const SoftMask& stuff_mask, const SoftMask& things_mask,
                     const TascConfig& cfg);

// Per-pixel |stuff - things|, for export and inspection.
SoftMask residual_image(const SoftMask& stuff_mask, const SoftMask& things_mask);

// Resize an instance's local mask to its box extent, threshold it, and
// paste into an image-resolution binary mask (clipped to the canvas).
HardMask rasterize_instance(const Instance& inst, int image_w, int image_h,
                            double mask_threshold = 0.5);

}  // namespace tasckit
