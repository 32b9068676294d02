#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "tasckit/tasc.hpp"

namespace tasckit {

struct FusionConfig {
    double overlap_max = 0.4;     // gate (a): reject when IoU with placed pixels >= this
    double mask_cover_min = 0.7;  // gate (b): require coverage by the guide >= this
    double box_nms_iou = 0.3;     // per-class box NMS cutoff
    double mask_nms_iou = 0.3;    // all-class mask NMS cutoff
    bool guide_gate_uses_iou = false;  // gate (b) as literal IoU against the guide (ablation)
    bool pairwise_overlap = false;     // gate (a) as max pairwise IoU instead of union IoU
};

struct SegmentRecord {
    std::uint32_t id = 0;
    std::uint32_t category = 0;
    // NaN means absent (ground truth, or segments without a detection score).
    float confidence = std::numeric_limits<float>::quiet_NaN();

    bool has_confidence() const;
};

// Per-pixel segment ids plus one record per segment. Id 0 is void and never
// listed; the set of nonzero raster ids and the set of record ids coincide.
struct SegmentMap {
    int width = 0;
    int height = 0;
    std::vector<std::uint32_t> ids;
    std::vector<SegmentRecord> segments;

    SegmentMap() = default;
    SegmentMap(int w, int h);

    std::uint32_t at(int x, int y) const { return ids[static_cast<std::size_t>(y) * width + x]; }
    std::uint32_t& at(int x, int y) { return ids[static_cast<std::size_t>(y) * width + x]; }

    void validate() const;
};

struct PanopticResult {
    SegmentMap map;
    // Indices into the input instance list, in placement order.
    std::vector<std::size_t> accepted;
};

// Greedy per-class suppression: walk instances by decreasing confidence
// (ties keep input order) and drop any instance whose box IoU with an
// already-kept instance of the same class exceeds cfg.box_nms_iou.
// Output is sorted by decreasing confidence.
std::vector<Instance> box_nms(std::vector<Instance> instances, const FusionConfig& cfg);

// Greedy suppression across all classes on rasterized hard masks
// (resized to the box extent, thresholded at 0.5) with cutoff
// cfg.mask_nms_iou.
std::vector<Instance> mask_nms(std::vector<Instance> instances, int image_w, int image_h,
                               const FusionConfig& cfg);

// Per-pixel argmax category; ties break toward the lowest category id.
LabelMap semantic_argmax(const ScoreVolume& scores, const Ontology& o);

// Paste instances in decreasing confidence order (ties by input index).
// An instance is accepted iff its IoU with already-placed pixels is under
// cfg.overlap_max and its coverage by the guide mask reaches
// cfg.mask_cover_min; accepted instances claim only still-unclaimed pixels.
// Unclaimed pixels take their labelmap stuff category (one segment per
// category); unclaimed thing-class pixels become void.
PanopticResult mask_guided_fuse(const std::vector<Instance>& instances, const LabelMap& labelmap,
                                const HardMask& guide, const Ontology& o,
                                const FusionConfig& cfg);

// One segment per stuff category present in the labelmap (all its pixels,
// connected or not); thing and void pixels stay void.
SegmentMap segments_from_labelmap(const LabelMap& labelmap, const Ontology& o);

// Per-pixel category of the owning segment; void pixels stay 0.
LabelMap to_labelmap(const SegmentMap& map);

}  // namespace tasckit
