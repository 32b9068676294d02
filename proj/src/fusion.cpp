#include "tasckit/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>
#include <unordered_map>
#include <unordered_set>

namespace tasckit {

namespace {

// Stable confidence-descending order over instance indices.
std::vector<std::size_t> confidence_order(const std::vector<Instance>& instances) {
    std::vector<std::size_t> order(instances.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return instances[a].confidence > instances[b].confidence;
    });
    return order;
}

}  // namespace

bool SegmentRecord::has_confidence() const { return !std::isnan(confidence); }

SegmentMap::SegmentMap(int w, int h) : width(w), height(h) {
    if (w < 1 || h < 1) {
        throw InvariantError("SegmentMap: dimensions must be at least 1x1");
    }
    ids.assign(static_cast<std::size_t>(w) * h, 0);
}

void SegmentMap::validate() const {
    if (width < 1 || height < 1) {
        throw InvariantError("SegmentMap: dimensions must be at least 1x1");
    }
    if (ids.size() != static_cast<std::size_t>(width) * height) {
        throw InvariantError("SegmentMap: raster length does not match width*height");
    }
    std::unordered_set<std::uint32_t> listed;
    for (const SegmentRecord& s : segments) {
        if (s.id == 0) {
            throw InvariantError("SegmentMap: segment id 0 is reserved for void");
        }
        if (!listed.insert(s.id).second) {
            throw InvariantError("SegmentMap: duplicate segment id " + std::to_string(s.id));
        }
        if (s.has_confidence() && !(s.confidence >= 0.0f && s.confidence <= 1.0f)) {
            throw InvariantError("SegmentMap: confidence outside [0,1] for segment " +
                                 std::to_string(s.id));
        }
    }
    std::unordered_set<std::uint32_t> present;
    for (std::uint32_t id : ids) {
        if (id != 0) present.insert(id);
    }
    for (std::uint32_t id : present) {
        if (listed.count(id) == 0) {
            throw InvariantError("SegmentMap: raster id " + std::to_string(id) +
                                 " has no segment record");
        }
    }
    for (std::uint32_t id : listed) {
        if (present.count(id) == 0) {
            throw InvariantError("SegmentMap: segment record " + std::to_string(id) +
                                 " references an id absent from the raster");
        }
    }
}

std::vector<Instance> box_nms(std::vector<Instance> instances, const FusionConfig& cfg) {
    const std::vector<std::size_t> order = confidence_order(instances);
    std::vector<Instance> kept;
    kept.reserve(instances.size());
    for (std::size_t idx : order) {
        const Instance& cand = instances[idx];
        bool suppressed = false;
        for (const Instance& k : kept) {
            if (k.category == cand.category && iou_box(k.box, cand.box) > cfg.box_nms_iou) {
                suppressed = true;
                break;
            }
        }
        if (!suppressed) kept.push_back(cand);
    }
    return kept;
}

std::vector<Instance> mask_nms(std::vector<Instance> instances, int image_w, int image_h,
                               const FusionConfig& cfg) {
    const std::vector<std::size_t> order = confidence_order(instances);
    std::vector<Instance> kept;
    std::vector<HardMask> kept_masks;
    for (std::size_t idx : order) {
        HardMask m = rasterize_instance(instances[idx], image_w, image_h, 0.5);
        bool suppressed = false;
        for (const HardMask& km : kept_masks) {
            if (iou_hard(km, m) > cfg.mask_nms_iou) {
                suppressed = true;
                break;
            }
        }
        if (!suppressed) {
            kept.push_back(instances[idx]);
            kept_masks.push_back(std::move(m));
        }
    }
    return kept;
}

LabelMap semantic_argmax(const ScoreVolume& scores, const Ontology& o) {
    if (static_cast<std::size_t>(scores.num_classes) != o.size()) {
        throw InvariantError("semantic_argmax: score volume has " +
                             std::to_string(scores.num_classes) + " classes, ontology has " +
                             std::to_string(o.size()));
    }
    const auto& cats = o.categories();
    const std::size_t plane = scores.plane_size();
    LabelMap out(scores.width, scores.height, 0);
    for (std::size_t p = 0; p < plane; ++p) {
        double best = scores.data[p];
        std::uint32_t best_id = cats[0].id;
        for (int c = 1; c < scores.num_classes; ++c) {
            const double v = scores.data[static_cast<std::size_t>(c) * plane + p];
            if (v > best || (v == best && cats[c].id < best_id)) {
                best = v;
                best_id = cats[c].id;
            }
        }
        out.ids[p] = best_id;
    }
    return out;
}

PanopticResult mask_guided_fuse(const std::vector<Instance>& instances, const LabelMap& labelmap,
                                const HardMask& guide, const Ontology& o,
                                const FusionConfig& cfg) {
    if (labelmap.width != guide.width || labelmap.height != guide.height) {
        throw InvariantError("mask_guided_fuse: labelmap and guide dimension mismatch");
    }
    const int w = labelmap.width;
    const int h = labelmap.height;

    for (const Instance& inst : instances) {
        if (!o.contains(inst.category) || !o.is_thing(inst.category)) {
            throw InvariantError("mask_guided_fuse: instance category " +
                                 std::to_string(inst.category) + " is not a thing class");
        }
    }

    PanopticResult result;
    result.map = SegmentMap(w, h);

    HardMask claimed(w, h, false);
    std::vector<HardMask> claimed_per_instance;  // for the pairwise-overlap variant
    std::uint32_t next_id = 1;

    for (std::size_t idx : confidence_order(instances)) {
        const Instance& inst = instances[idx];
        const HardMask raster = rasterize_instance(inst, w, h, 0.5);

        double overlap = 0.0;
        if (cfg.pairwise_overlap) {
            for (const HardMask& prev : claimed_per_instance) {
                overlap = std::max(overlap, iou_hard(raster, prev));
            }
        } else {
            overlap = iou_hard(raster, claimed);
        }
        if (overlap >= cfg.overlap_max) continue;

        const double agreement =
            cfg.guide_gate_uses_iou ? iou_hard(raster, guide) : coverage(raster, guide);
        if (agreement < cfg.mask_cover_min) continue;

        // Claim the still-unclaimed pixels.
        HardMask claimed_now(w, h, false);
        std::size_t claimed_count = 0;
        for (std::size_t p = 0; p < raster.data.size(); ++p) {
            if (raster.data[p] != 0 && claimed.data[p] == 0) {
                claimed_now.data[p] = 1;
                claimed.data[p] = 1;
                ++claimed_count;
            }
        }
        result.accepted.push_back(idx);
        if (claimed_count == 0) continue;  // accepted but fully shadowed: no segment

        const std::uint32_t seg_id = next_id++;
        for (std::size_t p = 0; p < claimed_now.data.size(); ++p) {
            if (claimed_now.data[p] != 0) result.map.ids[p] = seg_id;
        }
        result.map.segments.push_back(
            SegmentRecord{seg_id, inst.category, static_cast<float>(inst.confidence)});
        claimed_per_instance.push_back(std::move(claimed_now));
    }

    // Stuff background: unclaimed pixels keep their semantic category when it
    // is stuff; unclaimed thing predictions become void.
    std::map<std::uint32_t, std::uint32_t> stuff_segment_ids;
    for (std::size_t p = 0; p < labelmap.ids.size(); ++p) {
        if (claimed.data[p] != 0) continue;
        const std::uint32_t cat = labelmap.ids[p];
        if (cat == Ontology::kVoidId) continue;
        if (!o.contains(cat)) {
            throw InvariantError("mask_guided_fuse: labelmap category " + std::to_string(cat) +
                                 " not in ontology");
        }
        if (o.is_thing(cat)) continue;
        auto [it, inserted] = stuff_segment_ids.emplace(cat, 0);
        if (inserted) it->second = next_id++;
        result.map.ids[p] = it->second;
    }
    for (const auto& [cat, seg_id] : stuff_segment_ids) {
        result.map.segments.push_back(SegmentRecord{seg_id, cat});
    }
    std::sort(result.map.segments.begin(), result.map.segments.end(),
              [](const SegmentRecord& a, const SegmentRecord& b) { return a.id < b.id; });
    return result;
}

SegmentMap segments_from_labelmap(const LabelMap& labelmap, const Ontology& o) {
    SegmentMap out(labelmap.width, labelmap.height);
    std::map<std::uint32_t, std::uint32_t> stuff_segment_ids;  // category -> segment id
    for (std::size_t p = 0; p < labelmap.ids.size(); ++p) {
        const std::uint32_t cat = labelmap.ids[p];
        if (cat == Ontology::kVoidId) continue;
        if (!o.contains(cat)) {
            throw InvariantError("segments_from_labelmap: category " + std::to_string(cat) +
                                 " not in ontology");
        }
        if (o.is_thing(cat)) continue;
        auto [it, inserted] = stuff_segment_ids.emplace(cat, 0);
        if (inserted) it->second = static_cast<std::uint32_t>(stuff_segment_ids.size());
        out.ids[p] = it->second;
    }
    // Renumber 1..K in ascending category order for determinism.
    std::uint32_t next_id = 1;
    std::map<std::uint32_t, std::uint32_t> remap;
    for (const auto& [cat, tmp_id] : stuff_segment_ids) {
        remap[tmp_id] = next_id;
        out.segments.push_back(SegmentRecord{next_id, cat});
        ++next_id;
    }
    for (std::uint32_t& id : out.ids) {
        if (id != 0) id = remap[id];
    }
    return out;
}

LabelMap to_labelmap(const SegmentMap& map) {
    std::unordered_map<std::uint32_t, std::uint32_t> category_of;
    category_of.reserve(map.segments.size());
    for (const SegmentRecord& s : map.segments) {
        category_of.emplace(s.id, s.category);
    }
    LabelMap out(map.width, map.height, 0);
    for (std::size_t p = 0; p < map.ids.size(); ++p) {
        if (map.ids[p] == 0) continue;
        auto it = category_of.find(map.ids[p]);
        if (it == category_of.end()) {
            throw InvariantError("to_labelmap: raster id " + std::to_string(map.ids[p]) +
                                 " has no segment record");
        }
        out.ids[p] = it->second;
    }
    return out;
}

}  // namespace tasckit
