#include "tasckit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

namespace tasckit {

namespace {

std::uint64_t pair_key(std::uint32_t pred_id, std::uint32_t gt_id) {
    return (static_cast<std::uint64_t>(pred_id) << 32) | gt_id;
}

}  // namespace

MatchResult match_segments(const SegmentMap& pred, const SegmentMap& gt, const Ontology& o) {
    if (pred.width != gt.width || pred.height != gt.height) {
        throw InvariantError("match_segments: prediction and ground truth dimension mismatch");
    }
    pred.validate();
    gt.validate();

    std::unordered_map<std::uint32_t, std::uint64_t> pred_area;
    std::unordered_map<std::uint32_t, std::uint64_t> gt_area;
    std::unordered_map<std::uint64_t, std::uint64_t> intersections;  // (pred,gt) incl. gt void
    for (std::size_t p = 0; p < pred.ids.size(); ++p) {
        const std::uint32_t pi = pred.ids[p];
        const std::uint32_t gi = gt.ids[p];
        if (pi != 0) ++pred_area[pi];
        if (gi != 0) ++gt_area[gi];
        if (pi != 0) ++intersections[pair_key(pi, gi)];
    }

    std::unordered_map<std::uint32_t, std::uint32_t> pred_cat, gt_cat;
    for (const SegmentRecord& s : pred.segments) {
        if (!o.contains(s.category)) {
            throw InvariantError("match_segments: prediction category " +
                                 std::to_string(s.category) + " not in ontology");
        }
        pred_cat.emplace(s.id, s.category);
    }
    for (const SegmentRecord& s : gt.segments) {
        if (!o.contains(s.category)) {
            throw InvariantError("match_segments: ground-truth category " +
                                 std::to_string(s.category) + " not in ontology");
        }
        gt_cat.emplace(s.id, s.category);
    }

    MatchResult result;
    std::unordered_set<std::uint32_t> matched_pred, matched_gt;
    for (const auto& [key, inter] : intersections) {
        const std::uint32_t pi = static_cast<std::uint32_t>(key >> 32);
        const std::uint32_t gi = static_cast<std::uint32_t>(key & 0xffffffffu);
        if (gi == 0) continue;
        const std::uint32_t cat = pred_cat.at(pi);
        if (cat != gt_cat.at(gi)) continue;
        auto void_it = intersections.find(pair_key(pi, 0));
        const std::uint64_t pred_on_void = void_it == intersections.end() ? 0 : void_it->second;
        const std::uint64_t union_area = pred_area.at(pi) - pred_on_void + gt_area.at(gi) - inter;
        const double iou = static_cast<double>(inter) / static_cast<double>(union_area);
        if (iou > 0.5) {
            result.categories[cat].tp.push_back(TpMatch{pi, gi, iou});
            matched_pred.insert(pi);
            matched_gt.insert(gi);
        }
    }

    for (const SegmentRecord& s : pred.segments) {
        if (matched_pred.count(s.id)) continue;
        auto void_it = intersections.find(pair_key(s.id, 0));
        const std::uint64_t pred_on_void = void_it == intersections.end() ? 0 : void_it->second;
        // Predictions mostly inside unlabeled area are ignored, not penalized.
        if (2 * pred_on_void > pred_area.at(s.id)) continue;
        result.categories[s.category].fp.push_back(s.id);
    }
    for (const SegmentRecord& s : gt.segments) {
        if (matched_gt.count(s.id)) continue;
        result.categories[s.category].fn.push_back(s.id);
    }

    for (auto& [cat, m] : result.categories) {
        std::sort(m.tp.begin(), m.tp.end(), [](const TpMatch& a, const TpMatch& b) {
            return a.pred_id != b.pred_id ? a.pred_id < b.pred_id : a.gt_id < b.gt_id;
        });
        std::sort(m.fp.begin(), m.fp.end());
        std::sort(m.fn.begin(), m.fn.end());
    }
    return result;
}

void PqAccumulator::add(const MatchResult& m) {
    for (const auto& [cat, cm] : m.categories) {
        if (cm.tp.empty() && cm.fp.empty() && cm.fn.empty()) continue;
        Bucket& b = buckets_[cat];
        for (const TpMatch& t : cm.tp) b.ious.push_back(t.iou);
        b.fp += static_cast<long>(cm.fp.size());
        b.fn += static_cast<long>(cm.fn.size());
    }
}

PQReport PqAccumulator::report(const Ontology& o) const {
    PQReport report;
    for (const auto& [cat_id, bucket] : buckets_) {
        const Category& cat = o.category(cat_id);
        CategoryPq row;
        row.id = cat_id;
        row.name = cat.name;
        row.is_thing = cat.is_thing;
        row.tp = static_cast<long>(bucket.ious.size());
        row.fp = bucket.fp;
        row.fn = bucket.fn;
        if (row.tp + row.fp + row.fn == 0) continue;

        std::vector<double> ious = bucket.ious;
        std::sort(ious.begin(), ious.end());
        const double iou_sum = std::accumulate(ious.begin(), ious.end(), 0.0);
        const double denom = row.tp + 0.5 * row.fp + 0.5 * row.fn;
        row.pq = iou_sum / denom;
        row.sq = row.tp > 0 ? iou_sum / row.tp : 0.0;
        row.rq = row.tp / denom;
        report.classes.push_back(std::move(row));
    }

    auto aggregate = [&](bool want_things, bool want_all) {
        PqAggregate agg;
        double pq = 0.0, sq = 0.0, rq = 0.0;
        for (const CategoryPq& row : report.classes) {
            if (!want_all && row.is_thing != want_things) continue;
            ++agg.categories;
            agg.tp += row.tp;
            agg.fp += row.fp;
            agg.fn += row.fn;
            pq += row.pq;
            sq += row.sq;
            rq += row.rq;
        }
        if (agg.categories > 0) {
            agg.pq = pq / agg.categories;
            agg.sq = sq / agg.categories;
            agg.rq = rq / agg.categories;
        }
        return agg;
    };
    report.all = aggregate(false, true);
    report.things = aggregate(true, false);
    report.stuff = aggregate(false, false);
    return report;
}

PQReport compute_pq(const MatchResult& m, const Ontology& o) {
    PqAccumulator acc;
    acc.add(m);
    return acc.report(o);
}

void MiouAccumulator::add(const LabelMap& pred, const LabelMap& gt, const Ontology& o) {
    if (pred.width != gt.width || pred.height != gt.height) {
        throw InvariantError("miou: prediction and ground truth dimension mismatch");
    }
    for (std::size_t p = 0; p < gt.ids.size(); ++p) {
        const std::uint32_t g = gt.ids[p];
        if (g == Ontology::kVoidId) continue;  // unlabeled pixels are ignored
        if (!o.contains(g)) {
            throw InvariantError("miou: ground-truth category " + std::to_string(g) +
                                 " not in ontology");
        }
        const std::uint32_t q = pred.ids[p];
        ++counts_[g].gt;
        if (q != Ontology::kVoidId) {
            if (!o.contains(q)) {
                throw InvariantError("miou: predicted category " + std::to_string(q) +
                                     " not in ontology");
            }
            ++counts_[q].pred;
            if (q == g) ++counts_[g].intersection;
        }
    }
}

MiouReport MiouAccumulator::report(const Ontology& o) const {
    MiouReport report;
    double sum = 0.0;
    int present = 0;
    for (const auto& [cat_id, c] : counts_) {
        MiouReport::Row row;
        row.id = cat_id;
        row.name = o.category(cat_id).name;
        row.in_gt = c.gt > 0;
        const std::uint64_t uni = c.pred + c.gt - c.intersection;
        row.iou = uni == 0 ? 0.0 : static_cast<double>(c.intersection) / static_cast<double>(uni);
        if (row.in_gt) {
            sum += row.iou;
            ++present;
        }
        report.classes.push_back(std::move(row));
    }
    report.mean = present > 0 ? sum / present : 0.0;
    return report;
}

MiouReport compute_miou(const LabelMap& pred, const LabelMap& gt, const Ontology& o) {
    MiouAccumulator acc;
    acc.add(pred, gt, o);
    return acc.report(o);
}

namespace {

struct GtInstance {
    HardMask mask;
};

struct PredEntry {
    double confidence = 0.0;
    std::string image;
    HardMask mask;
    BBox box;
};

// 101-point interpolated PR area. Operating points are the prefixes of the
// ranked detection list, including the empty prefix at (recall 0,
// precision 1); with no detections the area is 0.
double interpolated_ap(const std::vector<bool>& is_tp, std::uint64_t total_gt) {
    if (is_tp.empty() || total_gt == 0) return 0.0;
    std::vector<double> recall{0.0};
    std::vector<double> precision{1.0};
    std::uint64_t tp = 0;
    for (std::size_t k = 0; k < is_tp.size(); ++k) {
        tp += is_tp[k] ? 1 : 0;
        recall.push_back(static_cast<double>(tp) / static_cast<double>(total_gt));
        precision.push_back(static_cast<double>(tp) / static_cast<double>(k + 1));
    }
    double area = 0.0;
    for (int i = 0; i <= 100; ++i) {
        const double r = i / 100.0;
        double best = 0.0;
        for (std::size_t k = 0; k < recall.size(); ++k) {
            if (recall[k] >= r) best = std::max(best, precision[k]);
        }
        area += best;
    }
    return area / 101.0;
}

}  // namespace

ApReport compute_mask_ap(const std::vector<std::pair<Instance, std::string>>& preds,
                         const std::vector<std::pair<SegmentMap, std::string>>& gts,
                         const Ontology& o) {
    struct ImageGt {
        int width = 0;
        int height = 0;
        std::map<std::uint32_t, std::vector<GtInstance>> by_category;
    };
    std::map<std::string, ImageGt> images;
    std::map<std::uint32_t, std::uint64_t> gt_totals;
    for (const auto& [map, image_id] : gts) {
        map.validate();
        auto [it, inserted] = images.emplace(image_id, ImageGt{});
        if (!inserted) {
            throw MismatchError("compute_mask_ap: duplicate ground-truth image id '" + image_id +
                                "'");
        }
        ImageGt& img = it->second;
        img.width = map.width;
        img.height = map.height;
        for (const SegmentRecord& s : map.segments) {
            if (!o.contains(s.category)) {
                throw InvariantError("compute_mask_ap: category " + std::to_string(s.category) +
                                     " not in ontology");
            }
            if (!o.is_thing(s.category)) continue;
            HardMask m(map.width, map.height, false);
            for (std::size_t p = 0; p < map.ids.size(); ++p) {
                if (map.ids[p] == s.id) m.data[p] = 1;
            }
            img.by_category[s.category].push_back(GtInstance{std::move(m)});
            ++gt_totals[s.category];
        }
    }

    std::map<std::uint32_t, std::vector<PredEntry>> preds_by_cat;
    for (const auto& [inst, image_id] : preds) {
        auto img_it = images.find(image_id);
        if (img_it == images.end()) {
            throw MismatchError("compute_mask_ap: prediction references unknown image id '" +
                                image_id + "'");
        }
        if (!o.contains(inst.category) || !o.is_thing(inst.category)) {
            throw InvariantError("compute_mask_ap: prediction category " +
                                 std::to_string(inst.category) + " is not a thing class");
        }
        PredEntry e;
        e.confidence = inst.confidence;
        e.image = image_id;
        e.box = inst.box;
        e.mask = rasterize_instance(inst, img_it->second.width, img_it->second.height, 0.5);
        preds_by_cat[inst.category].push_back(std::move(e));
    }

    ApReport report;
    double ap_sum = 0.0, ap50_sum = 0.0;
    int n_categories = 0;
    for (const auto& [cat_id, total] : gt_totals) {
        auto preds_it = preds_by_cat.find(cat_id);
        std::vector<PredEntry>* cat_preds =
            preds_it == preds_by_cat.end() ? nullptr : &preds_it->second;

        ApReport::Row row;
        row.id = cat_id;
        row.name = o.category(cat_id).name;
        row.per_threshold.assign(10, 0.0);

        if (cat_preds != nullptr && !cat_preds->empty()) {
            // Intrinsic sort key keeps the ranking independent of input order.
            std::sort(cat_preds->begin(), cat_preds->end(),
                      [](const PredEntry& a, const PredEntry& b) {
                          if (a.confidence != b.confidence) return a.confidence > b.confidence;
                          if (a.image != b.image) return a.image < b.image;
                          if (a.box.x0 != b.box.x0) return a.box.x0 < b.box.x0;
                          if (a.box.y0 != b.box.y0) return a.box.y0 < b.box.y0;
                          if (a.box.x1 != b.box.x1) return a.box.x1 < b.box.x1;
                          return a.box.y1 < b.box.y1;
                      });

            // IoU against every ground-truth instance of this category.
            std::vector<std::vector<double>> ious(cat_preds->size());
            for (std::size_t d = 0; d < cat_preds->size(); ++d) {
                const PredEntry& e = (*cat_preds)[d];
                const auto& img = images.at(e.image);
                auto gt_it = img.by_category.find(cat_id);
                if (gt_it == img.by_category.end()) continue;
                ious[d].resize(gt_it->second.size());
                for (std::size_t g = 0; g < gt_it->second.size(); ++g) {
                    ious[d][g] = iou_hard(e.mask, gt_it->second[g].mask);
                }
            }

            double cat_ap_sum = 0.0;
            for (int ti = 0; ti < 10; ++ti) {
                const double thr = (50 + 5 * ti) / 100.0;
                std::map<std::string, std::vector<bool>> gt_used;
                std::vector<bool> is_tp(cat_preds->size(), false);
                for (std::size_t d = 0; d < cat_preds->size(); ++d) {
                    if (ious[d].empty()) continue;
                    const PredEntry& e = (*cat_preds)[d];
                    auto& used = gt_used[e.image];
                    if (used.empty()) used.assign(ious[d].size(), false);
                    int best_g = -1;
                    double best_iou = 0.0;
                    for (std::size_t g = 0; g < ious[d].size(); ++g) {
                        if (used[g] || ious[d][g] < thr) continue;
                        if (best_g < 0 || ious[d][g] > best_iou) {
                            best_g = static_cast<int>(g);
                            best_iou = ious[d][g];
                        }
                    }
                    if (best_g >= 0) {
                        used[best_g] = true;
                        is_tp[d] = true;
                    }
                }
                const double ap_t = interpolated_ap(is_tp, total);
                cat_ap_sum += ap_t;
                row.per_threshold[static_cast<std::size_t>(ti)] = ap_t;
                if (ti == 0) row.ap50 = ap_t;
            }
            row.ap = cat_ap_sum / 10.0;
        }
        ap_sum += row.ap;
        ap50_sum += row.ap50;
        ++n_categories;
        report.classes.push_back(std::move(row));
    }
    report.ap = n_categories > 0 ? ap_sum / n_categories : 0.0;
    report.ap50 = n_categories > 0 ? ap50_sum / n_categories : 0.0;
    return report;
}

double stuff_bias_probe(double fraction) {
    if (!(fraction >= 0.0 && fraction <= 1.0)) {
        throw InvariantError("stuff_bias_probe: fraction must be in [0,1]");
    }
    constexpr int kSide = 100;
    const Ontology o(std::vector<Category>{{1, "stuff", false}, {2, "thing", true}});

    SegmentMap gt(kSide, kSide);
    std::fill(gt.ids.begin(), gt.ids.end(), 1u);
    gt.segments.push_back(SegmentRecord{1, 1});

    SegmentMap pred(kSide, kSide);
    const auto covered = static_cast<std::size_t>(
        std::llround(fraction * static_cast<double>(kSide) * kSide));
    for (std::size_t p = 0; p < covered; ++p) pred.ids[p] = 1;
    if (covered > 0) pred.segments.push_back(SegmentRecord{1, 1});

    const PQReport report = compute_pq(match_segments(pred, gt, o), o);
    for (const CategoryPq& row : report.classes) {
        if (row.id == 1) return row.pq;
    }
    return 0.0;
}

}  // namespace tasckit
