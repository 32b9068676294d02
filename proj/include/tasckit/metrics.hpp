#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "tasckit/fusion.hpp"
#include "tasckit/ontology.hpp"

namespace tasckit {

struct TpMatch {
    std::uint32_t pred_id = 0;
    std::uint32_t gt_id = 0;
    double iou = 0.0;
};

struct CategoryMatches {
    std::vector<TpMatch> tp;        // sorted by (pred_id, gt_id)
    std::vector<std::uint32_t> fp;  // unmatched prediction ids, sorted
    std::vector<std::uint32_t> fn;  // unmatched ground-truth ids, sorted
};

// Per-category matching outcome for one image pair.
struct MatchResult {
    std::map<std::uint32_t, CategoryMatches> categories;
};

// Match same-category segment pairs with IoU strictly above 0.5; the rest
// are false positives / false negatives. Ground-truth void pixels are
// excluded from both intersection and union, and predictions lying more
// than half inside ground-truth void are dropped before FP counting.
MatchResult match_segments(const SegmentMap& pred, const SegmentMap& gt, const Ontology& o);

struct CategoryPq {
    std::uint32_t id = 0;
    std::string name;
    bool is_thing = false;
    long tp = 0;
    long fp = 0;
    long fn = 0;
    double pq = 0.0;
    double sq = 0.0;
    double rq = 0.0;
};

struct PqAggregate {
    int categories = 0;
    long tp = 0;
    long fp = 0;
    long fn = 0;
    double pq = 0.0;
    double sq = 0.0;
    double rq = 0.0;
};

// Per-class rows cover only categories with tp+fp+fn > 0; aggregates are
// unweighted means over those rows, split by thing/stuff.
struct PQReport {
    std::vector<CategoryPq> classes;
    PqAggregate all;
    PqAggregate things;
    PqAggregate stuff;
};

// Accumulates match results across images. The per-category IoU lists are
// sorted before summation, so any accumulation order produces an identical
// report.
class PqAccumulator {
public:
    void add(const MatchResult& m);
    PQReport report(const Ontology& o) const;

private:
    struct Bucket {
        std::vector<double> ious;
        long fp = 0;
        long fn = 0;
    };
    std::map<std::uint32_t, Bucket> buckets_;
};

PQReport compute_pq(const MatchResult& m, const Ontology& o);

struct MiouReport {
    struct Row {
        std::uint32_t id = 0;
        std::string name;
        bool in_gt = false;  // rows not present in ground truth are excluded from the mean
        double iou = 0.0;
    };
    std::vector<Row> classes;
    double mean = 0.0;
};

// Confusion-count accumulator for semantic IoU; ground-truth void pixels
// are ignored entirely.
class MiouAccumulator {
public:
    void add(const LabelMap& pred, const LabelMap& gt, const Ontology& o);
    MiouReport report(const Ontology& o) const;

private:
    struct Counts {
        std::uint64_t intersection = 0;
        std::uint64_t pred = 0;
        std::uint64_t gt = 0;
    };
    std::map<std::uint32_t, Counts> counts_;
};

MiouReport compute_miou(const LabelMap& pred, const LabelMap& gt, const Ontology& o);

struct ApReport {
    struct Row {
        std::uint32_t id = 0;
        std::string name;
        double ap = 0.0;
        double ap50 = 0.0;
        // One value per IoU threshold 0.50, 0.55, ..., 0.95.
        std::vector<double> per_threshold;
    };
    std::vector<Row> classes;  // thing categories with ground-truth instances
    double ap = 0.0;
    double ap50 = 0.0;
};

// Mask average precision over IoU thresholds 0.50:0.05:0.95 with 101-point
// interpolated precision-recall areas. Ground-truth instances are the
// thing-category segments of each image's SegmentMap. Prediction image ids
// must exist among the ground-truth ids.
ApReport compute_mask_ap(const std::vector<std::pair<Instance, std::string>>& preds,
                         const std::vector<std::pair<SegmentMap, std::string>>& gts,
                         const Ontology& o);

// PQ of a synthetic one-stuff-class scene where `fraction` of the class is
// predicted correctly and the remainder is left void.
double stuff_bias_probe(double fraction);

}  // namespace tasckit
