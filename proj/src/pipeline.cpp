#include "tasckit/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <thread>

namespace tasckit {

namespace {

// Runs fn(i) for i in [0, n) on `threads` workers. Exceptions are captured
// per index and rethrown from the lowest failing index.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
    if (n == 0) return;
    const int workers = std::max(1, std::min<int>(threads, static_cast<int>(n)));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> cursor{0};
    std::vector<std::exception_ptr> errors(n);
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int t = 0; t < workers; ++t) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = cursor.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    }
    for (std::thread& t : pool) t.join();
    for (const std::exception_ptr& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

}  // namespace

int resolve_threads(int flag_value) {
    if (flag_value > 0) return flag_value;
    if (const char* env = std::getenv("TASC_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

std::vector<FuseOutcome> run_fuse(const Manifest& manifest, const Ontology& o,
                                  const FuseOptions& options,
                                  const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    const int threads = resolve_threads(options.threads);

    std::vector<FuseOutcome> outcomes(manifest.entries.size());
    parallel_for(manifest.entries.size(), threads, [&](std::size_t i) {
        const ManifestEntry& entry = manifest.entries[i];
        FuseOutcome& out = outcomes[i];
        out.id = entry.id;
        try {
            if (!entry.instances || !entry.scores) {
                throw MismatchError("entry '" + entry.id +
                                    "' needs both instance and score paths for fusion");
            }
            const std::vector<Instance> raw = load_instances(*entry.instances);
            const ScoreVolume scores = load_score_volume(*entry.scores);
            for (const Instance& inst : raw) {
                if (!o.contains(inst.category) || !o.is_thing(inst.category)) {
                    throw InvariantError("entry '" + entry.id + "': instance category " +
                                         std::to_string(inst.category) + " is not a thing class");
                }
            }

            std::vector<Instance> kept = box_nms(raw, options.fusion);
            kept = mask_nms(std::move(kept), scores.width, scores.height, options.fusion);
            const SoftMask stuff_mask = stuff_side_mask(scores, o);
            const HardMask guide = threshold(stuff_mask, options.tasc.mask_threshold);
            const LabelMap labels = semantic_argmax(scores, o);
            PanopticResult fused = mask_guided_fuse(kept, labels, guide, o, options.fusion);

            const std::filesystem::path seg_path = out_dir / (entry.id + ".tseg");
            save_segment_map(seg_path, fused.map);
            out.segments = seg_path;
        } catch (const Error& e) {
            out.error = e.what();
            out.error_code = e.exit_code();
        }
    });

    Manifest produced;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        if (outcomes[i].error_code != 0) continue;
        ManifestEntry entry;
        entry.id = manifest.entries[i].id;
        entry.instances = manifest.entries[i].instances;
        entry.scores = manifest.entries[i].scores;
        entry.segments = outcomes[i].segments;
        produced.entries.push_back(std::move(entry));
    }
    save_manifest(out_dir / "manifest.json", produced);
    return outcomes;
}

EvalResult run_eval(const Manifest& pred, const Manifest& gt, const Ontology& o,
                    const EvalOptions& options) {
    std::map<std::string, const ManifestEntry*> pred_by_id;
    std::map<std::string, const ManifestEntry*> gt_by_id;
    for (const ManifestEntry& e : pred.entries) pred_by_id[e.id] = &e;
    for (const ManifestEntry& e : gt.entries) gt_by_id[e.id] = &e;

    std::vector<std::string> missing, extra;
    for (const auto& [id, e] : gt_by_id) {
        if (pred_by_id.count(id) == 0) missing.push_back(id);
    }
    for (const auto& [id, e] : pred_by_id) {
        if (gt_by_id.count(id) == 0) extra.push_back(id);
    }
    if (!missing.empty() || !extra.empty()) {
        std::ostringstream msg;
        msg << "prediction/ground-truth image ids do not align;";
        if (!missing.empty()) {
            msg << " missing from predictions:";
            for (const std::string& id : missing) msg << " '" << id << "'";
        }
        if (!extra.empty()) {
            msg << " unknown prediction ids:";
            for (const std::string& id : extra) msg << " '" << id << "'";
        }
        throw MismatchError(msg.str());
    }

    std::vector<const ManifestEntry*> gt_entries;
    gt_entries.reserve(gt_by_id.size());
    for (const auto& [id, e] : gt_by_id) gt_entries.push_back(e);

    const int threads = resolve_threads(options.threads);

    struct PerImage {
        MatchResult match;
        LabelMap pred_labels;
        LabelMap gt_labels;
        SegmentMap gt_map;
        std::vector<Instance> instances;
    };
    std::vector<PerImage> per_image(gt_entries.size());

    parallel_for(gt_entries.size(), threads, [&](std::size_t i) {
        const ManifestEntry& gt_entry = *gt_entries[i];
        const ManifestEntry& pred_entry = *pred_by_id.at(gt_entry.id);
        if (!gt_entry.segments) {
            throw MismatchError("ground-truth entry '" + gt_entry.id + "' has no segments path");
        }
        PerImage& slot = per_image[i];
        SegmentMap gt_map = load_segment_map(*gt_entry.segments);

        if (options.pq || options.miou) {
            if (!pred_entry.segments) {
                throw MismatchError("prediction entry '" + gt_entry.id +
                                    "' has no segments path");
            }
            const SegmentMap pred_map = load_segment_map(*pred_entry.segments);
            if (options.pq) slot.match = match_segments(pred_map, gt_map, o);
            if (options.miou) {
                slot.pred_labels = to_labelmap(pred_map);
                slot.gt_labels = to_labelmap(gt_map);
            }
        }
        if (options.ap) {
            if (!pred_entry.instances) {
                throw MismatchError("prediction entry '" + gt_entry.id +
                                    "' has no instances path (required for AP)");
            }
            slot.instances = load_instances(*pred_entry.instances);
        }
        slot.gt_map = std::move(gt_map);
    });

    // Merge in id order; the accumulators are order-insensitive anyway.
    EvalResult result;
    if (options.pq) {
        PqAccumulator acc;
        for (const PerImage& img : per_image) acc.add(img.match);
        result.pq = acc.report(o);
    }
    if (options.miou) {
        MiouAccumulator acc;
        for (const PerImage& img : per_image) acc.add(img.pred_labels, img.gt_labels, o);
        result.miou = acc.report(o);
    }
    if (options.ap) {
        std::vector<std::pair<Instance, std::string>> preds;
        std::vector<std::pair<SegmentMap, std::string>> gts;
        for (std::size_t i = 0; i < per_image.size(); ++i) {
            for (const Instance& inst : per_image[i].instances) {
                preds.emplace_back(inst, gt_entries[i]->id);
            }
            gts.emplace_back(per_image[i].gt_map, gt_entries[i]->id);
        }
        result.ap = compute_mask_ap(preds, gts, o);
    }
    return result;
}

namespace {

std::string fixed(double v, int digits = 4) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

}  // namespace

std::string format_report_table(const PQReport* pq, const MiouReport* miou, const ApReport* ap) {
    std::ostringstream out;
    if (pq != nullptr) {
        std::map<std::uint32_t, double> iou_by_id;
        std::set<std::uint32_t> iou_present;
        if (miou != nullptr) {
            for (const auto& row : miou->classes) iou_by_id[row.id] = row.iou;
        }
        std::size_t name_w = 5;
        for (const CategoryPq& row : pq->classes) name_w = std::max(name_w, row.name.size());
        auto line = [&](const std::string& name, const std::string& a, const std::string& b,
                        const std::string& c, const std::string& d) {
            out << "  " << name << std::string(name_w + 2 - name.size(), ' ');
            for (const std::string* col : {&a, &b, &c, &d}) {
                out << std::string(col->size() < 8 ? 8 - col->size() : 1, ' ') << *col;
            }
            out << "\n";
        };
        out << "panoptic quality\n";
        line("class", "PQ", "SQ", "RQ", "IoU");
        for (const CategoryPq& row : pq->classes) {
            const auto it = iou_by_id.find(row.id);
            line(row.name, fixed(row.pq), fixed(row.sq), fixed(row.rq),
                 it == iou_by_id.end() ? "-" : fixed(it->second));
        }
        auto agg_line = [&](const std::string& name, const PqAggregate& a) {
            line(name, fixed(a.pq), fixed(a.sq), fixed(a.rq),
                 name == "all" && miou != nullptr ? fixed(miou->mean) : "-");
        };
        agg_line("all", pq->all);
        agg_line("things", pq->things);
        agg_line("stuff", pq->stuff);
    } else if (miou != nullptr) {
        out << "semantic IoU\n";
        for (const auto& row : miou->classes) {
            out << "  " << row.name << ": " << fixed(row.iou) << "\n";
        }
        out << "  mean: " << fixed(miou->mean) << "\n";
    }
    if (ap != nullptr) {
        out << "mask AP: " << fixed(ap->ap) << "  AP50: " << fixed(ap->ap50) << "\n";
    }
    return out.str();
}

}  // namespace tasckit
