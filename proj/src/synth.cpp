#include "tasckit/synth.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>
#include <unordered_set>

namespace tasckit {

std::uint64_t SplitMix64::next() {
    state_ += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

double SplitMix64::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double SplitMix64::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

int SplitMix64::uniform_int(int lo, int hi) {
    return lo + static_cast<int>(next() % static_cast<std::uint64_t>(hi - lo + 1));
}

bool SplitMix64::bernoulli(double p) { return uniform() < p; }

double SplitMix64::gaussian() {
    // Box-Muller, two uniforms per call so the stream layout is fixed.
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

SplitMix64 SplitMix64::split() { return SplitMix64(next()); }

namespace {

struct ShapeSpec {
    bool ellipse = false;
    int x0 = 0, y0 = 0, w = 0, h = 0;  // integer bounding box
    std::uint32_t category = 0;

    bool contains(int px, int py, int dx, int dy) const {
        const int bx0 = x0 + dx, by0 = y0 + dy;
        if (px < bx0 || px >= bx0 + w || py < by0 || py >= by0 + h) return false;
        if (!ellipse) return true;
        const double rx = w / 2.0, ry = h / 2.0;
        const double nx = (px + 0.5 - (bx0 + rx)) / rx;
        const double ny = (py + 0.5 - (by0 + ry)) / ry;
        return nx * nx + ny * ny <= 1.0;
    }

    bool box_intersects(const ShapeSpec& other) const {
        return x0 < other.x0 + other.w && other.x0 < x0 + w && y0 < other.y0 + other.h &&
               other.y0 < y0 + h;
    }
};

constexpr int kMinVisiblePixels = 4;
constexpr int kPlacementAttempts = 200;

void check_spec(const SceneSpec& spec) {
    if (spec.width < 8 || spec.height < 8) {
        throw InvariantError("SceneSpec: dimensions must be at least 8x8");
    }
    if (spec.num_stuff_regions < 1) {
        throw InvariantError("SceneSpec: at least one stuff region is required");
    }
    if (spec.num_instances < 0) {
        throw InvariantError("SceneSpec: num_instances must be non-negative");
    }
    const NoiseSpec& n = spec.noise;
    if (!(n.drop_probability >= 0.0 && n.drop_probability <= 1.0)) {
        throw InvariantError("SceneSpec: drop_probability must be in [0,1]");
    }
    if (n.boundary_jitter_px < 0.0 || n.confidence_sigma < 0.0) {
        throw InvariantError("SceneSpec: noise amplitudes must be non-negative");
    }
}

}  // namespace

Scene generate_scene(const SceneSpec& spec, const Ontology& o) {
    check_spec(spec);
    const int w = spec.width;
    const int h = spec.height;
    const std::size_t n_px = static_cast<std::size_t>(w) * h;

    std::vector<std::uint32_t> stuff_ids, thing_ids;
    for (const Category& c : o.categories()) {
        (c.is_thing ? thing_ids : stuff_ids).push_back(c.id);
    }
    if (stuff_ids.empty()) {
        throw InvariantError("generate_scene: ontology needs at least one stuff category");
    }
    if (spec.num_instances > 0 && thing_ids.empty()) {
        throw InvariantError("generate_scene: ontology needs a thing category for instances");
    }

    SplitMix64 rng(spec.seed);

    // Stuff background: base layer plus num_stuff_regions-1 rectangles.
    std::vector<std::uint32_t> stuff_layer(n_px, stuff_ids[0]);
    for (int r = 1; r < spec.num_stuff_regions; ++r) {
        const std::uint32_t cat = stuff_ids[static_cast<std::size_t>(r) % stuff_ids.size()];
        const int rw = rng.uniform_int(3, std::max(3, w / 2));
        const int rh = rng.uniform_int(3, std::max(3, h / 2));
        const int rx = rng.uniform_int(0, std::max(0, w - 3));
        const int ry = rng.uniform_int(0, std::max(0, h - 3));
        for (int y = ry; y < std::min(h, ry + rh); ++y) {
            for (int x = rx; x < std::min(w, rx + rw); ++x) {
                stuff_layer[static_cast<std::size_t>(y) * w + x] = cat;
            }
        }
    }

    // Instances: layered shapes, later ones occlude earlier ones. Keeping
    // same-category boxes disjoint and every instance at least
    // kMinVisiblePixels visible makes the zero-noise scene reproducible by
    // the fusion pipeline.
    std::vector<ShapeSpec> shapes;
    std::vector<int> owner(n_px, -1);
    std::vector<int> visible(static_cast<std::size_t>(spec.num_instances), 0);
    const int max_sw = std::max(4, w / 3);
    const int max_sh = std::max(4, h / 3);
    for (int i = 0; i < spec.num_instances; ++i) {
        bool placed = false;
        for (int attempt = 0; attempt < kPlacementAttempts && !placed; ++attempt) {
            ShapeSpec s;
            s.category = thing_ids[static_cast<std::size_t>(
                rng.uniform_int(0, static_cast<int>(thing_ids.size()) - 1))];
            s.ellipse = rng.bernoulli(0.5);
            s.w = rng.uniform_int(4, max_sw);
            s.h = rng.uniform_int(4, max_sh);
            s.x0 = rng.uniform_int(0, w - s.w);
            s.y0 = rng.uniform_int(0, h - s.h);

            bool ok = true;
            for (const ShapeSpec& prev : shapes) {
                if (prev.category == s.category && prev.box_intersects(s)) {
                    ok = false;
                    break;
                }
            }
            if (!ok) continue;

            // Would this placement starve an earlier instance?
            std::vector<int> stolen(shapes.size(), 0);
            int own_pixels = 0;
            for (int y = s.y0; y < s.y0 + s.h; ++y) {
                for (int x = s.x0; x < s.x0 + s.w; ++x) {
                    if (!s.contains(x, y, 0, 0)) continue;
                    ++own_pixels;
                    const int prev = owner[static_cast<std::size_t>(y) * w + x];
                    if (prev >= 0) ++stolen[prev];
                }
            }
            if (own_pixels < kMinVisiblePixels) continue;
            for (std::size_t j = 0; j < shapes.size(); ++j) {
                if (visible[j] - stolen[j] < kMinVisiblePixels) {
                    ok = false;
                    break;
                }
            }
            if (!ok) continue;

            for (int y = s.y0; y < s.y0 + s.h; ++y) {
                for (int x = s.x0; x < s.x0 + s.w; ++x) {
                    if (!s.contains(x, y, 0, 0)) continue;
                    const std::size_t p = static_cast<std::size_t>(y) * w + x;
                    if (owner[p] >= 0) --visible[owner[p]];
                    owner[p] = i;
                }
            }
            visible[i] = own_pixels;
            shapes.push_back(s);
            placed = true;
        }
        if (!placed) {
            throw InvariantError("generate_scene: spec infeasible, could not place instance " +
                                 std::to_string(i + 1) + " of " +
                                 std::to_string(spec.num_instances));
        }
    }

    // Ground truth segment map: one segment per instance, then one per
    // present stuff category.
    Scene scene;
    scene.gt = SegmentMap(w, h);
    for (std::size_t p = 0; p < n_px; ++p) {
        if (owner[p] >= 0) scene.gt.ids[p] = static_cast<std::uint32_t>(owner[p] + 1);
    }
    for (std::size_t i = 0; i < shapes.size(); ++i) {
        scene.gt.segments.push_back(
            SegmentRecord{static_cast<std::uint32_t>(i + 1), shapes[i].category});
    }
    std::map<std::uint32_t, std::uint32_t> stuff_segments;
    std::uint32_t next_id = static_cast<std::uint32_t>(shapes.size()) + 1;
    for (std::size_t p = 0; p < n_px; ++p) {
        if (owner[p] >= 0) continue;
        auto [it, inserted] = stuff_segments.emplace(stuff_layer[p], 0);
        if (inserted) it->second = next_id++;
        scene.gt.ids[p] = it->second;
    }
    for (const auto& [cat, seg_id] : stuff_segments) {
        scene.gt.segments.push_back(SegmentRecord{seg_id, cat});
    }
    std::sort(scene.gt.segments.begin(), scene.gt.segments.end(),
              [](const SegmentRecord& a, const SegmentRecord& b) { return a.id < b.id; });
    scene.gt.validate();

    // Predictions: jittered, possibly dropped copies of the ground truth,
    // re-layered in the same order.
    const NoiseSpec& noise = spec.noise;
    std::vector<bool> dropped(shapes.size(), false);
    std::vector<int> jx(shapes.size(), 0), jy(shapes.size(), 0);
    std::vector<double> confidence(shapes.size(), 1.0);
    for (std::size_t i = 0; i < shapes.size(); ++i) {
        dropped[i] = rng.bernoulli(noise.drop_probability);
        const double ux = rng.uniform(-1.0, 1.0) * noise.boundary_jitter_px;
        const double uy = rng.uniform(-1.0, 1.0) * noise.boundary_jitter_px;
        jx[i] = static_cast<int>(std::lround(ux));
        jy[i] = static_cast<int>(std::lround(uy));
        // Keep the jittered box on the canvas.
        jx[i] = std::clamp(jx[i], -shapes[i].x0, w - shapes[i].w - shapes[i].x0);
        jy[i] = std::clamp(jy[i], -shapes[i].y0, h - shapes[i].h - shapes[i].y0);
        confidence[i] = std::clamp(1.0 - std::abs(rng.gaussian()) * noise.confidence_sigma,
                                   0.05, 1.0);
    }

    std::vector<int> pred_owner(n_px, -1);
    for (std::size_t i = 0; i < shapes.size(); ++i) {
        if (dropped[i]) continue;
        const ShapeSpec& s = shapes[i];
        for (int y = s.y0 + jy[i]; y < s.y0 + jy[i] + s.h; ++y) {
            for (int x = s.x0 + jx[i]; x < s.x0 + jx[i] + s.w; ++x) {
                if (s.contains(x, y, jx[i], jy[i])) {
                    pred_owner[static_cast<std::size_t>(y) * w + x] = static_cast<int>(i);
                }
            }
        }
    }

    for (std::size_t i = 0; i < shapes.size(); ++i) {
        if (dropped[i]) continue;
        int bx0 = w, by0 = h, bx1 = -1, by1 = -1;
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                if (pred_owner[static_cast<std::size_t>(y) * w + x] != static_cast<int>(i)) {
                    continue;
                }
                bx0 = std::min(bx0, x);
                by0 = std::min(by0, y);
                bx1 = std::max(bx1, x);
                by1 = std::max(by1, y);
            }
        }
        if (bx1 < 0) continue;  // fully occluded after jitter: a missed detection

        Instance inst;
        inst.box = BBox(bx0, by0, bx1 + 1, by1 + 1);
        inst.category = shapes[i].category;
        inst.assigned_category = shapes[i].category;
        inst.confidence = confidence[i];
        // Box-resolution {0,1} mask: resizing to the box extent is the
        // identity, so the pipeline can reproduce the pixels exactly.
        SoftMask m(bx1 + 1 - bx0, by1 + 1 - by0, 0.0);
        for (int y = by0; y <= by1; ++y) {
            for (int x = bx0; x <= bx1; ++x) {
                if (pred_owner[static_cast<std::size_t>(y) * w + x] == static_cast<int>(i)) {
                    m.at(x - bx0, y - by0) = 1.0;
                }
            }
        }
        inst.mask = std::move(m);
        scene.instances.push_back(std::move(inst));
    }

    // Scores follow the predicted labelmap; the winner keeps 1 minus a
    // noise-scaled deficit (capped so it still wins and passes the 0.5
    // cutoff), losers share the remainder.
    const int n_classes = static_cast<int>(o.size());
    scene.scores = ScoreVolume(w, h, n_classes);
    const std::size_t plane = scene.scores.plane_size();
    for (std::size_t p = 0; p < n_px; ++p) {
        const std::uint32_t cat =
            pred_owner[p] >= 0 ? shapes[static_cast<std::size_t>(pred_owner[p])].category
                               : stuff_layer[p];
        const double g = rng.gaussian();
        double deficit = std::min(std::abs(g) * noise.confidence_sigma, 0.49);
        if (n_classes == 1) deficit = 0.0;
        const double win = 1.0 - deficit;
        const double lose = n_classes > 1 ? (1.0 - win) / (n_classes - 1) : 0.0;
        for (int c = 0; c < n_classes; ++c) {
            scene.scores.data[static_cast<std::size_t>(c) * plane + p] = lose;
        }
        scene.scores.data[o.index_of(cat) * plane + p] = win;
    }
    scene.scores.validate();
    return scene;
}

MatchResult oracle_match(const SegmentMap& pred, const SegmentMap& gt, const Ontology& o) {
    if (pred.width != gt.width || pred.height != gt.height) {
        throw InvariantError("oracle_match: prediction and ground truth dimension mismatch");
    }
    pred.validate();
    gt.validate();
    for (const SegmentRecord& s : pred.segments) o.category(s.category);
    for (const SegmentRecord& s : gt.segments) o.category(s.category);

    const std::size_t n_px = pred.ids.size();
    auto count_where = [&](auto&& keep) {
        std::uint64_t c = 0;
        for (std::size_t p = 0; p < n_px; ++p) {
            if (keep(pred.ids[p], gt.ids[p])) ++c;
        }
        return c;
    };

    MatchResult result;
    std::unordered_set<std::uint32_t> matched_pred, matched_gt;
    for (const SegmentRecord& ps : pred.segments) {
        for (const SegmentRecord& gs : gt.segments) {
            if (ps.category != gs.category) continue;
            const std::uint64_t inter =
                count_where([&](std::uint32_t a, std::uint32_t b) { return a == ps.id && b == gs.id; });
            if (inter == 0) continue;
            const std::uint64_t pred_area =
                count_where([&](std::uint32_t a, std::uint32_t) { return a == ps.id; });
            const std::uint64_t pred_on_void =
                count_where([&](std::uint32_t a, std::uint32_t b) { return a == ps.id && b == 0; });
            const std::uint64_t gt_area =
                count_where([&](std::uint32_t, std::uint32_t b) { return b == gs.id; });
            const double iou = static_cast<double>(inter) /
                               static_cast<double>(pred_area - pred_on_void + gt_area - inter);
            if (iou > 0.5) {
                result.categories[ps.category].tp.push_back(TpMatch{ps.id, gs.id, iou});
                matched_pred.insert(ps.id);
                matched_gt.insert(gs.id);
            }
        }
    }
    for (const SegmentRecord& ps : pred.segments) {
        if (matched_pred.count(ps.id)) continue;
        const std::uint64_t pred_area =
            count_where([&](std::uint32_t a, std::uint32_t) { return a == ps.id; });
        const std::uint64_t pred_on_void =
            count_where([&](std::uint32_t a, std::uint32_t b) { return a == ps.id && b == 0; });
        if (2 * pred_on_void > pred_area) continue;
        result.categories[ps.category].fp.push_back(ps.id);
    }
    for (const SegmentRecord& gs : gt.segments) {
        if (matched_gt.count(gs.id)) continue;
        result.categories[gs.category].fn.push_back(gs.id);
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

std::vector<std::vector<double>> oracle_fd_grad(const std::vector<Instance>& instances,
                                                int image_w, int image_h, const TascConfig& cfg,
                                                double step) {
    if (!(step > 0.0)) throw InvariantError("oracle_fd_grad: step must be positive");
    const std::size_t n_px = static_cast<std::size_t>(image_w) * image_h;
    std::vector<std::vector<double>> grads(instances.size());
    for (std::size_t i = 0; i < instances.size(); ++i) {
        const std::size_t cells = instances[i].mask.data.size();
        grads[i].assign(n_px * cells, 0.0);
        for (std::size_t c = 0; c < cells; ++c) {
            std::vector<Instance> plus = instances;
            std::vector<Instance> minus = instances;
            plus[i].mask.data[c] += step;
            minus[i].mask.data[c] -= step;
            const SoftMask out_plus = roi_flatten(plus, image_w, image_h, cfg, FlattenMode::soft);
            const SoftMask out_minus = roi_flatten(minus, image_w, image_h, cfg, FlattenMode::soft);
            for (std::size_t p = 0; p < n_px; ++p) {
                grads[i][p * cells + c] =
                    (out_plus.data[p] - out_minus.data[p]) / (2.0 * step);
            }
        }
    }
    return grads;
}

}  // namespace tasckit
