#pragma once

#include <vector>

#include "tasckit/synth.hpp"

namespace tasckit::testutil {

inline Ontology tiny_ontology() {
    return Ontology(std::vector<Category>{
        {1, "ground", false},
        {2, "sky", false},
        {3, "wall", false},
        {4, "box", true},
        {5, "blob", true},
        {6, "disc", true},
    });
}

inline SoftMask random_soft_mask(SplitMix64& rng, int w, int h, double lo = 0.0,
                                 double hi = 1.0) {
    SoftMask m(w, h, 0.0);
    for (double& v : m.data) v = rng.uniform(lo, hi);
    return m;
}

inline HardMask random_hard_mask(SplitMix64& rng, int w, int h, double density = 0.5) {
    HardMask m(w, h, false);
    for (auto& v : m.data) v = rng.bernoulli(density) ? 1 : 0;
    return m;
}

// Rectangle mask covering [x0, x1) x [y0, y1).
inline HardMask rect_mask(int w, int h, int x0, int y0, int x1, int y1) {
    HardMask m(w, h, false);
    for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) m.set(x, y, true);
    }
    return m;
}

inline Instance random_instance(SplitMix64& rng, int image_w, int image_h,
                                std::uint32_t category, double mask_lo = 0.05,
                                double mask_hi = 0.95) {
    const int bw = rng.uniform_int(2, std::max(2, image_w / 2));
    const int bh = rng.uniform_int(2, std::max(2, image_h / 2));
    const int x0 = rng.uniform_int(0, image_w - bw);
    const int y0 = rng.uniform_int(0, image_h - bh);
    Instance inst;
    inst.box = BBox(x0, y0, x0 + bw, y0 + bh);
    inst.category = category;
    inst.assigned_category = category;
    inst.confidence = rng.uniform(0.05, 1.0);
    inst.mask = random_soft_mask(rng, rng.uniform_int(1, 4), rng.uniform_int(1, 4), mask_lo,
                                 mask_hi);
    return inst;
}

}  // namespace tasckit::testutil
