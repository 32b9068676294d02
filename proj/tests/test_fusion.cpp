#include <doctest.h>

#include <algorithm>

#include "tasckit/fusion.hpp"
#include "util.hpp"

using namespace tasckit;
using namespace tasckit::testutil;

namespace {

Instance rect_instance(double x0, double y0, double x1, double y1, std::uint32_t category,
                       double confidence) {
    Instance inst;
    inst.box = BBox(x0, y0, x1, y1);
    inst.category = category;
    inst.assigned_category = category;
    inst.confidence = confidence;
    inst.mask = SoftMask(1, 1, 1.0);  // solid box
    return inst;
}

// Instance whose rasterization is exactly the given pixel set.
Instance pixels_instance(const HardMask& pixels, std::uint32_t category, double confidence) {
    int x0 = pixels.width, y0 = pixels.height, x1 = -1, y1 = -1;
    for (int y = 0; y < pixels.height; ++y) {
        for (int x = 0; x < pixels.width; ++x) {
            if (!pixels.at(x, y)) continue;
            x0 = std::min(x0, x);
            y0 = std::min(y0, y);
            x1 = std::max(x1, x);
            y1 = std::max(y1, y);
        }
    }
    REQUIRE(x1 >= 0);
    Instance inst;
    inst.box = BBox(x0, y0, x1 + 1, y1 + 1);
    inst.category = category;
    inst.assigned_category = category;
    inst.confidence = confidence;
    inst.mask = SoftMask(x1 + 1 - x0, y1 + 1 - y0, 0.0);
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
            if (pixels.at(x, y)) inst.mask.at(x - x0, y - y0) = 1.0;
        }
    }
    return inst;
}

}  // namespace

TEST_CASE("box_nms") {
    const FusionConfig cfg;

    SUBCASE("same-class overlap above the cutoff is suppressed") {
        // IoU = 2/4 = 0.5 > 0.3
        const Instance a = rect_instance(0, 0, 3, 1, 4, 0.9);
        const Instance b = rect_instance(1, 0, 4, 1, 4, 0.8);
        const auto kept = box_nms({a, b}, cfg);
        REQUIRE(kept.size() == 1);
        CHECK(kept[0].confidence == 0.9);
    }
    SUBCASE("identical boxes of different classes both survive") {
        const Instance a = rect_instance(0, 0, 3, 3, 4, 0.9);
        const Instance b = rect_instance(0, 0, 3, 3, 5, 0.8);
        CHECK(box_nms({a, b}, cfg).size() == 2);
    }
    SUBCASE("single instance unchanged") {
        const Instance a = rect_instance(0, 0, 3, 3, 4, 0.7);
        const auto kept = box_nms({a}, cfg);
        REQUIRE(kept.size() == 1);
        CHECK(kept[0].box.x1 == 3.0);
    }
    SUBCASE("output sorted by descending confidence") {
        const Instance a = rect_instance(0, 0, 2, 2, 4, 0.3);
        const Instance b = rect_instance(4, 4, 6, 6, 4, 0.9);
        const Instance c = rect_instance(8, 8, 10, 10, 4, 0.6);
        const auto kept = box_nms({a, b, c}, cfg);
        REQUIRE(kept.size() == 3);
        CHECK(kept[0].confidence == 0.9);
        CHECK(kept[1].confidence == 0.6);
        CHECK(kept[2].confidence == 0.3);
    }
}

TEST_CASE("mask_nms") {
    const FusionConfig cfg;

    SUBCASE("duplicate masks suppress across classes") {
        const Instance a = rect_instance(0, 0, 3, 3, 4, 0.9);
        Instance b = rect_instance(0, 0, 3, 3, 5, 0.8);
        const auto kept = mask_nms({a, b}, 8, 8, cfg);
        REQUIRE(kept.size() == 1);
        CHECK(kept[0].category == 4);
    }
    SUBCASE("disjoint masks are kept") {
        const Instance a = rect_instance(0, 0, 3, 3, 4, 0.9);
        const Instance b = rect_instance(4, 4, 7, 7, 5, 0.8);
        CHECK(mask_nms({a, b}, 8, 8, cfg).size() == 2);
    }
    SUBCASE("cross-class IoU just above the cutoff is suppressed") {
        // |a| = 65, |b| = 66, overlap 31 -> union 100, IoU 0.31 > 0.3
        HardMask ma(20, 20, false), mb(20, 20, false);
        for (int i = 0; i < 65; ++i) ma.data[i] = 1;
        for (int i = 34; i < 100; ++i) mb.data[i] = 1;
        const Instance a = pixels_instance(ma, 4, 0.9);
        const Instance b = pixels_instance(mb, 5, 0.8);
        CHECK(iou_hard(rasterize_instance(a, 20, 20), rasterize_instance(b, 20, 20)) ==
              doctest::Approx(0.31).epsilon(1e-12));
        const auto kept = mask_nms({a, b}, 20, 20, cfg);
        REQUIRE(kept.size() == 1);
        CHECK(kept[0].category == 4);
    }
}

TEST_CASE("semantic_argmax") {
    SUBCASE("one-class volume is constant") {
        const Ontology o(std::vector<Category>{{3, "road", false}});
        const ScoreVolume v(2, 2, 1, std::vector<double>(4, 1.0));
        const LabelMap m = semantic_argmax(v, o);
        for (auto id : m.ids) CHECK(id == 3);
    }
    SUBCASE("exact ties break toward the lowest id") {
        const Ontology o(std::vector<Category>{{7, "a", false}, {3, "b", true}});
        ScoreVolume v(1, 1, 2, std::vector<double>{0.5, 0.5});
        CHECK(semantic_argmax(v, o).ids[0] == 3);
    }
    SUBCASE("uniform scores pick the lowest id everywhere") {
        const Ontology o(std::vector<Category>{{2, "a", false}, {5, "b", false}, {9, "c", true}});
        const ScoreVolume v(3, 2, 3, std::vector<double>(18, 1.0 / 3.0));
        for (auto id : semantic_argmax(v, o).ids) CHECK(id == 2);
    }
}

TEST_CASE("mask_guided_fuse gates") {
    const Ontology o = tiny_ontology();
    const FusionConfig cfg;
    const LabelMap stuff_labels(10, 10, 1);  // all ground

    SUBCASE("instance fully inside the guide is accepted") {
        const HardMask guide = rect_mask(10, 10, 0, 0, 6, 6);
        const Instance a = rect_instance(1, 1, 5, 5, 4, 0.9);
        const PanopticResult r = mask_guided_fuse({a}, stuff_labels, guide, o, cfg);
        REQUIRE(r.accepted.size() == 1);
        CHECK(r.map.segments.size() == 2);  // instance + ground
        CHECK(r.map.at(2, 2) == 1);
    }

    SUBCASE("overlap 30/70 with placed pixels is rejected") {
        // first: 50 px; second: 50 px sharing 30 -> IoU 30/70 ~ 0.43 >= 0.4
        const HardMask guide(10, 10, true);
        const Instance first = rect_instance(0, 0, 10, 5, 4, 0.9);   // rows 0-4
        const Instance second = rect_instance(0, 2, 10, 7, 5, 0.8);  // rows 2-6, 30 px shared
        const PanopticResult r = mask_guided_fuse({first, second}, stuff_labels, guide, o, cfg);
        REQUIRE(r.accepted.size() == 1);
        CHECK(r.accepted[0] == 0);
    }

    SUBCASE("coverage 0.69 of the guide is rejected, 0.70 accepted") {
        // instance of 100 px; guide covers 69 (then 70) of them
        const Instance inst = rect_instance(0, 0, 10, 10, 4, 0.9);
        HardMask guide(10, 10, false);
        for (int i = 0; i < 69; ++i) guide.data[i] = 1;
        CHECK(mask_guided_fuse({inst}, stuff_labels, guide, o, cfg).accepted.empty());
        guide.data[69] = 1;
        CHECK(mask_guided_fuse({inst}, stuff_labels, guide, o, cfg).accepted.size() == 1);
    }

    SUBCASE("unclaimed thing-class pixels become void") {
        LabelMap labels(4, 4, 1);
        labels.at(3, 3) = 4;  // thing class with no accepted instance
        const HardMask guide(4, 4, false);
        const PanopticResult r = mask_guided_fuse({}, labels, guide, o, cfg);
        CHECK(r.map.at(3, 3) == 0);
        CHECK(r.map.at(0, 0) != 0);
    }
}

TEST_CASE("mask_guided_fuse properties") {
    const Ontology o = tiny_ontology();
    SplitMix64 rng(41);

    for (int trial = 0; trial < 30; ++trial) {
        const int w = 16, h = 16;
        FusionConfig cfg;
        LabelMap labels(w, h, rng.bernoulli(0.5) ? 1u : 2u);
        HardMask guide = random_hard_mask(rng, w, h, 0.8);
        std::vector<Instance> instances;
        const int n = rng.uniform_int(1, 6);
        for (int i = 0; i < n; ++i) {
            Instance inst = random_instance(rng, w, h, 4 + (i % 3));
            inst.confidence = rng.uniform(0.1, 1.0);
            instances.push_back(inst);
        }

        const PanopticResult base = mask_guided_fuse(instances, labels, guide, o, cfg);

        // accepted instances claim pairwise disjoint pixel sets
        {
            std::vector<std::uint32_t> seen;
            for (std::uint32_t id : base.map.ids) {
                if (id != 0) seen.push_back(id);
            }
            // every nonzero pixel belongs to exactly one listed segment
            base.map.validate();
        }

        // greedy prefix stability: appending a strictly weaker instance
        // never disturbs previous placements
        {
            std::vector<Instance> extended = instances;
            Instance weak = random_instance(rng, w, h, 4);
            weak.confidence = 0.01;
            extended.push_back(weak);
            const PanopticResult ext = mask_guided_fuse(extended, labels, guide, o, cfg);
            REQUIRE(ext.accepted.size() >= base.accepted.size());
            CHECK(std::equal(base.accepted.begin(), base.accepted.end(), ext.accepted.begin()));
        }

        // relaxing either gate never shrinks the accepted set (sampled)
        {
            FusionConfig looser = cfg;
            looser.overlap_max = 0.45;
            looser.mask_cover_min = 0.65;
            const PanopticResult relaxed = mask_guided_fuse(instances, labels, guide, o, looser);
            for (std::size_t idx : base.accepted) {
                CHECK(std::count(relaxed.accepted.begin(), relaxed.accepted.end(), idx) == 1);
            }
        }
    }
}

TEST_CASE("segments_from_labelmap") {
    const Ontology o = tiny_ontology();

    SUBCASE("all void -> empty segment list") {
        const SegmentMap m = segments_from_labelmap(LabelMap(4, 4, 0), o);
        CHECK(m.segments.empty());
        for (auto id : m.ids) CHECK(id == 0);
    }
    SUBCASE("disconnected regions of one stuff class form one segment") {
        LabelMap labels(6, 2, 2);
        for (int y = 0; y < 2; ++y) {
            labels.at(0, y) = 1;
            labels.at(5, y) = 1;  // two separated "ground" strips
        }
        const SegmentMap m = segments_from_labelmap(labels, o);
        REQUIRE(m.segments.size() == 2);
        CHECK(m.at(0, 0) == m.at(5, 1));
    }
    SUBCASE("one stuff class covering the canvas") {
        const SegmentMap m = segments_from_labelmap(LabelMap(7, 5, 3), o);
        REQUIRE(m.segments.size() == 1);
        std::size_t area = 0;
        for (auto id : m.ids) area += id == m.segments[0].id;
        CHECK(area == 35);
    }
    SUBCASE("thing pixels become void") {
        const SegmentMap m = segments_from_labelmap(LabelMap(3, 3, 5), o);
        CHECK(m.segments.empty());
        for (auto id : m.ids) CHECK(id == 0);
    }
}

TEST_CASE("SegmentMap validation") {
    SegmentMap m(4, 4);
    m.at(0, 0) = 1;
    m.segments.push_back(SegmentRecord{1, 2});
    CHECK_NOTHROW(m.validate());

    SUBCASE("raster id without a record") {
        m.at(1, 1) = 9;
        CHECK_THROWS_AS(m.validate(), InvariantError);
    }
    SUBCASE("record without raster pixels") {
        m.segments.push_back(SegmentRecord{3, 2});
        CHECK_THROWS_AS(m.validate(), InvariantError);
    }
    SUBCASE("duplicate record ids") {
        m.segments.push_back(SegmentRecord{1, 4});
        CHECK_THROWS_AS(m.validate(), InvariantError);
    }
    SUBCASE("void id listed") {
        m.segments.push_back(SegmentRecord{0, 2});
        CHECK_THROWS_AS(m.validate(), InvariantError);
    }
}

TEST_CASE("to_labelmap maps segment pixels to categories") {
    SegmentMap m(3, 1);
    m.at(0, 0) = 1;
    m.at(1, 0) = 2;
    m.segments.push_back(SegmentRecord{1, 4});
    m.segments.push_back(SegmentRecord{2, 1});
    const LabelMap labels = to_labelmap(m);
    CHECK(labels.at(0, 0) == 4);
    CHECK(labels.at(1, 0) == 1);
    CHECK(labels.at(2, 0) == 0);
}
