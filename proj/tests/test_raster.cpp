#include <doctest.h>

#include "tasckit/raster.hpp"
#include "util.hpp"

using namespace tasckit;
using namespace tasckit::testutil;

TEST_CASE("iou_hard basics") {
    HardMask a = rect_mask(20, 20, 0, 0, 10, 10);
    CHECK(iou_hard(a, a) == 1.0);

    HardMask b = rect_mask(20, 20, 10, 10, 20, 20);
    CHECK(iou_hard(a, b) == 0.0);

    // 100 px vs 100 px with 80 px overlap -> 80/120
    HardMask p = rect_mask(30, 30, 0, 0, 10, 10);
    HardMask q = rect_mask(30, 30, 2, 0, 12, 10);
    CHECK(iou_hard(p, q) == doctest::Approx(80.0 / 120.0).epsilon(1e-12));

    HardMask empty(20, 20, false);
    CHECK(iou_hard(empty, empty) == 0.0);

    HardMask other_size(10, 10, false);
    CHECK_THROWS_AS(iou_hard(a, other_size), InvariantError);
}

TEST_CASE("iou_box basics") {
    BBox a(0, 0, 1, 1);
    CHECK(iou_box(a, a) == 1.0);
    CHECK(iou_box(a, BBox(5, 5, 6, 6)) == 0.0);
    // unit squares offset by half in x: 0.5 / 1.5
    CHECK(iou_box(a, BBox(0.5, 0, 1.5, 1)) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    // touching edges do not overlap
    CHECK(iou_box(a, BBox(1, 0, 2, 1)) == 0.0);
}

TEST_CASE("coverage basics") {
    HardMask a = rect_mask(20, 20, 0, 0, 5, 10);   // 50 px
    HardMask b = rect_mask(20, 20, 0, 0, 20, 20);  // superset
    CHECK(coverage(a, b) == 1.0);

    HardMask c = rect_mask(20, 20, 10, 10, 20, 20);
    CHECK(coverage(a, c) == 0.0);

    // |a| = 50, |a ∩ d| = 35 -> 0.7
    HardMask d = rect_mask(20, 20, 0, 0, 5, 7);
    CHECK(coverage(a, d) == doctest::Approx(0.7).epsilon(1e-12));

    HardMask empty(20, 20, false);
    CHECK(coverage(empty, b) == 0.0);
    CHECK_THROWS_AS(coverage(a, HardMask(3, 3, false)), InvariantError);
}

TEST_CASE("iou symmetry and bounds") {
    SplitMix64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        HardMask a = random_hard_mask(rng, 16, 12, rng.uniform(0.0, 1.0));
        HardMask b = random_hard_mask(rng, 16, 12, rng.uniform(0.0, 1.0));
        const double ab = iou_hard(a, b);
        CHECK(ab == iou_hard(b, a));
        CHECK(ab >= 0.0);
        CHECK(ab <= 1.0);
        if (!a.empty_mask()) {
            CHECK(iou_hard(a, a) == 1.0);
            CHECK(coverage(a, a) == 1.0);
        }

        BBox ba(rng.uniform(0, 10), rng.uniform(0, 10), rng.uniform(10.5, 20),
                rng.uniform(10.5, 20));
        BBox bb(rng.uniform(0, 10), rng.uniform(0, 10), rng.uniform(10.5, 20),
                rng.uniform(10.5, 20));
        const double bab = iou_box(ba, bb);
        CHECK(bab == iou_box(bb, ba));
        CHECK(bab >= 0.0);
        CHECK(bab <= 1.0);
    }
}

TEST_CASE("bilinear_resize identity and constants") {
    SplitMix64 rng(12);
    SoftMask m = random_soft_mask(rng, 5, 4);
    SoftMask same = bilinear_resize(m, 5, 4);
    CHECK(same.data == m.data);

    SoftMask constant(7, 3, 0.375);
    SoftMask scaled = bilinear_resize(constant, 13, 9);
    for (double v : scaled.data) CHECK(v == 0.375);
}

TEST_CASE("bilinear_resize half-pixel centers") {
    // [0, 1] widened to 4 samples at half-pixel centers.
    SoftMask m(2, 1, std::vector<double>{0.0, 1.0});
    SoftMask out = bilinear_resize(m, 4, 1);
    REQUIRE(out.data.size() == 4);
    CHECK(out.data[0] == 0.0);
    CHECK(out.data[1] == 0.25);
    CHECK(out.data[2] == 0.75);
    CHECK(out.data[3] == 1.0);
}

TEST_CASE("bilinear_resize preserves global bounds") {
    SplitMix64 rng(13);
    for (int trial = 0; trial < 30; ++trial) {
        SoftMask m = random_soft_mask(rng, rng.uniform_int(1, 9), rng.uniform_int(1, 9));
        const auto [lo_it, hi_it] = std::minmax_element(m.data.begin(), m.data.end());
        SoftMask out = bilinear_resize(m, rng.uniform_int(1, 15), rng.uniform_int(1, 15));
        for (double v : out.data) {
            CHECK(v >= *lo_it);
            CHECK(v <= *hi_it);
        }
    }
}

TEST_CASE("threshold semantics") {
    SoftMask zeros(4, 4, 0.0);
    CHECK(threshold(zeros, 0.5).area() == 0);

    SoftMask ones(4, 4, 1.0);
    CHECK(threshold(ones, 0.5).area() == 16);

    // strictly greater: a value exactly at the cutoff stays background
    SoftMask boundary(1, 1, 0.5);
    CHECK(threshold(boundary, 0.5).area() == 0);

    SplitMix64 rng(14);
    SoftMask m = random_soft_mask(rng, 12, 12);
    std::size_t prev = threshold(m, 0.0).area();
    for (double t : {0.1, 0.3, 0.5, 0.7, 0.9, 1.0}) {
        const std::size_t cur = threshold(m, t).area();
        CHECK(cur <= prev);
        prev = cur;
    }
}

TEST_CASE("raster type invariants") {
    CHECK_THROWS_AS(HardMask(0, 4, false), InvariantError);
    CHECK_THROWS_AS(SoftMask(2, 2, std::vector<double>{0.0, 0.5, 1.0}), InvariantError);
    CHECK_THROWS_AS(SoftMask(2, 1, std::vector<double>{0.0, 1.5}), InvariantError);
    CHECK_THROWS_AS(HardMask(2, 1, std::vector<std::uint8_t>{0, 2}), InvariantError);
    CHECK_THROWS_AS(BBox(3, 0, 3, 1), InvariantError);
    CHECK_THROWS_AS(BBox(0, 0, 1, std::numeric_limits<double>::infinity()), InvariantError);
}
