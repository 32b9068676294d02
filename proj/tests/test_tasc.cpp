#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>

#include "tasckit/synth.hpp"
#include "tasckit/tasc.hpp"
#include "util.hpp"

using namespace tasckit;
using namespace tasckit::testutil;

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Volume where every pixel gives `win` to the category at `winner(x, y)`
// and spreads the rest uniformly.
ScoreVolume scores_for(const Ontology& o, int w, int h, double win,
                       const std::function<std::uint32_t(int, int)>& winner) {
    ScoreVolume v(w, h, static_cast<int>(o.size()));
    const double lose = (1.0 - win) / static_cast<double>(o.size() - 1);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < v.num_classes; ++c) v.at(c, x, y) = lose;
            v.at(static_cast<int>(o.index_of(winner(x, y))), x, y) = win;
        }
    }
    v.validate();
    return v;
}

Instance box_instance(double x0, double y0, double x1, double y1, const SoftMask& mask,
                      std::uint32_t category = 4, double confidence = 1.0) {
    Instance inst;
    inst.box = BBox(x0, y0, x1, y1);
    inst.category = category;
    inst.assigned_category = category;
    inst.confidence = confidence;
    inst.mask = mask;
    return inst;
}

double max_rel_error(const std::vector<InstanceMaskGrad>& analytic,
                     const std::vector<std::vector<double>>& fd, int image_w, int image_h) {
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        const std::size_t cells =
            static_cast<std::size_t>(analytic[i].mask_width) * analytic[i].mask_height;
        std::vector<double> dense(static_cast<std::size_t>(image_w) * image_h * cells, 0.0);
        for (const auto& e : analytic[i].entries) {
            dense[static_cast<std::size_t>(e.pixel) * cells + e.cell] = e.value;
        }
        REQUIRE(fd[i].size() == dense.size());
        for (std::size_t k = 0; k < dense.size(); ++k) {
            const double a = dense[k];
            const double f = fd[i][k];
            const double scale = std::max(std::abs(a), std::abs(f));
            if (scale <= 1e-9) continue;  // both numerically zero
            worst = std::max(worst, std::abs(a - f) / scale);
        }
    }
    return worst;
}

}  // namespace

TEST_CASE("ScoreVolume validation") {
    CHECK_THROWS_AS(ScoreVolume(2, 1, 2, std::vector<double>{0.5, 0.5, 0.2, 0.2}),
                    InvariantError);  // second pixel sums to 0.7
    CHECK_THROWS_AS(ScoreVolume(1, 1, 2, std::vector<double>{1.2, -0.2}), InvariantError);
    CHECK_NOTHROW(ScoreVolume(1, 1, 3, std::vector<double>{0.2, 0.3, 0.5}));
}

TEST_CASE("stuff_side_mask rules") {
    const Ontology o = tiny_ontology();  // 1..3 stuff, 4..6 things

    SUBCASE("stuff argmax pixels are zero") {
        const ScoreVolume v = scores_for(o, 4, 3, 0.9, [](int, int) { return 1u; });
        const SoftMask m = stuff_side_mask(v, o);
        for (double x : m.data) CHECK(x == 0.0);
    }
    SUBCASE("thing argmax above the cutoff keeps its score") {
        const ScoreVolume v = scores_for(o, 4, 3, 0.9, [](int, int) { return 5u; });
        const SoftMask m = stuff_side_mask(v, o);
        for (double x : m.data) CHECK(x == 0.9);
    }
    SUBCASE("thing argmax at 0.4 fails the cutoff") {
        ScoreVolume v(1, 1, 6);
        // thing id 4 wins with 0.4; the rest share 0.6
        for (int c = 0; c < 6; ++c) v.at(c, 0, 0) = 0.12;
        v.at(static_cast<int>(o.index_of(4)), 0, 0) = 0.4;
        v.validate();
        CHECK(stuff_side_mask(v, o).data[0] == 0.0);
    }
    SUBCASE("class count mismatch") {
        const ScoreVolume v(2, 2, 3);
        CHECK_THROWS_AS(stuff_side_mask(v, o), InvariantError);
    }
}

TEST_CASE("roi_flatten basics") {
    const TascConfig cfg;

    SUBCASE("no instances -> zero mask") {
        const SoftMask out = roi_flatten({}, 6, 5, cfg, FlattenMode::hard);
        for (double v : out.data) CHECK(v == 0.0);
    }
    SUBCASE("full-image all-ones instance -> all-ones output") {
        const Instance inst = box_instance(0, 0, 6, 5, SoftMask(3, 3, 1.0));
        const SoftMask out = roi_flatten({inst}, 6, 5, cfg, FlattenMode::hard);
        for (double v : out.data) CHECK(v == 1.0);
    }
    SUBCASE("two overlapping thresholded instances still give 1") {
        const Instance a = box_instance(0, 0, 4, 4, SoftMask(2, 2, 0.9));
        const Instance b = box_instance(2, 2, 6, 6, SoftMask(2, 2, 0.8), 5);
        const SoftMask out = roi_flatten({a, b}, 8, 8, cfg, FlattenMode::hard);
        CHECK(out.at(3, 3) == 1.0);  // covered by both -> 2/2
        CHECK(out.at(1, 1) == 1.0);
        CHECK(out.at(7, 7) == 0.0);
    }
    SUBCASE("box fully outside the canvas is an error") {
        const Instance inst = box_instance(10, 10, 12, 12, SoftMask(2, 2, 1.0));
        CHECK_THROWS_AS(roi_flatten({inst}, 8, 8, cfg, FlattenMode::hard), InvariantError);
    }
    SUBCASE("partially outside boxes clip") {
        const Instance inst = box_instance(-2, -2, 2, 2, SoftMask(2, 2, 1.0));
        const SoftMask out = roi_flatten({inst}, 8, 8, cfg, FlattenMode::hard);
        CHECK(out.at(0, 0) == 1.0);
        CHECK(out.at(1, 1) == 1.0);
        CHECK(out.at(2, 2) == 0.0);
    }
}

TEST_CASE("roi_flatten output bounds and permutation invariance") {
    const TascConfig cfg;
    SplitMix64 rng(31);
    for (int trial = 0; trial < 25; ++trial) {
        std::vector<Instance> instances;
        const int n = rng.uniform_int(1, 4);
        for (int i = 0; i < n; ++i) {
            instances.push_back(random_instance(rng, 10, 8, 4 + (i % 3)));
        }
        for (FlattenMode mode : {FlattenMode::hard, FlattenMode::soft}) {
            const SoftMask out = roi_flatten(instances, 10, 8, cfg, mode);
            for (double v : out.data) {
                CHECK(v >= 0.0);
                CHECK(v <= 1.0);
            }
            std::vector<Instance> shuffled = instances;
            std::reverse(shuffled.begin(), shuffled.end());
            const SoftMask out2 = roi_flatten(shuffled, 10, 8, cfg, mode);
            for (std::size_t p = 0; p < out.data.size(); ++p) {
                CHECK(out.data[p] == doctest::Approx(out2.data[p]).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("roi_flatten hard mode equals the union for disjoint boxes") {
    const TascConfig cfg;
    SplitMix64 rng(32);
    for (int trial = 0; trial < 20; ++trial) {
        // four disjoint quadrant boxes
        std::vector<Instance> instances;
        const int quads[4][4] = {{0, 0, 5, 4}, {5, 0, 10, 4}, {0, 4, 5, 8}, {5, 4, 10, 8}};
        const int n = rng.uniform_int(1, 4);
        for (int i = 0; i < n; ++i) {
            Instance inst = box_instance(quads[i][0], quads[i][1], quads[i][2], quads[i][3],
                                         random_soft_mask(rng, 3, 3), 4);
            instances.push_back(inst);
        }
        const SoftMask out = roi_flatten(instances, 10, 8, cfg, FlattenMode::hard);

        HardMask expected(10, 8, false);
        for (const Instance& inst : instances) {
            const HardMask r = rasterize_instance(inst, 10, 8, cfg.mask_threshold);
            for (std::size_t p = 0; p < r.data.size(); ++p) {
                if (r.data[p]) expected.data[p] = 1;
            }
        }
        for (std::size_t p = 0; p < out.data.size(); ++p) {
            CHECK(out.data[p] == (expected.data[p] ? 1.0 : 0.0));
        }
    }
}

TEST_CASE("soft mode approaches hard mode at high steepness") {
    TascConfig cfg;
    cfg.soft_steepness = 1e4;
    SplitMix64 rng(33);
    for (int trial = 0; trial < 20; ++trial) {
        // disjoint boxes; box-resolution masks so the pasted values (not just
        // the cells) stay bounded away from the 0.5 cutoff
        std::vector<Instance> instances;
        const int quads[4][4] = {{0, 0, 5, 4}, {5, 0, 10, 4}, {0, 4, 5, 8}, {5, 4, 10, 8}};
        const int n = rng.uniform_int(1, 4);
        for (int i = 0; i < n; ++i) {
            SoftMask m = random_soft_mask(rng, quads[i][2] - quads[i][0],
                                          quads[i][3] - quads[i][1]);
            for (double& v : m.data) v = v < 0.5 ? rng.uniform(0.0, 0.4) : rng.uniform(0.6, 1.0);
            instances.push_back(
                box_instance(quads[i][0], quads[i][1], quads[i][2], quads[i][3], m, 4));
        }
        const SoftMask hard = roi_flatten(instances, 10, 8, cfg, FlattenMode::hard);
        const SoftMask soft = roi_flatten(instances, 10, 8, cfg, FlattenMode::soft);
        for (std::size_t p = 0; p < hard.data.size(); ++p) {
            CHECK(std::abs(hard.data[p] - soft.data[p]) <= 1e-3);
        }
    }

    SUBCASE("overlapping boxes whose values agree also converge") {
        const Instance high_a = box_instance(0, 0, 6, 6, SoftMask(2, 2, 0.9), 4);
        const Instance high_b = box_instance(2, 2, 8, 8, SoftMask(2, 2, 0.8), 5);
        const SoftMask hard = roi_flatten({high_a, high_b}, 8, 8, cfg, FlattenMode::hard);
        const SoftMask soft = roi_flatten({high_a, high_b}, 8, 8, cfg, FlattenMode::soft);
        for (std::size_t p = 0; p < hard.data.size(); ++p) {
            CHECK(std::abs(hard.data[p] - soft.data[p]) <= 1e-3);
        }
    }
}

TEST_CASE("roi_flatten_soft_grad closed forms") {
    TascConfig cfg;
    cfg.soft_steepness = 10.0;

    SUBCASE("pixels outside the footprint carry no entries") {
        const Instance inst = box_instance(0, 0, 2, 2, SoftMask(1, 1, 0.7));
        const auto grads = roi_flatten_soft_grad({inst}, 6, 6, cfg);
        REQUIRE(grads.size() == 1);
        for (const auto& e : grads[0].entries) {
            const int x = e.pixel % 6;
            const int y = e.pixel / 6;
            CHECK(x < 2);
            CHECK(y < 2);
        }
        CHECK(grads[0].entries.size() == 4);
    }

    SUBCASE("1x1 mask over the full image: d out / d m = k sigma'(k (m - 0.5))") {
        const double m = 0.7;
        const Instance inst = box_instance(0, 0, 5, 4, SoftMask(1, 1, m));
        const auto grads = roi_flatten_soft_grad({inst}, 5, 4, cfg);
        REQUIRE(grads.size() == 1);
        REQUIRE(grads[0].entries.size() == 20);  // every pixel, single cell
        const double s = sigmoid(cfg.soft_steepness * (m - 0.5));
        const double expected = cfg.soft_steepness * s * (1.0 - s);
        for (const auto& e : grads[0].entries) {
            CHECK(e.cell == 0);
            CHECK(e.value == doctest::Approx(expected).epsilon(1e-12));
        }
    }
}

TEST_CASE("roi_flatten_soft_grad matches finite differences") {
    TascConfig cfg;
    cfg.soft_steepness = 10.0;
    SplitMix64 rng(34);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<Instance> instances;
        const int n = rng.uniform_int(1, 3);
        for (int i = 0; i < n; ++i) instances.push_back(random_instance(rng, 8, 8, 4));
        const auto analytic = roi_flatten_soft_grad(instances, 8, 8, cfg);
        const auto fd = oracle_fd_grad(instances, 8, 8, cfg, 1e-4);
        CHECK(max_rel_error(analytic, fd, 8, 8) < 1e-4);
    }
}

TEST_CASE("tasc_residual contract") {
    TascConfig cfg;
    SplitMix64 rng(35);
    const SoftMask a = random_soft_mask(rng, 6, 5);

    CHECK(tasc_residual(a, a, cfg) == 0.0);

    const SoftMask ones(6, 5, 1.0);
    const SoftMask zeros(6, 5, 0.0);
    CHECK(tasc_residual(ones, zeros, cfg) == 1.0);

    cfg.lambda = 0.0;
    const SoftMask b = random_soft_mask(rng, 6, 5);
    CHECK(tasc_residual(a, b, cfg) == 0.0);

    cfg.lambda = 2.5;
    CHECK(tasc_residual(a, b, cfg) == tasc_residual(b, a, cfg));
    CHECK(tasc_residual(a, b, cfg) >= 0.0);

    // zero iff equal (lambda > 0)
    SoftMask c = a;
    c.data[7] = c.data[7] < 0.5 ? c.data[7] + 0.25 : c.data[7] - 0.25;
    CHECK(tasc_residual(a, c, cfg) > 0.0);

    CHECK_THROWS_AS(tasc_residual(a, SoftMask(3, 3, 0.0), cfg), InvariantError);
}

TEST_CASE("residual_image") {
    const SoftMask ones(4, 4, 1.0);
    const SoftMask zeros(4, 4, 0.0);
    for (double v : residual_image(ones, ones).data) CHECK(v == 0.0);
    for (double v : residual_image(ones, zeros).data) CHECK(v == 1.0);

    SplitMix64 rng(36);
    const SoftMask a = random_soft_mask(rng, 4, 4);
    const SoftMask b = random_soft_mask(rng, 4, 4);
    CHECK(residual_image(a, b).data == residual_image(b, a).data);
}

TEST_CASE("pixel_extent rounding") {
    const PixelExtent e = pixel_extent(BBox(1.2, 0.6, 4.8, 2.4));
    CHECK(e.x0 == 1);
    CHECK(e.y0 == 1);
    CHECK(e.x1 == 5);
    CHECK(e.y1 == 2);

    // degenerate extents widen to one pixel
    const PixelExtent tiny = pixel_extent(BBox(3.1, 3.1, 3.3, 3.3));
    CHECK(tiny.width() == 1);
    CHECK(tiny.height() == 1);
}
