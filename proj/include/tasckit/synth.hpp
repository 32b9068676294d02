#pragma once

#include <cstdint>
#include <vector>

#include "tasckit/fusion.hpp"
#include "tasckit/metrics.hpp"
#include "tasckit/tasc.hpp"

namespace tasckit {

// Deterministic 64-bit splittable generator (splitmix64). Every random
// choice in this module flows through one of these, so a scene is a pure
// function of its seed.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next();
    double uniform();                       // [0, 1)
    double uniform(double lo, double hi);   // [lo, hi)
    int uniform_int(int lo, int hi);        // [lo, hi] inclusive
    bool bernoulli(double p);
    double gaussian();                      // standard normal (Box-Muller)
    SplitMix64 split();                     // independent child stream

private:
    std::uint64_t state_;
};

struct NoiseSpec {
    double boundary_jitter_px = 0.0;  // instance shape translation amplitude
    double confidence_sigma = 0.0;    // score / confidence degradation
    double drop_probability = 0.0;    // chance a prediction is missing
};

struct SceneSpec {
    std::uint64_t seed = 0;
    int width = 64;
    int height = 64;
    int num_stuff_regions = 2;
    int num_instances = 3;
    NoiseSpec noise;
};

struct Scene {
    SegmentMap gt;
    std::vector<Instance> instances;  // predictions
    ScoreVolume scores;               // predictions, normalized per pixel
};

// Layered rectangles and ellipses over a stuff background. With zero noise
// the predictions reproduce the ground truth exactly through the full
// NMS + fusion pipeline. Same-category instances never share box area, so
// per-class box NMS cannot suppress a noise-free prediction.
Scene generate_scene(const SceneSpec& spec, const Ontology& o);

// Exhaustive all-pairs pixel-count matcher; the reference implementation
// match_segments is checked against. Deliberately O(P * G * pixels).
MatchResult oracle_match(const SegmentMap& pred, const SegmentMap& gt, const Ontology& o);

// Central finite differences of roi_flatten (soft mode) over every
// local-mask cell. Dense layout per instance:
// index = pixel * (mask_w * mask_h) + cell.
std::vector<std::vector<double>> oracle_fd_grad(const std::vector<Instance>& instances,
                                                int image_w, int image_h, const TascConfig& cfg,
                                                double step);

}  // namespace tasckit
