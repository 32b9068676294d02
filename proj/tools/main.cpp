#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tasckit/io.hpp"
#include "tasckit/pipeline.hpp"
#include "tasckit/synth.hpp"

namespace fs = std::filesystem;
using namespace tasckit;

namespace {

Ontology default_ontology() {
    return Ontology(std::vector<Category>{
        {1, "ground", false},
        {2, "sky", false},
        {3, "wall", false},
        {4, "box", true},
        {5, "blob", true},
        {6, "disc", true},
    });
}

struct SynthArgs {
    std::string out_dir;
    std::string ontology_path;
    std::uint64_t seed = 0;
    int count = 1;
    int width = 64;
    int height = 64;
    int stuff_regions = 2;
    int instances = 3;
    double jitter = 0.0;
    double conf_noise = 0.0;
    double drop = 0.0;
};

int run_synth(const SynthArgs& args) {
    const fs::path out_dir = args.out_dir;
    fs::create_directories(out_dir);

    Ontology o;
    if (!args.ontology_path.empty()) {
        o = load_ontology(args.ontology_path);
    } else {
        o = default_ontology();
        save_ontology(out_dir / "ontology.json", o);
    }

    Manifest manifest;
    for (int i = 0; i < args.count; ++i) {
        SceneSpec spec;
        spec.seed = args.seed + static_cast<std::uint64_t>(i);
        spec.width = args.width;
        spec.height = args.height;
        spec.num_stuff_regions = args.stuff_regions;
        spec.num_instances = args.instances;
        spec.noise.boundary_jitter_px = args.jitter;
        spec.noise.confidence_sigma = args.conf_noise;
        spec.noise.drop_probability = args.drop;

        const Scene scene = generate_scene(spec, o);
        const std::string id = "scene_" + std::to_string(spec.seed);
        ManifestEntry entry;
        entry.id = id;
        entry.segments = out_dir / (id + ".tseg");
        entry.scores = out_dir / (id + "_scores.tscv");
        entry.instances = out_dir / (id + "_instances.json");
        save_segment_map(*entry.segments, scene.gt);
        save_score_volume(*entry.scores, scene.scores);
        save_instances(*entry.instances, scene.instances);
        manifest.entries.push_back(std::move(entry));
    }
    save_manifest(out_dir / "manifest.json", manifest);
    std::cout << "wrote " << manifest.entries.size() << " scene(s) to " << out_dir.string()
              << "\n";
    return 0;
}

struct FuseArgs {
    std::string manifest_path;
    std::string ontology_path;
    std::string out_dir;
    FuseOptions options;
};

int run_fuse_cmd(const FuseArgs& args) {
    const Manifest manifest = load_manifest(args.manifest_path);
    const Ontology o = load_ontology(args.ontology_path);
    const std::vector<FuseOutcome> outcomes =
        run_fuse(manifest, o, args.options, args.out_dir);

    int exit_code = 0;
    std::size_t ok = 0;
    for (const FuseOutcome& out : outcomes) {
        if (out.error_code == 0) {
            ++ok;
        } else {
            std::cerr << "error: " << out.id << ": " << out.error << "\n";
            if (exit_code == 0) exit_code = out.error_code;
        }
    }
    std::cout << "fused " << ok << "/" << outcomes.size() << " image(s) into "
              << fs::path(args.out_dir).string() << "\n";
    return exit_code;
}

struct EvalArgs {
    std::string pred_path;
    std::string gt_path;
    std::string ontology_path;
    std::string report_path;
    bool pq = false;
    bool miou = false;
    bool ap = false;
    int threads = 0;
};

int run_eval_cmd(const EvalArgs& args) {
    EvalOptions options;
    options.pq = args.pq;
    options.miou = args.miou;
    options.ap = args.ap;
    options.threads = args.threads;
    if (!args.pq && !args.miou && !args.ap) options.pq = true;

    const Manifest pred = load_manifest(args.pred_path);
    const Manifest gt = load_manifest(args.gt_path);
    const Ontology o = load_ontology(args.ontology_path);
    const EvalResult result = run_eval(pred, gt, o, options);

    const PQReport* pq = options.pq ? &result.pq : nullptr;
    const MiouReport* miou = options.miou ? &result.miou : nullptr;
    const ApReport* ap = options.ap ? &result.ap : nullptr;
    std::cout << format_report_table(pq, miou, ap);
    if (!args.report_path.empty()) {
        write_text_file(args.report_path, report_to_json(pq, miou, ap));
    }
    return 0;
}

struct TascArgs {
    std::string instances_path;
    std::string scores_path;
    std::string ontology_path;
    std::string out_path;
    TascConfig config;
    bool soft = false;
};

int run_tasc_cmd(const TascArgs& args) {
    const std::vector<Instance> instances = load_instances(args.instances_path);
    const ScoreVolume scores = load_score_volume(args.scores_path);
    const Ontology o = load_ontology(args.ontology_path);
    for (const Instance& inst : instances) {
        if (!o.contains(inst.category) || !o.is_thing(inst.category)) {
            throw InvariantError("instance category " + std::to_string(inst.category) +
                                 " is not a thing class");
        }
    }

    const SoftMask stuff = stuff_side_mask(scores, o);
    const SoftMask things = roi_flatten(instances, scores.width, scores.height, args.config,
                                        args.soft ? FlattenMode::soft : FlattenMode::hard);
    const double residual = tasc_residual(stuff, things, args.config);
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", residual);
    std::cout << buf << "\n";
    if (!args.out_path.empty()) {
        save_soft_mask(args.out_path, residual_image(stuff, things));
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"things/stuff consistency masks, mask-guided panoptic fusion, and "
                 "segmentation metrics"};
    app.require_subcommand(1);

    SynthArgs synth_args;
    CLI::App* synth = app.add_subcommand("synth", "generate synthetic scenes");
    synth->add_option("--out", synth_args.out_dir, "output directory")->required();
    synth->add_option("--ontology", synth_args.ontology_path,
                      "ontology JSON (default: built-in catalog, written to the output dir)");
    synth->add_option("--seed", synth_args.seed, "first scene seed");
    synth->add_option("--count", synth_args.count, "number of scenes")
        ->check(CLI::PositiveNumber);
    synth->add_option("--width", synth_args.width, "canvas width");
    synth->add_option("--height", synth_args.height, "canvas height");
    synth->add_option("--stuff-regions", synth_args.stuff_regions, "stuff region count");
    synth->add_option("--instances", synth_args.instances, "instance count");
    synth->add_option("--jitter", synth_args.jitter, "boundary jitter in pixels");
    synth->add_option("--conf-noise", synth_args.conf_noise, "confidence noise sigma");
    synth->add_option("--drop", synth_args.drop, "prediction drop probability");

    FuseArgs fuse_args;
    CLI::App* fuse = app.add_subcommand("fuse", "NMS + mask-guided panoptic fusion");
    fuse->add_option("--manifest", fuse_args.manifest_path, "input manifest JSON")->required();
    fuse->add_option("--ontology", fuse_args.ontology_path, "ontology JSON")->required();
    fuse->add_option("--out", fuse_args.out_dir, "output directory")->required();
    fuse->add_option("--mask-threshold", fuse_args.options.tasc.mask_threshold,
                     "stuff-side guide cutoff (default 0.5)");
    fuse->add_option("--overlap-max", fuse_args.options.fusion.overlap_max,
                     "reject instances at or above this IoU with placed pixels (default 0.4)");
    fuse->add_option("--cover-min", fuse_args.options.fusion.mask_cover_min,
                     "required guide coverage (default 0.7)");
    fuse->add_option("--box-nms", fuse_args.options.fusion.box_nms_iou,
                     "per-class box NMS cutoff (default 0.3)");
    fuse->add_option("--mask-nms", fuse_args.options.fusion.mask_nms_iou,
                     "all-class mask NMS cutoff (default 0.3)");
    fuse->add_flag("--guide-iou", fuse_args.options.fusion.guide_gate_uses_iou,
                   "gate (b) uses literal IoU against the guide instead of coverage");
    fuse->add_flag("--pairwise-overlap", fuse_args.options.fusion.pairwise_overlap,
                   "gate (a) uses max pairwise IoU instead of union IoU");
    fuse->add_option("--threads", fuse_args.options.threads,
                     "worker count (default: TASC_THREADS or all cores)");

    EvalArgs eval_args;
    CLI::App* eval = app.add_subcommand("eval", "PQ / mIoU / mask AP evaluation");
    eval->add_option("--pred", eval_args.pred_path, "prediction manifest JSON")->required();
    eval->add_option("--gt", eval_args.gt_path, "ground-truth manifest JSON")->required();
    eval->add_option("--ontology", eval_args.ontology_path, "ontology JSON")->required();
    eval->add_option("--report", eval_args.report_path, "write the report JSON here");
    eval->add_flag("--pq", eval_args.pq, "panoptic quality (default when no metric is chosen)");
    eval->add_flag("--miou", eval_args.miou, "semantic mean IoU");
    eval->add_flag("--ap", eval_args.ap, "mask AP over IoU 0.50:0.05:0.95");
    eval->add_option("--threads", eval_args.threads,
                     "worker count (default: TASC_THREADS or all cores)");

    TascArgs tasc_args;
    CLI::App* tasc = app.add_subcommand(
        "tasc-residual", "things/stuff consistency residual between the two heads");
    tasc->add_option("--instances", tasc_args.instances_path, "instance JSON")->required();
    tasc->add_option("--scores", tasc_args.scores_path, "score volume (TSCV)")->required();
    tasc->add_option("--ontology", tasc_args.ontology_path, "ontology JSON")->required();
    tasc->add_option("--out", tasc_args.out_path, "write the residual image (TSCM) here");
    tasc->add_option("--lambda", tasc_args.config.lambda, "residual weight (default 1.0)");
    tasc->add_option("--mask-threshold", tasc_args.config.mask_threshold,
                     "mask cutoff (default 0.5)");
    tasc->add_option("--steepness", tasc_args.config.soft_steepness,
                     "soft-mode logistic steepness (default 10)");
    tasc->add_flag("--soft", tasc_args.soft, "soft (differentiable) flatten mode");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;  // 1 = usage error
    }

    try {
        if (synth->parsed()) return run_synth(synth_args);
        if (fuse->parsed()) return run_fuse_cmd(fuse_args);
        if (eval->parsed()) return run_eval_cmd(eval_args);
        if (tasc->parsed()) return run_tasc_cmd(tasc_args);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
