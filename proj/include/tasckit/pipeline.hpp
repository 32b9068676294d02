#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "tasckit/io.hpp"

namespace tasckit {

// Worker count resolution: explicit flag value (> 0) wins, then the
// TASC_THREADS environment variable, then the hardware concurrency.
int resolve_threads(int flag_value);

struct FuseOptions {
    FusionConfig fusion;
    TascConfig tasc;
    int threads = 0;  // 0 = resolve automatically
};

struct FuseOutcome {
    std::string id;
    std::filesystem::path segments;  // written TSEG (empty on failure)
    std::string error;               // empty on success
    int error_code = 0;
};

// Per entry: instances -> box NMS -> mask NMS; scores -> stuff-side mask ->
// 0.5 guide + semantic argmax; then mask-guided fusion. Writes one TSEG
// (plus sidecar) per image into out_dir and a manifest.json referencing
// them; input instance/score paths are carried through. Entries fail
// independently.
std::vector<FuseOutcome> run_fuse(const Manifest& manifest, const Ontology& o,
                                  const FuseOptions& options,
                                  const std::filesystem::path& out_dir);

struct EvalOptions {
    bool pq = true;
    bool miou = false;
    bool ap = false;
    int threads = 0;
};

struct EvalResult {
    PQReport pq;
    MiouReport miou;
    ApReport ap;
};

// Accumulates the requested metrics across aligned image ids. The id sets
// of both manifests must coincide. PQ and mIoU read each side's segments;
// mask AP reads the prediction entries' instance lists against the
// ground-truth segments.
EvalResult run_eval(const Manifest& pred, const Manifest& gt, const Ontology& o,
                    const EvalOptions& options);

// Per-class console table with PQ | SQ | RQ | IoU columns plus aggregate
// rows (and an AP line when present).
std::string format_report_table(const PQReport* pq, const MiouReport* miou, const ApReport* ap);

}  // namespace tasckit
