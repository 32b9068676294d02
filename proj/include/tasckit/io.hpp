#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "tasckit/fusion.hpp"
#include "tasckit/metrics.hpp"
#include "tasckit/ontology.hpp"
#include "tasckit/tasc.hpp"

namespace tasckit {

// Binary containers are little-endian: 4-byte magic, u32 version, header
// u32 fields, then the payload. f32 payloads round-trip bit-exactly.
//   "TSEG" v1: width, height, segment_count, u32 ids row-major,
//              records (u32 id, u32 category, f32 confidence; NaN = absent)
//   "TSCV" v1: width, height, num_classes, f32 planes class-major
//   "TSCM" v1: TSCV layout with num_classes = 1

void write_segment_map(std::ostream& out, const SegmentMap& map);
SegmentMap read_segment_map(std::istream& in);
// Also writes a human-readable JSON sidecar next to the file
// (extension replaced with .json): dimensions plus per-segment records.
void save_segment_map(const std::filesystem::path& path, const SegmentMap& map);
SegmentMap load_segment_map(const std::filesystem::path& path);

void write_score_volume(std::ostream& out, const ScoreVolume& scores);
ScoreVolume read_score_volume(std::istream& in);
void save_score_volume(const std::filesystem::path& path, const ScoreVolume& scores);
ScoreVolume load_score_volume(const std::filesystem::path& path);

void write_soft_mask(std::ostream& out, const SoftMask& mask);
SoftMask read_soft_mask(std::istream& in);
void save_soft_mask(const std::filesystem::path& path, const SoftMask& mask);
SoftMask load_soft_mask(const std::filesystem::path& path);

// Instance list JSON: an array of
//   {"box": [x0, y0, x1, y1], "category": id, "confidence": c,
//    "assigned_category": id, "mask": [[row ...], ...]}
// assigned_category defaults to category when absent.
std::string instances_to_json(const std::vector<Instance>& instances);
std::vector<Instance> instances_from_json(const std::string& text);
void save_instances(const std::filesystem::path& path, const std::vector<Instance>& instances);
std::vector<Instance> load_instances(const std::filesystem::path& path);

// Ontology JSON: {"categories": [{"id", "name", "is_thing"}, ...]}; id 0
// is reserved.
std::string ontology_to_json(const Ontology& o);
Ontology ontology_from_json(const std::string& text);
void save_ontology(const std::filesystem::path& path, const Ontology& o);
Ontology load_ontology(const std::filesystem::path& path);

// Evaluation report JSON: per-class rows (pq/sq/rq plus semantic iou when
// available) and all/things/stuff aggregates, mirroring the usual
// PQ | SQ | RQ | IoU table columns.
std::string report_to_json(const PQReport* pq, const MiouReport* miou, const ApReport* ap);

struct EvalReportData {
    std::optional<PQReport> pq;
    std::optional<MiouReport> miou;
    std::optional<ApReport> ap;
};

EvalReportData report_from_json(const std::string& text);

struct ManifestEntry {
    std::string id;
    std::optional<std::filesystem::path> instances;  // instance JSON
    std::optional<std::filesystem::path> scores;     // TSCV
    std::optional<std::filesystem::path> segments;   // TSEG
};

// {"entries": [{"id", "instances"?, "scores"?, "segments"?}, ...]}.
// Relative paths resolve against the manifest's directory on load and are
// written relative to it on save when possible.
struct Manifest {
    std::vector<ManifestEntry> entries;
};

Manifest load_manifest(const std::filesystem::path& path);
void save_manifest(const std::filesystem::path& path, const Manifest& manifest);

// Writes text to path exactly as given (binary mode, no translation).
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace tasckit
