#include "tasckit/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

namespace tasckit {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr std::uint32_t kFormatVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "codecs assume a little-endian host");

void put_u32(std::ostream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void put_f32(std::ostream& out, float v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t take_u32(std::istream& in, const char* what) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!in) throw FormatError(std::string("truncated file while reading ") + what);
    return v;
}

float take_f32(std::istream& in, const char* what) {
    float v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!in) throw FormatError(std::string("truncated file while reading ") + what);
    return v;
}

void write_magic(std::ostream& out, const char magic[5]) { out.write(magic, 4); }

void expect_magic(std::istream& in, const char magic[5]) {
    char got[4] = {0, 0, 0, 0};
    in.read(got, 4);
    if (!in || std::memcmp(got, magic, 4) != 0) {
        throw FormatError(std::string("bad magic, expected \"") + magic + "\"");
    }
}

void expect_version(std::istream& in, const char* what) {
    const std::uint32_t version = take_u32(in, "version");
    if (version != kFormatVersion) {
        throw FormatError(std::string(what) + ": unsupported version " +
                          std::to_string(version));
    }
}

void expect_eof(std::istream& in, const char* what) {
    char extra;
    if (in.read(&extra, 1)) {
        throw FormatError(std::string(what) + ": trailing bytes after payload");
    }
}

int checked_dim(std::uint32_t v, const char* what) {
    if (v < 1 || v > (1u << 16)) {
        throw FormatError(std::string(what) + " out of range: " + std::to_string(v));
    }
    return static_cast<int>(v);
}

void check_payload_size(std::uint64_t elements, const char* what) {
    if (elements > (1ull << 31)) {
        throw FormatError(std::string(what) + ": payload too large");
    }
}

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvariantError("cannot open file: " + path.string());
    return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvariantError("cannot write file: " + path.string());
    return out;
}

double json_number(const ordered_json& j, const char* what) {
    if (!j.is_number()) throw FormatError(std::string(what) + " must be a number");
    return j.get<double>();
}

const ordered_json& json_field(const ordered_json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end()) throw FormatError(std::string("missing field \"") + key + "\"");
    return *it;
}

ordered_json parse_json(const std::string& text, const char* what) {
    ordered_json j = ordered_json::parse(text, nullptr, false);
    if (j.is_discarded()) throw FormatError(std::string(what) + ": JSON parse error");
    return j;
}

}  // namespace

void write_segment_map(std::ostream& out, const SegmentMap& map) {
    map.validate();
    write_magic(out, "TSEG");
    put_u32(out, kFormatVersion);
    put_u32(out, static_cast<std::uint32_t>(map.width));
    put_u32(out, static_cast<std::uint32_t>(map.height));
    put_u32(out, static_cast<std::uint32_t>(map.segments.size()));
    for (std::uint32_t id : map.ids) put_u32(out, id);
    for (const SegmentRecord& s : map.segments) {
        put_u32(out, s.id);
        put_u32(out, s.category);
        put_f32(out, s.confidence);
    }
}

SegmentMap read_segment_map(std::istream& in) {
    expect_magic(in, "TSEG");
    expect_version(in, "TSEG");
    const int w = checked_dim(take_u32(in, "width"), "width");
    const int h = checked_dim(take_u32(in, "height"), "height");
    const std::uint32_t n_segments = take_u32(in, "segment_count");
    check_payload_size(static_cast<std::uint64_t>(w) * h, "TSEG");
    SegmentMap map(w, h);
    for (std::uint32_t& id : map.ids) id = take_u32(in, "segment ids");
    map.segments.reserve(n_segments);
    for (std::uint32_t i = 0; i < n_segments; ++i) {
        SegmentRecord s;
        s.id = take_u32(in, "segment record id");
        s.category = take_u32(in, "segment record category");
        s.confidence = take_f32(in, "segment record confidence");
        map.segments.push_back(s);
    }
    expect_eof(in, "TSEG");
    map.validate();
    return map;
}

namespace {

ordered_json segment_map_sidecar(const SegmentMap& map) {
    ordered_json j;
    j["width"] = map.width;
    j["height"] = map.height;
    ordered_json segments = ordered_json::array();
    for (const SegmentRecord& s : map.segments) {
        ordered_json rec;
        rec["id"] = s.id;
        rec["category"] = s.category;
        if (s.has_confidence()) {
            rec["confidence"] = static_cast<double>(s.confidence);
        } else {
            rec["confidence"] = nullptr;
        }
        segments.push_back(std::move(rec));
    }
    j["segments"] = std::move(segments);
    return j;
}

}  // namespace

void save_segment_map(const std::filesystem::path& path, const SegmentMap& map) {
    auto out = open_output(path);
    write_segment_map(out, map);
    if (!out) throw InvariantError("failed writing " + path.string());
    std::filesystem::path sidecar = path;
    sidecar.replace_extension(".json");
    write_text_file(sidecar, segment_map_sidecar(map).dump(2) + "\n");
}

SegmentMap load_segment_map(const std::filesystem::path& path) {
    auto in = open_input(path);
    return read_segment_map(in);
}

namespace {

void write_planes(std::ostream& out, const char magic[5], int w, int h, int classes,
                  const std::vector<double>& data) {
    write_magic(out, magic);
    put_u32(out, kFormatVersion);
    put_u32(out, static_cast<std::uint32_t>(w));
    put_u32(out, static_cast<std::uint32_t>(h));
    put_u32(out, static_cast<std::uint32_t>(classes));
    for (double v : data) put_f32(out, static_cast<float>(v));
}

std::vector<double> read_planes(std::istream& in, const char* what, int w, int h, int classes) {
    std::vector<double> data(static_cast<std::size_t>(w) * h * classes);
    for (double& v : data) v = static_cast<double>(take_f32(in, what));
    return data;
}

}  // namespace

void write_score_volume(std::ostream& out, const ScoreVolume& scores) {
    scores.validate();
    write_planes(out, "TSCV", scores.width, scores.height, scores.num_classes, scores.data);
}

ScoreVolume read_score_volume(std::istream& in) {
    expect_magic(in, "TSCV");
    expect_version(in, "TSCV");
    const int w = checked_dim(take_u32(in, "width"), "width");
    const int h = checked_dim(take_u32(in, "height"), "height");
    const int classes = checked_dim(take_u32(in, "num_classes"), "num_classes");
    check_payload_size(static_cast<std::uint64_t>(w) * h * classes, "TSCV");
    std::vector<double> data = read_planes(in, "score planes", w, h, classes);
    expect_eof(in, "TSCV");
    return ScoreVolume(w, h, classes, std::move(data));  // validates
}

void save_score_volume(const std::filesystem::path& path, const ScoreVolume& scores) {
    auto out = open_output(path);
    write_score_volume(out, scores);
    if (!out) throw InvariantError("failed writing " + path.string());
}

ScoreVolume load_score_volume(const std::filesystem::path& path) {
    auto in = open_input(path);
    return read_score_volume(in);
}

void write_soft_mask(std::ostream& out, const SoftMask& mask) {
    write_planes(out, "TSCM", mask.width, mask.height, 1, mask.data);
}

SoftMask read_soft_mask(std::istream& in) {
    expect_magic(in, "TSCM");
    expect_version(in, "TSCM");
    const int w = checked_dim(take_u32(in, "width"), "width");
    const int h = checked_dim(take_u32(in, "height"), "height");
    const std::uint32_t classes = take_u32(in, "num_classes");
    if (classes != 1) {
        throw FormatError("TSCM: num_classes must be 1, got " + std::to_string(classes));
    }
    std::vector<double> data = read_planes(in, "mask plane", w, h, 1);
    expect_eof(in, "TSCM");
    return SoftMask(w, h, std::move(data));  // validates the [0,1] range
}

void save_soft_mask(const std::filesystem::path& path, const SoftMask& mask) {
    auto out = open_output(path);
    write_soft_mask(out, mask);
    if (!out) throw InvariantError("failed writing " + path.string());
}

SoftMask load_soft_mask(const std::filesystem::path& path) {
    auto in = open_input(path);
    return read_soft_mask(in);
}

std::string instances_to_json(const std::vector<Instance>& instances) {
    ordered_json arr = ordered_json::array();
    for (const Instance& inst : instances) {
        ordered_json j;
        j["box"] = {inst.box.x0, inst.box.y0, inst.box.x1, inst.box.y1};
        j["category"] = inst.category;
        j["confidence"] = inst.confidence;
        j["assigned_category"] = inst.assigned_category;
        ordered_json rows = ordered_json::array();
        for (int y = 0; y < inst.mask.height; ++y) {
            ordered_json row = ordered_json::array();
            for (int x = 0; x < inst.mask.width; ++x) row.push_back(inst.mask.at(x, y));
            rows.push_back(std::move(row));
        }
        j["mask"] = std::move(rows);
        arr.push_back(std::move(j));
    }
    return arr.dump(2) + "\n";
}

std::vector<Instance> instances_from_json(const std::string& text) {
    const ordered_json arr = parse_json(text, "instances");
    if (!arr.is_array()) throw FormatError("instances: top-level JSON must be an array");
    std::vector<Instance> instances;
    instances.reserve(arr.size());
    for (const auto& j : arr) {
        if (!j.is_object()) throw FormatError("instances: entries must be objects");
        const auto& box = json_field(j, "box");
        if (!box.is_array() || box.size() != 4) {
            throw FormatError("instances: box must be [x0, y0, x1, y1]");
        }
        Instance inst;
        inst.box = BBox(json_number(box[0], "box"), json_number(box[1], "box"),
                        json_number(box[2], "box"), json_number(box[3], "box"));
        const auto& cat = json_field(j, "category");
        if (!cat.is_number_unsigned()) throw FormatError("instances: category must be unsigned");
        inst.category = cat.get<std::uint32_t>();
        inst.confidence = json_number(json_field(j, "confidence"), "confidence");
        if (!(inst.confidence >= 0.0 && inst.confidence <= 1.0)) {
            throw InvariantError("instances: confidence outside [0,1]");
        }
        if (auto it = j.find("assigned_category"); it != j.end()) {
            if (!it->is_number_unsigned()) {
                throw FormatError("instances: assigned_category must be unsigned");
            }
            inst.assigned_category = it->get<std::uint32_t>();
        } else {
            inst.assigned_category = inst.category;
        }
        const auto& rows = json_field(j, "mask");
        if (!rows.is_array() || rows.empty()) {
            throw FormatError("instances: mask must be a non-empty array of rows");
        }
        const std::size_t mh = rows.size();
        const std::size_t mw = rows[0].is_array() ? rows[0].size() : 0;
        if (mw == 0) throw FormatError("instances: mask rows must be non-empty arrays");
        std::vector<double> values;
        values.reserve(mw * mh);
        for (const auto& row : rows) {
            if (!row.is_array() || row.size() != mw) {
                throw FormatError("instances: mask rows must all have the same length");
            }
            for (const auto& v : row) values.push_back(json_number(v, "mask value"));
        }
        inst.mask = SoftMask(static_cast<int>(mw), static_cast<int>(mh), std::move(values));
        instances.push_back(std::move(inst));
    }
    return instances;
}

void save_instances(const std::filesystem::path& path, const std::vector<Instance>& instances) {
    write_text_file(path, instances_to_json(instances));
}

std::vector<Instance> load_instances(const std::filesystem::path& path) {
    auto in = open_input(path);
    std::stringstream buf;
    buf << in.rdbuf();
    return instances_from_json(buf.str());
}

std::string ontology_to_json(const Ontology& o) {
    ordered_json j;
    ordered_json cats = ordered_json::array();
    for (const Category& c : o.categories()) {
        ordered_json cat;
        cat["id"] = c.id;
        cat["name"] = c.name;
        cat["is_thing"] = c.is_thing;
        cats.push_back(std::move(cat));
    }
    j["categories"] = std::move(cats);
    return j.dump(2) + "\n";
}

Ontology ontology_from_json(const std::string& text) {
    const ordered_json j = parse_json(text, "ontology");
    if (!j.is_object()) throw FormatError("ontology: top-level JSON must be an object");
    const auto& cats = json_field(j, "categories");
    if (!cats.is_array()) throw FormatError("ontology: categories must be an array");
    std::vector<Category> categories;
    categories.reserve(cats.size());
    for (const auto& c : cats) {
        if (!c.is_object()) throw FormatError("ontology: category entries must be objects");
        const auto& id = json_field(c, "id");
        if (!id.is_number_unsigned()) throw FormatError("ontology: id must be unsigned");
        const auto& name = json_field(c, "name");
        if (!name.is_string()) throw FormatError("ontology: name must be a string");
        const auto& is_thing = json_field(c, "is_thing");
        if (!is_thing.is_boolean()) throw FormatError("ontology: is_thing must be a boolean");
        categories.push_back(
            Category{id.get<std::uint32_t>(), name.get<std::string>(), is_thing.get<bool>()});
    }
    return Ontology(std::move(categories));  // validates ids
}

void save_ontology(const std::filesystem::path& path, const Ontology& o) {
    write_text_file(path, ontology_to_json(o));
}

Ontology load_ontology(const std::filesystem::path& path) {
    auto in = open_input(path);
    std::stringstream buf;
    buf << in.rdbuf();
    return ontology_from_json(buf.str());
}

std::string report_to_json(const PQReport* pq, const MiouReport* miou, const ApReport* ap) {
    ordered_json j;
    if (pq != nullptr) {
        std::map<std::uint32_t, double> iou_by_id;
        if (miou != nullptr) {
            for (const auto& row : miou->classes) iou_by_id[row.id] = row.iou;
        }
        ordered_json classes = ordered_json::array();
        for (const CategoryPq& row : pq->classes) {
            ordered_json r;
            r["id"] = row.id;
            r["name"] = row.name;
            r["is_thing"] = row.is_thing;
            r["pq"] = row.pq;
            r["sq"] = row.sq;
            r["rq"] = row.rq;
            if (auto it = iou_by_id.find(row.id); it != iou_by_id.end()) r["iou"] = it->second;
            r["tp"] = row.tp;
            r["fp"] = row.fp;
            r["fn"] = row.fn;
            classes.push_back(std::move(r));
        }
        j["classes"] = std::move(classes);
        auto aggregate = [](const PqAggregate& a) {
            ordered_json r;
            r["categories"] = a.categories;
            r["pq"] = a.pq;
            r["sq"] = a.sq;
            r["rq"] = a.rq;
            r["tp"] = a.tp;
            r["fp"] = a.fp;
            r["fn"] = a.fn;
            return r;
        };
        j["all"] = aggregate(pq->all);
        j["things"] = aggregate(pq->things);
        j["stuff"] = aggregate(pq->stuff);
    }
    if (miou != nullptr) {
        ordered_json rows = ordered_json::array();
        for (const auto& row : miou->classes) {
            ordered_json r;
            r["id"] = row.id;
            r["name"] = row.name;
            r["iou"] = row.iou;
            r["in_gt"] = row.in_gt;
            rows.push_back(std::move(r));
        }
        j["miou"] = {{"classes", std::move(rows)}, {"mean", miou->mean}};
    }
    if (ap != nullptr) {
        ordered_json rows = ordered_json::array();
        for (const auto& row : ap->classes) {
            ordered_json r;
            r["id"] = row.id;
            r["name"] = row.name;
            r["ap"] = row.ap;
            r["ap50"] = row.ap50;
            r["per_threshold"] = row.per_threshold;
            rows.push_back(std::move(r));
        }
        j["mask_ap"] = {{"classes", std::move(rows)}, {"ap", ap->ap}, {"ap50", ap->ap50}};
    }
    return j.dump(2) + "\n";
}

EvalReportData report_from_json(const std::string& text) {
    const ordered_json j = parse_json(text, "report");
    if (!j.is_object()) throw FormatError("report: top-level JSON must be an object");
    EvalReportData data;

    if (j.contains("classes")) {
        PQReport pq;
        for (const auto& r : json_field(j, "classes")) {
            CategoryPq row;
            row.id = json_field(r, "id").get<std::uint32_t>();
            row.name = json_field(r, "name").get<std::string>();
            row.is_thing = json_field(r, "is_thing").get<bool>();
            row.pq = json_number(json_field(r, "pq"), "pq");
            row.sq = json_number(json_field(r, "sq"), "sq");
            row.rq = json_number(json_field(r, "rq"), "rq");
            row.tp = json_field(r, "tp").get<long>();
            row.fp = json_field(r, "fp").get<long>();
            row.fn = json_field(r, "fn").get<long>();
            pq.classes.push_back(std::move(row));
        }
        auto aggregate = [&](const char* key) {
            const auto& a = json_field(j, key);
            PqAggregate agg;
            agg.categories = json_field(a, "categories").get<int>();
            agg.pq = json_number(json_field(a, "pq"), "pq");
            agg.sq = json_number(json_field(a, "sq"), "sq");
            agg.rq = json_number(json_field(a, "rq"), "rq");
            agg.tp = json_field(a, "tp").get<long>();
            agg.fp = json_field(a, "fp").get<long>();
            agg.fn = json_field(a, "fn").get<long>();
            return agg;
        };
        pq.all = aggregate("all");
        pq.things = aggregate("things");
        pq.stuff = aggregate("stuff");
        data.pq = std::move(pq);
    }
    if (j.contains("miou")) {
        const auto& section = j.at("miou");
        MiouReport miou;
        for (const auto& r : json_field(section, "classes")) {
            MiouReport::Row row;
            row.id = json_field(r, "id").get<std::uint32_t>();
            row.name = json_field(r, "name").get<std::string>();
            row.iou = json_number(json_field(r, "iou"), "iou");
            row.in_gt = json_field(r, "in_gt").get<bool>();
            miou.classes.push_back(std::move(row));
        }
        miou.mean = json_number(json_field(section, "mean"), "mean");
        data.miou = std::move(miou);
    }
    if (j.contains("mask_ap")) {
        const auto& section = j.at("mask_ap");
        ApReport ap;
        for (const auto& r : json_field(section, "classes")) {
            ApReport::Row row;
            row.id = json_field(r, "id").get<std::uint32_t>();
            row.name = json_field(r, "name").get<std::string>();
            row.ap = json_number(json_field(r, "ap"), "ap");
            row.ap50 = json_number(json_field(r, "ap50"), "ap50");
            for (const auto& v : json_field(r, "per_threshold")) {
                row.per_threshold.push_back(json_number(v, "per_threshold"));
            }
            ap.classes.push_back(std::move(row));
        }
        ap.ap = json_number(json_field(section, "ap"), "ap");
        ap.ap50 = json_number(json_field(section, "ap50"), "ap50");
        data.ap = std::move(ap);
    }
    return data;
}

Manifest load_manifest(const std::filesystem::path& path) {
    auto in = open_input(path);
    std::stringstream buf;
    buf << in.rdbuf();
    const ordered_json j = parse_json(buf.str(), "manifest");
    if (!j.is_object()) throw FormatError("manifest: top-level JSON must be an object");
    const auto& entries = json_field(j, "entries");
    if (!entries.is_array()) throw FormatError("manifest: entries must be an array");

    const std::filesystem::path base = path.parent_path();
    auto resolve = [&](const ordered_json& v, const char* what) {
        if (!v.is_string()) throw FormatError(std::string("manifest: ") + what + " must be a string");
        std::filesystem::path p = v.get<std::string>();
        return p.is_absolute() ? p : base / p;
    };

    Manifest manifest;
    std::unordered_set<std::string> seen;
    for (const auto& e : entries) {
        if (!e.is_object()) throw FormatError("manifest: entries must be objects");
        ManifestEntry entry;
        const auto& id = json_field(e, "id");
        if (!id.is_string()) throw FormatError("manifest: id must be a string");
        entry.id = id.get<std::string>();
        if (!seen.insert(entry.id).second) {
            throw InvariantError("manifest: duplicate image id '" + entry.id + "'");
        }
        if (auto it = e.find("instances"); it != e.end()) {
            entry.instances = resolve(*it, "instances");
        }
        if (auto it = e.find("scores"); it != e.end()) entry.scores = resolve(*it, "scores");
        if (auto it = e.find("segments"); it != e.end()) entry.segments = resolve(*it, "segments");
        manifest.entries.push_back(std::move(entry));
    }
    return manifest;
}

void save_manifest(const std::filesystem::path& path, const Manifest& manifest) {
    const std::filesystem::path base_dir =
        path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path();
    const std::filesystem::path base = std::filesystem::weakly_canonical(base_dir);
    auto relativize = [&](const std::filesystem::path& p) {
        const std::filesystem::path abs =
            std::filesystem::weakly_canonical(std::filesystem::absolute(p));
        const std::filesystem::path rel = abs.lexically_relative(base);
        return rel.empty() ? abs.string() : rel.string();
    };
    ordered_json entries = ordered_json::array();
    for (const ManifestEntry& e : manifest.entries) {
        ordered_json j;
        j["id"] = e.id;
        if (e.instances) j["instances"] = relativize(*e.instances);
        if (e.scores) j["scores"] = relativize(*e.scores);
        if (e.segments) j["segments"] = relativize(*e.segments);
        entries.push_back(std::move(j));
    }
    ordered_json j;
    j["entries"] = std::move(entries);
    write_text_file(path, j.dump(2) + "\n");
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    auto out = open_output(path);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw InvariantError("failed writing " + path.string());
}

}  // namespace tasckit
