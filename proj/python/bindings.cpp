#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "tasckit/io.hpp"
#include "tasckit/pipeline.hpp"
#include "tasckit/synth.hpp"

namespace py = pybind11;
using namespace tasckit;

namespace {

// numpy <-> raster conversions. Rasters are (height, width) arrays;
// score volumes are (classes, height, width).

HardMask hard_from_array(const py::array_t<bool>& a) {
    if (a.ndim() != 2) throw InvariantError("mask array must be 2-D (height, width)");
    const auto view = a.unchecked<2>();
    HardMask m(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)), false);
    for (int y = 0; y < m.height; ++y) {
        for (int x = 0; x < m.width; ++x) m.set(x, y, view(y, x));
    }
    return m;
}

py::array_t<bool> hard_to_array(const HardMask& m) {
    py::array_t<bool> a({m.height, m.width});
    auto view = a.mutable_unchecked<2>();
    for (int y = 0; y < m.height; ++y) {
        for (int x = 0; x < m.width; ++x) view(y, x) = m.at(x, y);
    }
    return a;
}

SoftMask soft_from_array(const py::array_t<double>& a) {
    if (a.ndim() != 2) throw InvariantError("mask array must be 2-D (height, width)");
    const auto view = a.unchecked<2>();
    const int w = static_cast<int>(a.shape(1));
    const int h = static_cast<int>(a.shape(0));
    std::vector<double> data(static_cast<std::size_t>(w) * h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) data[static_cast<std::size_t>(y) * w + x] = view(y, x);
    }
    return SoftMask(w, h, std::move(data));
}

py::array_t<double> soft_to_array(const SoftMask& m) {
    py::array_t<double> a({m.height, m.width});
    auto view = a.mutable_unchecked<2>();
    for (int y = 0; y < m.height; ++y) {
        for (int x = 0; x < m.width; ++x) view(y, x) = m.at(x, y);
    }
    return a;
}

LabelMap labels_from_array(const py::array_t<std::uint32_t>& a) {
    if (a.ndim() != 2) throw InvariantError("label array must be 2-D (height, width)");
    const auto view = a.unchecked<2>();
    LabelMap m(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)), 0);
    for (int y = 0; y < m.height; ++y) {
        for (int x = 0; x < m.width; ++x) m.at(x, y) = view(y, x);
    }
    return m;
}

py::array_t<std::uint32_t> labels_to_array(const LabelMap& m) {
    py::array_t<std::uint32_t> a({m.height, m.width});
    auto view = a.mutable_unchecked<2>();
    for (int y = 0; y < m.height; ++y) {
        for (int x = 0; x < m.width; ++x) view(y, x) = m.at(x, y);
    }
    return a;
}

ScoreVolume scores_from_array(const py::array_t<double>& a) {
    if (a.ndim() != 3) throw InvariantError("score array must be 3-D (classes, height, width)");
    const auto view = a.unchecked<3>();
    const int classes = static_cast<int>(a.shape(0));
    const int h = static_cast<int>(a.shape(1));
    const int w = static_cast<int>(a.shape(2));
    ScoreVolume v(w, h, classes);
    for (int c = 0; c < classes; ++c) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) v.at(c, x, y) = view(c, y, x);
        }
    }
    v.validate();
    return v;
}

py::array_t<double> scores_to_array(const ScoreVolume& v) {
    py::array_t<double> a({v.num_classes, v.height, v.width});
    auto view = a.mutable_unchecked<3>();
    for (int c = 0; c < v.num_classes; ++c) {
        for (int y = 0; y < v.height; ++y) {
            for (int x = 0; x < v.width; ++x) view(c, y, x) = v.at(c, x, y);
        }
    }
    return a;
}

py::array_t<std::uint32_t> segment_ids_to_array(const SegmentMap& m) {
    py::array_t<std::uint32_t> a({m.height, m.width});
    auto view = a.mutable_unchecked<2>();
    for (int y = 0; y < m.height; ++y) {
        for (int x = 0; x < m.width; ++x) view(y, x) = m.at(x, y);
    }
    return a;
}

FlattenMode mode_from_string(const std::string& mode) {
    if (mode == "hard") return FlattenMode::hard;
    if (mode == "soft") return FlattenMode::soft;
    throw InvariantError("mode must be 'hard' or 'soft'");
}

}  // namespace

PYBIND11_MODULE(tasckit, m) {
    m.doc() = "Things/stuff consistency masks, mask-guided panoptic fusion, and "
              "panoptic/semantic/instance segmentation metrics";

    py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
    py::register_exception<InvariantError>(m, "InvariantError", PyExc_ValueError);
    py::register_exception<MismatchError>(m, "MismatchError", PyExc_ValueError);

    py::class_<Category>(m, "Category")
        .def(py::init<std::uint32_t, std::string, bool>(), py::arg("id"), py::arg("name"),
             py::arg("is_thing"))
        .def_readonly("id", &Category::id)
        .def_readonly("name", &Category::name)
        .def_readonly("is_thing", &Category::is_thing);

    py::class_<Ontology>(m, "Ontology")
        .def(py::init<std::vector<Category>>(), py::arg("categories"))
        .def_property_readonly("categories", &Ontology::categories)
        .def("counts",
             [](const Ontology& o) {
                 const auto c = o.counts();
                 return py::make_tuple(c.stuff, c.things);
             })
        .def("is_thing", &Ontology::is_thing, py::arg("id"))
        .def("contains", &Ontology::contains, py::arg("id"));

    m.def("collapse_things", [](const Ontology& o) {
        const CollapseResult r = collapse_things(o);
        return py::make_tuple(r.ontology, r.mapping);
    });

    py::class_<BBox>(m, "BBox")
        .def(py::init<double, double, double, double>(), py::arg("x0"), py::arg("y0"),
             py::arg("x1"), py::arg("y1"))
        .def_readonly("x0", &BBox::x0)
        .def_readonly("y0", &BBox::y0)
        .def_readonly("x1", &BBox::x1)
        .def_readonly("y1", &BBox::y1);

    py::class_<Instance>(m, "Instance")
        .def(py::init([](const BBox& box, std::uint32_t category, double confidence,
                         const py::array_t<double>& mask, std::optional<std::uint32_t> assigned) {
                 Instance inst;
                 inst.box = box;
                 inst.category = category;
                 inst.confidence = confidence;
                 inst.mask = soft_from_array(mask);
                 inst.assigned_category = assigned.value_or(category);
                 return inst;
             }),
             py::arg("box"), py::arg("category"), py::arg("confidence"), py::arg("mask"),
             py::arg("assigned_category") = std::nullopt)
        .def_readonly("box", &Instance::box)
        .def_readonly("category", &Instance::category)
        .def_readonly("confidence", &Instance::confidence)
        .def_readonly("assigned_category", &Instance::assigned_category)
        .def_property_readonly("mask", [](const Instance& i) { return soft_to_array(i.mask); });

    py::class_<TascConfig>(m, "TascConfig")
        .def(py::init([](double lambda_, double mask_threshold, double soft_steepness) {
                 return TascConfig{lambda_, mask_threshold, soft_steepness};
             }),
             py::arg("lambda_") = 1.0, py::arg("mask_threshold") = 0.5,
             py::arg("soft_steepness") = 10.0)
        .def_readwrite("lambda_", &TascConfig::lambda)
        .def_readwrite("mask_threshold", &TascConfig::mask_threshold)
        .def_readwrite("soft_steepness", &TascConfig::soft_steepness);

    py::class_<FusionConfig>(m, "FusionConfig")
        .def(py::init([](double overlap_max, double mask_cover_min, double box_nms_iou,
                         double mask_nms_iou, bool guide_gate_uses_iou, bool pairwise_overlap) {
                 return FusionConfig{overlap_max, mask_cover_min,      box_nms_iou,
                                     mask_nms_iou, guide_gate_uses_iou, pairwise_overlap};
             }),
             py::arg("overlap_max") = 0.4, py::arg("mask_cover_min") = 0.7,
             py::arg("box_nms_iou") = 0.3, py::arg("mask_nms_iou") = 0.3,
             py::arg("guide_gate_uses_iou") = false, py::arg("pairwise_overlap") = false)
        .def_readwrite("overlap_max", &FusionConfig::overlap_max)
        .def_readwrite("mask_cover_min", &FusionConfig::mask_cover_min)
        .def_readwrite("box_nms_iou", &FusionConfig::box_nms_iou)
        .def_readwrite("mask_nms_iou", &FusionConfig::mask_nms_iou)
        .def_readwrite("guide_gate_uses_iou", &FusionConfig::guide_gate_uses_iou)
        .def_readwrite("pairwise_overlap", &FusionConfig::pairwise_overlap);

    py::class_<SegmentRecord>(m, "SegmentRecord")
        .def(py::init([](std::uint32_t id, std::uint32_t category,
                         std::optional<double> confidence) {
                 SegmentRecord s;
                 s.id = id;
                 s.category = category;
                 if (confidence) s.confidence = static_cast<float>(*confidence);
                 return s;
             }),
             py::arg("id"), py::arg("category"), py::arg("confidence") = std::nullopt)
        .def_readonly("id", &SegmentRecord::id)
        .def_readonly("category", &SegmentRecord::category)
        .def_property_readonly("confidence", [](const SegmentRecord& s) -> std::optional<double> {
            if (!s.has_confidence()) return std::nullopt;
            return static_cast<double>(s.confidence);
        });

    py::class_<SegmentMap>(m, "SegmentMap")
        .def(py::init([](const py::array_t<std::uint32_t>& ids,
                         const std::vector<SegmentRecord>& segments) {
                 if (ids.ndim() != 2) throw InvariantError("ids array must be 2-D");
                 SegmentMap map(static_cast<int>(ids.shape(1)), static_cast<int>(ids.shape(0)));
                 const auto view = ids.unchecked<2>();
                 for (int y = 0; y < map.height; ++y) {
                     for (int x = 0; x < map.width; ++x) map.at(x, y) = view(y, x);
                 }
                 map.segments = segments;
                 map.validate();
                 return map;
             }),
             py::arg("ids"), py::arg("segments"))
        .def_readonly("width", &SegmentMap::width)
        .def_readonly("height", &SegmentMap::height)
        .def_property_readonly("ids", &segment_ids_to_array)
        .def_readonly("segments", &SegmentMap::segments)
        .def("validate", &SegmentMap::validate);

    py::class_<PanopticResult>(m, "PanopticResult")
        .def_readonly("map", &PanopticResult::map)
        .def_readonly("accepted", &PanopticResult::accepted);

    // raster primitives
    m.def("iou_hard", [](const py::array_t<bool>& a, const py::array_t<bool>& b) {
        return iou_hard(hard_from_array(a), hard_from_array(b));
    });
    m.def("iou_box", &iou_box, py::arg("a"), py::arg("b"));
    m.def("coverage", [](const py::array_t<bool>& a, const py::array_t<bool>& b) {
        return coverage(hard_from_array(a), hard_from_array(b));
    });
    m.def("bilinear_resize", [](const py::array_t<double>& mask, int out_w, int out_h) {
        return soft_to_array(bilinear_resize(soft_from_array(mask), out_w, out_h));
    });
    m.def("threshold", [](const py::array_t<double>& mask, double t) {
        return hard_to_array(threshold(soft_from_array(mask), t));
    });

    // consistency masks and residual
    m.def("stuff_side_mask", [](const py::array_t<double>& scores, const Ontology& o) {
        return soft_to_array(stuff_side_mask(scores_from_array(scores), o));
    });
    m.def(
        "roi_flatten",
        [](const std::vector<Instance>& instances, int image_w, int image_h,
           const TascConfig& cfg, const std::string& mode) {
            return soft_to_array(
                roi_flatten(instances, image_w, image_h, cfg, mode_from_string(mode)));
        },
        py::arg("instances"), py::arg("image_w"), py::arg("image_h"),
        py::arg("cfg") = TascConfig{}, py::arg("mode") = "hard");
    m.def(
        "roi_flatten_soft_grad",
        [](const std::vector<Instance>& instances, int image_w, int image_h,
           const TascConfig& cfg) {
            const auto grads = roi_flatten_soft_grad(instances, image_w, image_h, cfg);
            py::list out;
            for (const InstanceMaskGrad& g : grads) {
                py::array_t<double> entries({static_cast<py::ssize_t>(g.entries.size()),
                                             static_cast<py::ssize_t>(3)});
                auto view = entries.mutable_unchecked<2>();
                for (std::size_t e = 0; e < g.entries.size(); ++e) {
                    view(e, 0) = g.entries[e].pixel;
                    view(e, 1) = g.entries[e].cell;
                    view(e, 2) = g.entries[e].value;
                }
                out.append(py::make_tuple(py::make_tuple(g.mask_height, g.mask_width), entries));
            }
            return out;
        },
        py::arg("instances"), py::arg("image_w"), py::arg("image_h"),
        py::arg("cfg") = TascConfig{});
    m.def(
        "tasc_residual",
        [](const py::array_t<double>& stuff, const py::array_t<double>& things,
           const TascConfig& cfg) {
            return tasc_residual(soft_from_array(stuff), soft_from_array(things), cfg);
        },
        py::arg("stuff_mask"), py::arg("things_mask"), py::arg("cfg") = TascConfig{});
    m.def("residual_image", [](const py::array_t<double>& stuff, const py::array_t<double>& things) {
        return soft_to_array(residual_image(soft_from_array(stuff), soft_from_array(things)));
    });
    m.def("rasterize_instance",
          [](const Instance& inst, int image_w, int image_h, double mask_threshold) {
              return hard_to_array(rasterize_instance(inst, image_w, image_h, mask_threshold));
          },
          py::arg("instance"), py::arg("image_w"), py::arg("image_h"),
          py::arg("mask_threshold") = 0.5);

    // fusion
    m.def("box_nms", &box_nms, py::arg("instances"), py::arg("cfg") = FusionConfig{});
    m.def("mask_nms", &mask_nms, py::arg("instances"), py::arg("image_w"), py::arg("image_h"),
          py::arg("cfg") = FusionConfig{});
    m.def("semantic_argmax", [](const py::array_t<double>& scores, const Ontology& o) {
        return labels_to_array(semantic_argmax(scores_from_array(scores), o));
    });
    m.def(
        "mask_guided_fuse",
        [](const std::vector<Instance>& instances, const py::array_t<std::uint32_t>& labelmap,
           const py::array_t<bool>& guide, const Ontology& o, const FusionConfig& cfg) {
            return mask_guided_fuse(instances, labels_from_array(labelmap),
                                    hard_from_array(guide), o, cfg);
        },
        py::arg("instances"), py::arg("labelmap"), py::arg("guide"), py::arg("ontology"),
        py::arg("cfg") = FusionConfig{});
    m.def("segments_from_labelmap",
          [](const py::array_t<std::uint32_t>& labelmap, const Ontology& o) {
              return segments_from_labelmap(labels_from_array(labelmap), o);
          });
    m.def("to_labelmap", [](const SegmentMap& map) { return labels_to_array(to_labelmap(map)); });

    // metrics
    py::class_<TpMatch>(m, "TpMatch")
        .def_readonly("pred_id", &TpMatch::pred_id)
        .def_readonly("gt_id", &TpMatch::gt_id)
        .def_readonly("iou", &TpMatch::iou);
    py::class_<CategoryMatches>(m, "CategoryMatches")
        .def_readonly("tp", &CategoryMatches::tp)
        .def_readonly("fp", &CategoryMatches::fp)
        .def_readonly("fn", &CategoryMatches::fn);
    py::class_<MatchResult>(m, "MatchResult")
        .def_readonly("categories", &MatchResult::categories);

    m.def("match_segments", &match_segments, py::arg("pred"), py::arg("gt"), py::arg("ontology"));
    m.def("oracle_match", &oracle_match, py::arg("pred"), py::arg("gt"), py::arg("ontology"));

    py::class_<CategoryPq>(m, "CategoryPq")
        .def_readonly("id", &CategoryPq::id)
        .def_readonly("name", &CategoryPq::name)
        .def_readonly("is_thing", &CategoryPq::is_thing)
        .def_readonly("tp", &CategoryPq::tp)
        .def_readonly("fp", &CategoryPq::fp)
        .def_readonly("fn", &CategoryPq::fn)
        .def_readonly("pq", &CategoryPq::pq)
        .def_readonly("sq", &CategoryPq::sq)
        .def_readonly("rq", &CategoryPq::rq);
    py::class_<PqAggregate>(m, "PqAggregate")
        .def_readonly("categories", &PqAggregate::categories)
        .def_readonly("tp", &PqAggregate::tp)
        .def_readonly("fp", &PqAggregate::fp)
        .def_readonly("fn", &PqAggregate::fn)
        .def_readonly("pq", &PqAggregate::pq)
        .def_readonly("sq", &PqAggregate::sq)
        .def_readonly("rq", &PqAggregate::rq);
    py::class_<PQReport>(m, "PQReport")
        .def_readonly("classes", &PQReport::classes)
        .def_readonly("all", &PQReport::all)
        .def_readonly("things", &PQReport::things)
        .def_readonly("stuff", &PQReport::stuff);
    m.def("compute_pq", &compute_pq, py::arg("match"), py::arg("ontology"));

    py::class_<MiouReport::Row>(m, "MiouRow")
        .def_readonly("id", &MiouReport::Row::id)
        .def_readonly("name", &MiouReport::Row::name)
        .def_readonly("in_gt", &MiouReport::Row::in_gt)
        .def_readonly("iou", &MiouReport::Row::iou);
    py::class_<MiouReport>(m, "MiouReport")
        .def_readonly("classes", &MiouReport::classes)
        .def_readonly("mean", &MiouReport::mean);
    m.def("compute_miou",
          [](const py::array_t<std::uint32_t>& pred, const py::array_t<std::uint32_t>& gt,
             const Ontology& o) {
              return compute_miou(labels_from_array(pred), labels_from_array(gt), o);
          });

    py::class_<ApReport::Row>(m, "ApRow")
        .def_readonly("id", &ApReport::Row::id)
        .def_readonly("name", &ApReport::Row::name)
        .def_readonly("ap", &ApReport::Row::ap)
        .def_readonly("ap50", &ApReport::Row::ap50)
        .def_readonly("per_threshold", &ApReport::Row::per_threshold);
    py::class_<ApReport>(m, "ApReport")
        .def_readonly("classes", &ApReport::classes)
        .def_readonly("ap", &ApReport::ap)
        .def_readonly("ap50", &ApReport::ap50);
    m.def("compute_mask_ap", &compute_mask_ap, py::arg("preds"), py::arg("gts"),
          py::arg("ontology"));
    m.def("stuff_bias_probe", &stuff_bias_probe, py::arg("fraction"));

    // synthetic scenes
    py::class_<NoiseSpec>(m, "NoiseSpec")
        .def(py::init([](double jitter, double sigma, double drop) {
                 return NoiseSpec{jitter, sigma, drop};
             }),
             py::arg("boundary_jitter_px") = 0.0, py::arg("confidence_sigma") = 0.0,
             py::arg("drop_probability") = 0.0)
        .def_readwrite("boundary_jitter_px", &NoiseSpec::boundary_jitter_px)
        .def_readwrite("confidence_sigma", &NoiseSpec::confidence_sigma)
        .def_readwrite("drop_probability", &NoiseSpec::drop_probability);
    py::class_<SceneSpec>(m, "SceneSpec")
        .def(py::init([](std::uint64_t seed, int width, int height, int num_stuff_regions,
                         int num_instances, const NoiseSpec& noise) {
                 return SceneSpec{seed, width, height, num_stuff_regions, num_instances, noise};
             }),
             py::arg("seed") = 0, py::arg("width") = 64, py::arg("height") = 64,
             py::arg("num_stuff_regions") = 2, py::arg("num_instances") = 3,
             py::arg("noise") = NoiseSpec{})
        .def_readwrite("seed", &SceneSpec::seed)
        .def_readwrite("width", &SceneSpec::width)
        .def_readwrite("height", &SceneSpec::height)
        .def_readwrite("num_stuff_regions", &SceneSpec::num_stuff_regions)
        .def_readwrite("num_instances", &SceneSpec::num_instances)
        .def_readwrite("noise", &SceneSpec::noise);
    py::class_<Scene>(m, "Scene")
        .def_readonly("gt", &Scene::gt)
        .def_readonly("instances", &Scene::instances)
        .def_property_readonly("scores", [](const Scene& s) { return scores_to_array(s.scores); });
    m.def("generate_scene", &generate_scene, py::arg("spec"), py::arg("ontology"));

    // file formats
    m.def("save_segment_map", &save_segment_map, py::arg("path"), py::arg("map"));
    m.def("load_segment_map", &load_segment_map, py::arg("path"));
    m.def("save_instances", &save_instances, py::arg("path"), py::arg("instances"));
    m.def("load_instances", &load_instances, py::arg("path"));
    m.def("save_ontology", &save_ontology, py::arg("path"), py::arg("ontology"));
    m.def("load_ontology", &load_ontology, py::arg("path"));
    m.def("save_score_volume", [](const std::filesystem::path& path, const py::array_t<double>& scores) {
        save_score_volume(path, scores_from_array(scores));
    });
    m.def("load_score_volume", [](const std::filesystem::path& path) {
        return scores_to_array(load_score_volume(path));
    });
    m.def("save_soft_mask", [](const std::filesystem::path& path, const py::array_t<double>& mask) {
        save_soft_mask(path, soft_from_array(mask));
    });
    m.def("load_soft_mask", [](const std::filesystem::path& path) {
        return soft_to_array(load_soft_mask(path));
    });

#ifdef VERSION_INFO
    m.attr("__version__") = VERSION_INFO;
#else
    m.attr("__version__") = "dev";
#endif
}
