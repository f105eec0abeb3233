// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 mptrack contributors

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mptrack/checkpoint.hpp"
#include "mptrack/eval.hpp"
#include "mptrack/grad_check.hpp"
#include "mptrack/runconfig.hpp"

namespace py = pybind11;
using namespace mpt;

namespace {

py::array_t<double> tensor_to_numpy(const Tensor& t) {
    py::array_t<double> out({t.rows(), t.cols()});
    std::memcpy(out.mutable_data(), t.data(), t.size() * sizeof(double));
    return out;
}

Tensor numpy_to_tensor(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2) throw std::invalid_argument("expected a 2-D array");
    Tensor t(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
    std::memcpy(t.data(), a.data(), t.size() * sizeof(double));
    return t;
}

Box box_from_seq(const std::vector<double>& v) {
    if (v.size() != 4) throw std::invalid_argument("box needs 4 coordinates");
    return Box{v[0], v[1], v[2], v[3]};
}

std::vector<double> box_to_seq(const Box& b) { return {b.x1, b.y1, b.x2, b.y2}; }

}  // namespace

PYBIND11_MODULE(_mptrack, m) {
    m.doc() = "Motion-prompt tracking core: trajectory encoding, fusion, and the toy tracker";

    py::class_<Box>(m, "Box")
        .def(py::init([](double x1, double y1, double x2, double y2) {
                 return Box{x1, y1, x2, y2};
             }),
             py::arg("x1"), py::arg("y1"), py::arg("x2"), py::arg("y2"))
        .def_readwrite("x1", &Box::x1)
        .def_readwrite("y1", &Box::y1)
        .def_readwrite("x2", &Box::x2)
        .def_readwrite("y2", &Box::y2)
        .def("area", &Box::area)
        .def("__repr__", [](const Box& b) {
            return "Box(" + std::to_string(b.x1) + ", " + std::to_string(b.y1) + ", " +
                   std::to_string(b.x2) + ", " + std::to_string(b.y2) + ")";
        });

    py::class_<SearchRegion>(m, "SearchRegion")
        .def(py::init([](double cx, double cy, double side) {
                 return SearchRegion{cx, cy, side};
             }),
             py::arg("cx"), py::arg("cy"), py::arg("side"))
        .def_readwrite("cx", &SearchRegion::cx)
        .def_readwrite("cy", &SearchRegion::cy)
        .def_readwrite("side", &SearchRegion::side);

    m.def("iou", &iou, py::arg("a"), py::arg("b"));
    m.def("giou", &giou, py::arg("a"), py::arg("b"));
    m.def("normalize_to_region",
          py::overload_cast<const Box&, const SearchRegion&>(&normalize_to_region));
    m.def("denormalize_from_region", &denormalize_from_region);
    m.def("raster_iou", &raster_iou, py::arg("a"), py::arg("b"), py::arg("resolution"));

    m.def("nyquist_alpha", &nyquist_alpha);
    m.def("instantaneous_frequency", &instantaneous_frequency, py::arg("t"), py::arg("i"),
          py::arg("alpha"), py::arg("n"), py::arg("d"));
    m.def(
        "temporal_pe_table",
        [](int traj_len, int channels, double alpha, double n) {
            return tensor_to_numpy(temporal_pe_table(traj_len, channels, alpha, n));
        },
        py::arg("traj_len"), py::arg("channels"), py::arg("alpha"), py::arg("n") = 1e4);

    py::class_<SceneConfig>(m, "SceneConfig")
        .def(py::init<>())
        .def_readwrite("episode_len", &SceneConfig::episode_len)
        .def_readwrite("n_distractors", &SceneConfig::n_distractors)
        .def_readwrite("eps_app", &SceneConfig::eps_app)
        .def_readwrite("occlusion_prob", &SceneConfig::occlusion_prob)
        .def_readwrite("obs_noise", &SceneConfig::obs_noise)
        .def_readwrite("grid_h", &SceneConfig::grid_h)
        .def_readwrite("grid_w", &SceneConfig::grid_w)
        .def_readwrite("app_channels", &SceneConfig::app_channels)
        .def("to_json", &SceneConfig::to_json);

    py::class_<Episode>(m, "Episode")
        .def_property_readonly("length", &Episode::length)
        .def_property_readonly("gt",
                               [](const Episode& e) {
                                   std::vector<std::vector<double>> out;
                                   for (const auto& b : e.gt) out.push_back(box_to_seq(b));
                                   return out;
                               })
        .def_property_readonly("occluded", [](const Episode& e) { return e.occluded; })
        .def("observation", [](const Episode& e, int frame, const SearchRegion& r) {
            return tensor_to_numpy(render_observation(e, frame, r));
        });

    m.def("simulate_episode", &simulate_episode, py::arg("config"), py::arg("seed"));
    m.def("region_around", &region_around, py::arg("box"), py::arg("scale") = 4.0,
          py::arg("min_side") = 1e-6);

    py::class_<ModelConfig>(m, "ModelConfig")
        .def(py::init<>())
        .def_readwrite("traj_len", &ModelConfig::traj_len)
        .def_readwrite("channels", &ModelConfig::channels)
        .def_readwrite("app_channels", &ModelConfig::app_channels)
        .def_readwrite("grid_h", &ModelConfig::grid_h)
        .def_readwrite("grid_w", &ModelConfig::grid_w)
        .def_readwrite("heads", &ModelConfig::heads)
        .def_readwrite("decoder_blocks", &ModelConfig::decoder_blocks)
        .def_readwrite("init_seed", &ModelConfig::init_seed)
        .def("to_json", &ModelConfig::to_json)
        .def_static("from_json", &ModelConfig::from_json);

    py::class_<MptModel>(m, "Model")
        .def(py::init<const ModelConfig&>(), py::arg("config"))
        .def_property_readonly("config", &MptModel::config)
        .def("tracker_checksum", &MptModel::tracker_checksum)
        .def("load_checkpoint",
             [](MptModel& self, const std::string& prefix) {
                 return load_checkpoint(prefix, self.params());
             })
        .def("save_checkpoint",
             [](MptModel& self, const std::string& prefix) {
                 save_checkpoint(prefix, self.params(), self.config().to_json());
             })
        .def(
            "vision_forward",
            [](const MptModel& self,
               const py::array_t<double, py::array::c_style | py::array::forcecast>& obs,
               const py::array_t<double, py::array::c_style | py::array::forcecast>& tmpl) {
                Tape t(false);
                const auto out =
                    self.vision_forward(t, numpy_to_tensor(obs), numpy_to_tensor(tmpl));
                return py::make_tuple(tensor_to_numpy(t.value(out.score)),
                                      box_to_seq(box_from_tensor(t.value(out.box))));
            },
            py::arg("observation"), py::arg("template"))
        .def(
            "joint_forward",
            [](const MptModel& self,
               const py::array_t<double, py::array::c_style | py::array::forcecast>& obs,
               const py::array_t<double, py::array::c_style | py::array::forcecast>& tmpl,
               const std::vector<std::vector<double>>& trajectory) {
                Trajectory traj;
                for (const auto& b : trajectory) traj.boxes.push_back(box_from_seq(b));
                Tape t(false);
                const auto out =
                    self.joint_forward(t, numpy_to_tensor(obs), numpy_to_tensor(tmpl), traj);
                py::dict d;
                d["box"] = box_to_seq(box_from_tensor(t.value(out.box)));
                d["score"] = tensor_to_numpy(t.value(out.score));
                d["weight"] = out.weight_value;
                d["motion_box"] = box_to_seq(box_from_tensor(t.value(out.motion_box)));
                return d;
            },
            py::arg("observation"), py::arg("template"), py::arg("trajectory"));

    py::enum_<EvalMode>(m, "EvalMode")
        .value("vision", EvalMode::kVision)
        .value("motion", EvalMode::kMotion)
        .value("joint", EvalMode::kJoint)
        .value("no_weight", EvalMode::kNoWeight);

    m.def(
        "run_episode",
        [](const MptModel& model, const Episode& ep, EvalMode mode) {
            TrackOptions to;
            to.mode = mode;
            const auto run = run_episode(model, ep, to);
            py::list frames;
            for (const auto& f : run.frames) {
                py::dict d;
                d["frame"] = f.frame;
                d["gt"] = box_to_seq(f.gt);
                d["pred"] = box_to_seq(f.pred);
                d["iou"] = f.iou_value;
                d["w_m"] = f.w_m;
                d["occluded"] = f.occluded;
                frames.append(d);
            }
            py::dict out;
            out["frames"] = frames;
            out["success_rate"] = run.success_rate();
            out["mean_iou"] = run.mean_iou();
            return out;
        },
        py::arg("model"), py::arg("episode"), py::arg("mode") = EvalMode::kJoint);

    m.attr("__version__") = "0.1.0";
}
