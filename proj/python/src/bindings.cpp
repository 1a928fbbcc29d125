#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "avbench/degrade.hpp"
#include "avbench/error.hpp"
#include "avbench/experiment.hpp"
#include "avbench/metrics.hpp"
#include "avbench/mocap_io.hpp"
#include "avbench/reconstruct.hpp"
#include "avbench/seeding.hpp"
#include "avbench/sensor_sim.hpp"
#include "avbench/synthetic.hpp"
#include "avbench/sync.hpp"

namespace py = pybind11;
using namespace avbench;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using BoolArray = py::array_t<bool, py::array::c_style | py::array::forcecast>;

Array positions_array(const std::vector<std::vector<Vec3>>& frames, std::size_t joints) {
  Array out({frames.size(), joints, std::size_t{3}});
  auto a = out.mutable_unchecked<3>();
  for (std::size_t t = 0; t < frames.size(); ++t) {
    for (std::size_t j = 0; j < joints; ++j) {
      for (std::size_t k = 0; k < 3; ++k) a(t, j, k) = frames[t][j][static_cast<Eigen::Index>(k)];
    }
  }
  return out;
}

void require_shape(const py::array& a, std::initializer_list<py::ssize_t> shape, const char* what) {
  bool ok = a.ndim() == static_cast<py::ssize_t>(shape.size());
  std::size_t i = 0;
  for (py::ssize_t s : shape) {
    if (ok && s >= 0 && a.shape(i) != s) ok = false;
    ++i;
  }
  if (!ok) throw StructuralError(std::string(what) + " has the wrong shape");
}

MotionClip clip_from_arrays(const std::string& name, const Array& rotations_wxyz, const Array& root_translations,
                            double framerate_hz) {
  const Skeleton& s = Skeleton::smpl22();
  require_shape(rotations_wxyz, {-1, static_cast<py::ssize_t>(s.size()), 4}, "rotations (T, 22, 4)");
  require_shape(root_translations, {rotations_wxyz.shape(0), 3}, "root_translations (T, 3)");
  auto r = rotations_wxyz.unchecked<3>();
  auto p = root_translations.unchecked<2>();
  std::vector<Pose> poses;
  for (py::ssize_t t = 0; t < r.shape(0); ++t) {
    Pose pose = Pose::identity(s.size());
    pose.root_translation = Vec3(p(t, 0), p(t, 1), p(t, 2));
    for (std::size_t j = 0; j < s.size(); ++j) {
      const auto jj = static_cast<py::ssize_t>(j);
      pose.local_rotations[j] = Rotation::from_wxyz(r(t, jj, 0), r(t, jj, 1), r(t, jj, 2), r(t, jj, 3));
    }
    poses.push_back(std::move(pose));
  }
  return MotionClip(name, s, framerate_hz, std::move(poses));
}

Array clip_rotations(const MotionClip& c) {
  const std::size_t n = c.skeleton().size();
  Array out({c.frame_count(), n, std::size_t{4}});
  auto a = out.mutable_unchecked<3>();
  for (std::size_t t = 0; t < c.frame_count(); ++t) {
    for (std::size_t j = 0; j < n; ++j) {
      const auto q = c.pose(t).local_rotations[j].wxyz();
      for (std::size_t k = 0; k < 4; ++k) a(t, j, k) = q[k];
    }
  }
  return out;
}

Array clip_root_translations(const MotionClip& c) {
  Array out({c.frame_count(), std::size_t{3}});
  auto a = out.mutable_unchecked<2>();
  for (std::size_t t = 0; t < c.frame_count(); ++t) {
    for (std::size_t k = 0; k < 3; ++k) a(t, k) = c.pose(t).root_translation[static_cast<Eigen::Index>(k)];
  }
  return out;
}

CartesianStream stream_from_arrays(const Array& positions, const BoolArray& valid, double framerate_hz) {
  require_shape(positions, {-1, -1, 3}, "positions (T, J, 3)");
  require_shape(valid, {positions.shape(0), positions.shape(1)}, "valid (T, J)");
  auto p = positions.unchecked<3>();
  auto v = valid.unchecked<2>();
  CartesianStream s;
  s.framerate = framerate_hz;
  for (py::ssize_t t = 0; t < p.shape(0); ++t) {
    CartesianSample c;
    c.timestamp = c.capture_time = static_cast<double>(t) / framerate_hz;
    for (py::ssize_t j = 0; j < p.shape(1); ++j) {
      c.positions.emplace_back(p(t, j, 0), p(t, j, 1), p(t, j, 2));
      c.valid.push_back(v(t, j));
    }
    s.samples.push_back(std::move(c));
  }
  return s;
}

BodySubset subset_of(const std::string& label, const Skeleton& skeleton) {
  const auto parsed = parse_subset(label);
  if (!parsed) throw ConfigError("unknown body subset '" + label + "' (expected Up, Low or Full)");
  return BodySubset::of(*parsed, skeleton);
}

py::dict row_dict(const ResultRow& r) {
  py::dict d;
  d["condition"] = r.condition;
  d["level"] = r.level ? py::cast(*r.level) : py::none();
  d["model"] = r.reconstructor;
  d["subset"] = std::string(to_string(r.subset));
  d["mpjpe"] = r.mpjpe_cm;
  d["mpjre"] = r.mpjre_deg;
  d["mpjve"] = r.mpjve_cmps;
  d["mean_staleness_ms"] = r.mean_staleness_ms;
  return d;
}

}  // namespace

PYBIND11_MODULE(_avbench, m) {
  m.doc() = "Avatar reconstruction benchmark: skeleton, sensor simulation, degradations, reconstructors and metrics.";

  static py::exception<Error> base(m, "Error", PyExc_RuntimeError);
  py::register_exception<StructuralError>(m, "StructuralError", base.ptr());
  py::register_exception<InvalidRotationError>(m, "InvalidRotationError", base.ptr());
  py::register_exception<DegenerateGeometryError>(m, "DegenerateGeometryError", base.ptr());
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<SchemaError>(m, "SchemaError", base.ptr());
  py::register_exception<SingularSystemError>(m, "SingularSystemError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());

  m.attr("__version__") = std::string(kToolVersion);
  m.attr("JOINT_NAMES") = Skeleton::smpl22().joint_names();
  m.attr("PARENTS") = Skeleton::smpl22().parents();

  py::class_<MotionClip>(m, "MotionClip")
      .def(py::init(&clip_from_arrays), py::arg("name"), py::arg("rotations_wxyz"), py::arg("root_translations"),
           py::arg("framerate_hz") = 60.0, "Clip on the 22-joint SMPL skeleton from (T, 22, 4) and (T, 3) arrays.")
      .def_property_readonly("name", &MotionClip::name)
      .def_property_readonly("framerate", &MotionClip::framerate)
      .def_property_readonly("frame_count", &MotionClip::frame_count)
      .def_property_readonly("joint_names", [](const MotionClip& c) { return c.skeleton().joint_names(); })
      .def("rotations", &clip_rotations, "Local rotations as (T, J, 4) wxyz quaternions.")
      .def("root_translations", &clip_root_translations)
      .def("positions", [](const MotionClip& c) { return positions_array(clip_positions(c), c.skeleton().size()); },
           "FK joint positions, (T, J, 3) in meters.")
      .def("__len__", &MotionClip::frame_count)
      .def("__eq__", [](const MotionClip& a, const MotionClip& b) { return a == b; });

  py::class_<CartesianStream>(m, "CartesianStream")
      .def(py::init(&stream_from_arrays), py::arg("positions"), py::arg("valid"), py::arg("framerate_hz") = 60.0)
      .def_readonly("framerate", &CartesianStream::framerate)
      .def("__len__", &CartesianStream::size)
      .def("positions",
           [](const CartesianStream& s) {
             std::vector<std::vector<Vec3>> frames;
             for (const CartesianSample& c : s.samples) frames.push_back(c.positions);
             return positions_array(frames, s.samples.empty() ? 0 : s.samples.front().positions.size());
           })
      .def("valid",
           [](const CartesianStream& s) {
             const std::size_t joints = s.samples.empty() ? 0 : s.samples.front().valid.size();
             BoolArray out({s.size(), joints});
             auto a = out.mutable_unchecked<2>();
             for (std::size_t t = 0; t < s.size(); ++t) {
               for (std::size_t j = 0; j < joints; ++j) a(t, j) = s.samples[t].valid[j];
             }
             return out;
           })
      .def("__eq__", [](const CartesianStream& a, const CartesianStream& b) { return a == b; });

  // clips
  m.def("synthesize_clip",
        [](const std::string& name, std::uint64_t seed, double seconds, double framerate_hz) {
          return synthesize_clip(name, seed, {seconds, framerate_hz});
        },
        py::arg("name"), py::arg("seed"), py::arg("seconds") = 60.0, py::arg("framerate_hz") = 60.0);
  m.def("parse_bvh",
        [](const std::string& text, double length_scale, const std::string& name) {
          return parse_bvh(text, BvhOptions{length_scale, name});
        },
        py::arg("text"), py::arg("length_scale") = 1.0, py::arg("name") = "bvh");
  m.def("serialize_bvh", &serialize_bvh, py::arg("clip"), py::arg("length_scale") = 1.0);
  m.def("save_clip_json", &save_clip_json);
  m.def("load_clip_json", [](const std::string& text) { return load_clip_json(text); });

  // sensors
  m.def("cartesian_from_clip", &cartesian_from_clip, "Ground-truth Cartesian stream (FK positions, all valid).");
  m.def("triangulated_stream",
        [](const MotionClip& clip, double pixel_noise_std, double miss_prob, std::uint64_t seed) {
          const auto rig = default_camera_rig();
          const DetectionStream a = synthesize_detections(clip, rig[0], {pixel_noise_std, miss_prob, derive_seed(seed, 0xA)});
          const DetectionStream b = synthesize_detections(clip, rig[1], {pixel_noise_std, miss_prob, derive_seed(seed, 0xB)});
          return reconstruct_cartesian_stream(a, b, rig[0], rig[1]);
        },
        py::arg("clip"), py::arg("pixel_noise_std") = 0.0, py::arg("miss_prob") = 0.0, py::arg("seed") = 0,
        "Project through the default two-camera rig, detect and triangulate.");

  // degradations
  m.def("apply_delay", &apply_delay, py::arg("stream"), py::arg("delay_frames"));
  m.def("apply_framerate_ratio", &apply_framerate_ratio, py::arg("stream"), py::arg("fps_ratio"));
  m.def("apply_noise", &apply_noise, py::arg("stream"), py::arg("noise_std_m"), py::arg("seed"));
  m.def("apply_occlusion", &apply_occlusion, py::arg("stream"), py::arg("occlusion_prob"), py::arg("seed"));
  m.def("degrade",
        [](const CartesianStream& s, std::size_t delay_frames, std::size_t fps_ratio, double noise_std_m,
           double occlusion_prob, std::uint64_t seed) {
          return compose(s, DegradationConfig{delay_frames, fps_ratio, noise_std_m, occlusion_prob, seed});
        },
        py::arg("stream"), py::arg("delay_frames") = 0, py::arg("fps_ratio") = 1, py::arg("noise_std_m") = 0.0,
        py::arg("occlusion_prob") = 0.0, py::arg("seed") = 0, "Framerate ratio, delay, occlusion, then noise.");

  // reconstruction
  m.def("reconstruct",
        [](const MotionClip& clip, const CartesianStream& cartesian, const std::string& reconstructor,
           const std::vector<MotionClip>& train_clips, std::size_t k, double lambda) {
          ReconstructorSpec spec;
          spec.type = reconstructor;
          spec.k = k;
          spec.lambda = lambda;
          auto r = make_reconstructor(spec, clip.skeleton(), kDefaultWindowLength);
          py::gil_scoped_release release;
          if (reconstructor != "ik") {
            if (train_clips.empty()) throw ConfigError("\"" + reconstructor + "\" needs train_clips");
            r->fit(train_clips);
          }
          const auto fused = align(derive_sparse_stream(clip), cartesian);
          std::vector<Pose> poses;
          for (const Prediction& p : reconstruct_sequence(*r, fused)) poses.push_back(p.pose);
          return MotionClip(clip.name(), clip.skeleton(), clip.framerate(), std::move(poses));
        },
        py::arg("clip"), py::arg("cartesian"), py::arg("reconstructor") = "ik",
        py::arg("train_clips") = std::vector<MotionClip>{}, py::arg("k") = 5, py::arg("lam") = 1.0,
        "Fuse the clip's sparse stream with `cartesian` and predict a pose per frame.");
  m.def("ridge_solve",
        [](const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, double lambda, bool fit_intercept) {
          const RidgeSolution s = ridge_solve(x, y, lambda, fit_intercept);
          return py::make_tuple(s.weights, Eigen::VectorXd(s.intercept.transpose()));
        },
        py::arg("x"), py::arg("y"), py::arg("lam"), py::arg("fit_intercept") = false);

  // metrics
  m.def("mpjpe", [](const MotionClip& p, const MotionClip& g, const std::string& subset) {
          return mpjpe(p, g, subset_of(subset, g.skeleton()));
        },
        py::arg("pred"), py::arg("gt"), py::arg("subset") = "Full", "Mean joint position error in cm.");
  m.def("mpjre", [](const MotionClip& p, const MotionClip& g, const std::string& subset) {
          return mpjre(p, g, subset_of(subset, g.skeleton()));
        },
        py::arg("pred"), py::arg("gt"), py::arg("subset") = "Full", "Mean geodesic rotation error in degrees.");
  m.def("mpjve", [](const MotionClip& p, const MotionClip& g, const std::string& subset) {
          return mpjve(p, g, subset_of(subset, g.skeleton()));
        },
        py::arg("pred"), py::arg("gt"), py::arg("subset") = "Full", "Mean joint velocity error in cm/s.");

  // experiments
  m.def("grid_points",
        [](const std::string& config_json) {
          const ExperimentConfig c = parse_experiment_config(config_json);
          std::vector<std::string> labels;
          for (const GridPoint& p : expand_grid(c.grid, c.full_product)) labels.push_back(p.condition + format_level(p.level));
          return labels;
        },
        py::arg("config_json"), "Validate a config and list its grid points.");
  m.def("evaluate_sweep",
        [](const std::string& config_json, std::size_t jobs) {
          const ExperimentConfig c = parse_experiment_config(config_json);
          SweepResult r;
          {
            py::gil_scoped_release release;
            r = evaluate_sweep(c, jobs);
          }
          py::list rows;
          for (const ReportRow& row : build_report(r.rows).rows) rows.append(row_dict(row.result));
          return py::make_tuple(rows, r.errors);
        },
        py::arg("config_json"), py::arg("jobs") = 1, "Returns (rows, errors) without writing files.");
  m.def("run_sweep",
        [](const std::string& config_json, std::size_t jobs, std::optional<std::string> reference) {
          const ExperimentConfig c = parse_experiment_config(config_json);
          py::gil_scoped_release release;
          const RunOutcome out = run_sweep(c, jobs, reference);
          return std::make_pair(out.written_files, out.errors);
        },
        py::arg("config_json"), py::arg("jobs") = 1, py::arg("reference") = std::nullopt,
        "Writes report.csv, report.md and run_manifest.json; returns (files, errors).");
  m.def("load_reference_table",
        [](const std::string& path) {
          py::list rows;
          for (const ReferenceRow& r : load_reference_table(read_file(path)).rows) {
            py::dict d;
            d["condition"] = r.condition;
            d["level"] = r.level ? py::cast(*r.level) : py::none();
            d["model"] = r.model;
            d["subset"] = std::string(to_string(r.subset));
            d["mpjpe"] = r.mpjpe_cm;
            d["mpjre"] = r.mpjre_deg;
            d["mpjve"] = r.mpjve_cmps;
            rows.append(d);
          }
          return rows;
        },
        py::arg("path"));
}
