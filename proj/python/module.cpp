// Python bindings: a thin layer over the C++ core. Point sets cross the
// boundary as (N, 3) float64 arrays and poses as 4x4 matrices.

#include <pybind11/eigen.h>
#include <pybind11/gil_safe_call_once.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "surfreg/config.hpp"
#include "surfreg/error.hpp"
#include "surfreg/evaluation.hpp"
#include "surfreg/pipeline.hpp"
#include "surfreg/registration.hpp"
#include "surfreg/synth.hpp"

namespace py = pybind11;
using namespace surfreg;

namespace {

using Points = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

std::vector<Vec3> to_vec(const Points& p) {
  std::vector<Vec3> out(static_cast<std::size_t>(p.rows()));
  for (Eigen::Index i = 0; i < p.rows(); ++i) out[static_cast<std::size_t>(i)] = p.row(i).transpose();
  return out;
}

Points to_array(const std::vector<Vec3>& v) {
  Points p(static_cast<Eigen::Index>(v.size()), 3);
  for (std::size_t i = 0; i < v.size(); ++i) p.row(static_cast<Eigen::Index>(i)) = v[i].transpose();
  return p;
}

ColoredPointCloud to_cloud(const Points& p) {
  ColoredPointCloud c;
  c.points = to_vec(p);
  return c;
}

PipelineConfig config_from(const std::vector<std::string>& overrides) {
  PipelineConfig cfg;
  for (const std::string& o : overrides) apply_override(cfg, o);
  cfg.validate();
  cfg.reg.seed = cfg.seed;
  return cfg;
}

py::dict registration_dict(const RegistrationResult& r) {
  py::dict d;
  d["pose"] = r.pose.matrix();
  d["score"] = r.score;
  d["coverage"] = r.coverage;
  d["trimmed_mean_dist"] = r.trimmed_mean_dist;
  d["accepted"] = r.accepted;
  d["candidates"] = r.candidate_count;
  return d;
}

}  // namespace

PYBIND11_MODULE(_surfreg, m) {
  m.doc() = "Markerless model-to-scene surface registration";

  PYBIND11_CONSTINIT static py::gil_safe_call_once_and_store<py::object> error_type;
  error_type.call_once_and_store_result(
      [&] { return py::object(py::exception<Error>(m, "SurfregError", PyExc_RuntimeError)); });
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      const py::object& type = error_type.get_stored();
      py::object exc = type(e.what());
      exc.attr("kind") = to_string(e.kind());
      exc.attr("category") = to_string(e.category());
      PyErr_SetObject(type.ptr(), exc.ptr());
    }
  });

  m.def("config_keys", &config_keys, "Every configurable key in dotted form.");
  m.def(
      "config_json",
      [](const std::string& path, const std::vector<std::string>& overrides) {
        return config_to_json(load_config(path, overrides)).dump();
      },
      py::arg("path") = "", py::arg("overrides") = std::vector<std::string>{},
      "Resolved configuration (defaults, file or $SURFREG_CONFIG, overrides) as JSON text.");

  m.def(
      "sample_torso",
      [](std::size_t n, std::uint64_t seed) { return to_array(make_torso_mesh().sample_surface(n, seed).points); },
      py::arg("n"), py::arg("seed") = 0, "Area-uniform samples of the synthetic torso surface (model frame).");
  m.def("torso_landmarks", [] { return to_array(torso_surface_landmarks()); },
        "Eight landmarks on the synthetic torso surface (model frame).");
  m.def("default_torso_pose", [] { return default_torso_pose().matrix(); });

  m.def(
      "score_pose",
      [](const Mat4& pose, const Points& model, const Points& scene, const std::vector<std::string>& overrides) {
        const PipelineConfig cfg = config_from(overrides);
        const ScoreResult s = score_pose(RigidTransform::from_matrix(pose), to_cloud(model), to_cloud(scene), cfg.reg);
        py::dict d;
        d["score"] = s.score;
        d["coverage"] = s.coverage;
        d["trimmed_mean_dist"] = s.trimmed_mean_dist;
        return d;
      },
      py::arg("pose"), py::arg("model"), py::arg("scene"), py::arg("overrides") = std::vector<std::string>{});

  m.def(
      "register",
      [](const Points& model, const Points& scene, const std::optional<Mat4>& prior,
         const std::vector<std::string>& overrides) {
        const PipelineConfig cfg = config_from(overrides);
        ModelData md;
        RegistrationState state;
        RegistrationResult r;
        {
          py::gil_scoped_release release;
          md = prepare_model(to_cloud(model), cfg.reg);
          state = initial_state(md);
          if (prior) state.pose = RigidTransform::from_matrix(*prior);
          r = register_frame(state, md, to_cloud(scene), cfg.reg);
        }
        return registration_dict(r);
      },
      py::arg("model"), py::arg("scene"), py::arg("prior") = py::none(),
      py::arg("overrides") = std::vector<std::string>{},
      "Registers model points onto scene points; returns the winning candidate.");

  m.def(
      "run_synthetic",
      [](const std::vector<std::string>& overrides) {
        const PipelineConfig cfg = config_from(overrides);
        SyntheticRun run;
        PipelineResult res;
        {
          py::gil_scoped_release release;
          run = make_synthetic_run(cfg.synth, cfg.seed);
          const ModelData md = prepare_model(synthetic_model_cloud(cfg.synth, cfg.seed), cfg.reg);
          auto seg = make_segmenter(cfg);
          res = run_pipeline(frames_from_vector(run.frames), md, *seg, cfg);
        }
        py::list frames;
        for (const FrameRecord& f : res.frames) {
          py::dict d;
          d["index"] = f.index;
          d["timestamp"] = f.timestamp;
          d["mask_updated"] = f.mask_updated;
          d["mask_iou"] = f.mask_iou;
          d["mask_voxels"] = f.mask_voxels;
          d["registered"] = f.registered;
          d["registration"] = f.registered ? py::object(registration_dict(f.registration)) : py::none();
          d["pose"] = f.pose ? py::cast(f.pose->matrix()) : py::none();
          d["note"] = f.note;
          frames.append(d);
        }
        py::dict out;
        out["frames"] = frames;
        out["final_pose"] = res.final_pose ? py::cast(res.final_pose->matrix()) : py::none();
        out["gt_pose"] = run.model_pose.matrix();
        out["surface"] = to_array(res.surface.points);
        out["map_points"] = res.map.size();
        out["wall_seconds"] = res.wall_seconds;
        return out;
      },
      py::arg("overrides") = std::vector<std::string>{},
      "Runs the staged pipeline on the bundled synthetic scene.");

  m.def(
      "tre",
      [](const Mat4& estimate, const Points& model, const Points& world) {
        LandmarkSet lm;
        lm.model = to_vec(model);
        lm.world = to_vec(world);
        for (std::size_t i = 0; i < lm.model.size(); ++i) lm.names.push_back("p" + std::to_string(i));
        return tre(RigidTransform::from_matrix(estimate), lm);
      },
      py::arg("estimate"), py::arg("model"), py::arg("world"), "Per-landmark target registration error.");

  m.def(
      "eval_reconstruction",
      [](const Points& corners, int cols, int rows, double spacing, const Vec3& normal, double depth) {
        const CheckerboardSpec spec{cols, rows, spacing};
        spec.validate();
        const std::vector<Vec3> c = to_vec(corners);
        const ReconSample s = eval_reconstruction(c, spec, normal, depth);
        py::dict d;
        d["residuals"] = s.residuals;
        d["rms"] = s.rms;
        d["nme"] = s.nme;
        d["tilt_deg"] = s.tilt_deg;
        d["mean"] = s.stats.mean;
        return d;
      },
      py::arg("corners"), py::arg("cols"), py::arg("rows"), py::arg("spacing"), py::arg("normal"),
      py::arg("depth"), "Checkerboard residuals after the best rigid fit of the board model.");
}
