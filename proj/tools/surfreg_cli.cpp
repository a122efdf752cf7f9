// surfreg: command-line entry point for every pipeline stage.

#include <CLI11.hpp>
#include <Eigen/Core>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "surfreg/config.hpp"
#include "surfreg/error.hpp"
#include "surfreg/evaluation.hpp"
#include "surfreg/pipeline.hpp"
#include "surfreg/ply_io.hpp"
#include "surfreg/recording.hpp"
#include "surfreg/reconstruction.hpp"
#include "surfreg/registration.hpp"
#include "surfreg/segmentation.hpp"
#include "surfreg/synth.hpp"

#ifndef SURFREG_VERSION
#define SURFREG_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace surfreg;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int exit_code(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::Config: return 2;
    case ErrorCategory::Io: return 3;
    case ErrorCategory::DegenerateInput: return 4;
    case ErrorCategory::Internal: return 5;
  }
  return 5;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::Io, "write failed: " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json registration_json(const RegistrationResult& r) {
  return {{"score", r.score},
          {"coverage", r.coverage},
          {"trimmed_mean_dist", r.trimmed_mean_dist},
          {"accepted", r.accepted},
          {"candidates", r.candidate_count}};
}

std::vector<SensorFrame> load_source(const PipelineConfig& cfg, std::optional<RigidTransform>* gt_pose) {
  if (!cfg.recording.empty()) {
    auto frames = load_recording(cfg.recording);
    if (gt_pose && !frames.empty()) *gt_pose = frames.front().gt_model_pose;
    return frames;
  }
  SyntheticRun run = make_synthetic_run(cfg.synth, cfg.seed);
  if (gt_pose) *gt_pose = run.model_pose;
  return std::move(run.frames);
}

struct Options {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::string recording;

  // subcommand-specific
  std::string model;
  std::string scene;
  std::string kind = "torso";
  std::string corners;
  std::string model_landmarks;
  std::string world_landmarks;
  std::string pose;
  std::string observed;
};

PipelineConfig resolve_config(const Options& o) {
  std::vector<std::string> overrides = o.overrides;
  if (!o.out_dir.empty()) overrides.push_back("output_dir=" + json(o.out_dir).dump());
  if (o.seed) overrides.push_back("seed=" + std::to_string(*o.seed));
  if (!o.recording.empty()) overrides.push_back("recording=" + json(o.recording).dump());
  PipelineConfig cfg = load_config(o.config_path, overrides);
  cfg.reg.seed = cfg.seed;
  return cfg;
}

// ---------------------------------------------------------------------------

json cmd_synth(const PipelineConfig& cfg, const Options& o, const fs::path& out) {
  if (o.kind == "checkerboard") {
    const CheckerboardSpec spec;
    std::vector<CornerSample> samples;
    int i = 0;
    for (double d : {0.5, 0.8, 1.2, 1.8}) {
      for (double tilt : {10.0, 40.0, 65.0}) {
        samples.push_back(simulate_checkerboard_view(spec, d, tilt, cfg.synth.noise_sigma,
                                                     cfg.synth.noise_sigma_quadratic, cfg.seed + i++));
      }
    }
    write_corner_file(out / "corners.txt", samples);
    return {{"samples", samples.size()}, {"corners", (out / "corners.txt").string()}};
  }
  if (o.kind != "torso") throw Error(ErrorKind::Config, "synth: unknown --kind '" + o.kind + "'");
  const SyntheticRun run = make_synthetic_run(cfg.synth, cfg.seed);
  save_recording(run.frames, out / "recording");
  write_ply(out / "model.ply", run.scene.target);
  write_pose_file(out / "gt_pose.txt", run.model_pose);
  const LandmarkSet lm = default_body_landmarks();
  std::ostringstream model_txt, world_txt;
  model_txt << std::setprecision(17);
  world_txt << std::setprecision(17);
  for (std::size_t i = 0; i < lm.size(); ++i) {
    const Vec3& m = lm.model[i];
    const Vec3 w = run.model_pose.apply(m);
    model_txt << lm.names[i] << ' ' << m.x() << ' ' << m.y() << ' ' << m.z() << '\n';
    world_txt << lm.names[i] << ' ' << w.x() << ' ' << w.y() << ' ' << w.z() << '\n';
  }
  write_text(out / "landmarks_model.txt", model_txt.str());
  write_text(out / "landmarks_world.txt", world_txt.str());
  return {{"frames", run.frames.size()}, {"recording", (out / "recording").string()}};
}

json cmd_reconstruct(const PipelineConfig& cfg, const fs::path& out, json& timing) {
  const auto frames = load_source(cfg, nullptr);
  const auto t0 = Clock::now();
  SceneMap map(cfg.map_voxel);
  for (const SensorFrame& f : frames) map.accumulate(fuse_frame(f, cfg.send_voxel), f.timestamp);
  timing["reconstruct_s"] = seconds_since(t0);
  const ColoredPointCloud cloud = map.snapshot();
  write_ply(out / "map.ply", cloud);
  json metrics = {{"points", cloud.size()}, {"frames", frames.size()}};
  std::cout << json{{"points", cloud.size()}, {"frames", frames.size()}, {"wall_s", seconds_since(t0)}}.dump() << '\n';
  return metrics;
}

json cmd_segment(const PipelineConfig& cfg, const fs::path& out) {
  const auto frames = load_source(cfg, nullptr);
  auto segmenter = make_segmenter(cfg);
  SceneMap map(cfg.map_voxel);
  VoxelMask mask(cfg.seg.voxel_res);
  std::optional<double> last;
  json per_frame = json::array();
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const SensorFrame& f = frames[i];
    const ColoredPointCloud fused = fuse_frame(f, cfg.send_voxel);
    map.accumulate(fused, f.timestamp);
    json line = {{"frame", i}, {"t", f.timestamp}};
    if (mask.empty()) {
      std::vector<Prompt> prompts = cfg.initial_prompts;
      if (prompts.empty()) prompts.push_back({f.intr_pv.width / 2, f.intr_pv.height / 2, true});
      try {
        mask = init_mask(fused, segmenter->segment(f, prompts).mask, f, cfg.seg);
        line["event"] = "init";
        last = f.timestamp;
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::Segmenter && e.kind() != ErrorKind::EmptyInitialization) throw;
        line["event"] = "init-failed";
        line["error"] = e.what();
      }
    } else if (!last || f.timestamp - *last >= cfg.seg.segment_interval - 1e-6) {
      const PropagateResult r = propagate(mask, f, *segmenter, map.snapshot(), cfg.seg);
      mask = r.mask;
      last = f.timestamp;
      line["event"] = "propagate";
      line["accepted"] = r.accepted;
      line["iou"] = r.iou;
      line["activated"] = r.activated;
      line["carved"] = r.carved;
      if (!r.error.empty()) line["error"] = r.error;
    }
    line["voxels"] = mask.size();
    std::cout << line.dump() << '\n';
    per_frame.push_back(line);
  }
  if (mask.empty()) throw Error(ErrorKind::DegenerateInput, "segment: the mask was never initialized");
  const ColoredPointCloud surface =
      extract_surface(mask, map.snapshot(), frames.back().pv_to_world().translation());
  write_ply(out / "surface.ply", surface);
  return {{"frames", per_frame}, {"final_voxels", mask.size()}, {"surface_points", surface.size()}};
}

json cmd_register(const PipelineConfig& cfg, const Options& o, const fs::path& out, json& timing) {
  if (o.scene.empty()) throw Error(ErrorKind::Config, "register: --scene is required");
  const ColoredPointCloud model_cloud = load_model_cloud(o.model.empty() ? cfg.model : o.model,
                                                         cfg.synth.model_samples, cfg.seed);
  const ColoredPointCloud scene = read_ply_cloud(o.scene);
  const auto t0 = Clock::now();
  const ModelData model = prepare_model(model_cloud, cfg.reg);
  RegistrationState state = initial_state(model);
  const RegistrationResult r = register_frame(state, model, scene, cfg.reg);
  timing["register_s"] = seconds_since(t0);
  write_pose_file(out / "pose.txt", r.pose);
  json metrics = registration_json(r);
  std::cout << metrics.dump() << '\n';
  return metrics;
}

json cmd_pipeline(const PipelineConfig& cfg, const fs::path& out, json& timing) {
  std::optional<RigidTransform> gt;
  const auto frames = load_source(cfg, &gt);
  const ModelData model = prepare_model(load_model_cloud(cfg.model, cfg.synth.model_samples, cfg.seed), cfg.reg);
  auto segmenter = make_segmenter(cfg);
  const PipelineResult res = run_pipeline(frames_from_vector(frames), model, *segmenter, cfg);
  write_trajectory(out / "trajectory.txt", res.frames);
  write_ply(out / "map.ply", res.map);
  if (!res.surface.empty()) write_ply(out / "surface.ply", res.surface);
  if (res.final_pose) write_pose_file(out / "pose.txt", *res.final_pose);
  timing["wall_s"] = res.wall_seconds;
  timing["frames_per_s"] = static_cast<double>(frames.size()) / res.wall_seconds;
  timing["stage_s"] = {{"reconstruct", res.stage_seconds.reconstruct},
                       {"segment", res.stage_seconds.segment},
                       {"register", res.stage_seconds.reg}};
  json metrics = {{"frames", frames.size()},
                  {"registrations", std::count_if(res.frames.begin(), res.frames.end(),
                                                  [](const FrameRecord& f) { return f.registered; })},
                  {"mask_voxels", res.mask.size()},
                  {"map_points", res.map.size()},
                  {"tracked", res.final_pose.has_value()}};
  for (auto it = res.frames.rbegin(); it != res.frames.rend(); ++it) {
    if (it->registered) {
      metrics["last_registration"] = registration_json(it->registration);
      break;
    }
  }
  if (gt && res.final_pose && cfg.model.empty()) {
    // Synthetic ground truth: TRE at the torso surface landmarks.
    double worst = 0.0;
    for (const Vec3& p : torso_surface_landmarks()) {
      worst = std::max(worst, (res.final_pose->apply(p) - gt->apply(p)).norm());
    }
    metrics["max_surface_tre"] = worst;
  }
  std::cout << metrics.dump() << '\n';
  return metrics;
}

json cmd_eval_recon(const Options& o, const fs::path& out) {
  if (o.corners.empty()) throw Error(ErrorKind::Config, "eval-recon: --corners is required");
  const CheckerboardSpec spec;
  std::vector<ReconSample> samples;
  for (const CornerSample& c : parse_corner_file(o.corners, spec)) {
    samples.push_back(eval_reconstruction(c.corners, spec, c.normal, c.depth));
  }
  const auto cells = stratify(samples);
  const std::string report = recon_report_json(samples, cells);
  write_text(out / "report.json", report + "\n");
  std::cout << recon_report_table(cells);
  return json::parse(report)["cells"];
}

json cmd_eval_tre(const Options& o, const fs::path& out) {
  if (o.model_landmarks.empty() || o.world_landmarks.empty() || o.pose.empty()) {
    throw Error(ErrorKind::Config, "eval-tre: --model-landmarks, --world-landmarks and --pose are required");
  }
  const LandmarkSet lm = match_landmarks(parse_landmark_file(o.model_landmarks), parse_landmark_file(o.world_landmarks));
  const RigidTransform pose = read_pose_file(o.pose);
  ColoredPointCloud observed;
  if (!o.observed.empty()) observed = read_ply_cloud(o.observed);
  const TreReport rep = evaluate_registration(pose, lm, observed);
  const std::string report = tre_report_json(rep);
  write_text(out / "report.json", report + "\n");
  std::cout << tre_report_table(rep);
  return json::parse(report);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"surfreg: markerless model-to-scene registration"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  app.add_option("-c,--config", o.config_path, "JSON config file (default: $SURFREG_CONFIG)");
  app.add_option("-s,--set", o.overrides, "Override a config key: dotted.key=value");
  app.add_option("-o,--out", o.out_dir, "Output directory (config key output_dir)");
  app.add_option("--seed", o.seed, "Seed (config key seed)");

  auto* synth = app.add_subcommand("synth", "Render the bundled synthetic scene to a recording");
  synth->add_option("--kind", o.kind, "torso | checkerboard")->check(CLI::IsMember({"torso", "checkerboard"}));
  auto* recon = app.add_subcommand("reconstruct", "Fuse a recording into a world map");
  auto* seg = app.add_subcommand("segment", "Track the target surface mask over a recording");
  auto* reg = app.add_subcommand("register", "Register a model to a scene cloud");
  reg->add_option("--model", o.model, "Model mesh or cloud (.ply)");
  reg->add_option("--scene", o.scene, "Scene cloud (.ply)");
  auto* pipe = app.add_subcommand("pipeline", "Reconstruct, segment and register frame by frame");
  auto* erec = app.add_subcommand("eval-recon", "Checkerboard reconstruction accuracy");
  erec->add_option("--corners", o.corners, "Corner file");
  auto* etre = app.add_subcommand("eval-tre", "Landmark registration accuracy");
  etre->add_option("--model-landmarks", o.model_landmarks, "Model-frame landmark file");
  etre->add_option("--world-landmarks", o.world_landmarks, "World-frame landmark file");
  etre->add_option("--pose", o.pose, "Estimated model-to-world pose file");
  etre->add_option("--observed", o.observed, "Observed surface cloud (.ply) for DVA");
  for (auto* sub : {recon, seg, pipe}) sub->add_option("--recording", o.recording, "Recording directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  json run = {{"subcommand", name},
              {"argv", std::vector<std::string>(argv, argv + argc)},
              {"versions", {{"surfreg", SURFREG_VERSION},
                            {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                          "." + std::to_string(EIGEN_MINOR_VERSION)},
                            {"compiler", __VERSION__}}}};
  json timing = json::object();
  fs::path out = o.out_dir.empty() ? fs::path("out") : fs::path(o.out_dir);
  int rc = 0;
  const auto t0 = Clock::now();
  try {
    const PipelineConfig cfg = resolve_config(o);
    out = cfg.output_dir;
    fs::create_directories(out);
    run["config"] = config_to_json(cfg);
    run["seed"] = cfg.seed;
    json metrics;
    if (name == "synth") metrics = cmd_synth(cfg, o, out);
    else if (name == "reconstruct") metrics = cmd_reconstruct(cfg, out, timing);
    else if (name == "segment") metrics = cmd_segment(cfg, out);
    else if (name == "register") metrics = cmd_register(cfg, o, out, timing);
    else if (name == "pipeline") metrics = cmd_pipeline(cfg, out, timing);
    else if (name == "eval-recon") metrics = cmd_eval_recon(o, out);
    else metrics = cmd_eval_tre(o, out);
    write_json(out / "metrics.json", metrics);
    if (!timing.empty()) write_json(out / "timing.json", timing);
    run["status"] = "ok";
  } catch (const Error& e) {
    rc = exit_code(e.category());
    std::cerr << "error [" << to_string(e.category()) << "]: " << e.what() << '\n';
    run["status"] = "error";
    run["error"] = {{"category", to_string(e.category())}, {"kind", to_string(e.kind())}, {"message", e.what()}};
  } catch (const std::exception& e) {
    rc = 5;
    std::cerr << "error [internal]: " << e.what() << '\n';
    run["status"] = "error";
    run["error"] = {{"category", "internal"}, {"message", e.what()}};
  }
  timing["total_s"] = seconds_since(t0);
  run["timing"] = timing;
  run["exit_code"] = rc;
  try {
    fs::create_directories(out);
    write_json(out / "run.json", run);
  } catch (const std::exception& e) {
    std::cerr << "warning: could not write run.json: " << e.what() << '\n';
  }
  return rc;
}
