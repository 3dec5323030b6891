// Command-line front end: render synthetic tactile data, calibrate the
// color-to-gradient table, reconstruct depth, analyze slip, estimate
// forces, design illumination, and replay full frame streams.
//
// Exit codes: 0 ok, 2 config error, 3 input error, 4 numeric failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tactus/config.hpp"
#include "tactus/core.hpp"
#include "tactus/distortion.hpp"
#include "tactus/fem.hpp"
#include "tactus/grid_io.hpp"
#include "tactus/illum.hpp"
#include "tactus/image_io.hpp"
#include "tactus/markers.hpp"
#include "tactus/overlay.hpp"
#include "tactus/photostereo.hpp"
#include "tactus/pipeline.hpp"
#include "tactus/poisson.hpp"
#include "tactus/simulator.hpp"
#include "tactus/slip.hpp"

namespace fs = std::filesystem;
using tactus::config::json;

namespace {

std::string join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

std::string frame_name(const char* prefix, int i, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_%06d%s", prefix, i, ext);
  return buf;
}

std::optional<tactus::distortion::WarpMap> load_warp(const std::string& path) {
  if (path.empty()) return std::nullopt;
  return tactus::distortion::WarpMap::load(path);
}

tactus::TactileImage load_rectified(
    const std::string& path,
    const std::optional<tactus::distortion::WarpMap>& warp) {
  tactus::TactileImage img = tactus::read_image(path);
  if (!warp) return img;
  if (img.width != warp->src_x.width() || img.height != warp->src_x.height())
    throw tactus::InputError(path + ": size does not match the warp map");
  return tactus::distortion::apply_warp(img, *warp);
}

tactus::GridD mesh_channel_grid(const tactus::illum::ReceiverMesh& mesh,
                                int channel) {
  tactus::GridD g(mesh.bins, mesh.bins);
  for (int y = 0; y < mesh.bins; ++y)
    for (int x = 0; x < mesh.bins; ++x)
      g(x, y) = channel < 0 ? mesh.total(x, y) : mesh.at(x, y)[channel];
  return g;
}

void write_mesh_bundle(const std::string& dir, const std::string& prefix,
                       const tactus::illum::ReceiverMesh& mesh) {
  static constexpr struct {
    int channel;
    const char* name;
  } kPlanes[] = {{-1, "total"}, {0, "r"}, {1, "g"}, {2, "b"}};
  for (const auto& pl : kPlanes) {
    tactus::write_png(join(dir, prefix + "_" + pl.name + ".png"),
                      tactus::overlay::mesh_heatmap(mesh, pl.channel), 8);
    tactus::write_grid_csv(join(dir, prefix + "_" + pl.name + ".csv"),
                           mesh_channel_grid(mesh, pl.channel), "flux");
  }
}

// ---------------------------------------------------------------------------

struct RenderArgs {
  std::string config_path;
  std::string out_dir = "render_out";
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool dry_run = false;
};

int cmd_render(const RenderArgs& args) {
  auto cfg = tactus::config::parse_scene(
      tactus::config::load_json_file(args.config_path));
  if (args.seed_set) cfg.seed = args.seed;

  const auto& geom = cfg.geometry;
  tactus::sim::Renderer renderer(cfg.illumination, geom);
  const double base_cx =
      cfg.center_x_px >= 0.0 ? cfg.center_x_px : (geom.width - 1) / 2.0;
  const double base_cy =
      cfg.center_y_px >= 0.0 ? cfg.center_y_px : (geom.height - 1) / 2.0;

  if (args.dry_run) {
    std::cout << "dry-run ok: " << cfg.frames << " frame(s), "
              << geom.width << "x" << geom.height << "\n";
    return 0;
  }
  fs::create_directories(args.out_dir);

  tactus::sim::Scene scene = tactus::sim::Scene::flat(geom, cfg.albedo);
  if (cfg.markers) scene.markers = tactus::sim::MarkerLayer{};

  auto finish = [&](const tactus::TactileImage& img, std::uint64_t noise_seed) {
    tactus::TactileImage out = img;
    if (cfg.distortion_k1 != 0.0)
      out = tactus::sim::apply_synthetic_distortion(out, cfg.distortion_k1);
    if (cfg.noise_sigma > 0.0)
      out = tactus::sim::add_gaussian_noise(out, cfg.noise_sigma, noise_seed);
    return out;
  };

  // The reference is the unloaded gel through the same camera, noise-free.
  tactus::write_image(join(args.out_dir, "reference.png"),
                      finish(renderer.render(scene), 0));

  json truth;
  truth["shape"] = cfg.shape;
  truth["seed"] = cfg.seed;
  truth["distortion_k1"] = cfg.distortion_k1;
  truth["noise_sigma"] = cfg.noise_sigma;
  truth["truth_domain"] = "ideal";  // sidecars are pre-distortion
  json frames = json::array();

  for (int i = 0; i < cfg.frames; ++i) {
    const double cx = base_cx + i * cfg.step_dx_px;
    const double cy = base_cy + i * cfg.step_dy_px;
    json rec;
    rec["frame"] = i;
    rec["file"] = frame_name("frame", i, ".png");
    if (cfg.shape == "sphere") {
      scene.height = tactus::sim::sphere_indenter(
          cfg.sphere_radius_mm, cx, cy, cfg.press_depth_mm, geom);
      const double rc_px =
          tactus::sim::sphere_contact_radius_mm(cfg.sphere_radius_mm,
                                                cfg.press_depth_mm) /
          geom.pixel_pitch_mm;
      rec["center_x_px"] = cx;
      rec["center_y_px"] = cy;
      rec["depth_mm"] = cfg.press_depth_mm;
      rec["sphere_radius_mm"] = cfg.sphere_radius_mm;
      rec["contact_radius_px"] = rc_px;
      tactus::save_depth(join(args.out_dir, frame_name("depth", i, ".tgrid")),
                         scene.height);
      tactus::save_gradients(
          join(args.out_dir, frame_name("grads", i, ".tgrid")),
          tactus::sim::sphere_cap_gradients(cfg.sphere_radius_mm, cx, cy,
                                            cfg.press_depth_mm, geom));
    }
    tactus::write_image(join(args.out_dir, rec["file"].get<std::string>()),
                        finish(renderer.render(scene), cfg.seed + i));
    frames.push_back(rec);
  }
  truth["frames"] = frames;
  tactus::config::write_json_file(join(args.out_dir, "truth.json"), truth);
  std::cout << "wrote " << cfg.frames << " frame(s) to " << args.out_dir
            << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct CalibrateArgs {
  std::string config_path;
  std::string out_dir = "calib_out";
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool dry_run = false;
};

int cmd_calibrate(const CalibrateArgs& args) {
  auto cfg = tactus::config::parse_calibrate(
      tactus::config::load_json_file(args.config_path));
  if (args.seed_set) cfg.seed = args.seed;

  if (args.dry_run) {
    std::cout << "dry-run ok: " << cfg.presses << " press(es), bins "
              << cfg.bins << "\n";
    return 0;
  }
  fs::create_directories(args.out_dir);

  const auto samples = tactus::sim::generate_calibration_set(
      cfg.sphere_radius_mm, cfg.presses, cfg.illumination, cfg.geometry,
      cfg.seed);
  tactus::sim::Renderer renderer(cfg.illumination, cfg.geometry);
  const tactus::TactileImage reference =
      renderer.render(tactus::sim::Scene::flat(cfg.geometry));

  std::vector<tactus::stereo::CalibrationPress> presses;
  presses.reserve(samples.size());
  for (const auto& s : samples)
    presses.push_back({s.image, s.center_x_px, s.center_y_px,
                       s.contact_radius_px});
  const auto table = tactus::stereo::calibrate(
      presses, reference, cfg.geometry, cfg.sphere_radius_mm, cfg.bins);

  table.save(join(args.out_dir, "table.bin"));
  tactus::write_image(join(args.out_dir, "reference.png"), reference);

  json coverage;
  coverage["presses"] = cfg.presses;
  coverage["bins"] = cfg.bins;
  coverage["sphere_radius_mm"] = cfg.sphere_radius_mm;
  coverage["occupancy"] = table.occupancy();
  coverage["seed"] = cfg.seed;
  tactus::config::write_json_file(join(args.out_dir, "coverage.json"),
                                  coverage);
  std::cout << "calibrated " << cfg.bins << "^3 table, occupancy "
            << table.occupancy() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct PairArgs {
  std::string frame_path;
  std::string reference_path;
  std::string table_path;
  std::string warp_path;
  std::string config_path;  // thresholds / material; optional
  std::string out_dir;
  bool dry_run = false;
};

struct PairInputs {
  tactus::TactileImage reference;
  tactus::TactileImage frame;
  tactus::stereo::CalibrationTable table{32};
  tactus::SensorGeometry geometry;
};

PairInputs load_pair(const PairArgs& args,
                     const tactus::SensorGeometry& geom) {
  tactus::config::require_file(args.frame_path, "frame");
  tactus::config::require_file(args.reference_path, "reference frame");
  tactus::config::require_file(args.table_path, "calibration table");
  const auto warp = load_warp(args.warp_path);
  PairInputs in;
  in.reference = load_rectified(args.reference_path, warp);
  in.frame = load_rectified(args.frame_path, warp);
  in.table = tactus::stereo::CalibrationTable::load(args.table_path);
  in.geometry = geom;
  in.geometry.width = in.frame.width;
  in.geometry.height = in.frame.height;
  if (!in.frame.same_size(in.reference))
    throw tactus::InputError("frame and reference sizes differ");
  return in;
}

int cmd_reconstruct(const PairArgs& args) {
  const auto in = load_pair(args, tactus::SensorGeometry{});
  if (args.dry_run) {
    std::cout << "dry-run ok: " << in.frame.width << "x" << in.frame.height
              << "\n";
    return 0;
  }
  fs::create_directories(args.out_dir);

  tactus::PoissonSolver solver(in.geometry.width, in.geometry.height,
                               in.geometry.pixel_pitch_mm);
  tactus::stereo::ReconstructionStats stats;
  const tactus::DepthMap depth =
      tactus::stereo::reconstruct(in.frame, in.reference, in.table, solver,
                                  &stats);

  tactus::save_depth(join(args.out_dir, "depth.tgrid"), depth);
  tactus::write_grid_csv(join(args.out_dir, "depth.csv"), depth.z,
                         "depth_mm");
  tactus::write_image(join(args.out_dir, "view3d.png"),
                      tactus::overlay::depth_view_3d(depth, in.geometry), 8);

  double peak = 0.0;
  int px = 0, py = 0;
  for (int y = 0; y < depth.height(); ++y)
    for (int x = 0; x < depth.width(); ++x)
      if (depth.z(x, y) > peak) {
        peak = depth.z(x, y);
        px = x;
        py = y;
      }
  json stats_j;
  stats_j["peak_depth_mm"] = peak;
  stats_j["peak_x_px"] = px;
  stats_j["peak_y_px"] = py;
  stats_j["clamped_fraction"] = stats.clamped_fraction;
  stats_j["fallback_fraction"] = stats.fallback_fraction;
  tactus::config::write_json_file(join(args.out_dir, "stats.json"), stats_j);
  std::cout << "peak depth " << peak << " mm at (" << px << ", " << py
            << ")\n";
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_slip(const PairArgs& args) {
  const json cfg_json = args.config_path.empty()
                            ? json::object()
                            : tactus::config::load_json_file(args.config_path);
  const auto analysis = tactus::config::parse_analysis(cfg_json);
  const auto in = load_pair(args, analysis.geometry);
  if (args.dry_run) {
    std::cout << "dry-run ok\n";
    return 0;
  }
  fs::create_directories(args.out_dir);

  const auto ref_markers = tactus::distortion::detect_markers(in.reference);
  const auto cur_markers = tactus::distortion::detect_markers(in.frame);
  const auto motion = tactus::markers::track(ref_markers, cur_markers);

  tactus::PoissonSolver solver(in.geometry.width, in.geometry.height,
                               in.geometry.pixel_pitch_mm);
  const tactus::DepthMap depth =
      tactus::stereo::reconstruct(in.frame, in.reference, in.table, solver);
  const auto report = tactus::slip::detect_slip(motion, depth, analysis.slip);

  json j = tactus::config::json_of(report);
  json devs = json::array();
  for (const auto& m : report.contact_markers) {
    const auto& c = motion.matches[m.match_index];
    devs.push_back({{"ref_x", c.ref_x},
                    {"ref_y", c.ref_y},
                    {"deviation_px", m.deviation_px},
                    {"flagged", m.flagged}});
  }
  j["deviations"] = devs;
  tactus::config::write_json_file(join(args.out_dir, "slip.json"), j);
  tactus::markers::write_motion_csv(join(args.out_dir, "motion.csv"), motion);
  tactus::write_image(
      join(args.out_dir, "overlay.png"),
      tactus::overlay::slip_overlay(in.frame, motion, report), 8);
  std::cout << "state " << tactus::slip::to_string(report.state)
            << ", score " << report.slip_score << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_force(const PairArgs& args) {
  const json cfg_json = args.config_path.empty()
                            ? json::object()
                            : tactus::config::load_json_file(args.config_path);
  const auto analysis = tactus::config::parse_analysis(cfg_json);
  const auto in = load_pair(args, analysis.geometry);
  if (args.dry_run) {
    std::cout << "dry-run ok\n";
    return 0;
  }
  fs::create_directories(args.out_dir);

  const auto ref_markers = tactus::distortion::detect_markers(in.reference);
  const auto cur_markers = tactus::distortion::detect_markers(in.frame);
  const auto motion = tactus::markers::track(ref_markers, cur_markers);

  tactus::PoissonSolver solver(in.geometry.width, in.geometry.height,
                               in.geometry.pixel_pitch_mm);
  const tactus::DepthMap depth =
      tactus::stereo::reconstruct(in.frame, in.reference, in.table, solver);

  const auto mesh = tactus::fem::HexMesh::centered(
      in.geometry, analysis.mesh_nx, analysis.mesh_ny);
  const auto K = tactus::fem::assemble(mesh, analysis.material);
  const auto disp = tactus::fem::displacement_field(motion, depth, mesh,
                                                    in.geometry,
                                                    analysis.camera);
  const auto forces = tactus::fem::compute_forces(K, disp, mesh);

  tactus::fem::write_force_csv(join(args.out_dir, "force.csv"), forces);
  tactus::write_image(
      join(args.out_dir, "tangential.png"),
      tactus::overlay::tangential_force_overlay(in.frame, forces,
                                                in.geometry), 8);
  tactus::write_image(
      join(args.out_dir, "normal.png"),
      tactus::overlay::normal_force_overlay(forces, mesh, in.geometry), 8);

  double max_normal = 0.0;
  for (const auto& f : forces.top_nodes)
    max_normal = std::max(max_normal, std::abs(f.fz_n));
  json j;
  j["total_fx_n"] = forces.total_fx_n;
  j["total_fy_n"] = forces.total_fy_n;
  j["total_fz_n"] = forces.total_fz_n;
  j["max_normal_n"] = max_normal;
  j["top_nodes"] = forces.top_nodes.size();
  tactus::config::write_json_file(join(args.out_dir, "force.json"), j);
  std::cout << "total force (" << forces.total_fx_n << ", "
            << forces.total_fy_n << ", " << forces.total_fz_n << ") N\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct IllumArgs {
  std::string config_path;
  std::string out_dir = "illum_out";
  bool dry_run = false;
};

int cmd_optimize_illum(const IllumArgs& args) {
  const auto cfg = tactus::config::parse_illum_opt(
      tactus::config::load_json_file(args.config_path));
  if (args.dry_run) {
    std::cout << "dry-run ok: budget " << cfg.budget << ", bins " << cfg.bins
              << "\n";
    return 0;
  }
  fs::create_directories(args.out_dir);

  const auto result = tactus::illum::optimize(cfg.initial, cfg.bounds,
                                              cfg.budget, cfg.geometry,
                                              cfg.weights, cfg.bins);

  json j;
  j["initial"] = tactus::config::json_of(result.initial);
  j["best"] = tactus::config::json_of(result.best);
  j["initial_f"] = result.initial_f;
  j["final_f"] = result.final_f;
  j["initial_metrics"] = tactus::config::json_of(result.initial_metrics);
  j["final_metrics"] = tactus::config::json_of(result.final_metrics);
  j["evaluations"] = result.evaluations;
  json emitters = json::array();
  const auto best_cfg = tactus::illum::shared_params_config(result.best);
  for (int c = 0; c < 3; ++c)
    for (const auto& e : best_cfg.channels[c])
      emitters.push_back({{"channel", c},
                          {"x_mm", e.x_mm},
                          {"y_mm", e.y_mm},
                          {"z_mm", e.z_mm},
                          {"tilt_deg", e.tilt_deg},
                          {"azimuth_deg", e.azimuth_deg},
                          {"lobe_exponent", e.lobe_exponent},
                          {"power", e.power}});
  j["emitters"] = emitters;
  tactus::config::write_json_file(join(args.out_dir, "optimized.json"), j);

  std::FILE* fp = std::fopen(join(args.out_dir, "trace.csv").c_str(), "w");
  if (!fp) throw tactus::InputError("cannot write trace.csv");
  std::fprintf(fp, "evaluation,best_f\n");
  for (std::size_t i = 0; i < result.trace.size(); ++i)
    std::fprintf(fp, "%zu,%s\n", i + 1,
                 tactus::detail::format_double(result.trace[i]).c_str());
  std::fclose(fp);

  write_mesh_bundle(args.out_dir, "before", result.before);
  write_mesh_bundle(args.out_dir, "after", result.after);
  std::cout << "f " << result.initial_f << " -> " << result.final_f
            << " in " << result.evaluations << " evaluations\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct PipelineArgs {
  std::string config_path;
  std::string out_dir;  // empty = keep the config's choice
  int jobs = 0;         // 0 = keep the config's choice
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool dry_run = false;
};

int cmd_pipeline(const PipelineArgs& args) {
  auto cfg = tactus::config::parse_pipeline(
      tactus::config::load_json_file(args.config_path));
  if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
  if (args.jobs != 0) cfg.jobs = args.jobs;
  if (args.seed_set) cfg.seed = args.seed;
  if (cfg.jobs < 1) throw tactus::ConfigError("jobs must be at least 1");

  const tactus::pipeline::Pipeline pipe(cfg);
  const auto files = tactus::pipeline::list_frames(cfg.frames_dir);
  if (args.dry_run) {
    std::cout << "dry-run ok: " << files.size() << " frame(s)\n";
    return 0;
  }
  const auto summary = pipe.run();
  std::cout << summary.frames << " frames in " << summary.wall_seconds
            << " s (" << summary.frames_per_second << " fps)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tactile sensing toolkit: synthetic data, depth, slip, force,"
               " illumination design"};
  app.require_subcommand(1);

  RenderArgs render_args;
  auto* render = app.add_subcommand(
      "render", "render synthetic tactile frames with ground truth");
  render->add_option("--config", render_args.config_path, "scene config JSON")
      ->required();
  render->add_option("--out", render_args.out_dir, "output directory");
  render->add_option("--seed", render_args.seed, "override config seed");
  render->add_flag("--dry-run", render_args.dry_run,
                   "validate inputs, compute nothing");

  CalibrateArgs cal_args;
  auto* cal = app.add_subcommand(
      "calibrate", "build a color-to-gradient table from sphere presses");
  cal->add_option("--config", cal_args.config_path, "calibration config JSON")
      ->required();
  cal->add_option("--out", cal_args.out_dir, "output directory");
  cal->add_option("--seed", cal_args.seed, "override config seed");
  cal->add_flag("--dry-run", cal_args.dry_run,
                "validate inputs, compute nothing");

  auto add_pair_options = [](CLI::App* sub, PairArgs& a, bool with_config) {
    sub->add_option("--frame", a.frame_path, "tactile frame image")
        ->required();
    sub->add_option("--reference", a.reference_path,
                    "unloaded reference image")
        ->required();
    sub->add_option("--table", a.table_path, "calibration table file")
        ->required();
    sub->add_option("--warp", a.warp_path, "undistortion warp map");
    if (with_config)
      sub->add_option("--config", a.config_path,
                      "thresholds/material config JSON");
    sub->add_option("--out", a.out_dir, "output directory");
    sub->add_flag("--dry-run", a.dry_run, "validate inputs, compute nothing");
  };

  PairArgs rec_args;
  rec_args.out_dir = "reconstruct_out";
  auto* rec = app.add_subcommand("reconstruct",
                                 "depth map from one tactile frame");
  add_pair_options(rec, rec_args, false);

  PairArgs slip_args;
  slip_args.out_dir = "slip_out";
  auto* slip_cmd = app.add_subcommand(
      "slip", "incipient-slip analysis of a frame against the reference");
  add_pair_options(slip_cmd, slip_args, true);

  PairArgs force_args;
  force_args.out_dir = "force_out";
  auto* force_cmd = app.add_subcommand(
      "force", "3D force field from marker motion and depth");
  add_pair_options(force_cmd, force_args, true);

  IllumArgs illum_args;
  auto* illum_cmd = app.add_subcommand(
      "optimize-illum", "optimize the shared emitter parameter set");
  illum_cmd->add_option("--config", illum_args.config_path,
                        "initial config and bounds JSON")
      ->required();
  illum_cmd->add_option("--out", illum_args.out_dir, "output directory");
  illum_cmd->add_flag("--dry-run", illum_args.dry_run,
                      "validate inputs, compute nothing");

  PipelineArgs pipe_args;
  auto* pipe = app.add_subcommand(
      "pipeline", "replay a frame directory through the full stack");
  pipe->add_option("--config", pipe_args.config_path, "pipeline config JSON")
      ->required();
  pipe->add_option("--out", pipe_args.out_dir, "override output directory");
  pipe->add_option("--jobs", pipe_args.jobs, "worker threads");
  pipe->add_option("--seed", pipe_args.seed, "override config seed");
  pipe->add_flag("--dry-run", pipe_args.dry_run,
                 "validate inputs, compute nothing");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  render_args.seed_set = render->count("--seed") > 0;
  cal_args.seed_set = cal->count("--seed") > 0;
  pipe_args.seed_set = pipe->count("--seed") > 0;

  try {
    if (*render) return cmd_render(render_args);
    if (*cal) return cmd_calibrate(cal_args);
    if (*rec) return cmd_reconstruct(rec_args);
    if (*slip_cmd) return cmd_slip(slip_args);
    if (*force_cmd) return cmd_force(force_args);
    if (*illum_cmd) return cmd_optimize_illum(illum_args);
    if (*pipe) return cmd_pipeline(pipe_args);
  } catch (const tactus::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const tactus::InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 3;
  } catch (const tactus::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
