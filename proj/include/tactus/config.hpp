#pragma once

// JSON config parsing for the command-line workflows, plus serializers
// for the structured records they emit. Schema violations surface as
// ConfigError, missing referenced files as InputError.

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

#include <json.hpp>

#include "tactus/core.hpp"
#include "tactus/fem.hpp"
#include "tactus/illum.hpp"
#include "tactus/simulator.hpp"
#include "tactus/slip.hpp"

namespace tactus::config {

using json = nlohmann::json;

inline json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file: " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("invalid JSON in " + path + ": " + e.what());
  }
}

/// Typed field access that names the offending key on mismatch.
template <typename T>
T field(const json& j, const std::string& key, const T& fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config field '" + key + "' has the wrong type");
  }
}

template <typename T>
T required_field(const json& j, const std::string& key) {
  if (!j.contains(key))
    throw ConfigError("config field '" + key + "' is required");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config field '" + key + "' has the wrong type");
  }
}

inline void require_file(const std::string& path, const std::string& what) {
  if (!std::filesystem::exists(path))
    throw InputError(what + " not found: " + path);
}

inline sim::IlluminationMode parse_mode(const std::string& s) {
  if (s == "directional_ideal") return sim::IlluminationMode::directional_ideal;
  if (s == "point_source") return sim::IlluminationMode::point_source;
  throw ConfigError("unknown illumination mode '" + s + "'");
}

inline SensorGeometry parse_geometry(const json& j) {
  SensorGeometry g;
  g.width = field(j, "width_px", g.width);
  g.height = field(j, "height_px", g.height);
  g.pixel_pitch_mm = field(j, "pixel_pitch_mm", g.pixel_pitch_mm);
  g.gel_thickness_mm = field(j, "gel_thickness_mm", g.gel_thickness_mm);
  g.check();
  return g;
}

inline sim::IlluminationConfig parse_illumination(const json& j,
                                                  const SensorGeometry& geom) {
  const std::string mode = field<std::string>(j, "mode", "directional_ideal");
  if (parse_mode(mode) == sim::IlluminationMode::directional_ideal)
    return sim::IlluminationConfig::directional_default(
        field(j, "elevation_deg", 50.0));
  return sim::IlluminationConfig::point_default(geom);
}

// ---------------------------------------------------------------------------
// render

struct SceneConfig {
  SensorGeometry geometry;
  sim::IlluminationConfig illumination;
  std::string shape = "sphere";  // "sphere" or "flat"
  double sphere_radius_mm = 3.0;
  double press_depth_mm = 1.0;
  double center_x_px = -1.0;  // negative = image center
  double center_y_px = -1.0;
  double albedo = 0.9;
  bool markers = false;
  double noise_sigma = 0.0;
  double distortion_k1 = 0.0;
  int frames = 1;            // >1 renders a translating sequence
  double step_dx_px = 0.0;   // per-frame indenter motion
  double step_dy_px = 0.0;
  std::uint64_t seed = 0;
};

inline SceneConfig parse_scene(const json& j) {
  SceneConfig s;
  s.geometry = parse_geometry(field(j, "geometry", json::object()));
  s.illumination =
      parse_illumination(field(j, "illumination", json::object()), s.geometry);
  s.shape = field<std::string>(j, "shape", s.shape);
  if (s.shape != "sphere" && s.shape != "flat")
    throw ConfigError("scene shape must be 'sphere' or 'flat'");
  s.sphere_radius_mm = field(j, "sphere_radius_mm", s.sphere_radius_mm);
  s.press_depth_mm = field(j, "press_depth_mm", s.press_depth_mm);
  s.center_x_px = field(j, "center_x_px", s.center_x_px);
  s.center_y_px = field(j, "center_y_px", s.center_y_px);
  s.albedo = field(j, "albedo", s.albedo);
  s.markers = field(j, "markers", s.markers);
  s.noise_sigma = field(j, "noise_sigma", s.noise_sigma);
  s.distortion_k1 = field(j, "distortion_k1", s.distortion_k1);
  s.frames = field(j, "frames", s.frames);
  s.step_dx_px = field(j, "step_dx_px", s.step_dx_px);
  s.step_dy_px = field(j, "step_dy_px", s.step_dy_px);
  s.seed = field<std::uint64_t>(j, "seed", s.seed);
  if (s.shape == "sphere") {
    if (!(s.sphere_radius_mm > 0.0))
      throw ConfigError("sphere_radius_mm must be positive");
    if (s.press_depth_mm < 0.0 || s.press_depth_mm > s.sphere_radius_mm)
      throw ConfigError("press_depth_mm must lie in [0, sphere_radius_mm]");
  }
  if (s.frames < 1) throw ConfigError("frames must be at least 1");
  if (!(s.albedo > 0.0) || s.albedo > 1.0)
    throw ConfigError("albedo must lie in (0, 1]");
  if (std::abs(s.distortion_k1) >= 0.5)
    throw ConfigError("distortion_k1 magnitude must be below 0.5");
  return s;
}

// ---------------------------------------------------------------------------
// calibrate

struct CalibrateConfig {
  SensorGeometry geometry;
  sim::IlluminationConfig illumination;
  double sphere_radius_mm = 3.0;
  int presses = 5;
  int bins = 32;
  std::uint64_t seed = 0;
};

inline CalibrateConfig parse_calibrate(const json& j) {
  CalibrateConfig c;
  c.geometry = parse_geometry(field(j, "geometry", json::object()));
  c.illumination =
      parse_illumination(field(j, "illumination", json::object()), c.geometry);
  c.sphere_radius_mm = field(j, "sphere_radius_mm", c.sphere_radius_mm);
  c.presses = field(j, "presses", c.presses);
  c.bins = field(j, "bins", c.bins);
  c.seed = field<std::uint64_t>(j, "seed", c.seed);
  if (!(c.sphere_radius_mm > 0.0))
    throw ConfigError("sphere_radius_mm must be positive");
  if (c.presses < 1) throw ConfigError("presses must be at least 1");
  return c;
}

// ---------------------------------------------------------------------------
// slip / force / pipeline

struct AnalysisConfig {
  SensorGeometry geometry;
  slip::SlipConfig slip;
  fem::MaterialParams material;
  fem::CameraModel camera;
  int mesh_nx = 32;
  int mesh_ny = 24;
};

inline AnalysisConfig parse_analysis(const json& j) {
  AnalysisConfig a;
  a.geometry = parse_geometry(field(j, "geometry", json::object()));
  const json th = field(j, "thresholds", json::object());
  a.slip.depth_threshold_mm =
      field(th, "depth_mm", a.slip.depth_threshold_mm);
  a.slip.deviation_threshold_px =
      field(th, "deviation_px", a.slip.deviation_threshold_px);
  a.slip.trigger_fraction = field(th, "trigger_fraction", a.slip.trigger_fraction);
  a.slip.check();
  const json mat = field(j, "material", json::object());
  a.material.young_modulus_kpa =
      field(mat, "young_modulus_kpa", a.material.young_modulus_kpa);
  a.material.poisson_ratio = field(mat, "poisson_ratio", a.material.poisson_ratio);
  a.material.check();
  const json mesh = field(j, "mesh", json::object());
  a.mesh_nx = field(mesh, "nx", a.mesh_nx);
  a.mesh_ny = field(mesh, "ny", a.mesh_ny);
  if (a.mesh_nx < 1 || a.mesh_ny < 1)
    throw ConfigError("mesh dimensions must be positive");
  a.camera.distance_mm = field(j, "camera_distance_mm", a.camera.distance_mm);
  a.camera.principal_x_px = (a.geometry.width - 1) / 2.0;
  a.camera.principal_y_px = (a.geometry.height - 1) / 2.0;
  a.camera.check();
  return a;
}

struct PipelineConfig {
  std::string table_path;
  std::string warp_path;  // empty = identity
  std::string reference_path;
  std::string frames_dir;
  AnalysisConfig analysis;
  std::string out_dir = "pipeline_out";
  int jobs = 1;
  std::uint64_t seed = 0;
};

inline PipelineConfig parse_pipeline(const json& j) {
  PipelineConfig p;
  p.table_path = required_field<std::string>(j, "table");
  p.warp_path = field<std::string>(j, "warp", "");
  p.reference_path = required_field<std::string>(j, "reference");
  p.frames_dir = required_field<std::string>(j, "frames_dir");
  p.analysis = parse_analysis(j);
  p.out_dir = field<std::string>(j, "out_dir", p.out_dir);
  p.jobs = field(j, "jobs", p.jobs);
  p.seed = field<std::uint64_t>(j, "seed", p.seed);
  if (p.jobs < 1) throw ConfigError("jobs must be at least 1");
  require_file(p.table_path, "calibration table");
  if (!p.warp_path.empty()) require_file(p.warp_path, "warp map");
  require_file(p.reference_path, "reference frame");
  if (!std::filesystem::is_directory(p.frames_dir))
    throw InputError("frames directory not found: " + p.frames_dir);
  return p;
}

// ---------------------------------------------------------------------------
// optimize-illum

struct IllumOptConfig {
  SensorGeometry geometry;
  illum::SharedEmitterParams initial = illum::skewed_initial();
  illum::OptBounds bounds;
  illum::CostWeights weights;
  int budget = 500;
  int bins = 25;
};

inline IllumOptConfig parse_illum_opt(const json& j) {
  IllumOptConfig c;
  c.geometry = parse_geometry(field(j, "geometry", json::object()));
  if (j.contains("initial")) {
    const json init = j.at("initial");
    c.initial.x_mm = field(init, "x_mm", c.initial.x_mm);
    c.initial.y_mm = field(init, "y_mm", c.initial.y_mm);
    c.initial.z_mm = field(init, "z_mm", c.initial.z_mm);
    c.initial.alpha_deg = field(init, "alpha_deg", c.initial.alpha_deg);
    c.initial.beam.thickness_mm =
        field(init, "thickness_mm", c.initial.beam.thickness_mm);
    c.initial.beam.deflection_deg =
        field(init, "deflection_deg", c.initial.beam.deflection_deg);
    c.initial.beam.spread_deg =
        field(init, "spread_deg", c.initial.beam.spread_deg);
  }
  const json b = field(j, "bounds", json::object());
  c.bounds.t1_mm = field(b, "t1_mm", c.bounds.t1_mm);
  c.bounds.t2_mm = field(b, "t2_mm", c.bounds.t2_mm);
  c.bounds.m_x_mm = field(b, "m_x_mm", c.bounds.m_x_mm);
  c.bounds.m_y_mm = field(b, "m_y_mm", c.bounds.m_y_mm);
  c.bounds.y_max_mm = field(b, "y_max_mm", c.bounds.y_max_mm);
  c.bounds.alpha_max_deg = field(b, "alpha_max_deg", c.bounds.alpha_max_deg);
  c.bounds.theta_max_deg = field(b, "theta_max_deg", c.bounds.theta_max_deg);
  c.bounds.spread_max_deg =
      field(b, "spread_max_deg", c.bounds.spread_max_deg);
  c.bounds.check();
  const json w = field(j, "weights", json::object());
  c.weights.sigma = field(w, "sigma", c.weights.sigma);
  c.weights.chroma = field(w, "chroma", c.weights.chroma);
  c.weights.centroid = field(w, "centroid", c.weights.centroid);
  c.budget = field(j, "budget", c.budget);
  c.bins = field(j, "bins", c.bins);
  if (c.budget < 8) throw ConfigError("budget must cover the initial simplex");
  if (c.bins < 1) throw ConfigError("bins must be positive");
  return c;
}

// ---------------------------------------------------------------------------
// serializers

inline json json_of(const slip::RigidTransform2D& t) {
  return {{"theta_rad", t.theta_rad},
          {"tx_px", t.tx},
          {"ty_px", t.ty},
          {"rms_residual_px", t.rms_residual_px},
          {"n_markers", t.n_markers}};
}

inline json json_of(const slip::SlipReport& r) {
  json j;
  j["state"] = slip::to_string(r.state);
  j["slip_score"] = r.slip_score;
  j["contact_markers"] = r.contact_markers.size();
  int flagged = 0;
  for (const auto& m : r.contact_markers) flagged += m.flagged ? 1 : 0;
  j["flagged_markers"] = flagged;
  j["rigid_fit"] = r.fit ? json_of(*r.fit) : json(nullptr);
  return j;
}

inline json json_of(const illum::IlluminationMetrics& m) {
  return {{"sigma", m.sigma},
          {"cie_x", m.cie_x},
          {"cie_y", m.cie_y},
          {"centroid_x_mm", m.centroid_x_mm},
          {"centroid_y_mm", m.centroid_y_mm}};
}

inline json json_of(const illum::SharedEmitterParams& p) {
  return {{"x_mm", p.x_mm},
          {"y_mm", p.y_mm},
          {"z_mm", p.z_mm},
          {"alpha_deg", p.alpha_deg},
          {"thickness_mm", p.beam.thickness_mm},
          {"deflection_deg", p.beam.deflection_deg},
          {"spread_deg", p.beam.spread_deg}};
}

inline void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  out << j.dump(2) << '\n';
}

}  // namespace tactus::config
