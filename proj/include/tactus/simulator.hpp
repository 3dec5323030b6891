#pragma once

// Synthetic tactile sensor: Lambertian shading of indentation height fields
// under configurable illumination, marker layers, calibration-set
// generation, and a radial distortion model for warp tests. No cast shadows
// or interreflections are simulated.

#include <array>
#include <cmath>
#include <optional>
#include <random>
#include <vector>

#include "tactus/core.hpp"

namespace tactus::sim {

// Cosine-lobe exponent for a 60 degree half-power viewing angle:
// s = ln(0.5) / ln(cos 30 deg).
inline constexpr double kDefaultLobeExponent = 4.818841679;

// Flat-field normalization target; keeps every Lambertian response below
// 1.0 in directional mode so steep slopes never saturate.
inline constexpr double kFlatTarget = 0.75;

struct Emitter {
  double x_mm = 0.0;
  double y_mm = 0.0;
  double z_mm = 25.0;          // height above the sensing plane, > 0
  double tilt_deg = 90.0;      // elevation from the plane; 90 = straight down
  double azimuth_deg = 0.0;    // in-plane heading of the leaning direction
  double lobe_exponent = kDefaultLobeExponent;
  double power = 1.0;
};

enum class IlluminationMode { directional_ideal, point_source };

struct IlluminationConfig {
  IlluminationMode mode = IlluminationMode::directional_ideal;
  std::array<std::vector<Emitter>, 3> channels;

  void check() const {
    for (const auto& ch : channels)
      for (const Emitter& e : ch) {
        if (!(e.z_mm > 0.0) && mode == IlluminationMode::point_source)
          throw ConfigError("Emitter: z must be positive (above the plane)");
        if (e.power < 0.0) throw ConfigError("Emitter: power must be >= 0");
        if (e.lobe_exponent < 0.0)
          throw ConfigError("Emitter: lobe exponent must be >= 0");
      }
  }

  /// Three directional channels at 120 degree azimuth steps. Elevation 50
  /// degrees trades gradient sensitivity against headroom (see kFlatTarget).
  static IlluminationConfig directional_default(double elevation_deg = 50.0) {
    IlluminationConfig cfg;
    cfg.mode = IlluminationMode::directional_ideal;
    for (int c = 0; c < 3; ++c) {
      Emitter e;
      e.tilt_deg = elevation_deg;
      e.azimuth_deg = 120.0 * c;
      cfg.channels[c] = {e};
    }
    return cfg;
  }

  /// Three point emitters just outside the sensing area at 120 degree steps.
  static IlluminationConfig point_default(const SensorGeometry& geom) {
    IlluminationConfig cfg;
    cfg.mode = IlluminationMode::point_source;
    const double r = 0.5 * std::max(geom.sensing_width_mm(),
                                    geom.sensing_height_mm()) +
                     4.0;
    for (int c = 0; c < 3; ++c) {
      const double az = 2.0 * M_PI * c / 3.0 + M_PI / 2.0;
      Emitter e;
      e.x_mm = r * std::cos(az);
      e.y_mm = r * std::sin(az);
      e.z_mm = 8.0;
      e.tilt_deg = 35.0;
      e.azimuth_deg = az * 180.0 / M_PI + 180.0;  // leaning toward the center
      cfg.channels[c] = {e};
    }
    return cfg;
  }
};

/// Dot grid embedded in the gel skin. Centers are laid out symmetrically
/// about the image center; offset shifts the whole layer (whole-gel shear).
struct MarkerLayer {
  int rows = 11;
  int cols = 15;
  // 36 px keeps the full 15x11 grid inside a 640x480 frame with margin to
  // spare even after strong pincushion distortion pushes the corners out.
  double spacing_px = 36.0;
  double radius_px = 4.0;
  double absorptance = 0.85;
  double offset_x_px = 0.0;
  double offset_y_px = 0.0;

  std::vector<std::array<double, 2>> centers(int width, int height) const {
    std::vector<std::array<double, 2>> out;
    out.reserve(static_cast<std::size_t>(rows) * cols);
    const double cx = (width - 1) / 2.0 + offset_x_px;
    const double cy = (height - 1) / 2.0 + offset_y_px;
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c)
        out.push_back({cx + (c - (cols - 1) / 2.0) * spacing_px,
                       cy + (r - (rows - 1) / 2.0) * spacing_px});
    return out;
  }
};

struct Scene {
  DepthMap height;  // indentation depth field, mm
  double albedo = 0.9;
  std::optional<MarkerLayer> markers;
  SensorGeometry geometry;

  void check() const {
    geometry.check();
    if (height.width() != geometry.width || height.height() != geometry.height)
      throw std::invalid_argument("Scene: height field size mismatch");
    if (!(albedo > 0.0) || albedo > 1.0)
      throw std::invalid_argument("Scene: albedo must be in (0,1]");
    for (double v : height.z.data())
      if (!std::isfinite(v))
        throw std::invalid_argument("Scene: non-finite height field");
  }

  static Scene flat(const SensorGeometry& geom, double albedo = 0.9) {
    Scene s;
    s.height = DepthMap(geom.width, geom.height, 0.0);
    s.albedo = albedo;
    s.geometry = geom;
    return s;
  }
};

/// Spherical-cap indentation: z = max(0, sqrt(R^2 - d^2) - (R - depth)).
inline DepthMap sphere_indenter(double radius_mm, double center_x_px,
                                double center_y_px, double depth_mm,
                                const SensorGeometry& geom) {
  if (!(radius_mm > 0.0))
    throw std::invalid_argument("sphere_indenter: radius must be positive");
  if (depth_mm < 0.0 || depth_mm > radius_mm)
    throw std::invalid_argument(
        "sphere_indenter: depth must lie in [0, radius]");
  DepthMap out(geom.width, geom.height, 0.0);
  const double plane = radius_mm - depth_mm;
  for (int y = 0; y < geom.height; ++y) {
    const double dy = (y - center_y_px) * geom.pixel_pitch_mm;
    for (int x = 0; x < geom.width; ++x) {
      const double dx = (x - center_x_px) * geom.pixel_pitch_mm;
      const double d2 = dx * dx + dy * dy;
      if (d2 >= radius_mm * radius_mm) continue;
      const double h = std::sqrt(radius_mm * radius_mm - d2) - plane;
      if (h > 0.0) out.z(x, y) = h;
    }
  }
  return out;
}

inline double sphere_contact_radius_mm(double radius_mm, double depth_mm) {
  return std::sqrt(depth_mm * (2.0 * radius_mm - depth_mm));
}

/// Analytic gradients of the spherical cap, zero outside the contact circle.
inline GradientField sphere_cap_gradients(double radius_mm,
                                          double center_x_px,
                                          double center_y_px, double depth_mm,
                                          const SensorGeometry& geom) {
  GradientField g(geom.width, geom.height);
  const double rc = sphere_contact_radius_mm(radius_mm, depth_mm);
  for (int y = 0; y < geom.height; ++y) {
    const double dy = (y - center_y_px) * geom.pixel_pitch_mm;
    for (int x = 0; x < geom.width; ++x) {
      const double dx = (x - center_x_px) * geom.pixel_pitch_mm;
      const double d2 = dx * dx + dy * dy;
      if (d2 >= rc * rc) continue;
      const double s = std::sqrt(radius_mm * radius_mm - d2);
      g.p(x, y) = -dx / s;
      g.q(x, y) = -dy / s;
    }
  }
  return g;
}

namespace detail {

inline std::array<double, 3> emitter_axis(const Emitter& e) {
  // Unit emission axis, pointing down toward the plane.
  const double el = e.tilt_deg * M_PI / 180.0;
  const double az = e.azimuth_deg * M_PI / 180.0;
  return {std::cos(el) * std::cos(az), std::cos(el) * std::sin(az),
          -std::sin(el)};
}

}  // namespace detail

/// Un-normalized irradiance one point emitter delivers to a horizontal
/// patch at (x_mm, y_mm) on the sensing plane: power times the cosine lobe
/// about the emission axis, Lambert's cosine at the surface, and
/// inverse-square falloff. Linear in power by construction.
inline double emitter_flux_at(const Emitter& e, double x_mm, double y_mm) {
  const double vx = x_mm - e.x_mm;
  const double vy = y_mm - e.y_mm;
  const double vz = -e.z_mm;
  const double d2 = vx * vx + vy * vy + vz * vz;
  if (!(d2 > 0.0))
    throw ConfigError("emitter_flux_at: emitter on the sensing plane");
  const double d = std::sqrt(d2);
  const auto axis = detail::emitter_axis(e);
  const double along = (vx * axis[0] + vy * axis[1] + vz * axis[2]) / d;
  if (along <= 0.0) return 0.0;
  const double cosine = -vz / d;  // flat surface normal is +z
  if (cosine <= 0.0) return 0.0;
  return e.power * std::pow(along, e.lobe_exponent) * cosine / d2;
}

class Renderer {
 public:
  Renderer(IlluminationConfig config, SensorGeometry geometry)
      : config_(std::move(config)), geometry_(geometry) {
    config_.check();
    geometry_.check();
    if (config_.mode == IlluminationMode::directional_ideal)
      for (int c = 0; c < 3; ++c) {
        directions_[c].clear();
        for (const Emitter& e : config_.channels[c])
          directions_[c].push_back(light_direction(e));
      }
    exposure_ = compute_exposure();
  }

  const IlluminationConfig& config() const { return config_; }
  const SensorGeometry& geometry() const { return geometry_; }
  double exposure() const { return exposure_; }

  /// Per-channel radiance for a surface patch with gradients (p, q) at
  /// physical position (x_mm, y_mm), before marker attenuation, already
  /// exposure-normalized. Albedo multiplies in linearly.
  std::array<double, 3> shade(double p, double q, double albedo, double x_mm,
                              double y_mm) const {
    const double inv_norm = 1.0 / std::sqrt(1.0 + p * p + q * q);
    const double nx = -p * inv_norm;
    const double ny = -q * inv_norm;
    const double nz = inv_norm;
    std::array<double, 3> rgb{0.0, 0.0, 0.0};
    for (int c = 0; c < 3; ++c) {
      double sum = 0.0;
      if (config_.mode == IlluminationMode::directional_ideal) {
        for (std::size_t i = 0; i < config_.channels[c].size(); ++i) {
          const auto& l = directions_[c][i];
          const double cosine = nx * l[0] + ny * l[1] + nz * l[2];
          if (cosine > 0.0) sum += config_.channels[c][i].power * cosine;
        }
      } else {
        for (const Emitter& e : config_.channels[c]) {
          const double vx = x_mm - e.x_mm;
          const double vy = y_mm - e.y_mm;
          const double vz = -e.z_mm;
          const double d2 = vx * vx + vy * vy + vz * vz;
          const double d = std::sqrt(d2);
          const double ux = vx / d, uy = vy / d, uz = vz / d;
          const auto axis = detail::emitter_axis(e);
          const double along = ux * axis[0] + uy * axis[1] + uz * axis[2];
          if (along <= 0.0) continue;
          const double lobe = std::pow(along, e.lobe_exponent);
          const double cosine = -(nx * ux + ny * uy + nz * uz);
          if (cosine <= 0.0) continue;
          sum += e.power * lobe * cosine / d2;
        }
      }
      rgb[c] = albedo * exposure_ * sum;
    }
    return rgb;
  }

  /// Renders the scene. Deterministic; intensities clipped to [0, 1].
  TactileImage render(const Scene& scene) const {
    scene.check();
    if (scene.geometry.width != geometry_.width ||
        scene.geometry.height != geometry_.height)
      throw std::invalid_argument("render: scene/renderer size mismatch");

    const int w = geometry_.width;
    const int h = geometry_.height;
    const double pitch = geometry_.pixel_pitch_mm;
    TactileImage img(w, h);
    const GridD& z = scene.height.z;
    for (int y = 0; y < h; ++y) {
      const double y_mm = geometry_.px_to_mm_y(y);
      for (int x = 0; x < w; ++x) {
        const int xl = x > 0 ? x - 1 : x;
        const int xr = x < w - 1 ? x + 1 : x;
        const int yu = y > 0 ? y - 1 : y;
        const int yd = y < h - 1 ? y + 1 : y;
        const double p = (z(xr, y) - z(xl, y)) / ((xr - xl) * pitch);
        const double q = (z(x, yd) - z(x, yu)) / ((yd - yu) * pitch);
        const auto rgb =
            shade(p, q, scene.albedo, geometry_.px_to_mm_x(x), y_mm);
        for (int c = 0; c < 3; ++c)
          img.plane[c](x, y) =
              static_cast<float>(std::min(1.0, std::max(0.0, rgb[c])));
      }
    }

    if (scene.markers) apply_marker_layer(img, *scene.markers);
    return img;
  }

 private:
  static std::array<double, 3> light_direction(const Emitter& e) {
    // Unit vector from the surface toward the light.
    const double el = e.tilt_deg * M_PI / 180.0;
    const double az = e.azimuth_deg * M_PI / 180.0;
    return {std::cos(el) * std::cos(az), std::cos(el) * std::sin(az),
            std::sin(el)};
  }

  double compute_exposure() const {
    // Peak flat-field response at albedo 1, sampled across the surface in
    // point mode; uniform in directional mode.
    double peak = 0.0;
    if (config_.mode == IlluminationMode::directional_ideal) {
      for (int c = 0; c < 3; ++c) {
        double sum = 0.0;
        for (std::size_t i = 0; i < config_.channels[c].size(); ++i) {
          const double cosine = directions_[c][i][2];
          if (cosine > 0.0) sum += config_.channels[c][i].power * cosine;
        }
        peak = std::max(peak, sum);
      }
    } else {
      const int samples = 64;
      for (int sy = 0; sy <= samples; ++sy)
        for (int sx = 0; sx <= samples; ++sx) {
          const double x_mm = geometry_.sensing_width_mm() *
                              (double(sx) / samples - 0.5);
          const double y_mm = geometry_.sensing_height_mm() *
                              (double(sy) / samples - 0.5);
          for (int c = 0; c < 3; ++c) {
            double sum = 0.0;
            for (const Emitter& e : config_.channels[c])
              sum += emitter_flux_at(e, x_mm, y_mm);
            peak = std::max(peak, sum);
          }
        }
    }
    if (!(peak > 0.0))
      throw ConfigError("Renderer: illumination delivers no flux");
    return kFlatTarget / peak;
  }

  void apply_marker_layer(TactileImage& img, const MarkerLayer& layer) const {
    for (const auto& ctr : layer.centers(img.width, img.height)) {
      const int x0 = std::max(0, int(ctr[0] - layer.radius_px - 2));
      const int x1 = std::min(img.width - 1, int(ctr[0] + layer.radius_px + 2));
      const int y0 = std::max(0, int(ctr[1] - layer.radius_px - 2));
      const int y1 = std::min(img.height - 1, int(ctr[1] + layer.radius_px + 2));
      for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
          const double d = std::hypot(x - ctr[0], y - ctr[1]);
          const double cov =
              std::min(1.0, std::max(0.0, layer.radius_px + 0.5 - d));
          if (cov <= 0.0) continue;
          const float factor = static_cast<float>(1.0 - layer.absorptance * cov);
          for (int c = 0; c < 3; ++c) img.plane[c](x, y) *= factor;
        }
    }
  }

  IlluminationConfig config_;
  SensorGeometry geometry_;
  std::array<std::vector<std::array<double, 3>>, 3> directions_;
  double exposure_ = 1.0;
};

struct CalibrationSample {
  TactileImage image;
  double center_x_px = 0.0;
  double center_y_px = 0.0;
  double contact_radius_px = 0.0;
  double depth_mm = 0.0;
  GradientField truth;
};

/// Seeded set of rendered sphere presses paired with analytic gradients.
/// Depths cycle a fixed ladder of fractions of the sphere radius so the
/// gradient disk is covered beyond any shallow test press.
inline std::vector<CalibrationSample> generate_calibration_set(
    double sphere_radius_mm, int n_positions, const IlluminationConfig& illum,
    const SensorGeometry& geom, std::uint64_t seed = 0) {
  std::vector<CalibrationSample> out;
  if (n_positions <= 0) return out;

  const Renderer renderer(illum, geom);
  static constexpr double kDepthLadder[] = {0.30, 0.40, 0.22, 0.35, 0.45};
  std::mt19937_64 rng(seed);

  for (int i = 0; i < n_positions; ++i) {
    const double depth =
        sphere_radius_mm * kDepthLadder[i % std::size(kDepthLadder)];
    const double rc_px =
        sphere_contact_radius_mm(sphere_radius_mm, depth) /
        geom.pixel_pitch_mm;
    const double margin = rc_px + 10.0;
    std::uniform_real_distribution<double> ux(margin, geom.width - 1 - margin);
    std::uniform_real_distribution<double> uy(margin, geom.height - 1 - margin);
    CalibrationSample s;
    s.center_x_px = ux(rng);
    s.center_y_px = uy(rng);
    s.depth_mm = depth;
    s.contact_radius_px = rc_px;

    Scene scene;
    scene.geometry = geom;
    scene.height = sphere_indenter(sphere_radius_mm, s.center_x_px,
                                   s.center_y_px, depth, geom);
    s.image = renderer.render(scene);
    s.truth = sphere_cap_gradients(sphere_radius_mm, s.center_x_px,
                                   s.center_y_px, depth, geom);
    out.push_back(std::move(s));
  }
  return out;
}

/// Division-model radius mapping: a point at distorted radius rd (relative
/// to the half-diagonal rhat) came from undistorted radius
/// rd / (1 + k1 * (rd/rhat)^2).
inline double undistort_radius(double rd, double k1, double rhat) {
  return rd / (1.0 + k1 * (rd / rhat) * (rd / rhat));
}

/// Inverse of undistort_radius: where an undistorted radius lands after
/// distortion. Solves the quadratic branch that tends to ru as k1 -> 0.
inline double distort_radius(double ru, double k1, double rhat) {
  if (std::abs(k1) < 1e-15 || ru == 0.0) return ru;
  const double a = k1 * ru / (rhat * rhat);
  const double disc = 1.0 - 4.0 * a * ru;
  if (disc < 0.0)
    throw NumericError("distort_radius: radius outside the invertible range");
  return (1.0 - std::sqrt(disc)) / (2.0 * a);
}

inline std::array<double, 2> distort_point(double x_px, double y_px, double k1,
                                           int width, int height) {
  const double cx = (width - 1) / 2.0;
  const double cy = (height - 1) / 2.0;
  const double rhat = std::hypot(cx, cy);
  const double ru = std::hypot(x_px - cx, y_px - cy);
  if (ru == 0.0) return {x_px, y_px};
  const double rd = distort_radius(ru, k1, rhat);
  const double scale = rd / ru;
  return {cx + (x_px - cx) * scale, cy + (y_px - cy) * scale};
}

/// Applies division-model radial distortion about the image center with
/// bilinear resampling; sources outside the frame produce zero intensity.
inline TactileImage apply_synthetic_distortion(const TactileImage& img,
                                               double k1) {
  if (!(std::abs(k1) < 0.5))
    throw std::invalid_argument(
        "apply_synthetic_distortion: |k1| must be < 0.5");
  const int w = img.width;
  const int h = img.height;
  const double cx = (w - 1) / 2.0;
  const double cy = (h - 1) / 2.0;
  const double rhat2 = cx * cx + cy * cy;
  TactileImage out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double dx = x - cx;
      const double dy = y - cy;
      const double factor = 1.0 / (1.0 + k1 * (dx * dx + dy * dy) / rhat2);
      const double sx = cx + dx * factor;
      const double sy = cy + dy * factor;
      if (sx < 0.0 || sx > w - 1 || sy < 0.0 || sy > h - 1) continue;
      for (int c = 0; c < 3; ++c)
        out.plane[c](x, y) = static_cast<float>(img.plane[c].sample(sx, sy));
    }
  return out;
}

/// Optional additive Gaussian pixel noise, seeded.
inline TactileImage add_gaussian_noise(const TactileImage& img, double sigma,
                                       std::uint64_t seed) {
  TactileImage out = img;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, sigma);
  for (int c = 0; c < 3; ++c)
    for (float& v : out.plane[c].data())
      v = static_cast<float>(
          std::min(1.0, std::max(0.0, double(v) + noise(rng))));
  return out;
}

}  // namespace tactus::sim
