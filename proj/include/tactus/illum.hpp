#pragma once

// Illumination design: a 25x25 receiver mesh over the sensing surface,
// uniformity/chromaticity/centroid metrics, a weighted-sum cost, and
// bounded Nelder-Mead search over one shared emitter parameter set
// replicated to the three channels at 120 degree rotations.

#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "tactus/core.hpp"
#include "tactus/optim.hpp"
#include "tactus/simulator.hpp"

namespace tactus::illum {

/// Parametric stand-in for the beam-shaping optics: thickness_mm shifts
/// the emission origin along the beam axis, deflection_deg tips the beam
/// further toward the surface, spread_deg widens the cosine lobe.
struct BeamShaping {
  double thickness_mm = 0.0;   // L
  double deflection_deg = 0.0; // theta
  double spread_deg = 0.0;
};

/// One parameter set shared by all three channels ("single parameter set",
/// radial symmetry): channel c places this emitter rotated by 120*c
/// degrees about the surface center, aimed back at the center.
struct SharedEmitterParams {
  double x_mm = 0.0;
  double y_mm = 14.0;
  double z_mm = 6.0;
  double alpha_deg = 35.0;  // elevation of the bare emitter above the plane
  BeamShaping beam;
};

struct OptBounds {
  double t1_mm = 10.0;          // z in [0, t1]
  double t2_mm = 2.0;           // L in [0, t2]
  double m_x_mm = 0.0;          // x pinned to the anchor
  double m_y_mm = 12.0;         // y >= m_y
  double y_max_mm = 40.0;
  double alpha_max_deg = 90.0;  // alpha in [0, 90]
  double theta_max_deg = 90.0;  // theta in [0, 90]
  double spread_max_deg = 50.0;

  void check() const {
    if (t1_mm < 0.0 || t2_mm < 0.0)
      throw ConfigError("OptBounds: thickness bounds must be non-negative");
    if (y_max_mm < m_y_mm)
      throw ConfigError("OptBounds: y_max below the anchor m_y");
  }
};

/// Cosine-lobe exponent whose half-power angle is 30 deg plus the spread.
inline double lobe_exponent_for_spread(double spread_deg) {
  const double half_power =
      std::clamp(30.0 + spread_deg, 1.0, 85.0) * M_PI / 180.0;
  return std::log(0.5) / std::log(std::cos(half_power));
}

inline sim::Emitter shared_params_emitter(const SharedEmitterParams& p,
                                          int channel) {
  const double phi = 2.0 * M_PI * channel / 3.0;
  const double c = std::cos(phi), s = std::sin(phi);
  double px = c * p.x_mm - s * p.y_mm;
  double py = s * p.x_mm + c * p.y_mm;
  double pz = p.z_mm;

  const double azimuth = std::atan2(-py, -px);
  const double elevation =
      std::clamp(p.alpha_deg + p.beam.deflection_deg, 0.0, 90.0) * M_PI /
      180.0;

  // The shaping feature moves the emission origin along the beam axis.
  const double L = p.beam.thickness_mm;
  px += L * std::cos(elevation) * std::cos(azimuth);
  py += L * std::cos(elevation) * std::sin(azimuth);
  pz = std::max(0.0, pz - L * std::sin(elevation));

  sim::Emitter e;
  e.x_mm = px;
  e.y_mm = py;
  e.z_mm = pz;
  e.tilt_deg = elevation * 180.0 / M_PI;
  e.azimuth_deg = azimuth * 180.0 / M_PI;
  e.lobe_exponent = lobe_exponent_for_spread(p.beam.spread_deg);
  e.power = 1.0;  // radiometric power matched across channels
  return e;
}

inline sim::IlluminationConfig shared_params_config(
    const SharedEmitterParams& p) {
  sim::IlluminationConfig cfg;
  cfg.mode = sim::IlluminationMode::point_source;
  for (int c = 0; c < 3; ++c) cfg.channels[c] = {shared_params_emitter(p, c)};
  return cfg;
}

/// Per-bin per-channel radiant flux over the sensing surface.
struct ReceiverMesh {
  int bins = 25;
  double width_mm = 0.0;
  double height_mm = 0.0;
  std::vector<std::array<double, 3>> flux;  // row-major bins x bins

  const std::array<double, 3>& at(int bx, int by) const {
    return flux[static_cast<std::size_t>(by) * bins + bx];
  }
  double total(int bx, int by) const {
    const auto& f = at(bx, by);
    return f[0] + f[1] + f[2];
  }
  std::array<double, 2> bin_center_mm(int bx, int by) const {
    return {(bx + 0.5) / bins * width_mm - 0.5 * width_mm,
            (by + 0.5) / bins * height_mm - 0.5 * height_mm};
  }
};

/// Simulated forward pass: per bin, the mean emitter irradiance over a
/// subsample lattice times the bin area. Bins tile the sensing area
/// exactly.
inline ReceiverMesh irradiance_mesh(const sim::IlluminationConfig& config,
                                    const SensorGeometry& geom, int bins = 25,
                                    int subsamples = 3) {
  if (bins < 1) throw ConfigError("irradiance_mesh: bins must be positive");
  if (subsamples < 1)
    throw ConfigError("irradiance_mesh: subsamples must be positive");
  geom.check();

  ReceiverMesh mesh;
  mesh.bins = bins;
  mesh.width_mm = geom.sensing_width_mm();
  mesh.height_mm = geom.sensing_height_mm();
  mesh.flux.assign(static_cast<std::size_t>(bins) * bins, {0.0, 0.0, 0.0});

  const double bw = mesh.width_mm / bins;
  const double bh = mesh.height_mm / bins;
  const double area = bw * bh;
  const double inv_n = 1.0 / (subsamples * subsamples);
  for (int by = 0; by < bins; ++by)
    for (int bx = 0; bx < bins; ++bx) {
      auto& cell = mesh.flux[static_cast<std::size_t>(by) * bins + bx];
      for (int sy = 0; sy < subsamples; ++sy)
        for (int sx = 0; sx < subsamples; ++sx) {
          const double x =
              -0.5 * mesh.width_mm + (bx + (sx + 0.5) / subsamples) * bw;
          const double y =
              -0.5 * mesh.height_mm + (by + (sy + 0.5) / subsamples) * bh;
          for (int c = 0; c < 3; ++c)
            for (const sim::Emitter& e : config.channels[c])
              cell[c] += sim::emitter_flux_at(e, x, y) * inv_n * area;
        }
    }
  return mesh;
}

struct IlluminationMetrics {
  double sigma = 0.0;          // std/mean of per-bin total flux
  double cie_x = 0.0;          // flux-weighted mean chromaticity
  double cie_y = 0.0;
  double centroid_x_mm = 0.0;  // flux-weighted centroid G
  double centroid_y_mm = 0.0;
};

inline IlluminationMetrics metrics(const ReceiverMesh& mesh) {
  double sum = 0.0, sum_r = 0.0, sum_g = 0.0;
  double gx = 0.0, gy = 0.0;
  const int n = mesh.bins * mesh.bins;
  for (int by = 0; by < mesh.bins; ++by)
    for (int bx = 0; bx < mesh.bins; ++bx) {
      const auto& f = mesh.at(bx, by);
      const double t = f[0] + f[1] + f[2];
      sum += t;
      sum_r += f[0];
      sum_g += f[1];
      const auto ctr = mesh.bin_center_mm(bx, by);
      gx += t * ctr[0];
      gy += t * ctr[1];
    }
  if (!(sum > 0.0)) throw InputError("metrics: all-zero receiver mesh");

  const double mean = sum / n;
  double var = 0.0;
  for (int by = 0; by < mesh.bins; ++by)
    for (int bx = 0; bx < mesh.bins; ++bx) {
      const double d = mesh.total(bx, by) - mean;
      var += d * d;
    }
  IlluminationMetrics m;
  m.sigma = std::sqrt(var / n) / mean;
  m.cie_x = sum_r / sum;
  m.cie_y = sum_g / sum;
  m.centroid_x_mm = gx / sum;
  m.centroid_y_mm = gy / sum;
  return m;
}

struct CostWeights {
  double sigma = 1.0;
  double chroma = 1.0;
  double centroid = 1.0;
};

inline double cost(const IlluminationMetrics& m, double width_mm,
                   double height_mm, const CostWeights& w = {}) {
  const double diag2 = width_mm * width_mm + height_mm * height_mm;
  const double dx = m.cie_x - 1.0 / 3.0;
  const double dy = m.cie_y - 1.0 / 3.0;
  const double g2 = m.centroid_x_mm * m.centroid_x_mm +
                    m.centroid_y_mm * m.centroid_y_mm;
  return w.sigma * m.sigma * m.sigma + w.chroma * (dx * dx + dy * dy) +
         w.centroid * g2 / diag2;
}

/// Cost of a full configuration. Never throws: a configuration delivering
/// no flux at all is reported as maximally bad rather than an error, so
/// the optimizer can walk out of degenerate corners (z = 0 puts the
/// emitters edge-on and dark).
inline double cost(const sim::IlluminationConfig& config,
                   const SensorGeometry& geom, const CostWeights& w = {},
                   int bins = 25) {
  const ReceiverMesh mesh = irradiance_mesh(config, geom, bins);
  double sum = 0.0;
  for (const auto& f : mesh.flux) sum += f[0] + f[1] + f[2];
  if (!(sum > 0.0)) return 1e300;
  return cost(metrics(mesh), mesh.width_mm, mesh.height_mm, w);
}

inline Eigen::VectorXd pack_params(const SharedEmitterParams& p) {
  Eigen::VectorXd v(6);
  v << p.y_mm, p.z_mm, p.alpha_deg, p.beam.thickness_mm,
      p.beam.deflection_deg, p.beam.spread_deg;
  return v;
}

inline SharedEmitterParams unpack_params(const Eigen::VectorXd& v,
                                         const OptBounds& bounds) {
  SharedEmitterParams p;
  p.x_mm = bounds.m_x_mm;
  p.y_mm = v(0);
  p.z_mm = v(1);
  p.alpha_deg = v(2);
  p.beam.thickness_mm = v(3);
  p.beam.deflection_deg = v(4);
  p.beam.spread_deg = v(5);
  return p;
}

inline void bound_vectors(const OptBounds& b, Eigen::VectorXd& lower,
                          Eigen::VectorXd& upper) {
  lower.resize(6);
  upper.resize(6);
  lower << b.m_y_mm, 0.0, 0.0, 0.0, 0.0, 0.0;
  upper << b.y_max_mm, b.t1_mm, b.alpha_max_deg, b.t2_mm, b.theta_max_deg,
      b.spread_max_deg;
}

/// Documented pathological start for optimization demos and tests: the
/// emitters sit far out and high with a grazing beam, so the surface is
/// lit dimly from one side per channel.
inline SharedEmitterParams skewed_initial() {
  SharedEmitterParams p;
  p.x_mm = 0.0;
  p.y_mm = 30.0;
  p.z_mm = 9.5;
  p.alpha_deg = 0.0;
  p.beam = BeamShaping{};
  return p;
}

struct OptimizeResult {
  SharedEmitterParams initial;  // after projection onto bounds
  SharedEmitterParams best;
  double initial_f = 0.0;
  double final_f = 0.0;
  IlluminationMetrics initial_metrics;
  IlluminationMetrics final_metrics;
  ReceiverMesh before;
  ReceiverMesh after;
  std::vector<double> trace;
  int evaluations = 0;
};

/// Bounded Nelder-Mead over the six free parameters (x stays pinned to the
/// anchor). Deterministic; the incumbent is tracked so more budget never
/// returns a worse configuration.
inline OptimizeResult optimize(const SharedEmitterParams& initial,
                               const OptBounds& bounds, int budget,
                               const SensorGeometry& geom,
                               const CostWeights& weights = {},
                               int bins = 25) {
  bounds.check();
  geom.check();

  Eigen::VectorXd lower, upper;
  bound_vectors(bounds, lower, upper);

  auto objective = [&](const Eigen::VectorXd& v) {
    return cost(shared_params_config(unpack_params(v, bounds)), geom, weights,
                bins);
  };

  optim::NelderMeadOptions opt;
  opt.max_evaluations = budget;
  const auto nm =
      optim::nelder_mead(objective, pack_params(initial), lower, upper, opt);

  OptimizeResult res;
  Eigen::VectorXd v0 = pack_params(initial);
  for (int i = 0; i < 6; ++i) v0(i) = std::clamp(v0(i), lower(i), upper(i));
  res.initial = unpack_params(v0, bounds);
  res.best = unpack_params(nm.best_x, bounds);
  res.initial_f = objective(v0);
  res.final_f = nm.best_f;
  res.before = irradiance_mesh(shared_params_config(res.initial), geom, bins);
  res.after = irradiance_mesh(shared_params_config(res.best), geom, bins);
  auto safe_metrics = [](const ReceiverMesh& mesh) {
    for (const auto& f : mesh.flux)
      if (f[0] + f[1] + f[2] > 0.0) return metrics(mesh);
    return IlluminationMetrics{};
  };
  res.initial_metrics = safe_metrics(res.before);
  res.final_metrics = safe_metrics(res.after);
  res.trace = nm.trace;
  res.evaluations = nm.evaluations;
  return res;
}

}  // namespace tactus::illum
