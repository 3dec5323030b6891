#pragma once

// Diagnostic renderings: arrow fields over tactile frames, slip reports
// with contact tint and deviation flags, force quiver/heat images,
// receiver-mesh heatmaps, and a painter's-algorithm 3D depth view.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "tactus/core.hpp"
#include "tactus/fem.hpp"
#include "tactus/illum.hpp"
#include "tactus/markers.hpp"
#include "tactus/poisson.hpp"
#include "tactus/slip.hpp"

namespace tactus::overlay {

struct Color {
  float r = 0, g = 0, b = 0;
};

inline constexpr Color kRed{1.0f, 0.15f, 0.15f};
inline constexpr Color kGreen{0.2f, 0.9f, 0.3f};
inline constexpr Color kYellow{1.0f, 0.9f, 0.2f};
inline constexpr Color kWhite{1.0f, 1.0f, 1.0f};
inline constexpr Color kContactTint{0.25f, 0.45f, 1.0f};

inline void put_pixel(TactileImage& img, int x, int y, const Color& c) {
  if (x < 0 || y < 0 || x >= img.width || y >= img.height) return;
  img.plane[0](x, y) = c.r;
  img.plane[1](x, y) = c.g;
  img.plane[2](x, y) = c.b;
}

inline void draw_line(TactileImage& img, double x0, double y0, double x1,
                      double y1, const Color& c) {
  const double dx = x1 - x0, dy = y1 - y0;
  const int steps = std::max(1, static_cast<int>(std::ceil(
                                    std::max(std::abs(dx), std::abs(dy)))));
  for (int i = 0; i <= steps; ++i) {
    const double t = static_cast<double>(i) / steps;
    put_pixel(img, static_cast<int>(std::lround(x0 + t * dx)),
              static_cast<int>(std::lround(y0 + t * dy)), c);
  }
}

inline void draw_arrow(TactileImage& img, double x0, double y0, double x1,
                       double y1, const Color& c, double head_px = 4.0) {
  draw_line(img, x0, y0, x1, y1, c);
  const double dx = x1 - x0, dy = y1 - y0;
  const double len = std::hypot(dx, dy);
  if (len < 1e-9) return;
  const double ux = dx / len, uy = dy / len;
  const double h = std::min(head_px, 0.5 * len);
  // Two barbs at 30 degrees off the shaft.
  const double ca = std::cos(M_PI / 6.0), sa = std::sin(M_PI / 6.0);
  draw_line(img, x1, y1, x1 - h * (ca * ux - sa * uy),
            y1 - h * (ca * uy + sa * ux), c);
  draw_line(img, x1, y1, x1 - h * (ca * ux + sa * uy),
            y1 - h * (ca * uy - sa * ux), c);
}

inline void draw_circle(TactileImage& img, double cx, double cy, double radius,
                        const Color& c) {
  const int steps =
      std::max(8, static_cast<int>(std::ceil(2.0 * M_PI * radius)));
  for (int i = 0; i < steps; ++i) {
    const double a = 2.0 * M_PI * i / steps;
    put_pixel(img, static_cast<int>(std::lround(cx + radius * std::cos(a))),
              static_cast<int>(std::lround(cy + radius * std::sin(a))), c);
  }
}

inline void tint_region(TactileImage& img, const ContactMask& mask,
                        const Color& c, float alpha = 0.35f) {
  if (mask.width() != img.width || mask.height() != img.height)
    throw std::invalid_argument("tint_region: mask size mismatch");
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      if (!mask(x, y)) continue;
      img.plane[0](x, y) = (1 - alpha) * img.plane[0](x, y) + alpha * c.r;
      img.plane[1](x, y) = (1 - alpha) * img.plane[1](x, y) + alpha * c.g;
      img.plane[2](x, y) = (1 - alpha) * img.plane[2](x, y) + alpha * c.b;
    }
}

/// Piecewise-linear heat colormap (dark blue through green/yellow to red).
inline Color heat_color(double t) {
  static constexpr std::array<std::array<float, 3>, 5> stops{{
      {0.05f, 0.03f, 0.35f},
      {0.10f, 0.50f, 0.80f},
      {0.20f, 0.80f, 0.30f},
      {0.95f, 0.85f, 0.15f},
      {0.85f, 0.10f, 0.10f},
  }};
  t = std::clamp(t, 0.0, 1.0) * (stops.size() - 1);
  const int i = std::min(static_cast<int>(t), static_cast<int>(stops.size()) - 2);
  const float f = static_cast<float>(t - i);
  return {stops[i][0] + f * (stops[i + 1][0] - stops[i][0]),
          stops[i][1] + f * (stops[i + 1][1] - stops[i][1]),
          stops[i][2] + f * (stops[i + 1][2] - stops[i][2])};
}

/// Signed colormap: blue for negative, white at zero, red for positive.
inline Color diverging_color(double t) {
  t = std::clamp(t, -1.0, 1.0);
  if (t < 0.0)
    return {1.0f + static_cast<float>(t) * 0.85f,
            1.0f + static_cast<float>(t) * 0.75f, 1.0f};
  return {1.0f, 1.0f - static_cast<float>(t) * 0.75f,
          1.0f - static_cast<float>(t) * 0.85f};
}

/// Marker motion as arrows over the current frame, scaled for visibility.
inline TactileImage motion_overlay(const TactileImage& frame,
                                   const markers::MotionField& motion,
                                   double arrow_scale = 5.0) {
  TactileImage out = frame;
  for (const auto& m : motion.matches)
    draw_arrow(out, m.ref_x, m.ref_y, m.ref_x + arrow_scale * m.dx,
               m.ref_y + arrow_scale * m.dy, kGreen);
  return out;
}

/// Slip diagnostic: contact region tinted, measured marker motion in
/// green, the rigid-fit prediction in yellow, markers whose deviation
/// crossed the threshold circled in white.
inline TactileImage slip_overlay(const TactileImage& frame,
                                 const markers::MotionField& motion,
                                 const slip::SlipReport& report,
                                 double arrow_scale = 5.0) {
  TactileImage out = frame;
  tint_region(out, report.mask, kContactTint);
  for (std::size_t i = 0; i < motion.matches.size(); ++i) {
    const auto& m = motion.matches[i];
    draw_arrow(out, m.ref_x, m.ref_y, m.ref_x + arrow_scale * m.dx,
               m.ref_y + arrow_scale * m.dy, kGreen);
    if (report.fit) {
      const auto pred = report.fit->apply(m.ref_x, m.ref_y);
      draw_arrow(out, m.ref_x, m.ref_y,
                 m.ref_x + arrow_scale * (pred[0] - m.ref_x),
                 m.ref_y + arrow_scale * (pred[1] - m.ref_y), kYellow);
    }
  }
  for (const auto& s : report.contact_markers)
    if (s.flagged) {
      const auto& m = motion.matches[s.match_index];
      draw_circle(out, m.cur_x, m.cur_y, 7.0, kWhite);
    }
  return out;
}

/// Tangential force quiver: arrows at the top-surface nodes, length
/// proportional to (Fx, Fy).
inline TactileImage tangential_force_overlay(const TactileImage& frame,
                                             const fem::ForceField& forces,
                                             const SensorGeometry& geom,
                                             double newtons_to_px = 2000.0) {
  TactileImage out = frame;
  for (const auto& f : forces.top_nodes) {
    const double x = geom.mm_to_px_x(f.x_mm);
    const double y = geom.mm_to_px_y(f.y_mm);
    draw_arrow(out, x, y, x + newtons_to_px * f.fx_n,
               y + newtons_to_px * f.fy_n, kRed, 3.0);
  }
  return out;
}

/// Normal force heat image: each top node colored by Fz on a diverging
/// scale (pull blue, push red), splatted as filled cells sized to the node
/// spacing.
inline TactileImage normal_force_overlay(const fem::ForceField& forces,
                                         const fem::HexMesh& mesh,
                                         const SensorGeometry& geom) {
  TactileImage out;
  out.width = geom.width;
  out.height = geom.height;
  for (auto& pl : out.plane) pl = GridF(geom.width, geom.height, 1.0f);

  double max_abs = 0.0;
  for (const auto& f : forces.top_nodes)
    max_abs = std::max(max_abs, std::abs(f.fz_n));
  if (max_abs <= 0.0) max_abs = 1.0;

  const int half_x = std::max(
      1, static_cast<int>(std::lround(0.5 * mesh.dx_mm / geom.pixel_pitch_mm)));
  const int half_y = std::max(
      1, static_cast<int>(std::lround(0.5 * mesh.dy_mm / geom.pixel_pitch_mm)));
  for (const auto& f : forces.top_nodes) {
    const Color c = diverging_color(f.fz_n / max_abs);
    const int cx = static_cast<int>(std::lround(geom.mm_to_px_x(f.x_mm)));
    const int cy = static_cast<int>(std::lround(geom.mm_to_px_y(f.y_mm)));
    for (int y = cy - half_y; y <= cy + half_y; ++y)
      for (int x = cx - half_x; x <= cx + half_x; ++x)
        put_pixel(out, x, y, c);
  }
  return out;
}

/// Receiver-mesh heat image for one channel (0..2) or the combined total
/// (channel = -1), upsampled with hard bin edges.
inline TactileImage mesh_heatmap(const illum::ReceiverMesh& mesh, int channel,
                                 int scale_px = 16) {
  if (channel < -1 || channel > 2)
    throw std::invalid_argument("mesh_heatmap: channel out of range");
  double max_v = 0.0;
  for (int by = 0; by < mesh.bins; ++by)
    for (int bx = 0; bx < mesh.bins; ++bx)
      max_v = std::max(max_v, channel < 0 ? mesh.total(bx, by)
                                          : mesh.at(bx, by)[channel]);
  if (max_v <= 0.0) max_v = 1.0;

  TactileImage out;
  out.width = mesh.bins * scale_px;
  out.height = mesh.bins * scale_px;
  for (auto& pl : out.plane) pl = GridF(out.width, out.height, 0.0f);
  for (int by = 0; by < mesh.bins; ++by)
    for (int bx = 0; bx < mesh.bins; ++bx) {
      const double v = channel < 0 ? mesh.total(bx, by)
                                   : mesh.at(bx, by)[channel];
      const Color c = heat_color(v / max_v);
      for (int sy = 0; sy < scale_px; ++sy)
        for (int sx = 0; sx < scale_px; ++sx)
          put_pixel(out, bx * scale_px + sx, by * scale_px + sy, c);
    }
  return out;
}

/// Painter's-algorithm 3D view of a depth map: height-colored isometric
/// projection drawn back to front. exaggeration stretches z for legibility.
inline TactileImage depth_view_3d(const DepthMap& depth,
                                  const SensorGeometry& geom,
                                  double exaggeration = 40.0) {
  const int w = depth.width(), h = depth.height();
  double max_z = 0.0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) max_z = std::max(max_z, depth.z(x, y));
  const double z_scale =
      max_z > 0.0 ? exaggeration / (max_z / geom.pixel_pitch_mm) : 0.0;

  // Isometric axes: +x right-and-down, +y left-and-down, +z straight up.
  const double iso_x = 0.5, iso_y = 0.25;
  const int out_w = static_cast<int>(std::ceil(iso_x * (w + h))) + 20;
  const int out_h =
      static_cast<int>(std::ceil(iso_y * (w + h) + exaggeration)) + 20;
  TactileImage out;
  out.width = out_w;
  out.height = out_h;
  for (auto& pl : out.plane) pl = GridF(out_w, out_h, 0.08f);

  const int step = std::max(1, w / 320);
  for (int y = 0; y < h; y += step)
    for (int x = 0; x < w; x += step) {
      const double z_px = depth.z(x, y) / geom.pixel_pitch_mm * z_scale;
      const double px = iso_x * (x + (h - 1 - y)) + 10;
      const double py = iso_y * (x + y) - z_px + 10 + exaggeration;
      const Color c =
          max_z > 0.0 ? heat_color(depth.z(x, y) / max_z)
                      : heat_color(0.0);
      put_pixel(out, static_cast<int>(std::lround(px)),
                static_cast<int>(std::lround(py)), c);
      put_pixel(out, static_cast<int>(std::lround(px)) + 1,
                static_cast<int>(std::lround(py)), c);
    }
  return out;
}

}  // namespace tactus::overlay
