#pragma once

// Incipient-slip detection: threshold the depth map into a contact region,
// fit the best rigid 2D motion to the contact markers, and flag markers
// whose real motion deviates from that rigid estimate.

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "tactus/core.hpp"
#include "tactus/markers.hpp"
#include "tactus/poisson.hpp"

namespace tactus::slip {

struct RigidTransform2D {
  double theta_rad = 0.0;
  double tx = 0.0;
  double ty = 0.0;
  double rms_residual_px = 0.0;
  int n_markers = 0;

  std::array<double, 2> apply(double x, double y) const {
    const double c = std::cos(theta_rad);
    const double s = std::sin(theta_rad);
    return {c * x - s * y + tx, s * x + c * y + ty};
  }
};

enum class SlipState { no_contact, stiction, incipient_slip };

inline const char* to_string(SlipState s) {
  switch (s) {
    case SlipState::no_contact: return "no_contact";
    case SlipState::stiction: return "stiction";
    default: return "incipient_slip";
  }
}

struct MarkerSlip {
  int match_index = -1;  // into MotionField::matches
  double est_dx = 0.0;   // rigid-estimate displacement
  double est_dy = 0.0;
  double deviation_px = 0.0;
  bool flagged = false;
};

struct SlipReport {
  ContactMask mask;
  std::optional<RigidTransform2D> fit;
  std::vector<MarkerSlip> contact_markers;
  double slip_score = 0.0;  // flagged fraction of contact markers
  SlipState state = SlipState::no_contact;
};

struct SlipConfig {
  double depth_threshold_mm = 0.2;
  double deviation_threshold_px = 1.0;
  double trigger_fraction = 0.1;

  void check() const {
    if (!(depth_threshold_mm > 0.0) || !(deviation_threshold_px > 0.0))
      throw ConfigError("SlipConfig: thresholds must be positive");
    if (trigger_fraction < 0.0 || trigger_fraction > 1.0)
      throw ConfigError("SlipConfig: trigger_fraction must lie in [0,1]");
  }
};

/// Pixels deeper than the threshold, reduced to the largest 8-connected
/// component and smoothed by a 3x3 morphological closing. Empty result is
/// legitimate (no contact).
inline ContactMask contact_region(const DepthMap& depth,
                                  double depth_threshold_mm) {
  const int w = depth.width();
  const int h = depth.height();
  ContactMask mask(w, h, 0);

  Grid<std::int32_t> label(w, h, -1);
  int best_label = -1;
  std::size_t best_size = 0;
  int next = 0;
  std::vector<std::array<int, 2>> stack;
  for (int sy = 0; sy < h; ++sy)
    for (int sx = 0; sx < w; ++sx) {
      if (label(sx, sy) >= 0 || depth.z(sx, sy) <= depth_threshold_mm)
        continue;
      const int id = next++;
      std::size_t size = 0;
      label(sx, sy) = id;
      stack.push_back({sx, sy});
      while (!stack.empty()) {
        const auto [x, y] = stack.back();
        stack.pop_back();
        ++size;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx2 = x + dx, ny2 = y + dy;
            if (nx2 < 0 || nx2 >= w || ny2 < 0 || ny2 >= h) continue;
            if (label(nx2, ny2) >= 0 ||
                depth.z(nx2, ny2) <= depth_threshold_mm)
              continue;
            label(nx2, ny2) = id;
            stack.push_back({nx2, ny2});
          }
      }
      if (size > best_size) {
        best_size = size;
        best_label = id;
      }
    }
  if (best_label < 0) return mask;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (label(x, y) == best_label) mask(x, y) = 1;

  // 3x3 closing: dilate then erode.
  auto morph = [&](const ContactMask& in, bool dilate) {
    ContactMask r(w, h, 0);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        bool any = false, all = true;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx2 = std::clamp(x + dx, 0, w - 1);
            const int ny2 = std::clamp(y + dy, 0, h - 1);
            const bool v = in(nx2, ny2) != 0;
            any |= v;
            all &= v;
          }
        r(x, y) = dilate ? any : all;
      }
    return r;
  };
  return morph(morph(mask, true), false);
}

/// Least-squares rotation + translation over the correspondences whose
/// reference position falls inside the mask (closed-form Procrustes on
/// centered coordinates). Fewer than two contact markers cannot pin a
/// rotation, which is the no-fit signal.
inline std::optional<RigidTransform2D> fit_rigid(
    const markers::MotionField& motion, const ContactMask& mask) {
  std::vector<int> inside;
  for (std::size_t i = 0; i < motion.matches.size(); ++i) {
    const auto& m = motion.matches[i];
    const int x = static_cast<int>(std::lround(m.ref_x));
    const int y = static_cast<int>(std::lround(m.ref_y));
    if (mask.in_bounds(x, y) && mask(x, y) != 0)
      inside.push_back(static_cast<int>(i));
  }
  if (inside.size() < 2) return std::nullopt;

  double rcx = 0, rcy = 0, ccx = 0, ccy = 0;
  for (int i : inside) {
    rcx += motion.matches[i].ref_x;
    rcy += motion.matches[i].ref_y;
    ccx += motion.matches[i].cur_x;
    ccy += motion.matches[i].cur_y;
  }
  const double n = static_cast<double>(inside.size());
  rcx /= n;
  rcy /= n;
  ccx /= n;
  ccy /= n;

  double s_cos = 0, s_sin = 0;
  for (int i : inside) {
    const auto& m = motion.matches[i];
    const double rx = m.ref_x - rcx, ry = m.ref_y - rcy;
    const double cx = m.cur_x - ccx, cy = m.cur_y - ccy;
    s_cos += rx * cx + ry * cy;
    s_sin += rx * cy - ry * cx;
  }

  RigidTransform2D t;
  t.theta_rad = (s_cos == 0.0 && s_sin == 0.0) ? 0.0 : std::atan2(s_sin, s_cos);
  const double c = std::cos(t.theta_rad);
  const double s = std::sin(t.theta_rad);
  t.tx = ccx - (c * rcx - s * rcy);
  t.ty = ccy - (s * rcx + c * rcy);
  t.n_markers = static_cast<int>(inside.size());

  double ss = 0.0;
  for (int i : inside) {
    const auto& m = motion.matches[i];
    const auto est = t.apply(m.ref_x, m.ref_y);
    ss += (est[0] - m.cur_x) * (est[0] - m.cur_x) +
          (est[1] - m.cur_y) * (est[1] - m.cur_y);
  }
  t.rms_residual_px = std::sqrt(ss / n);
  return t;
}

/// Full per-frame slip analysis. Deviation is the distance between each
/// contact marker's observed position and where the fitted rigid motion
/// would have carried it.
inline SlipReport detect_slip(const markers::MotionField& motion,
                              const DepthMap& depth,
                              const SlipConfig& cfg = {}) {
  cfg.check();
  SlipReport report;
  report.mask = contact_region(depth, cfg.depth_threshold_mm);
  report.fit = fit_rigid(motion, report.mask);
  if (!report.fit) {
    report.state = SlipState::no_contact;
    return report;
  }

  int flagged = 0;
  for (std::size_t i = 0; i < motion.matches.size(); ++i) {
    const auto& m = motion.matches[i];
    const int x = static_cast<int>(std::lround(m.ref_x));
    const int y = static_cast<int>(std::lround(m.ref_y));
    if (!report.mask.in_bounds(x, y) || report.mask(x, y) == 0) continue;
    const auto est = report.fit->apply(m.ref_x, m.ref_y);
    MarkerSlip ms;
    ms.match_index = static_cast<int>(i);
    ms.est_dx = est[0] - m.ref_x;
    ms.est_dy = est[1] - m.ref_y;
    ms.deviation_px = std::hypot(m.cur_x - est[0], m.cur_y - est[1]);
    ms.flagged = ms.deviation_px > cfg.deviation_threshold_px;
    flagged += ms.flagged ? 1 : 0;
    report.contact_markers.push_back(ms);
  }

  const double n = static_cast<double>(report.contact_markers.size());
  report.slip_score = n > 0 ? flagged / n : 0.0;
  report.state = report.slip_score > cfg.trigger_fraction
                     ? SlipState::incipient_slip
                     : SlipState::stiction;
  return report;
}

}  // namespace tactus::slip
