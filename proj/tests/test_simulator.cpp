#include "tactus/simulator.hpp"

#include <cmath>

#include <gtest/gtest.h>

#include "support/oracles.hpp"

using namespace tactus;

namespace {

const SensorGeometry kGeom;

sim::IlluminationConfig overhead_directional() {
  sim::IlluminationConfig cfg;
  cfg.mode = sim::IlluminationMode::directional_ideal;
  for (int c = 0; c < 3; ++c) {
    sim::Emitter e;
    e.tilt_deg = 90.0;  // straight down
    e.azimuth_deg = 0.0;
    cfg.channels[c] = {e};
  }
  return cfg;
}

}  // namespace

TEST(Indenter, SupportMatchesContactCircle) {
  const double R = 3.0, depth = 1.0, cx = 300.0, cy = 200.0;
  const DepthMap z = sim::sphere_indenter(R, cx, cy, depth, kGeom);
  const double rc_px =
      oracle::cap_contact_radius(R, depth) / kGeom.pixel_pitch_mm;
  for (int y = 0; y < kGeom.height; ++y)
    for (int x = 0; x < kGeom.width; ++x) {
      const double d = std::hypot(x - cx, y - cy);
      if (d < rc_px - 0.5) EXPECT_GT(z.z(x, y), 0.0);
      if (d > rc_px + 0.5) EXPECT_EQ(z.z(x, y), 0.0);
    }
}

TEST(Indenter, HeightsMatchCapOracle) {
  const double R = 2.5, depth = 0.8, cx = 320.0, cy = 240.0;
  const DepthMap z = sim::sphere_indenter(R, cx, cy, depth, kGeom);
  for (int y = 200; y < 280; y += 3)
    for (int x = 280; x < 360; x += 3) {
      const double d = std::hypot(x - cx, y - cy) * kGeom.pixel_pitch_mm;
      EXPECT_NEAR(z.z(x, y), oracle::cap_height(R, depth, d), 1e-12);
    }
  EXPECT_NEAR(z.z(320, 240), depth, 1e-12);
}

TEST(Indenter, RejectsDepthOutsideRadius) {
  EXPECT_THROW(sim::sphere_indenter(2.0, 320, 240, 2.5, kGeom),
               std::invalid_argument);
  EXPECT_THROW(sim::sphere_indenter(2.0, 320, 240, -0.1, kGeom),
               std::invalid_argument);
  EXPECT_THROW(sim::sphere_indenter(-1.0, 320, 240, 0.5, kGeom),
               std::invalid_argument);
}

TEST(Renderer, FlatDirectionalFieldIsUniform) {
  sim::Renderer renderer(sim::IlluminationConfig::directional_default(),
                         kGeom);
  const TactileImage img = renderer.render(sim::Scene::flat(kGeom, 0.9));
  const float expect = 0.9f * static_cast<float>(sim::kFlatTarget);
  for (int c = 0; c < 3; ++c)
    for (const float v : img.plane[c].data()) {
      ASSERT_NEAR(v, expect, 1e-5);
    }
}

TEST(Renderer, AlbedoScalesLinearly) {
  sim::Renderer renderer(sim::IlluminationConfig::directional_default(),
                         kGeom);
  const auto lo = renderer.shade(0.2, -0.1, 0.45, 0.0, 0.0);
  const auto hi = renderer.shade(0.2, -0.1, 0.9, 0.0, 0.0);
  for (int c = 0; c < 3; ++c) EXPECT_NEAR(hi[c], 2.0 * lo[c], 1e-12);
}

TEST(Renderer, OverheadShadingFollowsSurfaceCosine) {
  sim::Renderer renderer(overhead_directional(), kGeom);
  const auto flat = renderer.shade(0.0, 0.0, 1.0, 0.0, 0.0);
  const auto slope45 = renderer.shade(1.0, 0.0, 1.0, 0.0, 0.0);
  EXPECT_NEAR(flat[0], sim::kFlatTarget, 1e-12);
  EXPECT_NEAR(slope45[0] / flat[0], 1.0 / std::sqrt(2.0), 1e-12);
}

TEST(Renderer, MatchesAnalyticGradientsAwayFromRim) {
  const double R = 3.0, depth = 1.0, cx = 320.0, cy = 240.0;
  sim::Scene scene = sim::Scene::flat(kGeom);
  scene.height = sim::sphere_indenter(R, cx, cy, depth, kGeom);
  const GradientField truth =
      sim::sphere_cap_gradients(R, cx, cy, depth, kGeom);

  sim::Renderer renderer(sim::IlluminationConfig::directional_default(),
                         kGeom);
  const TactileImage img = renderer.render(scene);
  const double rc_px =
      oracle::cap_contact_radius(R, depth) / kGeom.pixel_pitch_mm;

  for (int y = 0; y < kGeom.height; y += 2)
    for (int x = 0; x < kGeom.width; x += 2) {
      const double d = std::hypot(x - cx, y - cy);
      if (std::abs(d - rc_px) < 3.0) continue;  // rim mixes both regimes
      const auto rgb =
          renderer.shade(truth.p(x, y), truth.q(x, y), scene.albedo,
                         kGeom.px_to_mm_x(x), kGeom.px_to_mm_y(y));
      for (int c = 0; c < 3; ++c)
        ASSERT_NEAR(img.plane[c](x, y), rgb[c], 2e-3)
            << "at (" << x << ", " << y << ")";
    }
}

TEST(Renderer, RenderIsDeterministic) {
  sim::Scene scene = sim::Scene::flat(kGeom);
  scene.height = sim::sphere_indenter(3.0, 250, 260, 0.9, kGeom);
  scene.markers = sim::MarkerLayer{};
  sim::Renderer renderer(sim::IlluminationConfig::point_default(kGeom), kGeom);
  const TactileImage a = renderer.render(scene);
  const TactileImage b = renderer.render(scene);
  EXPECT_EQ(image_hash(a), image_hash(b));
}

TEST(Renderer, PointModeFlatFieldPeaksNearTarget) {
  sim::Renderer renderer(sim::IlluminationConfig::point_default(kGeom), kGeom);
  const TactileImage img = renderer.render(sim::Scene::flat(kGeom, 1.0));
  float peak = 0.0f;
  for (const float v : img.plane[1].data()) peak = std::max(peak, v);
  // Exposure pins the flat-field peak at the target, up to the sampling of
  // the normalization lattice.
  EXPECT_NEAR(peak, sim::kFlatTarget, 0.02);
}

TEST(Renderer, RejectsGeometryMismatch) {
  SensorGeometry small = kGeom;
  small.width = 64;
  small.height = 48;
  sim::Renderer renderer(sim::IlluminationConfig::directional_default(),
                         small);
  EXPECT_THROW(renderer.render(sim::Scene::flat(kGeom)),
               std::invalid_argument);
}

TEST(Emitters, FluxFollowsInverseSquare) {
  sim::Emitter e;
  e.x_mm = 0.0;
  e.y_mm = 0.0;
  e.tilt_deg = 90.0;
  e.z_mm = 10.0;
  const double far = sim::emitter_flux_at(e, 0.0, 0.0);
  e.z_mm = 5.0;
  const double near = sim::emitter_flux_at(e, 0.0, 0.0);
  EXPECT_NEAR(near / far, 4.0, 4.0 * 0.02);
}

TEST(Emitters, FluxIsLinearInPower) {
  sim::Emitter e;
  e.x_mm = 3.0;
  e.y_mm = -8.0;
  e.z_mm = 6.0;
  e.tilt_deg = 55.0;
  e.azimuth_deg = 120.0;
  const double base = sim::emitter_flux_at(e, 1.0, 2.0);
  e.power = 2.0;
  EXPECT_DOUBLE_EQ(sim::emitter_flux_at(e, 1.0, 2.0), 2.0 * base);
}

TEST(Emitters, ConfigRejectsEmitterOnThePlane) {
  sim::IlluminationConfig cfg = sim::IlluminationConfig::point_default(kGeom);
  cfg.channels[0][0].z_mm = -1.0;
  EXPECT_THROW(cfg.check(), ConfigError);
}

TEST(MarkerLayer, CentersDarkenByAbsorptance) {
  sim::Scene scene = sim::Scene::flat(kGeom, 0.9);
  scene.markers = sim::MarkerLayer{};
  sim::Renderer renderer(sim::IlluminationConfig::directional_default(),
                         kGeom);
  const TactileImage img = renderer.render(scene);
  const float flat = 0.9f * static_cast<float>(sim::kFlatTarget);

  const auto centers =
      scene.markers->centers(kGeom.width, kGeom.height);
  EXPECT_EQ(centers.size(),
            static_cast<std::size_t>(scene.markers->rows *
                                     scene.markers->cols));
  for (const auto& c : centers) {
    const float v = img.plane[0](int(std::lround(c[0])),
                                 int(std::lround(c[1])));
    EXPECT_NEAR(v, flat * (1.0f - scene.markers->absorptance), 0.02f);
  }
  // Far from any marker the field is untouched.
  EXPECT_NEAR(img.plane[0](8, 8), flat, 1e-5);
}

TEST(CalibrationSet, SeededRunsAreIdentical) {
  const auto illum = sim::IlluminationConfig::directional_default();
  const auto a = sim::generate_calibration_set(3.0, 4, illum, kGeom, 5);
  const auto b = sim::generate_calibration_set(3.0, 4, illum, kGeom, 5);
  const auto c = sim::generate_calibration_set(3.0, 4, illum, kGeom, 6);
  ASSERT_EQ(a.size(), 4u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(image_hash(a[i].image), image_hash(b[i].image));
    EXPECT_EQ(a[i].center_x_px, b[i].center_x_px);
  }
  bool any_differ = false;
  for (std::size_t i = 0; i < a.size(); ++i)
    any_differ |= a[i].center_x_px != c[i].center_x_px;
  EXPECT_TRUE(any_differ);
}

TEST(CalibrationSet, PressesStayInsideTheFrame) {
  const auto samples = sim::generate_calibration_set(
      3.0, 12, sim::IlluminationConfig::directional_default(), kGeom, 3);
  for (const auto& s : samples) {
    EXPECT_GE(s.center_x_px - s.contact_radius_px, 0.0);
    EXPECT_LE(s.center_x_px + s.contact_radius_px, kGeom.width - 1.0);
    EXPECT_GE(s.center_y_px - s.contact_radius_px, 0.0);
    EXPECT_LE(s.center_y_px + s.contact_radius_px, kGeom.height - 1.0);
    EXPECT_GT(s.depth_mm, 0.0);
    EXPECT_TRUE(validate(s.image).ok);
  }
}

TEST(Distortion, RadiusRoundTripIsExact) {
  const double rhat = 400.0;
  for (const double k1 : {-0.2, -0.05, 0.1, 0.15}) {
    for (double ru = 0.0; ru <= 390.0; ru += 13.0) {
      const double rd = sim::distort_radius(ru, k1, rhat);
      EXPECT_NEAR(sim::undistort_radius(rd, k1, rhat), ru, 1e-9);
    }
  }
}

TEST(Distortion, MatchesDivisionModelOracle) {
  const double rhat = 400.0, k1 = 0.15;
  for (double ru = 10.0; ru <= 380.0; ru += 37.0)
    EXPECT_NEAR(sim::distort_radius(ru, k1, rhat),
                oracle::division_model_distort(ru, k1, rhat), 1e-9);
}

TEST(Distortion, RowBowMatchesSagittaOracle) {
  const double cx = (kGeom.width - 1) / 2.0;
  const double cy = (kGeom.height - 1) / 2.0;
  const double rhat = std::hypot(cx, cy);
  const double k1 = 0.15;
  const double y0 = -180.0;       // marker row well above center
  const double half_span = 252.0; // outermost marker column

  const auto center = sim::distort_point(cx, cy + y0, k1, kGeom.width,
                                         kGeom.height);
  const auto edge = sim::distort_point(cx + half_span, cy + y0, k1,
                                       kGeom.width, kGeom.height);
  const double sagitta = (center[1] - cy) - (edge[1] - cy);
  EXPECT_NEAR(sagitta,
              oracle::division_model_row_sagitta(y0, half_span, k1, rhat),
              1e-9);
}

TEST(Distortion, IdentityWhenK1Zero) {
  TactileImage img(64, 48, 0.3f);
  img.plane[0](10, 10) = 0.9f;
  const TactileImage out = sim::apply_synthetic_distortion(img, 0.0);
  for (int c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < img.plane[c].data().size(); ++i)
      EXPECT_NEAR(out.plane[c].data()[i], img.plane[c].data()[i], 1e-6);
}

TEST(Distortion, RejectsExtremeCoefficient) {
  TactileImage img(32, 32, 0.5f);
  EXPECT_THROW(sim::apply_synthetic_distortion(img, 0.5),
               std::invalid_argument);
}

TEST(Noise, SeededAndClipped) {
  TactileImage img(64, 64, 0.5f);
  const TactileImage a = sim::add_gaussian_noise(img, 0.05, 17);
  const TactileImage b = sim::add_gaussian_noise(img, 0.05, 17);
  const TactileImage c = sim::add_gaussian_noise(img, 0.05, 18);
  EXPECT_EQ(image_hash(a), image_hash(b));
  EXPECT_NE(image_hash(a), image_hash(c));
  EXPECT_TRUE(validate(sim::add_gaussian_noise(img, 5.0, 1)).ok);
}
