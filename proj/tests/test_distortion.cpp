#include "tactus/distortion.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "support/oracles.hpp"
#include "tactus/simulator.hpp"

using namespace tactus;

namespace {

const SensorGeometry kGeom;

std::string temp_path(const std::string& name) {
  return ::testing::TempDir() + name;
}

TactileImage marker_frame() {
  sim::Scene scene = sim::Scene::flat(kGeom, 0.9);
  scene.markers = sim::MarkerLayer{};
  const sim::Renderer renderer(sim::IlluminationConfig::directional_default(),
                               kGeom);
  return renderer.render(scene);
}

// Marker set sitting exactly on the ideal grid nodes.
distortion::MarkerSet ideal_marker_set(const distortion::GridSpec& grid) {
  distortion::MarkerSet set;
  set.width = kGeom.width;
  set.height = kGeom.height;
  for (int r = 0; r < grid.rows; ++r)
    for (int c = 0; c < grid.cols; ++c) {
      const auto pos = grid.ideal(r, c, set.width, set.height);
      set.markers.push_back({pos[0], pos[1], 50.0, -1, -1});
    }
  return set;
}

// Where an ideal pixel lands after division-model distortion, computed
// from the independent radius oracle.
std::array<double, 2> oracle_distorted(double x, double y, double k1, int w,
                                       int h) {
  const double cx = (w - 1) / 2.0;
  const double cy = (h - 1) / 2.0;
  const double rhat = std::hypot(cx, cy);
  const double ru = std::hypot(x - cx, y - cy);
  if (ru == 0.0) return {x, y};
  const double rd = oracle::division_model_distort(ru, k1, rhat);
  return {cx + (x - cx) * rd / ru, cy + (y - cy) * rd / ru};
}

}  // namespace

TEST(Detect, FindsEveryMarkerWithSubpixelCentroids) {
  const TactileImage frame = marker_frame();
  const distortion::MarkerSet set = distortion::detect_markers(frame);
  const auto truth = sim::MarkerLayer{}.centers(kGeom.width, kGeom.height);
  ASSERT_EQ(set.size(), truth.size());
  EXPECT_EQ(set.width, kGeom.width);

  for (const distortion::Marker& m : set.markers) {
    double best = 1e30;
    for (const auto& t : truth)
      best = std::min(best, std::hypot(m.x - t[0], m.y - t[1]));
    EXPECT_LT(best, 0.2);
  }
}

TEST(Detect, BlankImageYieldsNoMarkers) {
  const TactileImage blank(kGeom.width, kGeom.height, 0.675f);
  EXPECT_EQ(distortion::detect_markers(blank).size(), std::size_t{0});
}

TEST(Detect, LocatesSingleDotOffGrid) {
  TactileImage img(320, 240, 0.8f);
  const double mx = 100.3, my = 60.7, r = 5.0;
  for (int y = 50; y < 72; ++y)
    for (int x = 90; x < 112; ++x) {
      const double d = std::hypot(x - mx, y - my);
      const double cov = std::min(1.0, std::max(0.0, r + 0.5 - d));
      img.plane[0](x, y) = img.plane[1](x, y) = img.plane[2](x, y) =
          static_cast<float>(0.8 * (1.0 - 0.9 * cov));
    }
  const distortion::MarkerSet set = distortion::detect_markers(img);
  ASSERT_EQ(set.size(), std::size_t{1});
  EXPECT_NEAR(set.markers[0].x, mx, 0.2);
  EXPECT_NEAR(set.markers[0].y, my, 0.2);
  EXPECT_GT(set.markers[0].area_px, 12.0);
}

TEST(Detect, DropsBlobsOutsideAreaBounds) {
  TactileImage img(160, 120, 0.8f);
  // 2x2 speck (area 4) and a 40x40 slab (area 1600), both well below the
  // luminance threshold.
  for (int y = 10; y < 12; ++y)
    for (int x = 10; x < 12; ++x)
      img.plane[0](x, y) = img.plane[1](x, y) = img.plane[2](x, y) = 0.05f;
  for (int y = 60; y < 100; ++y)
    for (int x = 60; x < 100; ++x)
      img.plane[0](x, y) = img.plane[1](x, y) = img.plane[2](x, y) = 0.05f;
  EXPECT_EQ(distortion::detect_markers(img).size(), std::size_t{0});
}

TEST(Associate, AssignsRowColOnJitteredGrid) {
  const distortion::GridSpec grid;
  distortion::MarkerSet set = ideal_marker_set(grid);
  // Deterministic sub-half-spacing jitter, plus a shuffle so association
  // cannot rely on input order.
  for (std::size_t i = 0; i < set.markers.size(); ++i) {
    set.markers[i].x += 4.0 * std::sin(0.7 * double(i));
    set.markers[i].y += 4.0 * std::cos(1.3 * double(i));
  }
  std::reverse(set.markers.begin(), set.markers.end());

  distortion::associate_grid(set, grid);
  for (const distortion::Marker& m : set.markers) {
    ASSERT_GE(m.row, 0);
    ASSERT_GE(m.col, 0);
    const auto pos = grid.ideal(m.row, m.col, set.width, set.height);
    EXPECT_NEAR(m.x, pos[0], 4.5);
    EXPECT_NEAR(m.y, pos[1], 4.5);
  }
}

TEST(Associate, RejectsWrongMarkerCount) {
  const distortion::GridSpec grid;
  distortion::MarkerSet set = ideal_marker_set(grid);
  set.markers.pop_back();
  EXPECT_THROW(distortion::associate_grid(set, grid), InputError);

  distortion::MarkerSet extra = ideal_marker_set(grid);
  extra.markers.push_back({300.0, 200.0, 50.0, -1, -1});
  EXPECT_THROW(distortion::associate_grid(extra, grid), InputError);
}

TEST(Associate, RejectsRaggedRows) {
  const distortion::GridSpec grid;
  distortion::MarkerSet set = ideal_marker_set(grid);
  // Push one first-row marker down into the second row's band: the count
  // is still right but the clustering is ambiguous.
  set.markers[0].y += grid.spacing_px;
  EXPECT_THROW(distortion::associate_grid(set, grid), InputError);
}

TEST(Fit, ExactGridYieldsIdentityWarp) {
  const distortion::GridSpec grid;
  const distortion::MarkerSet set = ideal_marker_set(grid);
  const distortion::WarpMap map = distortion::fit_undistortion(set, grid);
  ASSERT_EQ(map.width(), kGeom.width);
  double worst = 0.0;
  for (int y = 0; y < map.height(); y += 7)
    for (int x = 0; x < map.width(); x += 7) {
      worst = std::max(worst, std::abs(map.src_x(x, y) - x));
      worst = std::max(worst, std::abs(map.src_y(x, y) - y));
    }
  EXPECT_LT(worst, 1e-6);
}

TEST(Fit, CorrectsDivisionModelDistortion) {
  const double k1 = 0.15;
  const TactileImage frame = marker_frame();
  const TactileImage distorted = sim::apply_synthetic_distortion(frame, k1);

  distortion::MarkerSet detected = distortion::detect_markers(distorted);
  const distortion::GridSpec grid;
  ASSERT_EQ(static_cast<int>(detected.size()), grid.count());
  const distortion::WarpMap map = distortion::fit_undistortion(detected, grid);

  // Held-out probes at cell midpoints across the interior of the grid; the
  // warp must source each from where the distortion actually moved it.
  const double x_lo = grid.ideal(0, 1, kGeom.width, kGeom.height)[0];
  const double x_hi = grid.ideal(0, grid.cols - 2, kGeom.width, kGeom.height)[0];
  const double y_lo = grid.ideal(1, 0, kGeom.width, kGeom.height)[1];
  const double y_hi = grid.ideal(grid.rows - 2, 0, kGeom.width, kGeom.height)[1];
  double worst = 0.0;
  int probes = 0;
  for (int y = int(y_lo) + 18; y <= int(y_hi) - 18; y += 36)
    for (int x = int(x_lo) + 18; x <= int(x_hi) - 18; x += 36) {
      const auto want = oracle_distorted(x, y, k1, kGeom.width, kGeom.height);
      worst = std::max(worst, std::hypot(map.src_x(x, y) - want[0],
                                         map.src_y(x, y) - want[1]));
      ++probes;
    }
  ASSERT_GT(probes, 50);
  EXPECT_LT(worst, 0.5);

  // End to end: markers detected on the corrected image sit back on the
  // ideal grid.
  const TactileImage corrected = distortion::apply_warp(distorted, map);
  distortion::MarkerSet after = distortion::detect_markers(corrected);
  ASSERT_EQ(static_cast<int>(after.size()), grid.count());
  distortion::associate_grid(after, grid);
  for (const distortion::Marker& m : after.markers) {
    if (m.row == 0 || m.row == grid.rows - 1 || m.col == 0 ||
        m.col == grid.cols - 1)
      continue;
    const auto pos = grid.ideal(m.row, m.col, kGeom.width, kGeom.height);
    EXPECT_NEAR(m.x, pos[0], 0.5);
    EXPECT_NEAR(m.y, pos[1], 0.5);
  }
}

TEST(Fit, FoldedCorrespondenceRejected) {
  const distortion::GridSpec grid;
  distortion::MarkerSet set = ideal_marker_set(grid);
  // Pre-index so the fold survives: without indices, association re-sorts
  // the swapped pair by position and reads it as a legal squeeze.
  for (int r = 0; r < grid.rows; ++r)
    for (int c = 0; c < grid.cols; ++c) {
      distortion::Marker& m = set.markers[std::size_t(r) * grid.cols + c];
      m.row = r;
      m.col = c;
    }
  // Drag one interior marker past its right-hand neighbor.
  set.markers[5 * grid.cols + 7].x += 44.0;
  EXPECT_THROW(distortion::fit_undistortion(set, grid), NumericError);
}

TEST(Fit, RejectsMarkerSetWithoutImageSize) {
  const distortion::GridSpec grid;
  distortion::MarkerSet set = ideal_marker_set(grid);
  set.width = 0;
  EXPECT_THROW(distortion::fit_undistortion(set, grid), InputError);
}

TEST(Warp, IdentityLeavesImageUntouched) {
  const TactileImage frame = marker_frame();
  const distortion::WarpMap map =
      distortion::WarpMap::identity(kGeom.width, kGeom.height);
  EXPECT_TRUE(map.injective());
  const TactileImage out = distortion::apply_warp(frame, map);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < kGeom.height; y += 3)
      for (int x = 0; x < kGeom.width; x += 3)
        ASSERT_EQ(out.plane[c](x, y), frame.plane[c](x, y));
}

TEST(Warp, TranslationSamplesShiftedSource) {
  TactileImage img(32, 24);
  for (int y = 0; y < 24; ++y)
    for (int x = 0; x < 32; ++x)
      for (int c = 0; c < 3; ++c)
        img.plane[c](x, y) = static_cast<float>((x + 2 * y + c) % 17) / 17.0f;

  distortion::WarpMap map(32, 24);
  for (int y = 0; y < 24; ++y)
    for (int x = 0; x < 32; ++x) {
      map.src_x(x, y) = x + 3.25;
      map.src_y(x, y) = y - 2.5;
    }
  const TactileImage out = distortion::apply_warp(img, map);
  for (int y = 0; y < 24; ++y)
    for (int x = 0; x < 32; ++x)
      for (int c = 0; c < 3; ++c) {
        const double sx = x + 3.25, sy = y - 2.5;
        const float want =
            (sx > 31.0 || sy < 0.0)
                ? 0.0f
                : static_cast<float>(img.plane[c].sample(sx, sy));
        ASSERT_EQ(out.plane[c](x, y), want);
      }
}

TEST(Warp, SaveLoadRoundTrip) {
  distortion::WarpMap map(12, 9);
  for (int y = 0; y < 9; ++y)
    for (int x = 0; x < 12; ++x) {
      map.src_x(x, y) = x + 0.125 * y;
      map.src_y(x, y) = y - 0.0625 * x;
    }
  const std::string path = temp_path("warp_roundtrip.tgrid");
  map.save(path);
  const distortion::WarpMap loaded = distortion::WarpMap::load(path);
  ASSERT_EQ(loaded.width(), 12);
  ASSERT_EQ(loaded.height(), 9);
  for (int y = 0; y < 9; ++y)
    for (int x = 0; x < 12; ++x) {
      EXPECT_EQ(loaded.src_x(x, y), map.src_x(x, y));
      EXPECT_EQ(loaded.src_y(x, y), map.src_y(x, y));
    }
  std::remove(path.c_str());
}

TEST(Warp, LoadRejectsWrongChannelCount) {
  const std::string path = temp_path("one_channel.tgrid");
  GridD g(4, 4, 1.0);
  write_grid_file<double>(path, {&g});
  EXPECT_THROW(distortion::WarpMap::load(path), InputError);
  std::remove(path.c_str());
}

TEST(Warp, ApplyRejectsSizeMismatch) {
  const TactileImage img(8, 8, 0.5f);
  const distortion::WarpMap map = distortion::WarpMap::identity(9, 8);
  EXPECT_THROW(distortion::apply_warp(img, map), std::invalid_argument);
}
