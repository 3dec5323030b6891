#pragma once

// Lens distortion correction from the embedded marker grid: detect marker
// centroids, associate them to ideal grid nodes, interpolate the
// correspondence into a dense backward warp, and resample.

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "tactus/core.hpp"
#include "tactus/grid_io.hpp"
#include "tactus/thin_plate.hpp"

namespace tactus::distortion {

struct Marker {
  double x = 0.0;
  double y = 0.0;
  double area_px = 0.0;
  int row = -1;
  int col = -1;
};

struct MarkerSet {
  int width = 0;
  int height = 0;
  std::vector<Marker> markers;

  std::size_t size() const { return markers.size(); }
};

struct DetectConfig {
  // A pixel belongs to a marker when its luminance falls below
  // threshold_scale times the image median (dark dots on lit gel); set
  // dark_markers=false for the inverse print.
  double threshold_scale = 0.5;
  bool dark_markers = true;
  double min_area_px = 12.0;
  double max_area_px = 500.0;
  double min_separation_px = 8.0;
};

/// Centroids of marker blobs. Blobs outside the area bounds are dropped;
/// of two blobs closer than min_separation the smaller one is dropped.
/// Returns however many markers it finds; callers decide whether the count
/// is sufficient.
inline MarkerSet detect_markers(const TactileImage& image,
                                const DetectConfig& cfg = {}) {
  const int w = image.width;
  const int h = image.height;
  MarkerSet out;
  out.width = w;
  out.height = h;

  GridD lum(w, h);
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double v = (image.plane[0](x, y) + image.plane[1](x, y) +
                        image.plane[2](x, y)) /
                       3.0;
      lum(x, y) = v;
      values.push_back(v);
    }
  std::nth_element(values.begin(), values.begin() + values.size() / 2,
                   values.end());
  const double median = values[values.size() / 2];
  const double tau = cfg.threshold_scale * median;

  auto is_marker = [&](int x, int y) {
    return cfg.dark_markers ? lum(x, y) < tau : lum(x, y) > 2.0 * median - tau;
  };

  // One blob per 4-connected component, weighted by darkness so the
  // centroid lands subpixel on the antialiased dot.
  Grid<std::int32_t> label(w, h, -1);
  std::vector<std::array<int, 2>> stack;
  int next_label = 0;
  for (int sy = 0; sy < h; ++sy)
    for (int sx = 0; sx < w; ++sx) {
      if (label(sx, sy) >= 0 || !is_marker(sx, sy)) continue;
      const int id = next_label++;
      double wsum = 0.0, wx = 0.0, wy = 0.0, area = 0.0;
      stack.push_back({sx, sy});
      label(sx, sy) = id;
      while (!stack.empty()) {
        const auto [x, y] = stack.back();
        stack.pop_back();
        const double weight =
            cfg.dark_markers ? std::max(1e-9, median - lum(x, y))
                             : std::max(1e-9, lum(x, y) - median);
        wsum += weight;
        wx += weight * x;
        wy += weight * y;
        area += 1.0;
        const int nx[4] = {x - 1, x + 1, x, x};
        const int ny[4] = {y, y, y - 1, y + 1};
        for (int k = 0; k < 4; ++k) {
          if (nx[k] < 0 || nx[k] >= w || ny[k] < 0 || ny[k] >= h) continue;
          if (label(nx[k], ny[k]) >= 0 || !is_marker(nx[k], ny[k])) continue;
          label(nx[k], ny[k]) = id;
          stack.push_back({nx[k], ny[k]});
        }
      }
      if (area < cfg.min_area_px || area > cfg.max_area_px) continue;
      Marker m;
      m.x = wx / wsum;
      m.y = wy / wsum;
      m.area_px = area;
      out.markers.push_back(m);
    }

  // Enforce the separation invariant: keep the larger of any close pair.
  std::sort(out.markers.begin(), out.markers.end(),
            [](const Marker& a, const Marker& b) { return a.area_px > b.area_px; });
  std::vector<Marker> kept;
  for (const Marker& m : out.markers) {
    bool clash = false;
    for (const Marker& k : kept)
      if (std::hypot(m.x - k.x, m.y - k.y) < cfg.min_separation_px) {
        clash = true;
        break;
      }
    if (!clash) kept.push_back(m);
  }
  std::sort(kept.begin(), kept.end(), [](const Marker& a, const Marker& b) {
    return a.y != b.y ? a.y < b.y : a.x < b.x;
  });
  out.markers = std::move(kept);
  return out;
}

struct GridSpec {
  int rows = 11;
  int cols = 15;
  double spacing_px = 36.0;

  int count() const { return rows * cols; }

  /// Ideal node position, grid centered on the image.
  std::array<double, 2> ideal(int row, int col, int width, int height) const {
    return {(width - 1) / 2.0 + (col - (cols - 1) / 2.0) * spacing_px,
            (height - 1) / 2.0 + (row - (rows - 1) / 2.0) * spacing_px};
  }
};

/// Assigns (row, col) indices to detected markers: clusters rows at the
/// rows-1 largest vertical gaps of the y-sorted set, then orders each row
/// by x. Throws when the count is wrong or any row has the wrong width,
/// which is what an ambiguous association looks like for a grid.
inline void associate_grid(MarkerSet& set, const GridSpec& grid) {
  const int expected = grid.count();
  if (static_cast<int>(set.size()) < expected)
    throw InputError("associate_grid: detected " + std::to_string(set.size()) +
                     " markers, grid needs " + std::to_string(expected));
  if (static_cast<int>(set.size()) > expected)
    throw InputError("associate_grid: " + std::to_string(set.size()) +
                     " markers exceed the " + std::to_string(expected) +
                     "-node grid; association ambiguous");

  std::vector<int> order(set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = int(i);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return set.markers[a].y < set.markers[b].y;
  });

  // Row breaks sit at the rows-1 largest gaps in sorted y.
  std::vector<std::pair<double, int>> gaps;
  for (std::size_t i = 1; i < order.size(); ++i)
    gaps.push_back({set.markers[order[i]].y - set.markers[order[i - 1]].y,
                    static_cast<int>(i)});
  std::sort(gaps.begin(), gaps.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<int> breaks;
  for (int i = 0; i < grid.rows - 1; ++i) breaks.push_back(gaps[i].second);
  std::sort(breaks.begin(), breaks.end());

  int row = 0;
  std::size_t start = 0;
  auto finish_row = [&](std::size_t end) {
    if (static_cast<int>(end - start) != grid.cols)
      throw InputError("associate_grid: row " + std::to_string(row) + " has " +
                       std::to_string(end - start) + " markers, expected " +
                       std::to_string(grid.cols));
    std::sort(order.begin() + start, order.begin() + end, [&](int a, int b) {
      return set.markers[a].x < set.markers[b].x;
    });
    for (int c = 0; c < grid.cols; ++c) {
      set.markers[order[start + c]].row = row;
      set.markers[order[start + c]].col = c;
    }
    ++row;
    start = end;
  };
  for (int b : breaks) finish_row(static_cast<std::size_t>(b));
  finish_row(order.size());
}

/// Backward warp: per corrected pixel, the fractional source coordinate in
/// the distorted frame.
struct WarpMap {
  GridD src_x;
  GridD src_y;

  WarpMap() : src_x(), src_y() {}
  WarpMap(int w, int h) : src_x(w, h), src_y(w, h) {}

  int width() const { return src_x.width(); }
  int height() const { return src_x.height(); }

  static WarpMap identity(int w, int h) {
    WarpMap m(w, h);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        m.src_x(x, y) = x;
        m.src_y(x, y) = y;
      }
    return m;
  }

  /// Samples the map's Jacobian determinant on a coarse lattice; a sign
  /// flip means the map folds over itself.
  bool injective(int step = 8) const {
    const int w = width(), h = height();
    double ref_sign = 0.0;
    for (int y = 1; y + 1 < h; y += step)
      for (int x = 1; x + 1 < w; x += step) {
        const double axx = (src_x(x + 1, y) - src_x(x - 1, y)) * 0.5;
        const double axy = (src_x(x, y + 1) - src_x(x, y - 1)) * 0.5;
        const double ayx = (src_y(x + 1, y) - src_y(x - 1, y)) * 0.5;
        const double ayy = (src_y(x, y + 1) - src_y(x, y - 1)) * 0.5;
        const double det = axx * ayy - axy * ayx;
        if (det == 0.0) return false;
        if (ref_sign == 0.0)
          ref_sign = det > 0 ? 1.0 : -1.0;
        else if (det * ref_sign < 0.0)
          return false;
      }
    return true;
  }

  void save(const std::string& path) const {
    write_grid_file<double>(path, {&src_x, &src_y});
  }

  static WarpMap load(const std::string& path) {
    auto grids = read_grid_file<double>(path);
    if (grids.size() != 2)
      throw InputError("WarpMap: expected 2 channels in " + path);
    WarpMap m;
    m.src_x = std::move(grids[0]);
    m.src_y = std::move(grids[1]);
    return m;
  }
};

/// Fits the dense correction warp from detected markers: each ideal grid
/// node must pull its pixel from the detected (distorted) marker position,
/// and the correspondence is thin-plate interpolated everywhere else.
inline WarpMap fit_undistortion(const MarkerSet& detected,
                                const GridSpec& grid) {
  if (detected.width <= 0 || detected.height <= 0)
    throw InputError("fit_undistortion: marker set carries no image size");
  MarkerSet set = detected;
  const bool indexed = std::all_of(
      set.markers.begin(), set.markers.end(),
      [](const Marker& m) { return m.row >= 0 && m.col >= 0; });
  if (!indexed) associate_grid(set, grid);

  std::vector<std::array<double, 2>> ideal, measured;
  ideal.reserve(set.size());
  measured.reserve(set.size());
  for (const Marker& m : set.markers) {
    ideal.push_back(grid.ideal(m.row, m.col, set.width, set.height));
    measured.push_back({m.x, m.y});
  }

  const ThinPlateSpline2D f(ideal, measured);
  WarpMap map(set.width, set.height);
  for (int y = 0; y < set.height; ++y)
    for (int x = 0; x < set.width; ++x) {
      const auto s = f(x, y);
      map.src_x(x, y) = s[0];
      map.src_y(x, y) = s[1];
    }
  if (!map.injective())
    throw NumericError("fit_undistortion: fitted warp folds over itself");
  return map;
}

/// Bilinear resampling through the warp; sources outside the frame give 0.
inline TactileImage apply_warp(const TactileImage& image, const WarpMap& map) {
  if (image.width != map.width() || image.height != map.height())
    throw std::invalid_argument("apply_warp: image/map size mismatch");
  TactileImage out(image.width, image.height);
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x) {
      const double sx = map.src_x(x, y);
      const double sy = map.src_y(x, y);
      if (sx < 0.0 || sx > image.width - 1 || sy < 0.0 ||
          sy > image.height - 1)
        continue;
      for (int c = 0; c < 3; ++c)
        out.plane[c](x, y) = static_cast<float>(image.plane[c].sample(sx, sy));
    }
  return out;
}

}  // namespace tactus::distortion
