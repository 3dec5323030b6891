#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

namespace tactus {

// Error categories used by the CLI to pick exit codes.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Dense row-major 2D grid. The building block for images, depth maps and
/// gradient fields. Indexed (x, y) with the origin at the top-left pixel.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int width, int height, T fill = T{})
      : width_(width), height_(height) {
    if (width <= 0 || height <= 0)
      throw std::invalid_argument("Grid: dimensions must be positive");
    data_.assign(static_cast<std::size_t>(width) * height, fill);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(int x, int y) { return data_[idx(x, y)]; }
  const T& operator()(int x, int y) const { return data_[idx(x, y)]; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  bool in_bounds(int x, int y) const {
    return x >= 0 && x < width_ && y >= 0 && y < height_;
  }
  template <typename U>
  bool same_size(const Grid<U>& other) const {
    return width_ == other.width() && height_ == other.height();
  }

  /// Bilinear sample at fractional coordinates; edge-clamped.
  double sample(double x, double y) const {
    const double cx = std::min(std::max(x, 0.0), double(width_ - 1));
    const double cy = std::min(std::max(y, 0.0), double(height_ - 1));
    const int x0 = std::min(int(cx), width_ - 2 >= 0 ? width_ - 2 : 0);
    const int y0 = std::min(int(cy), height_ - 2 >= 0 ? height_ - 2 : 0);
    const int x1 = std::min(x0 + 1, width_ - 1);
    const int y1 = std::min(y0 + 1, height_ - 1);
    const double fx = cx - x0;
    const double fy = cy - y0;
    const double top = (1.0 - fx) * (*this)(x0, y0) + fx * (*this)(x1, y0);
    const double bot = (1.0 - fx) * (*this)(x0, y1) + fx * (*this)(x1, y1);
    return (1.0 - fy) * top + fy * bot;
  }

 private:
  std::size_t idx(int x, int y) const {
    return static_cast<std::size_t>(y) * width_ + x;
  }
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

using GridF = Grid<float>;
using GridD = Grid<double>;

/// Three-channel tactile frame with linear intensity in [0, 1].
struct TactileImage {
  int width = 0;
  int height = 0;
  std::array<GridF, 3> plane;

  TactileImage() = default;
  TactileImage(int w, int h, float fill = 0.0f)
      : width(w), height(h), plane{GridF(w, h, fill), GridF(w, h, fill),
                                   GridF(w, h, fill)} {}

  bool same_size(const TactileImage& other) const {
    return width == other.width && height == other.height;
  }
};

/// Per-pixel indentation depth in mm. Zero means the undeformed surface.
struct DepthMap {
  GridD z;

  DepthMap() = default;
  explicit DepthMap(int w, int h, double fill = 0.0) : z(w, h, fill) {}
  int width() const { return z.width(); }
  int height() const { return z.height(); }
};

/// Surface gradients p = dz/dx, q = dz/dy (mm per mm, dimensionless).
struct GradientField {
  GridD p, q;

  GradientField() = default;
  GradientField(int w, int h) : p(w, h, 0.0), q(w, h, 0.0) {}
  int width() const { return p.width(); }
  int height() const { return p.height(); }
};

/// Physical scale of the sensing surface.
///
/// Pixel indices have their origin at the top-left pixel; physical-plane
/// coordinates are in mm with the origin at the image center, x pointing
/// right and y pointing down. Defaults describe a 30 x 22.5 mm surface
/// (675 mm^2) imaged at 640x480, i.e. 0.046875 mm per pixel.
struct SensorGeometry {
  int width = 640;
  int height = 480;
  double pixel_pitch_mm = 30.0 / 640.0;
  double gel_thickness_mm = 2.0;

  double sensing_width_mm() const { return width * pixel_pitch_mm; }
  double sensing_height_mm() const { return height * pixel_pitch_mm; }
  double sensing_area_mm2() const {
    return sensing_width_mm() * sensing_height_mm();
  }

  double px_to_mm_x(double px) const {
    return (px - (width - 1) / 2.0) * pixel_pitch_mm;
  }
  double px_to_mm_y(double py) const {
    return (py - (height - 1) / 2.0) * pixel_pitch_mm;
  }
  double mm_to_px_x(double x_mm) const {
    return x_mm / pixel_pitch_mm + (width - 1) / 2.0;
  }
  double mm_to_px_y(double y_mm) const {
    return y_mm / pixel_pitch_mm + (height - 1) / 2.0;
  }

  void check() const {
    if (width <= 0 || height <= 0)
      throw ConfigError("SensorGeometry: image dimensions must be positive");
    if (!(pixel_pitch_mm > 0.0))
      throw ConfigError("SensorGeometry: pixel pitch must be positive");
    if (!(gel_thickness_mm > 0.0))
      throw ConfigError("SensorGeometry: gel thickness must be positive");
  }
};

/// Outcome of an invariant check. `ok()` reports with no violation;
/// otherwise the first violation is described with its pixel location.
struct ValidationReport {
  bool ok = true;
  std::string message;
  int x = -1;
  int y = -1;
  int channel = -1;

  static ValidationReport pass() { return {}; }
  static ValidationReport fail(std::string msg, int x = -1, int y = -1,
                               int channel = -1) {
    ValidationReport r;
    r.ok = false;
    r.message = std::move(msg);
    r.x = x;
    r.y = y;
    r.channel = channel;
    return r;
  }
};

inline ValidationReport validate(const TactileImage& img) {
  if (img.width <= 0 || img.height <= 0)
    return ValidationReport::fail("image dimensions must be positive");
  for (int c = 0; c < 3; ++c) {
    const GridF& g = img.plane[c];
    if (g.width() != img.width || g.height() != img.height)
      return ValidationReport::fail("plane dimensions disagree", -1, -1, c);
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) {
        const float v = g(x, y);
        if (!std::isfinite(v))
          return ValidationReport::fail("non-finite intensity", x, y, c);
        if (v < 0.0f || v > 1.0f)
          return ValidationReport::fail("intensity outside [0,1]", x, y, c);
      }
  }
  return ValidationReport::pass();
}

inline ValidationReport validate(const DepthMap& depth) {
  if (depth.z.empty())
    return ValidationReport::fail("empty depth map");
  for (int y = 0; y < depth.height(); ++y)
    for (int x = 0; x < depth.width(); ++x) {
      const double v = depth.z(x, y);
      if (!std::isfinite(v))
        return ValidationReport::fail("non-finite depth", x, y);
      if (v < 0.0)
        return ValidationReport::fail("negative depth", x, y);
    }
  return ValidationReport::pass();
}

inline ValidationReport validate(const GradientField& grad) {
  if (grad.p.empty() || !grad.p.same_size(grad.q))
    return ValidationReport::fail("gradient planes empty or mismatched");
  for (int y = 0; y < grad.height(); ++y)
    for (int x = 0; x < grad.width(); ++x) {
      if (!std::isfinite(grad.p(x, y)))
        return ValidationReport::fail("non-finite p", x, y);
      if (!std::isfinite(grad.q(x, y)))
        return ValidationReport::fail("non-finite q", x, y);
    }
  return ValidationReport::pass();
}

/// Signed per-pixel difference remapped affinely into [0,1]: equal pixels
/// map to 0.5, so diff(a,b) + diff(b,a) == 1 exactly.
inline TactileImage difference_image(const TactileImage& current,
                                     const TactileImage& reference) {
  if (!current.same_size(reference))
    throw std::invalid_argument("difference_image: dimension mismatch");
  TactileImage out(current.width, current.height);
  for (int c = 0; c < 3; ++c) {
    const auto& cur = current.plane[c].data();
    const auto& ref = reference.plane[c].data();
    auto& dst = out.plane[c].data();
    for (std::size_t i = 0; i < dst.size(); ++i)
      dst[i] = 0.5f + 0.5f * (cur[i] - ref[i]);
  }
  return out;
}

namespace detail {

inline std::uint64_t fnv1a64(const void* bytes, std::size_t n,
                             std::uint64_t seed = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(bytes);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace detail

/// Content hash of a frame, used to tie calibration tables to their
/// reference image.
inline std::uint64_t image_hash(const TactileImage& img) {
  std::uint64_t h = detail::fnv1a64(&img.width, sizeof(img.width));
  h = detail::fnv1a64(&img.height, sizeof(img.height), h);
  for (const auto& pl : img.plane)
    h = detail::fnv1a64(pl.data().data(), pl.data().size() * sizeof(float), h);
  return h;
}

}  // namespace tactus
