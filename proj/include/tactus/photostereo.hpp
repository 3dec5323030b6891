#pragma once

// Photometric-stereo inversion: a quantized color-difference -> gradient
// lookup table calibrated from sphere presses, plus depth reconstruction
// via Poisson integration with per-frame diagnostics.

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "tactus/core.hpp"
#include "tactus/poisson.hpp"

namespace tactus::stereo {

// Pixels whose color difference from the reference has Euclidean norm
// below this are treated as untouched gel and map to zero gradient.
inline constexpr double kDefaultNoContactTol = 0.02;

struct CalibrationPress {
  TactileImage image;
  double center_x_px = 0.0;
  double center_y_px = 0.0;
  double contact_radius_px = 0.0;
};

struct LookupStats {
  std::size_t pixels = 0;
  std::size_t no_contact = 0;
  std::size_t direct = 0;
  std::size_t fallback = 0;

  double fallback_fraction() const {
    const std::size_t hits = direct + fallback;
    return hits == 0 ? 0.0 : double(fallback) / double(hits);
  }
};

namespace detail {

// 1D squared-distance transform (lower envelope of parabolas) carrying the
// index of the nearest seed through multi-pass application.
inline void edt_line(const std::vector<double>& f, const std::vector<int>& fs,
                     std::vector<double>& d, std::vector<int>& ds) {
  const int n = static_cast<int>(f.size());
  static constexpr double kInf = 1e20;
  std::vector<int> v(n);
  std::vector<double> z(n + 1);
  int k = 0;
  v[0] = 0;
  z[0] = -kInf;
  z[1] = kInf;
  for (int q = 1; q < n; ++q) {
    double s;
    for (;;) {
      const int p = v[k];
      s = ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * (q - p));
      if (s > z[k]) break;
      --k;
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const int p = v[k];
    d[q] = double(q - p) * (q - p) + f[p];
    ds[q] = fs[p];
  }
}

}  // namespace detail

/// Dense B^3 lookup table over quantized per-channel color differences in
/// [-1, 1]. Populated bins store the mean of the gradients binned into
/// them; after finalize(), empty bins borrow from the nearest populated
/// bin by Euclidean distance in bin space.
class CalibrationTable {
 public:
  CalibrationTable() = default;

  explicit CalibrationTable(int bins, double sphere_radius_mm = 0.0,
                            std::uint64_t reference_hash = 0)
      : bins_(bins),
        sphere_radius_mm_(sphere_radius_mm),
        reference_hash_(reference_hash) {
    if (bins < 2 || bins > 256)
      throw ConfigError("CalibrationTable: bins must lie in [2, 256]");
    const std::size_t n = cells();
    count_.assign(n, 0);
    sum_p_.assign(n, 0.0);
    sum_q_.assign(n, 0.0);
  }

  int bins() const { return bins_; }
  double sphere_radius_mm() const { return sphere_radius_mm_; }
  std::uint64_t reference_hash() const { return reference_hash_; }
  bool finalized() const { return finalized_; }
  std::size_t cells() const {
    return static_cast<std::size_t>(bins_) * bins_ * bins_;
  }

  int bin_of(double diff) const {
    const int i = static_cast<int>((diff + 1.0) * 0.5 * bins_);
    return std::min(bins_ - 1, std::max(0, i));
  }

  std::size_t cell_index(double dr, double dg, double db) const {
    return (static_cast<std::size_t>(bin_of(dr)) * bins_ + bin_of(dg)) *
               bins_ +
           bin_of(db);
  }

  void add_sample(double dr, double dg, double db, double p, double q) {
    if (finalized_)
      throw InputError("CalibrationTable: cannot add samples after finalize");
    const std::size_t idx = cell_index(dr, dg, db);
    ++count_[idx];
    sum_p_[idx] += p;
    sum_q_[idx] += q;
  }

  std::size_t populated() const {
    std::size_t n = 0;
    for (std::uint32_t c : count_)
      if (c > 0) ++n;
    return n;
  }

  double occupancy() const {
    return cells() == 0 ? 0.0 : double(populated()) / double(cells());
  }

  /// Computes per-bin means and fills every empty bin from its nearest
  /// populated neighbor (exact Euclidean metric over bin coordinates).
  void finalize() {
    if (finalized_) return;
    if (populated() == 0)
      throw InputError("CalibrationTable: no populated bins to finalize");

    const int B = bins_;
    const std::size_t n = cells();
    static constexpr double kInf = 1e20;
    std::vector<double> dist(n);
    std::vector<int> site(n);
    for (std::size_t i = 0; i < n; ++i) {
      dist[i] = count_[i] > 0 ? 0.0 : kInf;
      site[i] = count_[i] > 0 ? static_cast<int>(i) : -1;
    }

    // Three separable passes; strides follow the (r, g, b) cell layout.
    const std::size_t strides[3] = {static_cast<std::size_t>(B) * B,
                                    static_cast<std::size_t>(B), 1};
    std::vector<double> f(B), d(B);
    std::vector<int> fs(B), ds(B);
    for (int axis = 0; axis < 3; ++axis) {
      const std::size_t stride = strides[axis];
      for (int a = 0; a < B; ++a)
        for (int b = 0; b < B; ++b) {
          std::size_t base;
          if (axis == 0)
            base = static_cast<std::size_t>(a) * B + b;
          else if (axis == 1)
            base = static_cast<std::size_t>(a) * B * B + b;
          else
            base = (static_cast<std::size_t>(a) * B + b) * B;
          for (int i = 0; i < B; ++i) {
            f[i] = dist[base + i * stride];
            fs[i] = site[base + i * stride];
          }
          detail::edt_line(f, fs, d, ds);
          for (int i = 0; i < B; ++i) {
            dist[base + i * stride] = d[i];
            site[base + i * stride] = ds[i];
          }
        }
    }

    value_p_.resize(n);
    value_q_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t src = static_cast<std::size_t>(site[i]);
      value_p_[i] = static_cast<float>(sum_p_[src] / count_[src]);
      value_q_[i] = static_cast<float>(sum_q_[src] / count_[src]);
    }
    finalized_ = true;
  }

  bool cell_populated(std::size_t idx) const { return count_[idx] > 0; }

  std::array<float, 2> value(std::size_t idx) const {
    return {value_p_[idx], value_q_[idx]};
  }

  void save(const std::string& path) const {
    if (!finalized_)
      throw InputError("CalibrationTable: finalize before saving");
    std::FILE* fp = std::fopen(path.c_str(), "wb");
    if (!fp) throw InputError("CalibrationTable: cannot open " + path);
    const char magic[8] = {'T', 'A', 'C', 'T', 'C', 'A', 'L', 'B'};
    const std::uint32_t version = 1;
    const std::uint32_t bins = static_cast<std::uint32_t>(bins_);
    bool ok = std::fwrite(magic, 1, 8, fp) == 8 &&
              std::fwrite(&version, 4, 1, fp) == 1 &&
              std::fwrite(&bins, 4, 1, fp) == 1 &&
              std::fwrite(&sphere_radius_mm_, 8, 1, fp) == 1 &&
              std::fwrite(&reference_hash_, 8, 1, fp) == 1;
    const std::size_t n = cells();
    ok = ok && std::fwrite(count_.data(), 4, n, fp) == n &&
         std::fwrite(sum_p_.data(), 8, n, fp) == n &&
         std::fwrite(sum_q_.data(), 8, n, fp) == n;
    const bool closed = std::fclose(fp) == 0;
    if (!ok || !closed)
      throw InputError("CalibrationTable: short write to " + path);
  }

  static CalibrationTable load(const std::string& path) {
    std::FILE* fp = std::fopen(path.c_str(), "rb");
    if (!fp) throw InputError("CalibrationTable: cannot open " + path);
    struct Closer {
      std::FILE* fp;
      ~Closer() { std::fclose(fp); }
    } closer{fp};

    char magic[8];
    std::uint32_t version = 0, bins = 0;
    double radius = 0.0;
    std::uint64_t ref_hash = 0;
    if (std::fread(magic, 1, 8, fp) != 8 ||
        std::memcmp(magic, "TACTCALB", 8) != 0)
      throw InputError("CalibrationTable: bad magic in " + path);
    if (std::fread(&version, 4, 1, fp) != 1 || version != 1)
      throw InputError("CalibrationTable: unsupported version in " + path);
    if (std::fread(&bins, 4, 1, fp) != 1 || bins < 2 || bins > 256)
      throw InputError("CalibrationTable: corrupt bin count in " + path);
    if (std::fread(&radius, 8, 1, fp) != 1 ||
        std::fread(&ref_hash, 8, 1, fp) != 1)
      throw InputError("CalibrationTable: truncated header in " + path);

    CalibrationTable t(static_cast<int>(bins), radius, ref_hash);
    const std::size_t n = t.cells();
    if (std::fread(t.count_.data(), 4, n, fp) != n ||
        std::fread(t.sum_p_.data(), 8, n, fp) != n ||
        std::fread(t.sum_q_.data(), 8, n, fp) != n)
      throw InputError("CalibrationTable: truncated data in " + path);
    t.finalize();
    return t;
  }

 private:
  int bins_ = 0;
  double sphere_radius_mm_ = 0.0;
  std::uint64_t reference_hash_ = 0;
  bool finalized_ = false;
  std::vector<std::uint32_t> count_;
  std::vector<double> sum_p_;
  std::vector<double> sum_q_;
  std::vector<float> value_p_;
  std::vector<float> value_q_;
};

// Shading at a pixel blends gradients across its immediate neighborhood, so
// within ~1 px of the contact rim the observed color belongs to a shallower
// slope than the analytic cap label. Sampling stops this far inside the rim
// to keep those inconsistent pairs out of the table.
inline constexpr double kCalibrationRimInsetPx = 2.0;

/// Builds a finalized table from sphere presses. For every pixel inside a
/// press's contact circle the analytic cap gradient is binned by the
/// pixel's color difference against the reference frame.
inline CalibrationTable calibrate(const std::vector<CalibrationPress>& presses,
                                  const TactileImage& reference,
                                  const SensorGeometry& geometry,
                                  double sphere_radius_mm, int bins = 32) {
  if (presses.empty()) throw InputError("calibrate: empty press list");
  if (!(sphere_radius_mm > 0.0))
    throw ConfigError("calibrate: sphere radius must be positive");
  geometry.check();

  CalibrationTable table(bins, sphere_radius_mm, image_hash(reference));
  const double pitch = geometry.pixel_pitch_mm;
  const double R2 = sphere_radius_mm * sphere_radius_mm;

  for (const CalibrationPress& press : presses) {
    if (!press.image.same_size(reference))
      throw InputError("calibrate: press/reference size mismatch");
    const double cx = press.center_x_px;
    const double cy = press.center_y_px;
    const double rc = press.contact_radius_px;
    if (cx - rc < 0.0 || cx + rc > reference.width - 1 || cy - rc < 0.0 ||
        cy + rc > reference.height - 1)
      throw InputError("calibrate: contact circle exceeds image bounds");
    if (rc * pitch >= sphere_radius_mm)
      throw InputError("calibrate: contact radius exceeds sphere radius");

    const double rs = rc - kCalibrationRimInsetPx;
    if (rs <= 0.0) continue;
    const int x0 = static_cast<int>(std::ceil(cx - rs));
    const int x1 = static_cast<int>(std::floor(cx + rs));
    const int y0 = static_cast<int>(std::ceil(cy - rs));
    const int y1 = static_cast<int>(std::floor(cy + rs));
    for (int y = y0; y <= y1; ++y) {
      const double dy = (y - cy) * pitch;
      for (int x = x0; x <= x1; ++x) {
        const double dx = (x - cx) * pitch;
        const double d2 = dx * dx + dy * dy;
        if (d2 >= rs * pitch * (rs * pitch)) continue;
        const double s = std::sqrt(R2 - d2);
        const double dr = press.image.plane[0](x, y) - reference.plane[0](x, y);
        const double dg = press.image.plane[1](x, y) - reference.plane[1](x, y);
        const double db = press.image.plane[2](x, y) - reference.plane[2](x, y);
        table.add_sample(dr, dg, db, -dx / s, -dy / s);
      }
    }
  }
  table.finalize();
  return table;
}

/// Per-pixel table lookup of the color difference against the reference.
/// Pixels within no_contact_tol of the reference color short-circuit to
/// zero gradient; set the tolerance to 0 to force every pixel through the
/// table.
inline GradientField lookup_gradients(
    const TactileImage& image, const TactileImage& reference,
    const CalibrationTable& table, LookupStats* stats = nullptr,
    double no_contact_tol = kDefaultNoContactTol) {
  if (!table.finalized()) throw InputError("lookup_gradients: table empty");
  if (!image.same_size(reference))
    throw std::invalid_argument("lookup_gradients: image size mismatch");

  GradientField out(image.width, image.height);
  LookupStats local;
  local.pixels = static_cast<std::size_t>(image.width) * image.height;
  const double tol2 = no_contact_tol * no_contact_tol;
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x) {
      const double dr = image.plane[0](x, y) - reference.plane[0](x, y);
      const double dg = image.plane[1](x, y) - reference.plane[1](x, y);
      const double db = image.plane[2](x, y) - reference.plane[2](x, y);
      if (dr * dr + dg * dg + db * db < tol2) {
        ++local.no_contact;
        continue;
      }
      const std::size_t idx = table.cell_index(dr, dg, db);
      const auto pq = table.value(idx);
      out.p(x, y) = pq[0];
      out.q(x, y) = pq[1];
      if (table.cell_populated(idx))
        ++local.direct;
      else
        ++local.fallback;
    }
  if (stats) *stats = local;
  return out;
}

/// Assumption monitors for one reconstructed frame: fallback and clamp
/// fractions rise when the scene violates the Lambertian/no-shadow model
/// the table was calibrated under.
struct ReconstructionStats {
  LookupStats lookup;
  std::size_t clamped_pixels = 0;
  double clamped_fraction = 0.0;
  double fallback_fraction = 0.0;
};

inline DepthMap reconstruct(const TactileImage& frame,
                            const TactileImage& reference,
                            const CalibrationTable& table,
                            PoissonSolver& solver,
                            ReconstructionStats* stats = nullptr,
                            double no_contact_tol = kDefaultNoContactTol) {
  LookupStats ls;
  GradientField g = lookup_gradients(frame, reference, table, &ls,
                                     no_contact_tol);
  IntegrationResult r = poisson_integrate(solver, g);
  if (stats) {
    stats->lookup = ls;
    stats->clamped_pixels = r.clamped_pixels;
    stats->clamped_fraction = r.clamped_fraction;
    stats->fallback_fraction = ls.fallback_fraction();
  }
  return std::move(r.depth);
}

}  // namespace tactus::stereo
