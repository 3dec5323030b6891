#pragma once

// Fast Poisson integrator: solves laplace(z) = div(p, q) on the pixel grid
// with z = 0 on the image border, via a type-I discrete sine transform of
// the interior nodes. Cost is O(N log N) in the pixel count.

#include <fftw3.h>

#include <cmath>
#include <cstdint>
#include <mutex>
#include <vector>

#include "tactus/core.hpp"

namespace tactus {

namespace detail {

// FFTW's planner is not thread safe; executions on distinct buffers are.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwPlan {
  fftw_plan plan = nullptr;
  ~FftwPlan() {
    if (plan) {
      std::lock_guard<std::mutex> lock(fftw_planner_mutex());
      fftw_destroy_plan(plan);
    }
  }
};

struct FftwBuffer {
  double* ptr = nullptr;
  explicit FftwBuffer(std::size_t n) {
    ptr = static_cast<double*>(fftw_malloc(n * sizeof(double)));
    if (!ptr) throw std::bad_alloc();
  }
  ~FftwBuffer() { fftw_free(ptr); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;
};

}  // namespace detail

/// Divergence of a gradient field by central differences, evaluated on the
/// interior; the border row/column is left zero (it is Dirichlet anyway).
inline GridD divergence(const GradientField& grad, double spacing) {
  const int w = grad.width();
  const int h = grad.height();
  GridD div(w, h, 0.0);
  const double inv2h = 1.0 / (2.0 * spacing);
  for (int y = 1; y < h - 1; ++y)
    for (int x = 1; x < w - 1; ++x)
      div(x, y) = (grad.p(x + 1, y) - grad.p(x - 1, y)) * inv2h +
                  (grad.q(x, y + 1) - grad.q(x, y - 1)) * inv2h;
  return div;
}

/// Five-point discrete Laplacian on the interior (zero border assumed).
inline GridD laplacian(const GridD& z, double spacing) {
  const int w = z.width();
  const int h = z.height();
  GridD out(w, h, 0.0);
  const double inv_h2 = 1.0 / (spacing * spacing);
  for (int y = 1; y < h - 1; ++y)
    for (int x = 1; x < w - 1; ++x)
      out(x, y) = (z(x + 1, y) + z(x - 1, y) + z(x, y + 1) + z(x, y - 1) -
                   4.0 * z(x, y)) *
                  inv_h2;
  return out;
}

class PoissonSolver {
 public:
  PoissonSolver(int width, int height, double spacing)
      : width_(width),
        height_(height),
        nx_(width - 2),
        ny_(height - 2),
        spacing_(spacing),
        buf_(static_cast<std::size_t>(std::max(nx_, 1)) * std::max(ny_, 1)) {
    if (width < 3 || height < 3)
      throw std::invalid_argument("PoissonSolver: grid must be at least 3x3");
    if (!(spacing > 0.0))
      throw std::invalid_argument("PoissonSolver: spacing must be positive");

    const double inv_h2 = 1.0 / (spacing * spacing);
    lambda_x_.resize(nx_);
    for (int k = 0; k < nx_; ++k)
      lambda_x_[k] = (2.0 * std::cos(M_PI * (k + 1) / (nx_ + 1)) - 2.0) * inv_h2;
    lambda_y_.resize(ny_);
    for (int k = 0; k < ny_; ++k)
      lambda_y_[k] = (2.0 * std::cos(M_PI * (k + 1) / (ny_ + 1)) - 2.0) * inv_h2;

    std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
    plan_.plan = fftw_plan_r2r_2d(ny_, nx_, buf_.ptr, buf_.ptr, FFTW_RODFT00,
                                  FFTW_RODFT00, FFTW_ESTIMATE);
    if (!plan_.plan) throw NumericError("PoissonSolver: FFTW plan failed");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  double spacing() const { return spacing_; }

  /// Unclamped solution of laplace(z) = f with z = 0 on the border; only
  /// interior values of f are used.
  GridD solve_divergence(const GridD& f) {
    if (f.width() != width_ || f.height() != height_)
      throw std::invalid_argument("PoissonSolver: dimension mismatch");

    for (int y = 0; y < ny_; ++y)
      for (int x = 0; x < nx_; ++x)
        buf_.ptr[static_cast<std::size_t>(y) * nx_ + x] = f(x + 1, y + 1);

    fftw_execute(plan_.plan);

    const double norm = 1.0 / (4.0 * (nx_ + 1) * (ny_ + 1));
    for (int y = 0; y < ny_; ++y)
      for (int x = 0; x < nx_; ++x) {
        const double lam = lambda_x_[x] + lambda_y_[y];
        buf_.ptr[static_cast<std::size_t>(y) * nx_ + x] *= norm / lam;
      }

    fftw_execute(plan_.plan);

    GridD z(width_, height_, 0.0);
    for (int y = 0; y < ny_; ++y)
      for (int x = 0; x < nx_; ++x)
        z(x + 1, y + 1) = buf_.ptr[static_cast<std::size_t>(y) * nx_ + x];
    return z;
  }

  /// Integrates a gradient field to the unclamped surface.
  GridD solve_gradients(const GradientField& grad) {
    return solve_divergence(divergence(grad, spacing_));
  }

 private:
  int width_;
  int height_;
  int nx_;
  int ny_;
  double spacing_;
  std::vector<double> lambda_x_;
  std::vector<double> lambda_y_;
  detail::FftwBuffer buf_;
  detail::FftwPlan plan_;
};

using ContactMask = Grid<std::uint8_t>;

struct IntegrationResult {
  DepthMap depth;
  std::size_t clamped_pixels = 0;
  double clamped_fraction = 0.0;
};

/// Depth reconstruction from gradients. Gradients outside the optional mask
/// are zeroed before integration; negative solution values are clamped to
/// zero and counted as a diagnostics proxy.
inline IntegrationResult poisson_integrate(PoissonSolver& solver,
                                           const GradientField& grad,
                                           const ContactMask* mask = nullptr) {
  for (std::size_t i = 0; i < grad.p.data().size(); ++i)
    if (!std::isfinite(grad.p.data()[i]) || !std::isfinite(grad.q.data()[i]))
      throw NumericError("poisson_integrate: non-finite gradient input");

  GridD z;
  if (mask) {
    if (!mask->same_size(grad.p))
      throw std::invalid_argument("poisson_integrate: mask size mismatch");
    GradientField masked = grad;
    for (std::size_t i = 0; i < masked.p.data().size(); ++i)
      if (!mask->data()[i]) {
        masked.p.data()[i] = 0.0;
        masked.q.data()[i] = 0.0;
      }
    z = solver.solve_gradients(masked);
  } else {
    z = solver.solve_gradients(grad);
  }

  IntegrationResult result;
  std::size_t clamped = 0;
  for (double& v : z.data())
    if (v < 0.0) {
      v = 0.0;
      ++clamped;
    }
  result.clamped_pixels = clamped;
  result.clamped_fraction = double(clamped) / double(z.size());
  result.depth.z = std::move(z);
  return result;
}

}  // namespace tactus
