#pragma once

// Thin-plate-spline interpolation of 2D -> 2D correspondences. Exact at the
// data points, reproduces affine maps, and stays smooth between markers.

#include <array>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "tactus/core.hpp"

namespace tactus {

class ThinPlateSpline2D {
 public:
  /// Fits f with f(source[i]) = target[i]. lambda > 0 relaxes exactness
  /// toward a smoother map. Needs >= 3 non-collinear sources.
  ThinPlateSpline2D(const std::vector<std::array<double, 2>>& sources,
                    const std::vector<std::array<double, 2>>& targets,
                    double lambda = 0.0) {
    const int n = static_cast<int>(sources.size());
    if (n < 3)
      throw InputError("ThinPlateSpline2D: need at least 3 control points");
    if (targets.size() != sources.size())
      throw std::invalid_argument("ThinPlateSpline2D: size mismatch");

    // Normalize source coordinates to zero mean and unit RMS radius; keeps
    // the kernel system well conditioned for pixel-scale inputs.
    cx_ = cy_ = 0.0;
    for (const auto& s : sources) {
      cx_ += s[0];
      cy_ += s[1];
    }
    cx_ /= n;
    cy_ /= n;
    double rms = 0.0;
    for (const auto& s : sources)
      rms += (s[0] - cx_) * (s[0] - cx_) + (s[1] - cy_) * (s[1] - cy_);
    rms = std::sqrt(rms / n);
    scale_ = rms > 0.0 ? 1.0 / rms : 1.0;

    pts_.resize(n);
    for (int i = 0; i < n; ++i)
      pts_[i] = {(sources[i][0] - cx_) * scale_, (sources[i][1] - cy_) * scale_};

    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n + 3, n + 3);
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n + 3, 2);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j)
        A(i, j) = kernel(pts_[i][0] - pts_[j][0], pts_[i][1] - pts_[j][1]);
      A(i, i) += lambda;
      A(i, n) = A(n, i) = 1.0;
      A(i, n + 1) = A(n + 1, i) = pts_[i][0];
      A(i, n + 2) = A(n + 2, i) = pts_[i][1];
      rhs(i, 0) = targets[i][0];
      rhs(i, 1) = targets[i][1];
    }

    const Eigen::MatrixXd sol = A.fullPivLu().solve(rhs);
    if (!sol.allFinite())
      throw NumericError("ThinPlateSpline2D: singular system (collinear points?)");
    weights_ = sol.topRows(n);
    affine_ = sol.bottomRows(3);
  }

  std::array<double, 2> operator()(double x, double y) const {
    const double u = (x - cx_) * scale_;
    const double v = (y - cy_) * scale_;
    const int n = static_cast<int>(pts_.size());
    double ox = affine_(0, 0) + affine_(1, 0) * u + affine_(2, 0) * v;
    double oy = affine_(0, 1) + affine_(1, 1) * u + affine_(2, 1) * v;
    for (int i = 0; i < n; ++i) {
      const double k = kernel(u - pts_[i][0], v - pts_[i][1]);
      ox += weights_(i, 0) * k;
      oy += weights_(i, 1) * k;
    }
    return {ox, oy};
  }

 private:
  // U(r) = r^2 log r, evaluated as 0.5 r^2 log r^2 to avoid the sqrt.
  static double kernel(double dx, double dy) {
    const double r2 = dx * dx + dy * dy;
    return r2 > 0.0 ? 0.5 * r2 * std::log(r2) : 0.0;
  }

  double cx_ = 0.0, cy_ = 0.0, scale_ = 1.0;
  std::vector<std::array<double, 2>> pts_;
  Eigen::MatrixXd weights_;  // n x 2
  Eigen::MatrixXd affine_;   // 3 x 2 (1, x, y)
};

}  // namespace tactus
