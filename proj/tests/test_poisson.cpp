#include "tactus/poisson.hpp"

#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "tactus/simulator.hpp"

using namespace tactus;

namespace {

// Product-sine surface with zero boundary, plus its analytic gradients.
struct SineField {
  int n;
  double h;
  double lx, ly;

  SineField(int n_, double h_) : n(n_), h(h_), lx((n_ - 1) * h_),
                                 ly((n_ - 1) * h_) {}

  double z(int x, int y) const {
    return std::sin(M_PI * x * h / lx) * std::sin(M_PI * y * h / ly);
  }
  GradientField gradients() const {
    GradientField g(n, n);
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) {
        const double u = x * h, v = y * h;
        g.p(x, y) = M_PI / lx * std::cos(M_PI * u / lx) *
                    std::sin(M_PI * v / ly);
        g.q(x, y) = M_PI / ly * std::sin(M_PI * u / lx) *
                    std::cos(M_PI * v / ly);
      }
    return g;
  }
};

GridD random_interior_field(int w, int h, unsigned seed) {
  GridD f(w, h, 0.0);
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int y = 1; y < h - 1; ++y)
    for (int x = 1; x < w - 1; ++x) f(x, y) = u(rng);
  return f;
}

}  // namespace

TEST(Poisson, RecoversProductSineField) {
  const int n = 128;
  const double h = 0.05;
  const SineField field(n, h);

  PoissonSolver solver(n, n, h);
  const GridD z = solver.solve_gradients(field.gradients());

  double num = 0.0, den = 0.0;
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      const double e = z(x, y) - field.z(x, y);
      num += e * e;
      den += field.z(x, y) * field.z(x, y);
    }
  EXPECT_LT(std::sqrt(num / den), 1e-3);
}

TEST(Poisson, DiscreteResidualVanishes) {
  const int w = 96, h = 72;
  const double spacing = 0.1;
  const GridD f = random_interior_field(w, h, 42);

  PoissonSolver solver(w, h, spacing);
  const GridD z = solver.solve_divergence(f);
  const GridD lap = laplacian(z, spacing);

  double max_err = 0.0;
  for (int y = 1; y < h - 1; ++y)
    for (int x = 1; x < w - 1; ++x)
      max_err = std::max(max_err, std::abs(lap(x, y) - f(x, y)));
  EXPECT_LT(max_err, 1e-8);
}

TEST(Poisson, SolutionIsLinearInInput) {
  const int w = 64, h = 48;
  const double spacing = 0.05;
  const GridD f1 = random_interior_field(w, h, 1);
  const GridD f2 = random_interior_field(w, h, 2);
  const double a = 1.7, b = -0.4;

  GridD combo(w, h, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) combo(x, y) = a * f1(x, y) + b * f2(x, y);

  PoissonSolver solver(w, h, spacing);
  const GridD z1 = solver.solve_divergence(f1);
  const GridD z2 = solver.solve_divergence(f2);
  const GridD zc = solver.solve_divergence(combo);

  double max_err = 0.0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      max_err = std::max(max_err,
                         std::abs(zc(x, y) - (a * z1(x, y) + b * z2(x, y))));
  EXPECT_LT(max_err, 1e-10);
}

TEST(Poisson, BorderStaysZero) {
  const int w = 50, h = 40;
  PoissonSolver solver(w, h, 1.0);
  const GridD z = solver.solve_divergence(random_interior_field(w, h, 9));
  for (int x = 0; x < w; ++x) {
    EXPECT_EQ(z(x, 0), 0.0);
    EXPECT_EQ(z(x, h - 1), 0.0);
  }
  for (int y = 0; y < h; ++y) {
    EXPECT_EQ(z(0, y), 0.0);
    EXPECT_EQ(z(w - 1, y), 0.0);
  }
}

TEST(Poisson, SolutionsAreReproducible) {
  const int w = 64, h = 64;
  const GridD f = random_interior_field(w, h, 31);
  PoissonSolver s1(w, h, 0.05);
  PoissonSolver s2(w, h, 0.05);
  const GridD z1 = s1.solve_divergence(f);
  const GridD z2 = s2.solve_divergence(f);
  EXPECT_EQ(z1.data(), z2.data());  // bitwise, across solver instances
}

TEST(Poisson, IntegratesSphericalCapGradients) {
  const SensorGeometry geom;
  const double radius_mm = 3.0, depth_mm = 1.0;
  const double cx = 320.0, cy = 240.0;
  const GradientField grad =
      sim::sphere_cap_gradients(radius_mm, cx, cy, depth_mm, geom);

  PoissonSolver solver(geom.width, geom.height, geom.pixel_pitch_mm);
  const auto result = poisson_integrate(solver, grad);

  // Peak lands at the press center with close to the true depth.
  double peak = 0.0;
  int px = 0, py = 0;
  for (int y = 0; y < geom.height; ++y)
    for (int x = 0; x < geom.width; ++x)
      if (result.depth.z(x, y) > peak) {
        peak = result.depth.z(x, y);
        px = x;
        py = y;
      }
  EXPECT_NEAR(peak, depth_mm, 0.05 * depth_mm);
  EXPECT_LE(std::hypot(px - cx, py - cy), 2.0);
  EXPECT_TRUE(validate(result.depth).ok);  // clamping keeps depth >= 0
}

TEST(Poisson, MaskZeroesOutsideGradients) {
  const SensorGeometry geom{64, 64, 0.05, 2.0};
  GradientField grad(64, 64);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) {
      grad.p(x, y) = 0.3;
      grad.q(x, y) = -0.2;
    }
  ContactMask mask(64, 64, 0);  // nothing in contact

  PoissonSolver solver(64, 64, 0.05);
  const auto result = poisson_integrate(solver, grad, &mask);
  for (const double v : result.depth.z.data()) EXPECT_EQ(v, 0.0);
}

TEST(Poisson, RejectsNonFiniteGradients) {
  GradientField grad(16, 16);
  grad.p(8, 8) = std::numeric_limits<double>::quiet_NaN();
  PoissonSolver solver(16, 16, 1.0);
  EXPECT_THROW(poisson_integrate(solver, grad), NumericError);
}

TEST(Poisson, RejectsBadConstruction) {
  EXPECT_THROW(PoissonSolver(2, 16, 1.0), std::invalid_argument);
  EXPECT_THROW(PoissonSolver(16, 16, 0.0), std::invalid_argument);
}

TEST(Poisson, RejectsDimensionMismatch) {
  PoissonSolver solver(16, 16, 1.0);
  GridD f(8, 8, 0.0);
  EXPECT_THROW(solver.solve_divergence(f), std::invalid_argument);
  GradientField g(16, 16);
  ContactMask mask(8, 8, 1);
  EXPECT_THROW(poisson_integrate(solver, g, &mask), std::invalid_argument);
}
