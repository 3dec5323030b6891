#pragma once

// Independent reference implementations used only by tests. Each oracle
// derives its answer along a different route than the library code: element
// stiffness from finite differences of a strain-energy functional, global
// mat-vec from a dense scatter of the oracle element, assignment cost from
// permutation enumeration, and geometry from closed-form expressions.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

// ---------------------------------------------------------------------------
// Linear elasticity, 8-node hexahedron.
// ---------------------------------------------------------------------------

// Trilinear shape functions at local coords (xi, eta, zeta) in [-1,1]^3,
// corner ordering: bottom face (-,-,-),(+,-,-),(+,+,-),(-,+,-), then the
// same loop on the top face.
inline std::array<double, 8> hex_shape(double xi, double eta, double zeta) {
  const double sx[8] = {-1, 1, 1, -1, -1, 1, 1, -1};
  const double sy[8] = {-1, -1, 1, 1, -1, -1, 1, 1};
  const double sz[8] = {-1, -1, -1, -1, 1, 1, 1, 1};
  std::array<double, 8> n{};
  for (int i = 0; i < 8; ++i)
    n[i] = 0.125 * (1 + sx[i] * xi) * (1 + sy[i] * eta) * (1 + sz[i] * zeta);
  return n;
}

inline std::array<std::array<double, 3>, 8> hex_shape_grad_local(double xi,
                                                                 double eta,
                                                                 double zeta) {
  const double sx[8] = {-1, 1, 1, -1, -1, 1, 1, -1};
  const double sy[8] = {-1, -1, 1, 1, -1, -1, 1, 1};
  const double sz[8] = {-1, -1, -1, -1, 1, 1, 1, 1};
  std::array<std::array<double, 3>, 8> g{};
  for (int i = 0; i < 8; ++i) {
    g[i][0] = 0.125 * sx[i] * (1 + sy[i] * eta) * (1 + sz[i] * zeta);
    g[i][1] = 0.125 * (1 + sx[i] * xi) * sy[i] * (1 + sz[i] * zeta);
    g[i][2] = 0.125 * (1 + sx[i] * xi) * (1 + sy[i] * eta) * sz[i];
  }
  return g;
}

/// Strain energy of one hexahedral element under nodal displacements u
/// (24 components, xyz-interleaved), integrated by 2x2x2 Gauss quadrature.
/// Energy density is 0.5*lambda*tr(eps)^2 + mu*eps:eps with the symmetric
/// small-strain tensor computed directly from the displacement gradient;
/// no B matrix or Voigt bookkeeping is involved.
inline double hex_strain_energy(const std::array<std::array<double, 3>, 8>& X,
                                const Eigen::VectorXd& u, double E,
                                double nu) {
  const double lambda = E * nu / ((1 + nu) * (1 - 2 * nu));
  const double mu = E / (2 * (1 + nu));
  const double gp = 1.0 / std::sqrt(3.0);
  double energy = 0.0;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int c = 0; c < 2; ++c) {
        const double xi = (a ? gp : -gp);
        const double eta = (b ? gp : -gp);
        const double zeta = (c ? gp : -gp);
        const auto gl = hex_shape_grad_local(xi, eta, zeta);

        Eigen::Matrix3d J = Eigen::Matrix3d::Zero();
        for (int i = 0; i < 8; ++i)
          for (int r = 0; r < 3; ++r)
            for (int s = 0; s < 3; ++s) J(r, s) += gl[i][r] * X[i][s];
        const double detJ = J.determinant();
        const Eigen::Matrix3d Jinv = J.inverse();

        // Displacement gradient H(r,s) = d u_r / d x_s.
        Eigen::Matrix3d H = Eigen::Matrix3d::Zero();
        for (int i = 0; i < 8; ++i) {
          Eigen::Vector3d gx = Eigen::Vector3d::Zero();
          for (int s = 0; s < 3; ++s)
            for (int r = 0; r < 3; ++r) gx(s) += Jinv(s, r) * gl[i][r];
          for (int r = 0; r < 3; ++r)
            for (int s = 0; s < 3; ++s) H(r, s) += u(3 * i + r) * gx(s);
        }
        const Eigen::Matrix3d eps = 0.5 * (H + H.transpose());
        const double tr = eps.trace();
        const double dd = (eps.array() * eps.array()).sum();
        energy += (0.5 * lambda * tr * tr + mu * dd) * detJ;
      }
  return energy;
}

/// Element stiffness by central second differences of the energy:
/// K_ij = (E(+h_i+h_j) - E(+h_i-h_j) - E(-h_i+h_j) + E(-h_i-h_j)) / (4h^2).
/// The energy is exactly quadratic in u, so this is exact for any h up to
/// rounding; h = 0.5 keeps the difference terms well scaled.
inline Eigen::MatrixXd hex_stiffness_energy_fd(
    const std::array<std::array<double, 3>, 8>& X, double E, double nu,
    double h = 0.5) {
  Eigen::MatrixXd K(24, 24);
  for (int i = 0; i < 24; ++i)
    for (int j = 0; j <= i; ++j) {
      Eigen::VectorXd u = Eigen::VectorXd::Zero(24);
      u(i) += h;
      u(j) += h;
      const double epp = hex_strain_energy(X, u, E, nu);
      u(j) -= 2 * h;
      const double epm = hex_strain_energy(X, u, E, nu);
      u(i) -= 2 * h;
      const double emm = hex_strain_energy(X, u, E, nu);
      u(j) += 2 * h;
      const double emp = hex_strain_energy(X, u, E, nu);
      const double k = (epp - epm - emp + emm) / (4 * h * h);
      K(i, j) = k;
      K(j, i) = k;
    }
  return K;
}

/// Dense global stiffness assembled by scatter-adding the energy-FD element
/// matrix, given element connectivity and node coordinates from the caller.
inline Eigen::MatrixXd dense_global_stiffness(
    const std::vector<std::array<int, 8>>& elements,
    const std::vector<std::array<double, 3>>& nodes, double E, double nu) {
  const int n = static_cast<int>(nodes.size());
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(3 * n, 3 * n);
  for (const auto& conn : elements) {
    std::array<std::array<double, 3>, 8> X{};
    for (int i = 0; i < 8; ++i) X[i] = nodes[static_cast<std::size_t>(conn[i])];
    const Eigen::MatrixXd Ke = hex_stiffness_energy_fd(X, E, nu);
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 8; ++j)
        for (int r = 0; r < 3; ++r)
          for (int s = 0; s < 3; ++s)
            K(3 * conn[i] + r, 3 * conn[j] + s) += Ke(3 * i + r, 3 * j + s);
  }
  return K;
}

// ---------------------------------------------------------------------------
// Assignment.
// ---------------------------------------------------------------------------

/// Minimum total cost over all full permutations of n <= 8 items; cost is a
/// dense row-major n x n matrix.
inline double brute_force_assignment_cost(const std::vector<double>& cost,
                                          int n) {
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (int i = 0; i < n; ++i) total += cost[i * n + perm[i]];
    best = std::min(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

// ---------------------------------------------------------------------------
// Geometry.
// ---------------------------------------------------------------------------

/// Contact radius of a sphere of radius R pressed to the given depth.
inline double cap_contact_radius(double radius, double depth) {
  return std::sqrt(depth * (2.0 * radius - depth));
}

/// Height of the spherical cap at planar distance d from its axis.
inline double cap_height(double radius, double depth, double d) {
  const double plane = radius - depth;
  const double s2 = radius * radius - d * d;
  if (s2 <= plane * plane) return 0.0;
  return std::sqrt(s2) - plane;
}

/// Division-model forward distortion of a radius: where undistorted radius
/// ru lands, solving rd / (1 + k1 (rd/rhat)^2) = ru on the same ray.
inline double division_model_distort(double ru, double k1, double rhat) {
  if (std::abs(k1) < 1e-15 || ru == 0.0) return ru;
  const double a = k1 * ru / (rhat * rhat);
  const double disc = 1.0 - 4.0 * a * ru;
  return (1.0 - std::sqrt(disc)) / (2.0 * a);
}

/// Sagitta of a horizontal marker row at height y0 (relative to the image
/// center) after division-model distortion: the distorted row bows, and the
/// bow depth is the difference in distorted y between the row's center
/// column and its edge column at |x| = half_span.
inline double division_model_row_sagitta(double y0, double half_span,
                                         double k1, double rhat) {
  auto distorted_y = [&](double x) {
    const double ru = std::hypot(x, y0);
    if (ru == 0.0) return 0.0;
    const double rd = division_model_distort(ru, k1, rhat);
    return y0 * rd / ru;
  };
  return distorted_y(0.0) - distorted_y(half_span);
}

/// Best-fit 2D rigid transform (rotation + translation) by closed-form
/// Procrustes over explicit point pairs; used to cross-check the slip fit
/// on constructed fields, optionally excluding listed outlier indices.
struct RigidFit {
  double theta = 0.0;
  double tx = 0.0;
  double ty = 0.0;
};

inline RigidFit procrustes_2d(const std::vector<std::array<double, 2>>& ref,
                              const std::vector<std::array<double, 2>>& cur,
                              const std::vector<int>& exclude = {}) {
  double rcx = 0, rcy = 0, ccx = 0, ccy = 0;
  int n = 0;
  auto excluded = [&](int i) {
    return std::find(exclude.begin(), exclude.end(), i) != exclude.end();
  };
  for (std::size_t i = 0; i < ref.size(); ++i) {
    if (excluded(static_cast<int>(i))) continue;
    rcx += ref[i][0];
    rcy += ref[i][1];
    ccx += cur[i][0];
    ccy += cur[i][1];
    ++n;
  }
  rcx /= n;
  rcy /= n;
  ccx /= n;
  ccy /= n;
  double s_cos = 0, s_sin = 0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    if (excluded(static_cast<int>(i))) continue;
    const double rx = ref[i][0] - rcx, ry = ref[i][1] - rcy;
    const double cx = cur[i][0] - ccx, cy = cur[i][1] - ccy;
    s_cos += rx * cx + ry * cy;
    s_sin += rx * cy - ry * cx;
  }
  RigidFit f;
  f.theta = std::atan2(s_sin, s_cos);
  f.tx = ccx - (std::cos(f.theta) * rcx - std::sin(f.theta) * rcy);
  f.ty = ccy - (std::sin(f.theta) * rcx + std::cos(f.theta) * rcy);
  return f;
}

}  // namespace oracle
