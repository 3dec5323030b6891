#pragma once

// Linear-elastic force estimation on the gel: a single layer of 8-node
// hexahedra through the thickness, stiffness assembled once per
// configuration, and per-frame forces from F = K U with the top-surface
// displacement taken from marker motion (in-plane) and depth (normal).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "tactus/core.hpp"
#include "tactus/grid_io.hpp"
#include "tactus/markers.hpp"
#include "tactus/thin_plate.hpp"

namespace tactus::fem {

struct MaterialParams {
  double young_modulus_kpa = 85.0;
  double poisson_ratio = 0.48;

  void check() const {
    if (!(young_modulus_kpa > 0.0))
      throw ConfigError("MaterialParams: Young's modulus must be positive");
    if (poisson_ratio < 0.0 || poisson_ratio >= 0.5)
      throw ConfigError("MaterialParams: Poisson ratio must lie in [0, 0.5)");
  }

  // Lame parameters in N/mm^2 (kPa = 1e-3 N/mm^2).
  double lame_lambda() const {
    const double e = young_modulus_kpa * 1e-3;
    return e * poisson_ratio /
           ((1 + poisson_ratio) * (1 - 2 * poisson_ratio));
  }
  double lame_mu() const {
    return young_modulus_kpa * 1e-3 / (2 * (1 + poisson_ratio));
  }
};

struct CameraModel {
  double principal_x_px = 319.5;
  double principal_y_px = 239.5;
  double distance_mm = 20.0;

  void check() const {
    if (!(distance_mm > 0.0))
      throw ConfigError("CameraModel: camera distance must be positive");
  }
};

/// nx x ny x 1 box grid of hexahedra. Bottom nodes (layer 0) sit on the
/// lens at z = -thickness and are fixed; top nodes (layer 1) sit on the
/// sensing surface at z = 0. Element corners run counterclockwise on the
/// bottom face, then the same loop on the top face.
struct HexMesh {
  int nx = 32;
  int ny = 24;
  double x0_mm = 0.0;
  double y0_mm = 0.0;
  double dx_mm = 1.0;
  double dy_mm = 1.0;
  double thickness_mm = 2.0;

  void check() const {
    if (nx < 1 || ny < 1) throw ConfigError("HexMesh: need at least 1 element");
    if (!(dx_mm > 0.0) || !(dy_mm > 0.0) || !(thickness_mm > 0.0))
      throw ConfigError("HexMesh: element dimensions must be positive");
  }

  int nodes_per_layer() const { return (nx + 1) * (ny + 1); }
  int node_count() const { return 2 * nodes_per_layer(); }
  int element_count() const { return nx * ny; }

  int node_id(int ix, int iy, int iz) const {
    return iz * nodes_per_layer() + iy * (nx + 1) + ix;
  }

  std::array<double, 3> node_pos(int id) const {
    const int npl = nodes_per_layer();
    const int iz = id / npl;
    const int rem = id % npl;
    const int iy = rem / (nx + 1);
    const int ix = rem % (nx + 1);
    return {x0_mm + ix * dx_mm, y0_mm + iy * dy_mm,
            iz == 1 ? 0.0 : -thickness_mm};
  }

  std::array<int, 8> element_nodes(int ex, int ey) const {
    return {node_id(ex, ey, 0),         node_id(ex + 1, ey, 0),
            node_id(ex + 1, ey + 1, 0), node_id(ex, ey + 1, 0),
            node_id(ex, ey, 1),         node_id(ex + 1, ey, 1),
            node_id(ex + 1, ey + 1, 1), node_id(ex, ey + 1, 1)};
  }

  std::array<std::array<double, 3>, 8> element_coords(int ex, int ey) const {
    std::array<std::array<double, 3>, 8> X{};
    const auto conn = element_nodes(ex, ey);
    for (int i = 0; i < 8; ++i) X[i] = node_pos(conn[i]);
    return X;
  }

  bool is_top(int id) const { return id >= nodes_per_layer(); }

  /// Mesh spanning the full sensing area of the given geometry.
  static HexMesh centered(const SensorGeometry& geom, int nx = 32,
                          int ny = 24) {
    HexMesh m;
    m.nx = nx;
    m.ny = ny;
    m.x0_mm = -0.5 * geom.sensing_width_mm();
    m.y0_mm = -0.5 * geom.sensing_height_mm();
    m.dx_mm = geom.sensing_width_mm() / nx;
    m.dy_mm = geom.sensing_height_mm() / ny;
    m.thickness_mm = geom.gel_thickness_mm;
    m.check();
    return m;
  }
};

namespace detail {

inline constexpr double kCornerSign[8][3] = {
    {-1, -1, -1}, {1, -1, -1}, {1, 1, -1}, {-1, 1, -1},
    {-1, -1, 1},  {1, -1, 1},  {1, 1, 1},  {-1, 1, 1}};

inline std::array<std::array<double, 3>, 8> shape_grad_local(double xi,
                                                             double eta,
                                                             double zeta) {
  std::array<std::array<double, 3>, 8> g{};
  for (int i = 0; i < 8; ++i) {
    const double sx = kCornerSign[i][0];
    const double sy = kCornerSign[i][1];
    const double sz = kCornerSign[i][2];
    g[i][0] = 0.125 * sx * (1 + sy * eta) * (1 + sz * zeta);
    g[i][1] = 0.125 * (1 + sx * xi) * sy * (1 + sz * zeta);
    g[i][2] = 0.125 * (1 + sx * xi) * (1 + sy * eta) * sz;
  }
  return g;
}

}  // namespace detail

/// Trilinear isoparametric element stiffness, 2x2x2 Gauss quadrature,
/// strain-displacement matrix in Voigt order (xx, yy, zz, xy, yz, zx) with
/// engineering shear. Node displacement layout is xyz-interleaved.
inline Eigen::Matrix<double, 24, 24> element_stiffness(
    const MaterialParams& params,
    const std::array<std::array<double, 3>, 8>& X) {
  params.check();
  const double lambda = params.lame_lambda();
  const double mu = params.lame_mu();

  Eigen::Matrix<double, 6, 6> D = Eigen::Matrix<double, 6, 6>::Zero();
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) D(i, j) = lambda;
    D(i, i) += 2 * mu;
    D(i + 3, i + 3) = mu;
  }

  Eigen::Matrix<double, 24, 24> K = Eigen::Matrix<double, 24, 24>::Zero();
  const double gp = 1.0 / std::sqrt(3.0);
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int c = 0; c < 2; ++c) {
        const auto gl = detail::shape_grad_local(a ? gp : -gp, b ? gp : -gp,
                                                 c ? gp : -gp);
        Eigen::Matrix3d J = Eigen::Matrix3d::Zero();
        for (int i = 0; i < 8; ++i)
          for (int r = 0; r < 3; ++r)
            for (int s = 0; s < 3; ++s) J(r, s) += gl[i][r] * X[i][s];
        const double detJ = J.determinant();
        if (!(detJ > 0.0))
          throw NumericError("element_stiffness: inverted element");
        const Eigen::Matrix3d Jinv = J.inverse();

        Eigen::Matrix<double, 6, 24> B = Eigen::Matrix<double, 6, 24>::Zero();
        for (int i = 0; i < 8; ++i) {
          double gx[3] = {0, 0, 0};
          for (int s = 0; s < 3; ++s)
            for (int r = 0; r < 3; ++r) gx[s] += Jinv(s, r) * gl[i][r];
          B(0, 3 * i + 0) = gx[0];
          B(1, 3 * i + 1) = gx[1];
          B(2, 3 * i + 2) = gx[2];
          B(3, 3 * i + 0) = gx[1];
          B(3, 3 * i + 1) = gx[0];
          B(4, 3 * i + 1) = gx[2];
          B(4, 3 * i + 2) = gx[1];
          B(5, 3 * i + 0) = gx[2];
          B(5, 3 * i + 2) = gx[0];
        }
        K.noalias() += B.transpose() * D * B * detJ;
      }
  return K;
}

/// Global stiffness by scatter-add. All elements of the box mesh are
/// congruent, so one element matrix serves the whole grid.
inline Eigen::SparseMatrix<double> assemble(const HexMesh& mesh,
                                            const MaterialParams& params) {
  mesh.check();
  const auto Ke = element_stiffness(params, mesh.element_coords(0, 0));

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(mesh.element_count()) * 24 * 24);
  for (int ey = 0; ey < mesh.ny; ++ey)
    for (int ex = 0; ex < mesh.nx; ++ex) {
      const auto conn = mesh.element_nodes(ex, ey);
      for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j)
          for (int r = 0; r < 3; ++r)
            for (int s = 0; s < 3; ++s)
              triplets.emplace_back(3 * conn[i] + r, 3 * conn[j] + s,
                                    Ke(3 * i + r, 3 * j + s));
    }
  Eigen::SparseMatrix<double> K(3 * mesh.node_count(), 3 * mesh.node_count());
  K.setFromTriplets(triplets.begin(), triplets.end());
  return K;
}

/// Nodal displacements in mm, xyz-interleaved over all mesh nodes. Bottom
/// nodes stay zero (bonded to the lens); top nodes outside the marker
/// convex hull still get values but carry the extrapolation flag.
struct DisplacementField {
  Eigen::VectorXd u;
  std::vector<std::uint8_t> top_extrapolated;  // indexed by top-layer node
};

namespace detail {

inline std::vector<std::array<double, 2>> convex_hull(
    std::vector<std::array<double, 2>> pts) {
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  const std::size_t n = pts.size();
  if (n < 3) return pts;
  auto cross = [](const std::array<double, 2>& o, const std::array<double, 2>& a,
                  const std::array<double, 2>& b) {
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
  };
  std::vector<std::array<double, 2>> hull(2 * n);
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  const std::size_t lower = k + 1;
  for (std::size_t i = n - 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

inline bool inside_hull(const std::vector<std::array<double, 2>>& hull,
                        double x, double y) {
  if (hull.size() < 3) return false;
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const auto& a = hull[i];
    const auto& b = hull[(i + 1) % hull.size()];
    if ((b[0] - a[0]) * (y - a[1]) - (b[1] - a[1]) * (x - a[0]) < 0)
      return false;
  }
  return true;
}

}  // namespace detail

/// Builds U for one frame: in-plane top displacements by thin-plate
/// interpolation of the marker motion (px -> mm), normal displacement from
/// the depth map (indentation moves the surface down, negative z), and a
/// pinhole viewing-angle correction that removes the apparent radial shift
/// a node shows when it moves toward the camera.
inline DisplacementField displacement_field(const markers::MotionField& motion,
                                            const DepthMap& depth,
                                            const HexMesh& mesh,
                                            const SensorGeometry& geom,
                                            const CameraModel& camera = {}) {
  mesh.check();
  geom.check();
  camera.check();

  DisplacementField out;
  out.u = Eigen::VectorXd::Zero(3 * mesh.node_count());
  out.top_extrapolated.assign(static_cast<std::size_t>(mesh.nodes_per_layer()),
                              0);

  std::vector<std::array<double, 2>> sources, disp;
  for (const auto& m : motion.matches) {
    sources.push_back({m.ref_x, m.ref_y});
    disp.push_back({m.dx, m.dy});
  }
  std::optional<ThinPlateSpline2D> tps;
  double mean_dx = 0.0, mean_dy = 0.0;
  if (sources.size() >= 3) {
    tps.emplace(sources, disp);
  } else if (!sources.empty()) {
    for (const auto& d : disp) {
      mean_dx += d[0];
      mean_dy += d[1];
    }
    mean_dx /= sources.size();
    mean_dy /= sources.size();
  }
  const auto hull = detail::convex_hull(sources);

  const double pp_x_mm = geom.px_to_mm_x(camera.principal_x_px);
  const double pp_y_mm = geom.px_to_mm_y(camera.principal_y_px);
  const int npl = mesh.nodes_per_layer();
  for (int t = 0; t < npl; ++t) {
    const int id = npl + t;
    const auto pos = mesh.node_pos(id);
    const double px = geom.mm_to_px_x(pos[0]);
    const double py = geom.mm_to_px_y(pos[1]);

    double dx_px = mean_dx, dy_px = mean_dy;
    if (tps) {
      const auto d = (*tps)(px, py);
      dx_px = d[0];
      dy_px = d[1];
    }
    if (!detail::inside_hull(hull, px, py)) out.top_extrapolated[t] = 1;

    double ux = dx_px * geom.pixel_pitch_mm;
    double uy = dy_px * geom.pixel_pitch_mm;
    const double uz = -depth.z.sample(px, py);

    ux -= uz * (pos[0] - pp_x_mm) / camera.distance_mm;
    uy -= uz * (pos[1] - pp_y_mm) / camera.distance_mm;

    out.u(3 * id + 0) = ux;
    out.u(3 * id + 1) = uy;
    out.u(3 * id + 2) = uz;
  }
  return out;
}

struct NodeForce {
  int node_id = -1;
  double x_mm = 0.0;
  double y_mm = 0.0;
  double fx_n = 0.0;
  double fy_n = 0.0;
  double fz_n = 0.0;
};

struct ForceField {
  Eigen::VectorXd full;              // K*U over every dof, N
  std::vector<NodeForce> top_nodes;  // sensing-surface nodes with positions
  double total_fx_n = 0.0;
  double total_fy_n = 0.0;
  double total_fz_n = 0.0;
};

inline ForceField compute_forces(const Eigen::SparseMatrix<double>& K,
                                 const DisplacementField& U,
                                 const HexMesh& mesh) {
  if (K.rows() != U.u.size() || K.rows() != 3 * mesh.node_count())
    throw std::invalid_argument("compute_forces: dimension mismatch");
  ForceField f;
  f.full = K * U.u;
  const int npl = mesh.nodes_per_layer();
  f.top_nodes.reserve(static_cast<std::size_t>(npl));
  for (int t = 0; t < npl; ++t) {
    const int id = npl + t;
    const auto pos = mesh.node_pos(id);
    NodeForce nf;
    nf.node_id = id;
    nf.x_mm = pos[0];
    nf.y_mm = pos[1];
    nf.fx_n = f.full(3 * id + 0);
    nf.fy_n = f.full(3 * id + 1);
    nf.fz_n = f.full(3 * id + 2);
    f.total_fx_n += nf.fx_n;
    f.total_fy_n += nf.fy_n;
    f.total_fz_n += nf.fz_n;
    f.top_nodes.push_back(nf);
  }
  return f;
}

inline void write_force_csv(const std::string& path, const ForceField& f) {
  std::FILE* fp = std::fopen(path.c_str(), "w");
  if (!fp) throw InputError("write_force_csv: cannot open " + path);
  std::fprintf(fp, "x_mm,y_mm,fx_n,fy_n,fz_n\n");
  for (const NodeForce& n : f.top_nodes)
    std::fprintf(fp, "%s,%s,%s,%s,%s\n",
                 tactus::detail::format_double(n.x_mm).c_str(),
                 tactus::detail::format_double(n.y_mm).c_str(),
                 tactus::detail::format_double(n.fx_n).c_str(),
                 tactus::detail::format_double(n.fy_n).c_str(),
                 tactus::detail::format_double(n.fz_n).c_str());
  if (std::fclose(fp) != 0) throw InputError("write_force_csv: write failed");
}

}  // namespace tactus::fem
