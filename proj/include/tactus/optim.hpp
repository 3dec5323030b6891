#pragma once

// Derivative-free minimization: Nelder-Mead simplex with every candidate
// projected onto box bounds before evaluation. Deterministic for a given
// start point, and the incumbent never regresses as the budget grows.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "tactus/core.hpp"

namespace tactus::optim {

struct NelderMeadOptions {
  int max_evaluations = 500;
  // Initial simplex spread per coordinate, as a fraction of the bound range
  // (or of max(1,|x0_i|) where a bound is infinite).
  double initial_step = 0.15;
  double f_tolerance = 1e-12;
};

struct NelderMeadResult {
  Eigen::VectorXd best_x;
  double best_f = 0.0;
  int evaluations = 0;
  bool converged = false;
  std::vector<double> trace;  // incumbent f after each evaluation
};

inline NelderMeadResult nelder_mead(
    const std::function<double(const Eigen::VectorXd&)>& f,
    Eigen::VectorXd x0, const Eigen::VectorXd& lower,
    const Eigen::VectorXd& upper, const NelderMeadOptions& opt = {}) {
  const int dim = static_cast<int>(x0.size());
  if (dim < 1) throw ConfigError("nelder_mead: empty parameter vector");
  if (lower.size() != dim || upper.size() != dim)
    throw ConfigError("nelder_mead: bound dimension mismatch");
  for (int i = 0; i < dim; ++i)
    if (lower(i) > upper(i))
      throw ConfigError("nelder_mead: lower bound exceeds upper bound");
  if (opt.max_evaluations < dim + 2)
    throw ConfigError("nelder_mead: budget smaller than the simplex");

  auto project = [&](Eigen::VectorXd x) {
    for (int i = 0; i < dim; ++i) x(i) = std::clamp(x(i), lower(i), upper(i));
    return x;
  };

  NelderMeadResult res;
  res.best_f = std::numeric_limits<double>::infinity();
  auto evaluate = [&](const Eigen::VectorXd& x) {
    const double v = f(x);
    ++res.evaluations;
    if (v < res.best_f) {
      res.best_f = v;
      res.best_x = x;
    }
    res.trace.push_back(res.best_f);
    return v;
  };

  std::vector<Eigen::VectorXd> vx(dim + 1);
  std::vector<double> vf(dim + 1);
  vx[0] = project(std::move(x0));
  vf[0] = evaluate(vx[0]);
  for (int i = 0; i < dim; ++i) {
    Eigen::VectorXd p = vx[0];
    double step;
    if (std::isfinite(lower(i)) && std::isfinite(upper(i)) &&
        upper(i) > lower(i))
      step = opt.initial_step * (upper(i) - lower(i));
    else
      step = opt.initial_step * std::max(1.0, std::abs(p(i)));
    p(i) += step;
    p = project(p);
    if (p(i) == vx[0](i)) {
      p(i) -= 2 * step;  // bound was tight above; try below
      p = project(p);
    }
    vx[i + 1] = p;
    vf[i + 1] = evaluate(p);
  }

  static constexpr double kReflect = 1.0;
  static constexpr double kExpand = 2.0;
  static constexpr double kContract = 0.5;
  static constexpr double kShrink = 0.5;

  std::vector<int> order(dim + 1);
  while (res.evaluations < opt.max_evaluations) {
    for (int i = 0; i <= dim; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return vf[a] < vf[b]; });
    std::vector<Eigen::VectorXd> sx(dim + 1);
    std::vector<double> sf(dim + 1);
    for (int i = 0; i <= dim; ++i) {
      sx[i] = vx[order[i]];
      sf[i] = vf[order[i]];
    }
    vx = std::move(sx);
    vf = std::move(sf);

    if (vf[dim] - vf[0] < opt.f_tolerance) {
      res.converged = true;
      break;
    }

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(dim);
    for (int i = 0; i < dim; ++i) centroid += vx[i];
    centroid /= dim;

    const Eigen::VectorXd xr =
        project(centroid + kReflect * (centroid - vx[dim]));
    const double fr = evaluate(xr);
    if (res.evaluations >= opt.max_evaluations) break;

    if (fr < vf[0]) {
      const Eigen::VectorXd xe =
          project(centroid + kExpand * (xr - centroid));
      const double fe = evaluate(xe);
      if (fe < fr) {
        vx[dim] = xe;
        vf[dim] = fe;
      } else {
        vx[dim] = xr;
        vf[dim] = fr;
      }
    } else if (fr < vf[dim - 1]) {
      vx[dim] = xr;
      vf[dim] = fr;
    } else {
      const bool outside = fr < vf[dim];
      const Eigen::VectorXd base = outside ? xr : vx[dim];
      const Eigen::VectorXd xc =
          project(centroid + kContract * (base - centroid));
      const double fc = evaluate(xc);
      if (fc < std::min(fr, vf[dim])) {
        vx[dim] = xc;
        vf[dim] = fc;
      } else {
        for (int i = 1; i <= dim; ++i) {
          if (res.evaluations >= opt.max_evaluations) break;
          vx[i] = project(vx[0] + kShrink * (vx[i] - vx[0]));
          vf[i] = evaluate(vx[i]);
        }
      }
    }
  }
  return res;
}

}  // namespace tactus::optim
