#pragma once

// Marker tracking between a reference and a current frame: globally optimal
// one-to-one assignment minimizing total squared displacement, with markers
// beyond max_displacement left unmatched rather than guessed.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include "tactus/core.hpp"
#include "tactus/distortion.hpp"
#include "tactus/grid_io.hpp"

namespace tactus::markers {

struct Correspondence {
  double ref_x = 0.0, ref_y = 0.0;
  double cur_x = 0.0, cur_y = 0.0;
  double dx = 0.0, dy = 0.0;
  int ref_index = -1;
  int cur_index = -1;
};

struct MotionField {
  std::vector<Correspondence> matches;
  int unmatched_reference = 0;
  int unmatched_current = 0;
};

namespace detail {

inline constexpr double kForbidden = 1e15;

/// Dense square min-cost perfect matching (shortest augmenting paths with
/// potentials). cost is row-major n x n; returns row -> column.
inline std::vector<int> solve_assignment(const std::vector<double>& cost,
                                         int n) {
  const double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      int j1 = -1;
      double delta = kInf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= n; ++j)
    if (p[j] > 0) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

}  // namespace detail

/// Matches reference markers to current markers. Pairs farther apart than
/// max_displacement are infeasible; among feasible assignments the match
/// count is maximized first and total squared displacement minimized
/// second. The optimum decomposes over connected components of the
/// feasibility graph, so the cubic solver only ever sees small clusters.
inline MotionField track(const distortion::MarkerSet& reference,
                         const distortion::MarkerSet& current,
                         double max_displacement_px = 18.0) {
  if (reference.markers.empty()) throw InputError("track: empty reference set");
  if (!(max_displacement_px > 0.0))
    throw ConfigError("track: max_displacement must be positive");

  const auto& ref = reference.markers;
  const auto& cur = current.markers;
  const int nr = static_cast<int>(ref.size());
  const int nc = static_cast<int>(cur.size());
  const double r2 = max_displacement_px * max_displacement_px;

  // Candidate edges via a bucket grid over current markers.
  const double cell = max_displacement_px;
  auto key = [&](double x, double y) {
    return std::pair<long, long>{static_cast<long>(std::floor(x / cell)),
                                 static_cast<long>(std::floor(y / cell))};
  };
  std::vector<std::pair<std::pair<long, long>, int>> buckets;
  buckets.reserve(cur.size());
  for (int j = 0; j < nc; ++j) buckets.push_back({key(cur[j].x, cur[j].y), j});
  std::sort(buckets.begin(), buckets.end());

  std::vector<std::vector<int>> candidates(nr);
  for (int i = 0; i < nr; ++i) {
    const auto [kx, ky] = key(ref[i].x, ref[i].y);
    for (long bx = kx - 1; bx <= kx + 1; ++bx)
      for (long by = ky - 1; by <= ky + 1; ++by) {
        auto lo = std::lower_bound(
            buckets.begin(), buckets.end(),
            std::pair<std::pair<long, long>, int>{{bx, by}, -1});
        for (auto it = lo; it != buckets.end() && it->first == std::make_pair(bx, by);
             ++it) {
          const int j = it->second;
          const double dx = cur[j].x - ref[i].x;
          const double dy = cur[j].y - ref[i].y;
          if (dx * dx + dy * dy <= r2) candidates[i].push_back(j);
        }
      }
  }

  // Connected components of the bipartite feasibility graph.
  std::vector<int> ref_comp(nr, -1), cur_comp(nc, -1);
  std::vector<std::vector<int>> cur_to_ref(nc);
  for (int i = 0; i < nr; ++i)
    for (int j : candidates[i]) cur_to_ref[j].push_back(i);
  int n_comp = 0;
  std::vector<int> stack;
  for (int s = 0; s < nr; ++s) {
    if (ref_comp[s] >= 0) continue;
    const int id = n_comp++;
    ref_comp[s] = id;
    stack.push_back(s);
    while (!stack.empty()) {
      const int i = stack.back();
      stack.pop_back();
      for (int j : candidates[i]) {
        if (cur_comp[j] >= 0) continue;
        cur_comp[j] = id;
        for (int i2 : cur_to_ref[j])
          if (ref_comp[i2] < 0) {
            ref_comp[i2] = id;
            stack.push_back(i2);
          }
      }
    }
  }

  std::vector<std::vector<int>> comp_refs(n_comp), comp_curs(n_comp);
  for (int i = 0; i < nr; ++i) comp_refs[ref_comp[i]].push_back(i);
  for (int j = 0; j < nc; ++j)
    if (cur_comp[j] >= 0) comp_curs[cur_comp[j]].push_back(j);

  MotionField out;
  std::vector<char> cur_matched(nc, 0);
  auto add_match = [&](int i, int j) {
    Correspondence cm;
    cm.ref_index = i;
    cm.cur_index = j;
    cm.ref_x = ref[i].x;
    cm.ref_y = ref[i].y;
    cm.cur_x = cur[j].x;
    cm.cur_y = cur[j].y;
    cm.dx = cm.cur_x - cm.ref_x;
    cm.dy = cm.cur_y - cm.ref_y;
    out.matches.push_back(cm);
    cur_matched[j] = 1;
  };

  // Leaving a marker unmatched costs far more than any feasible match, so
  // cardinality dominates and cost breaks ties; forbidden cells stay
  // unreachable because every row/column owns a cheaper dummy.
  const double unmatch = 1e6 * r2 + 1.0;
  for (int comp = 0; comp < n_comp; ++comp) {
    const auto& ri = comp_refs[comp];
    const auto& cj = comp_curs[comp];
    if (cj.empty()) continue;
    if (ri.size() == 1 && cj.size() == 1) {
      add_match(ri[0], cj[0]);
      continue;
    }
    const int R = static_cast<int>(ri.size());
    const int C = static_cast<int>(cj.size());
    const int n = R + C;
    std::vector<double> cost(static_cast<std::size_t>(n) * n,
                             detail::kForbidden);
    for (int a = 0; a < R; ++a) {
      for (int j : candidates[ri[a]]) {
        const auto it = std::find(cj.begin(), cj.end(), j);
        const int b = static_cast<int>(it - cj.begin());
        const double dx = cur[j].x - ref[ri[a]].x;
        const double dy = cur[j].y - ref[ri[a]].y;
        cost[static_cast<std::size_t>(a) * n + b] = dx * dx + dy * dy;
      }
      cost[static_cast<std::size_t>(a) * n + C + a] = unmatch;
    }
    for (int b = 0; b < C; ++b)
      cost[static_cast<std::size_t>(R + b) * n + b] = unmatch;
    for (int a = R; a < n; ++a)
      for (int b = C; b < n; ++b)
        cost[static_cast<std::size_t>(a) * n + b] = 0.0;

    const auto row_to_col = detail::solve_assignment(cost, n);
    for (int a = 0; a < R; ++a)
      if (row_to_col[a] >= 0 && row_to_col[a] < C) add_match(ri[a], cj[row_to_col[a]]);
  }

  std::sort(out.matches.begin(), out.matches.end(),
            [](const Correspondence& a, const Correspondence& b) {
              return a.ref_index < b.ref_index;
            });
  out.unmatched_reference = nr - static_cast<int>(out.matches.size());
  out.unmatched_current = nc - static_cast<int>(out.matches.size());
  return out;
}

inline void write_motion_csv(const std::string& path, const MotionField& m) {
  std::FILE* fp = std::fopen(path.c_str(), "w");
  if (!fp) throw InputError("write_motion_csv: cannot open " + path);
  std::fprintf(fp, "ref_x,ref_y,cur_x,cur_y,dx,dy\n");
  for (const Correspondence& c : m.matches)
    std::fprintf(fp, "%s,%s,%s,%s,%s,%s\n",
                 tactus::detail::format_double(c.ref_x).c_str(),
                 tactus::detail::format_double(c.ref_y).c_str(),
                 tactus::detail::format_double(c.cur_x).c_str(),
                 tactus::detail::format_double(c.cur_y).c_str(),
                 tactus::detail::format_double(c.dx).c_str(),
                 tactus::detail::format_double(c.dy).c_str());
  if (std::fclose(fp) != 0) throw InputError("write_motion_csv: write failed");
}

}  // namespace tactus::markers
