#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "pushdyn/cloud.hpp"
#include "pushdyn/polygon.hpp"
#include "pushdyn/rng.hpp"

namespace pushdyn {

/// Uniformly samples `count` surface points of a planar body (boundary and
/// interior at z = 0) and spreads `total_mass` evenly across them.
/// count == 1 places the single point at the centroid.
inline PhysPointCloud sample_body_points(const ConvexPolygon& poly, int count, double total_mass,
                                         std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("sample_body_points: count must be positive");
  if (!(poly.area() > 0.0)) throw std::invalid_argument("sample_body_points: degenerate polygon");

  PhysPointCloud out(count);
  if (count == 1) {
    out.positions().row(0) << poly.centroid().x(), poly.centroid().y(), 0.0;
    out.masses().setConstant(total_mass);
    return out;
  }

  Pcg32 rng(seed);
  const int n_boundary = count / 2;

  // boundary: uniform by arc length
  std::vector<double> cum(static_cast<std::size_t>(poly.count()) + 1, 0.0);
  for (int i = 0; i < poly.count(); ++i)
    cum[static_cast<std::size_t>(i) + 1] =
        cum[static_cast<std::size_t>(i)] + (poly.vertex(i + 1) - poly.vertex(i)).norm();
  const double perimeter = cum.back();
  for (int s = 0; s < n_boundary; ++s) {
    const double u = rng.next_double() * perimeter;
    const auto it = std::upper_bound(cum.begin(), cum.end(), u);
    const int e = std::max(0, static_cast<int>(it - cum.begin()) - 1);
    const int ei = std::min(e, poly.count() - 1);
    const double t = (u - cum[static_cast<std::size_t>(ei)]) /
                     std::max(1e-300, cum[static_cast<std::size_t>(ei) + 1] - cum[static_cast<std::size_t>(ei)]);
    const Eigen::Vector2d p = poly.vertex(ei) + t * (poly.vertex(ei + 1) - poly.vertex(ei));
    out.positions().row(s) << p.x(), p.y(), 0.0;
  }

  // interior: fan triangulation, triangle picked by area, uniform inside
  const Eigen::Vector2d c = poly.centroid();
  std::vector<double> tri_cum(static_cast<std::size_t>(poly.count()) + 1, 0.0);
  for (int i = 0; i < poly.count(); ++i) {
    const double a = 0.5 * std::abs(cross2(poly.vertex(i) - c, poly.vertex(i + 1) - c));
    tri_cum[static_cast<std::size_t>(i) + 1] = tri_cum[static_cast<std::size_t>(i)] + a;
  }
  for (int s = n_boundary; s < count; ++s) {
    const double u = rng.next_double() * tri_cum.back();
    const auto it = std::upper_bound(tri_cum.begin(), tri_cum.end(), u);
    const int ti = std::min(std::max(0, static_cast<int>(it - tri_cum.begin()) - 1), poly.count() - 1);
    double r1 = std::sqrt(rng.next_double());
    double r2 = rng.next_double();
    const Eigen::Vector2d p = (1.0 - r1) * c + r1 * (1.0 - r2) * poly.vertex(ti) + r1 * r2 * poly.vertex(ti + 1);
    out.positions().row(s) << p.x(), p.y(), 0.0;
  }

  out.masses().setConstant(total_mass / count);
  return out;
}

/// Farthest point sampling over positions. The first pick is a seeded uniform
/// draw; every later pick maximizes the minimum distance to the chosen set,
/// ties broken by lowest index.
inline std::vector<int> farthest_point_sample(const PhysPointCloud& cloud, int k, std::uint64_t seed) {
  const int n = cloud.size();
  if (k < 1 || k > n) throw std::invalid_argument("farthest_point_sample: need 1 <= k <= N");
  Pcg32 rng(seed);
  std::vector<int> picks;
  picks.reserve(static_cast<std::size_t>(k));
  picks.push_back(rng.uniform_int(n));

  Eigen::VectorXd min_d2 = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity());
  const auto pos = cloud.positions();
  for (int step = 1; step < k; ++step) {
    const Eigen::RowVector3d last = pos.row(picks.back());
    for (int i = 0; i < n; ++i)
      min_d2[i] = std::min(min_d2[i], (pos.row(i) - last).squaredNorm());
    int best = -1;
    double bd = -1.0;
    for (int i = 0; i < n; ++i) {
      if (min_d2[i] > bd) {
        bd = min_d2[i];
        best = i;
      }
    }
    picks.push_back(best);
  }
  return picks;
}

/// k nearest neighbors (center included, distance 0) for every center index,
/// each list sorted by distance with ties broken by lowest index.
inline std::vector<std::vector<int>> knn_gather(const PhysPointCloud& cloud,
                                                const std::vector<int>& centers, int k) {
  const int n = cloud.size();
  if (centers.empty()) throw std::invalid_argument("knn_gather: no centers");
  if (k < 1 || k > n) throw std::invalid_argument("knn_gather: need 1 <= k <= N");
  const auto pos = cloud.positions();
  std::vector<std::vector<int>> out;
  out.reserve(centers.size());
  std::vector<std::pair<double, int>> d(static_cast<std::size_t>(n));
  for (int c : centers) {
    const Eigen::RowVector3d pc = pos.row(c);
    for (int i = 0; i < n; ++i) d[static_cast<std::size_t>(i)] = {(pos.row(i) - pc).squaredNorm(), i};
    std::partial_sort(d.begin(), d.begin() + k, d.end());
    std::vector<int> idx(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) idx[static_cast<std::size_t>(i)] = d[static_cast<std::size_t>(i)].second;
    out.push_back(std::move(idx));
  }
  return out;
}

/// Indices of the min(budget, N) points closest to `focus`, ties broken by
/// index, returned in input order.
inline std::vector<int> crop_scene_indices(const PhysPointCloud& cloud,
                                           const Eigen::Vector3d& focus, int budget) {
  if (budget < 1) throw std::invalid_argument("crop_scene: budget must be positive");
  const int n = cloud.size();
  if (n == 0) return {};
  const int keep = std::min(budget, n);
  std::vector<std::pair<double, int>> d(static_cast<std::size_t>(n));
  const auto pos = cloud.positions();
  for (int i = 0; i < n; ++i)
    d[static_cast<std::size_t>(i)] = {(pos.row(i).transpose() - focus).squaredNorm(), i};
  std::partial_sort(d.begin(), d.begin() + keep, d.end());
  std::vector<int> idx(static_cast<std::size_t>(keep));
  for (int i = 0; i < keep; ++i) idx[static_cast<std::size_t>(i)] = d[static_cast<std::size_t>(i)].second;
  std::sort(idx.begin(), idx.end());
  return idx;
}

/// Keeps the min(budget, N) points closest to `focus`. An empty input yields
/// an empty cloud; padding happens downstream.
inline PhysPointCloud crop_scene(const PhysPointCloud& cloud, const Eigen::Vector3d& focus,
                                 int budget) {
  if (cloud.size() == 0) {
    if (budget < 1) throw std::invalid_argument("crop_scene: budget must be positive");
    return PhysPointCloud();
  }
  return cloud.subset(crop_scene_indices(cloud, focus, budget));
}

}  // namespace pushdyn
