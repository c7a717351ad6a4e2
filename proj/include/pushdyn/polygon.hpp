#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <stdexcept>
#include <vector>

#include "pushdyn/rng.hpp"
#include "pushdyn/se2.hpp"

namespace pushdyn {

/// Convex polygon in a local frame. Vertices are stored as columns,
/// counterclockwise, with the centroid at the local origin once canonicalized.
class ConvexPolygon {
 public:
  ConvexPolygon() = default;

  explicit ConvexPolygon(Eigen::Matrix2Xd verts) : v_(std::move(verts)) {
    if (v_.cols() < 3) throw std::invalid_argument("polygon: needs >= 3 vertices");
    if (signed_area() <= 0.0) throw std::invalid_argument("polygon: must be CCW with positive area");
    if (!is_convex()) throw std::invalid_argument("polygon: not convex");
  }

  int count() const { return static_cast<int>(v_.cols()); }
  const Eigen::Matrix2Xd& vertices() const { return v_; }
  Eigen::Vector2d vertex(int i) const { return v_.col(i % count()); }

  double signed_area() const {
    double a = 0.0;
    for (int i = 0; i < count(); ++i) a += cross2(v_.col(i), v_.col((i + 1) % count()));
    return 0.5 * a;
  }

  double area() const { return signed_area(); }

  Eigen::Vector2d centroid() const {
    Eigen::Vector2d c = Eigen::Vector2d::Zero();
    double a = 0.0;
    for (int i = 0; i < count(); ++i) {
      const Eigen::Vector2d p0 = v_.col(i), p1 = v_.col((i + 1) % count());
      const double w = cross2(p0, p1);
      c += w * (p0 + p1);
      a += w;
    }
    return c / (3.0 * a);
  }

  // Second polar moment about the centroid divided by area; multiply by mass
  // for the moment of inertia of a uniform lamina.
  double inertia_per_mass() const {
    const Eigen::Vector2d c = centroid();
    double num = 0.0, den = 0.0;
    for (int i = 0; i < count(); ++i) {
      const Eigen::Vector2d p0 = v_.col(i) - c, p1 = v_.col((i + 1) % count()) - c;
      const double w = cross2(p0, p1);
      num += w * (p0.squaredNorm() + p0.dot(p1) + p1.squaredNorm());
      den += w;
    }
    return num / (6.0 * den);
  }

  double bounding_radius() const {
    const Eigen::Vector2d c = centroid();
    double r = 0.0;
    for (int i = 0; i < count(); ++i) r = std::max(r, (v_.col(i) - c).norm());
    return r;
  }

  /// Returns a copy translated so the centroid sits at the origin.
  ConvexPolygon canonicalized() const {
    Eigen::Matrix2Xd w = v_.colwise() - centroid();
    return ConvexPolygon(std::move(w));
  }

  bool contains(const Eigen::Vector2d& p, double tol = 0.0) const {
    for (int i = 0; i < count(); ++i) {
      const Eigen::Vector2d e = v_.col((i + 1) % count()) - v_.col(i);
      if (cross2(e, p - v_.col(i)) < -tol) return false;
    }
    return true;
  }

  /// Closest point on the polygon (boundary or interior) to p.
  Eigen::Vector2d closest_point(const Eigen::Vector2d& p) const {
    if (contains(p)) return p;
    double best = std::numeric_limits<double>::infinity();
    Eigen::Vector2d bp = v_.col(0);
    for (int i = 0; i < count(); ++i) {
      const Eigen::Vector2d a = v_.col(i), b = v_.col((i + 1) % count());
      const Eigen::Vector2d ab = b - a;
      double t = ab.squaredNorm() > 0 ? (p - a).dot(ab) / ab.squaredNorm() : 0.0;
      t = std::clamp(t, 0.0, 1.0);
      const Eigen::Vector2d q = a + t * ab;
      const double d = (q - p).squaredNorm();
      if (d < best) {
        best = d;
        bp = q;
      }
    }
    return bp;
  }

  double distance(const Eigen::Vector2d& p) const { return (closest_point(p) - p).norm(); }

  int support(const Eigen::Vector2d& dir) const {
    int best = 0;
    double bd = v_.col(0).dot(dir);
    for (int i = 1; i < count(); ++i) {
      const double d = v_.col(i).dot(dir);
      if (d > bd) {
        bd = d;
        best = i;
      }
    }
    return best;
  }

  /// Orientations that align each edge with the +x axis; used as the planar
  /// analogue of a resting-pose set.
  std::vector<double> edge_rest_angles() const {
    std::vector<double> out;
    for (int i = 0; i < count(); ++i) {
      const Eigen::Vector2d e = v_.col((i + 1) % count()) - v_.col(i);
      out.push_back(wrap_angle(-std::atan2(e.y(), e.x())));
    }
    return out;
  }

  /// Largest k such that rotating by 2*pi/k maps the vertex set to itself.
  int symmetry_order(double tol = 1e-9) const {
    const Eigen::Vector2d c = centroid();
    const int n = count();
    for (int k = n; k >= 2; --k) {
      if (n % k != 0) continue;
      const Eigen::Rotation2Dd r(2.0 * M_PI / k);
      bool ok = true;
      for (int i = 0; i < n && ok; ++i) {
        const Eigen::Vector2d q = r * (v_.col(i) - c) + c;
        bool matched = false;
        for (int j = 0; j < n && !matched; ++j)
          if ((q - v_.col(j)).norm() < tol) matched = true;
        ok = matched;
      }
      if (ok) return k;
    }
    return 1;
  }

  static ConvexPolygon make_box(double half_w, double half_h) {
    Eigen::Matrix2Xd m(2, 4);
    m << -half_w, half_w, half_w, -half_w, -half_h, -half_h, half_h, half_h;
    return ConvexPolygon(m);
  }

  static ConvexPolygon make_regular(int n, double radius, double phase = 0.0) {
    Eigen::Matrix2Xd m(2, n);
    for (int i = 0; i < n; ++i) {
      const double a = phase + 2.0 * M_PI * i / n;
      m.col(i) << radius * std::cos(a), radius * std::sin(a);
    }
    return ConvexPolygon(m);
  }

  /// Random convex polygon: n vertices at sorted angles with radii in
  /// [r_min, r_max], regenerated until strictly convex. Centered on centroid.
  static ConvexPolygon make_random(Pcg32& rng, int n, double r_min, double r_max) {
    for (int attempt = 0; attempt < 256; ++attempt) {
      std::vector<double> ang(static_cast<std::size_t>(n));
      for (auto& a : ang) a = rng.uniform(0.0, 2.0 * M_PI);
      std::sort(ang.begin(), ang.end());
      // reject angle gaps that would make near-degenerate edges
      bool ok = true;
      for (int i = 0; i < n; ++i) {
        double gap = (i + 1 < n ? ang[i + 1] : ang[0] + 2.0 * M_PI) - ang[i];
        if (gap < 0.15 || gap > 2.8) ok = false;
      }
      if (!ok) continue;
      Eigen::Matrix2Xd m(2, n);
      for (int i = 0; i < n; ++i) {
        const double r = rng.uniform(r_min, r_max);
        m.col(i) << r * std::cos(ang[static_cast<std::size_t>(i)]),
            r * std::sin(ang[static_cast<std::size_t>(i)]);
      }
      try {
        ConvexPolygon p(m);
        return p.canonicalized();
      } catch (const std::invalid_argument&) {
        continue;
      }
    }
    // fall back to a regular polygon at mid radius
    return make_regular(n, 0.5 * (r_min + r_max));
  }

 private:
  bool is_convex() const {
    for (int i = 0; i < count(); ++i) {
      const Eigen::Vector2d a = v_.col(i), b = v_.col((i + 1) % count()),
                            c = v_.col((i + 2) % count());
      if (cross2(b - a, c - b) <= 0.0) return false;
    }
    return true;
  }

  Eigen::Matrix2Xd v_;
};

/// Exact separating-axis overlap test for two convex polygons in world frame.
inline bool polygons_overlap(const ConvexPolygon& a, const Pose2& pa, const ConvexPolygon& b,
                             const Pose2& pb, double margin = 0.0) {
  const auto axes_of = [](const ConvexPolygon& poly, const Pose2& pose, std::vector<Eigen::Vector2d>& out) {
    for (int i = 0; i < poly.count(); ++i) {
      Eigen::Vector2d e = poly.vertex(i + 1) - poly.vertex(i);
      out.push_back((pose.rot() * perp(e)).normalized());
    }
  };
  std::vector<Eigen::Vector2d> axes;
  axes_of(a, pa, axes);
  axes_of(b, pb, axes);
  for (const auto& n : axes) {
    double amin = std::numeric_limits<double>::infinity(), amax = -amin;
    double bmin = amin, bmax = -amin;
    for (int i = 0; i < a.count(); ++i) {
      const double d = n.dot(pa.apply(a.vertex(i)));
      amin = std::min(amin, d);
      amax = std::max(amax, d);
    }
    for (int i = 0; i < b.count(); ++i) {
      const double d = n.dot(pb.apply(b.vertex(i)));
      bmin = std::min(bmin, d);
      bmax = std::max(bmax, d);
    }
    if (amax + margin < bmin || bmax + margin < amin) return false;
  }
  return true;
}

}  // namespace pushdyn
