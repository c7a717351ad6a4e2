#pragma once

#include <Eigen/Core>
#include <limits>
#include <stdexcept>

namespace pushdyn {

/// Symmetric Chamfer distance between two point sets (rows are points):
/// half the sum of the two directed mean nearest-neighbor distances.
/// Euclidean (not squared) distances; zero iff the sets coincide.
template <typename DerivedA, typename DerivedB>
double chamfer_distance(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  const int na = static_cast<int>(a.rows()), nb = static_cast<int>(b.rows());
  if (na == 0 || nb == 0) throw std::invalid_argument("chamfer_distance: empty point set");

  double sum_ab = 0.0;
  for (int i = 0; i < na; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (int j = 0; j < nb; ++j)
      best = std::min(best, (a.row(i) - b.row(j)).squaredNorm());
    sum_ab += std::sqrt(best);
  }
  double sum_ba = 0.0;
  for (int j = 0; j < nb; ++j) {
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < na; ++i)
      best = std::min(best, (a.row(i) - b.row(j)).squaredNorm());
    sum_ba += std::sqrt(best);
  }
  return 0.5 * (sum_ab / na + sum_ba / nb);
}

}  // namespace pushdyn
