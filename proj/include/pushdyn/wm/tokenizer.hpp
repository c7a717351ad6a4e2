#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "pushdyn/cloud.hpp"
#include "pushdyn/sampling.hpp"
#include "pushdyn/wm/config.hpp"

namespace pushdyn::wm {

/// Per-role patch decomposition of one cloud. Geometry stays in raw units;
/// normalization happens inside the model. Patch membership may overlap and
/// need not cover every point; `pair_*` carries the final point-to-patch
/// assignment used by the unpatchify step, where uncovered points are
/// attached to the nearest patch center of their own role.
struct TokenBatch {
  Eigen::MatrixX3d centers;                     // P x 3
  std::vector<std::vector<int>> member_idx;     // P lists of k cloud indices
  std::vector<PointLabel> provenance;           // per patch
  Eigen::Matrix<double, Eigen::Dynamic, 7> member_feats;  // (P*k) x 7, positions center-relative
  std::vector<int> pair_point;                  // assignment pairs for unpatchify
  std::vector<int> pair_patch;
  std::vector<Eigen::Vector3d> pair_offset;     // point minus patch center, raw units
  int n_points = 0;

  int patches() const { return static_cast<int>(centers.rows()); }
};

inline const char* label_name(PointLabel l) {
  switch (l) {
    case PointLabel::Target: return "target";
    case PointLabel::Obstacle: return "obstacle";
    default: return "end_effector";
  }
}

/// Semantic patching: FPS centers and kNN membership are computed per role,
/// so no patch ever mixes points from different roles.
inline TokenBatch tokenize(const PhysPointCloud& cloud, const WMConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  cloud.validate();
  TokenBatch out;
  out.n_points = cloud.size();
  const int P = cfg.total_patches();
  out.centers.resize(P, 3);
  out.member_feats.resize(static_cast<Eigen::Index>(P) * cfg.k, 7);
  out.provenance.reserve(static_cast<std::size_t>(P));

  struct RolePlan {
    PointLabel label;
    int patches;
  };
  const RolePlan plan[3] = {{PointLabel::Target, cfg.patches_target},
                            {PointLabel::Obstacle, cfg.patches_obstacle},
                            {PointLabel::EndEffector, cfg.patches_ee}};

  std::vector<int> point_patch_count(static_cast<std::size_t>(cloud.size()), 0);
  int patch_out = 0;
  for (int r = 0; r < 3; ++r) {
    const auto role_idx = cloud.indices_with_label(plan[r].label);
    const int need = std::max(plan[r].patches, cfg.k);
    if (static_cast<int>(role_idx.size()) < need)
      throw std::invalid_argument(std::string("tokenize: role '") + label_name(plan[r].label) +
                                  "' has " + std::to_string(role_idx.size()) + " points, needs >= " +
                                  std::to_string(need) + " (patches " +
                                  std::to_string(plan[r].patches) + ", k " + std::to_string(cfg.k) +
                                  ")");
    PhysPointCloud role_cloud = cloud.subset(role_idx);
    const auto centers_local =
        farthest_point_sample(role_cloud, plan[r].patches, derive_seed(seed, 0x107eu, static_cast<std::uint64_t>(r)));
    const auto members_local = knn_gather(role_cloud, centers_local, cfg.k);

    for (std::size_t c = 0; c < centers_local.size(); ++c) {
      const int p = patch_out++;
      const Eigen::RowVector3d center = role_cloud.positions().row(centers_local[c]);
      out.centers.row(p) = center;
      out.provenance.push_back(plan[r].label);
      std::vector<int> global(static_cast<std::size_t>(cfg.k));
      for (int m = 0; m < cfg.k; ++m) {
        const int gi = role_idx[static_cast<std::size_t>(members_local[c][static_cast<std::size_t>(m)])];
        global[static_cast<std::size_t>(m)] = gi;
        Eigen::Matrix<double, 1, 7> f = cloud.feats.row(gi);
        f.leftCols<3>() -= center;  // positions relative to the patch center
        out.member_feats.row(static_cast<Eigen::Index>(p) * cfg.k + m) = f;
        out.pair_point.push_back(gi);
        out.pair_patch.push_back(p);
        out.pair_offset.push_back(f.leftCols<3>().transpose());
        point_patch_count[static_cast<std::size_t>(gi)] += 1;
      }
      out.member_idx.push_back(std::move(global));
    }
  }

  // points covered by no patch attach to the nearest same-role patch center
  for (int i = 0; i < cloud.size(); ++i) {
    if (point_patch_count[static_cast<std::size_t>(i)] > 0) continue;
    const PointLabel role = cloud.labels[static_cast<std::size_t>(i)];
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (int p = 0; p < P; ++p) {
      if (out.provenance[static_cast<std::size_t>(p)] != role) continue;
      const double d = (out.centers.row(p) - cloud.positions().row(i)).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = p;
      }
    }
    out.pair_point.push_back(i);
    out.pair_patch.push_back(best);
    out.pair_offset.push_back(
        (cloud.positions().row(i) - out.centers.row(best)).transpose());
  }
  return out;
}

}  // namespace pushdyn::wm
