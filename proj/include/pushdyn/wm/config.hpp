#pragma once

#include <stdexcept>
#include <string>

namespace pushdyn::wm {

/// World-model architecture and loss weights. The desk preset keeps the
/// full-scale layout (per-role patch split, kNN patching, ViT trunk) at a
/// size a CPU can train.
struct WMConfig {
  int patches_target = 4;
  int patches_obstacle = 4;
  int patches_ee = 2;
  int k = 16;          // neighbors per patch
  int dim = 48;        // token width
  int blocks = 2;
  int heads = 4;
  double dt = 0.1;     // prediction horizon, seconds
  double lambda_pos = 1.0;
  double lambda_vel = 1.0;
  double lambda_var = 100.0;
  bool var_matches_std = false;  // alternate dispersion term: match std instead of variance

  int total_patches() const { return patches_target + patches_obstacle + patches_ee; }

  void validate() const {
    if (patches_target < 1 || patches_obstacle < 1 || patches_ee < 1)
      throw std::invalid_argument("wm config: per-role patch counts must be positive");
    if (k < 1) throw std::invalid_argument("wm config: k must be positive");
    if (dim % heads != 0) throw std::invalid_argument("wm config: dim not divisible by heads");
    if (!(dt > 0)) throw std::invalid_argument("wm config: dt must be positive");
  }

  static WMConfig desk() { return WMConfig{}; }

  static WMConfig paper() {
    WMConfig c;
    c.patches_target = 16;
    c.patches_obstacle = 16;
    c.patches_ee = 8;
    c.k = 32;
    c.dim = 128;
    c.blocks = 12;
    c.heads = 8;
    return c;
  }
};

}  // namespace pushdyn::wm
