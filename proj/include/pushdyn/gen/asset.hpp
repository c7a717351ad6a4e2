#pragma once

#include <stdexcept>
#include <vector>

#include "pushdyn/polygon.hpp"
#include "pushdyn/rng.hpp"

namespace pushdyn::gen {

enum class SizeClass : int { Large = 0, Small = 1 };

/// Planar orientations considered valid rest poses for an asset: one angle
/// per polygon edge (the edge-aligned orientations), capped at 64.
struct StablePoseSet {
  std::vector<double> orientations;

  void validate() const {
    if (orientations.empty()) throw std::invalid_argument("stable pose set: empty");
    if (orientations.size() > 64) throw std::invalid_argument("stable pose set: more than 64 entries");
  }

  double sample(Pcg32& rng) const {
    return orientations[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(orientations.size())))];
  }

  static StablePoseSet from_polygon(const ConvexPolygon& poly) {
    StablePoseSet s;
    s.orientations = poly.edge_rest_angles();
    if (s.orientations.size() > 64) s.orientations.resize(64);
    s.validate();
    return s;
  }
};

/// Procedural asset: canonical convex polygon plus the physical-parameter
/// ranges its instances draw from.
struct AssetSpec {
  ConvexPolygon polygon;
  double height = 0.05;
  SizeClass size_class = SizeClass::Small;
  double mass_min = 0.05, mass_max = 0.3;
  double friction_min = 0.3, friction_max = 0.9;
  double restitution_min = 0.0, restitution_max = 0.4;
  double ground_mu_min = 0.25, ground_mu_max = 0.7;
  StablePoseSet stable_poses;

  void validate(double size_split) const {
    const bool large = polygon.bounding_radius() >= size_split;
    if (large != (size_class == SizeClass::Large))
      throw std::invalid_argument("asset: size class inconsistent with bounding radius");
    if (!(mass_min > 0.0 && mass_max >= mass_min))
      throw std::invalid_argument("asset: bad mass range");
    stable_poses.validate();
  }
};

struct AssetLibrary {
  std::vector<AssetSpec> large;
  std::vector<AssetSpec> small;
  double size_split = 0.10;  // bounding-radius threshold separating the classes
};

/// Random convex polygons in two size cohorts. Heavy large assets and light
/// small ones give the mass dichotomy the pushing tasks rely on.
inline AssetLibrary make_procedural_library(std::uint64_t seed, int n_large = 12, int n_small = 12) {
  AssetLibrary lib;
  Pcg32 rng(seed);
  auto build = [&](bool large) {
    AssetSpec a;
    const int verts = 4 + rng.uniform_int(5);  // 4..8
    for (;;) {
      a.polygon = large ? ConvexPolygon::make_random(rng, verts, 0.085, 0.16)
                        : ConvexPolygon::make_random(rng, verts, 0.045, 0.09);
      const bool is_large = a.polygon.bounding_radius() >= lib.size_split;
      if (is_large == large) break;
    }
    a.size_class = large ? SizeClass::Large : SizeClass::Small;
    if (large) {
      a.mass_min = 0.5;
      a.mass_max = 2.0;
    } else {
      a.mass_min = 0.05;
      a.mass_max = 0.3;
    }
    a.height = rng.uniform(0.03, 0.08);
    a.stable_poses = StablePoseSet::from_polygon(a.polygon);
    a.validate(lib.size_split);
    return a;
  };
  for (int i = 0; i < n_large; ++i) lib.large.push_back(build(true));
  for (int i = 0; i < n_small; ++i) lib.small.push_back(build(false));
  return lib;
}

}  // namespace pushdyn::gen
