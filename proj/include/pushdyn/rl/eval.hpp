#pragma once

#include "pushdyn/rl/bundle.hpp"

namespace pushdyn::rl {

struct EvalOptions {
  sim::SimConfig sim;
  int episode_cap = 300;
  int goals_per_scene = 1;  // how many goal candidates per scene to evaluate
  int workers = 1;          // episodes are independent; striped across threads
  std::uint64_t seed = 0;
};

struct TrackReport {
  gen::Difficulty difficulty = gen::Difficulty::Sparse;
  int scenes = 0;
  int episodes = 0;
  double success_rate_pct = 0;
  double mean_offset_cm = 0;
  double mean_steps = 0;
};

struct EvalReport {
  std::vector<TrackReport> tracks;
};

/// Deterministic evaluation (action = clipped mean) over task instances of a
/// single track. Episodes terminate on success, any object drop, or the cap.
TrackReport evaluate_track(const PolicyBundle& bundle, const std::vector<gen::TaskInstance>& tasks,
                           gen::Difficulty difficulty, const EvalOptions& opt);

std::string report_to_json(const EvalReport& report);

}  // namespace pushdyn::rl
