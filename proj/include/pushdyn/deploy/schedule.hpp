#pragma once

#include <stdexcept>

namespace pushdyn::deploy {

/// Action-magnitude curriculum: the |dq| scale shrinks linearly from
/// `initial` to `final_scale` over `decay_iterations`, constant afterwards.
struct ActionSchedule {
  double initial = 0.1;
  double final_scale = 0.01;
  int decay_iterations = 1000;

  void validate() const {
    if (final_scale > initial) throw std::invalid_argument("schedule: final scale above initial");
    if (decay_iterations < 1) throw std::invalid_argument("schedule: horizon must be positive");
  }
};

inline double scheduled_scale(int iteration, const ActionSchedule& s) {
  if (iteration < 0) throw std::invalid_argument("scheduled_scale: negative iteration");
  if (iteration >= s.decay_iterations) return s.final_scale;
  const double t = static_cast<double>(iteration) / static_cast<double>(s.decay_iterations);
  return s.initial + (s.final_scale - s.initial) * t;
}

}  // namespace pushdyn::deploy
