#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "dro/ensemble.hpp"
#include "dro/rollout.hpp"

namespace dro {

/// State layout: [log lengthscale_m, log outputscale_m]_{m=1..M},
/// best standardized value, iteration fraction, best point (d coordinates).
inline std::size_t state_dimension(std::size_t ensemble_size, std::size_t d) {
  return 2 * ensemble_size + 2 + d;
}

struct TrajStep {
  Vector state;
  Vector action;
  double rtg = 0.0;
};

using Trajectory = std::vector<TrajStep>;

struct TrajectorySet {
  std::vector<Trajectory> trajectories;
  /// Z: largest final-minus-initial improvement over the buffer (standardized).
  double normalizer = 0.0;
  std::size_t state_dim = 0;
  std::size_t action_dim = 0;

  bool empty() const { return trajectories.empty(); }
};

Vector make_state(const Ensemble& ens, double best_standardized, double iteration_fraction,
                  const Vector& best_point);

/// Suffix sums: R_t = r_t + R_{t+1}.
std::vector<double> returns_to_go(const std::vector<double>& rewards);

/// Z = max over rollouts of (final best - initial incumbent), never negative.
double buffer_normalizer(const std::vector<RolloutResult>& rollouts);

/// Step rewards are the normalized improvements of the running best; states
/// use the running best before each step.
Trajectory encode_rollout(const RolloutResult& roll, const Ensemble& ens, double normalizer,
                          int real_iter, int total_iters);

TrajectorySet encode_buffer(const std::vector<RolloutResult>& rollouts, const Ensemble& ens,
                            int real_iter, int total_iters);

/// State of the real optimization, laid out like the simulated states.
Vector live_state(const Ensemble& ens, const gp::Dataset& data, int real_iter, int total_iters);

/// Checks rtg >= 0, non-increasing, total <= 1 and length <= max_len.
bool validate_trajectory(const Trajectory& traj, std::size_t max_len = 20,
                         std::string* reason = nullptr);

/// Rollout lines extended with per-step "rtg" and "state" fields.
void write_trajectories_jsonl(std::ostream& out, const std::vector<RolloutResult>& rollouts,
                              const TrajectorySet& set);

}  // namespace dro
