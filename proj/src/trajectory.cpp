#include "dro/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include <json.hpp>

namespace dro {

namespace {

double iteration_fraction(int real_iter, int total_iters) {
  if (total_iters < 1) throw InputError("total_iters must be >= 1");
  return std::clamp(static_cast<double>(real_iter) / static_cast<double>(total_iters), 0.0, 1.0);
}

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

Vector make_state(const Ensemble& ens, double best_standardized, double iteration_fraction,
                  const Vector& best_point) {
  const std::size_t m = ens.size();
  Vector s(static_cast<Eigen::Index>(state_dimension(m, static_cast<std::size_t>(best_point.size()))));
  Eigen::Index k = 0;
  for (const auto& model : ens.models) {
    s(k++) = std::log(model.hypers().lengthscale);
    s(k++) = std::log(model.hypers().outputscale);
  }
  s(k++) = best_standardized;
  s(k++) = iteration_fraction;
  s.tail(best_point.size()) = best_point;
  return s;
}

std::vector<double> returns_to_go(const std::vector<double>& rewards) {
  std::vector<double> rtg(rewards.size());
  double acc = 0.0;
  for (std::size_t i = rewards.size(); i-- > 0;) {
    acc += rewards[i];
    rtg[i] = acc;
  }
  return rtg;
}

double buffer_normalizer(const std::vector<RolloutResult>& rollouts) {
  double z = 0.0;
  for (const auto& r : rollouts) {
    if (r.steps.empty()) continue;
    z = std::max(z, r.steps.back().best_after - r.initial_best);
  }
  return z;
}

Trajectory encode_rollout(const RolloutResult& roll, const Ensemble& ens, double normalizer,
                          int real_iter, int total_iters) {
  if (roll.steps.empty()) throw PreconditionError("encode_rollout requires a non-empty rollout");
  const double frac = iteration_fraction(real_iter, total_iters);

  std::vector<double> rewards(roll.steps.size(), 0.0);
  if (normalizer > 0.0) {
    double before = roll.initial_best;
    for (std::size_t i = 0; i < roll.steps.size(); ++i) {
      rewards[i] = std::max(0.0, roll.steps[i].best_after - before) / normalizer;
      before = std::max(before, roll.steps[i].best_after);
    }
    const double total = std::accumulate(rewards.begin(), rewards.end(), 0.0);
    if (total > 1.0)
      for (auto& r : rewards) r /= total;
  }
  const std::vector<double> rtg = returns_to_go(rewards);

  Trajectory traj;
  traj.reserve(roll.steps.size());
  double best = roll.initial_best;
  Vector best_point = roll.initial_best_point;
  for (std::size_t i = 0; i < roll.steps.size(); ++i) {
    const SimStep& step = roll.steps[i];
    traj.push_back({make_state(ens, best, frac, best_point), step.x, rtg[i]});
    if (step.y_sim > best) {
      best = step.y_sim;
      best_point = step.x;
    }
  }
  return traj;
}

TrajectorySet encode_buffer(const std::vector<RolloutResult>& rollouts, const Ensemble& ens,
                            int real_iter, int total_iters) {
  TrajectorySet set;
  set.normalizer = buffer_normalizer(rollouts);
  set.action_dim = ens.data().dimension();
  set.state_dim = state_dimension(ens.size(), set.action_dim);
  for (const auto& r : rollouts)
    set.trajectories.push_back(encode_rollout(r, ens, set.normalizer, real_iter, total_iters));
  return set;
}

Vector live_state(const Ensemble& ens, const gp::Dataset& data, int real_iter, int total_iters) {
  if (data.empty()) throw PreconditionError("live_state requires observations");
  Eigen::Index row = 0;
  const double best_raw = data.values.maxCoeff(&row);
  const double best = gp::Standardizer::fit(data.values).forward(best_raw);
  return make_state(ens, best, iteration_fraction(real_iter, total_iters),
                    data.points.row(row).transpose());
}

bool validate_trajectory(const Trajectory& traj, std::size_t max_len, std::string* reason) {
  auto fail = [&](const std::string& why) {
    if (reason) *reason = why;
    return false;
  };
  if (traj.empty()) return fail("empty trajectory");
  if (traj.size() > max_len) return fail("trajectory longer than max_len");
  constexpr double tol = 1e-12;
  if (traj.front().rtg > 1.0 + tol) return fail("total return exceeds 1");
  for (std::size_t i = 0; i < traj.size(); ++i) {
    if (traj[i].rtg < 0.0) return fail("negative return-to-go at step " + std::to_string(i));
    if (i > 0 && traj[i].rtg > traj[i - 1].rtg + tol)
      return fail("return-to-go increases at step " + std::to_string(i));
  }
  return true;
}

void write_trajectories_jsonl(std::ostream& out, const std::vector<RolloutResult>& rollouts,
                              const TrajectorySet& set) {
  if (rollouts.size() != set.trajectories.size())
    throw InputError("rollout and trajectory counts differ");
  for (std::size_t t = 0; t < rollouts.size(); ++t) {
    const auto& r = rollouts[t];
    const auto& traj = set.trajectories[t];
    nlohmann::json steps = nlohmann::json::array();
    for (std::size_t i = 0; i < r.steps.size(); ++i) {
      const auto& s = r.steps[i];
      steps.push_back({{"x", to_std(s.x)},
                       {"y_sim", s.y_sim},
                       {"best_after", s.best_after},
                       {"acq_kind", std::string(acq::to_string(s.acq_kind))},
                       {"rtg", traj[i].rtg},
                       {"state", to_std(traj[i].state)}});
    }
    nlohmann::json line = {{"gp_index", r.gp_index},
                           {"rollout_index", r.rollout_index},
                           {"normalizer", set.normalizer},
                           {"steps", std::move(steps)},
                           {"stop_reason", std::string(to_string(r.stop_reason))}};
    out << line.dump() << '\n';
  }
}

}  // namespace dro
