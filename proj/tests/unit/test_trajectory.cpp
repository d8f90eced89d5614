#include <doctest.h>

#include <algorithm>
#include <random>

#include "dro/trajectory.hpp"

using namespace dro;

namespace {

Ensemble small_ensemble(const gp::Dataset& data, int m = 3) {
  EnsembleConfig cfg;
  cfg.size = m;
  return init_ensemble(cfg, data);
}

gp::Dataset two_points() {
  Matrix x(2, 2);
  x << 0.1, 0.2, 0.7, 0.8;
  Vector y(2);
  y << -1.0, 2.0;
  return {x, y};
}

SimStep step(double x0, double y, double best) {
  Vector x(2);
  x << x0, 0.5;
  return {x, 0, y, best, acq::AcqKind::EI};
}

}  // namespace

TEST_CASE("returns to go") {
  const auto rtg = returns_to_go({0.5, 0.3, 0.2});
  CHECK(rtg[0] == doctest::Approx(1.0));
  CHECK(rtg[1] == doctest::Approx(0.5));
  CHECK(rtg[2] == doctest::Approx(0.2));
  CHECK(returns_to_go({0.0, 0.0}) == std::vector<double>{0.0, 0.0});
}

TEST_CASE("encoded rewards are normalized improvements") {
  const gp::Dataset data = two_points();
  const Ensemble ens = small_ensemble(data);
  RolloutResult r;
  r.initial_best = 1.0;
  r.initial_best_point = data.points.row(1).transpose();
  r.steps = {step(0.1, 1.5, 1.5), step(0.2, 1.2, 1.5), step(0.3, 2.0, 2.0)};
  RolloutResult flat = r;
  flat.steps = {step(0.1, 0.5, 1.0), step(0.2, 0.2, 1.0)};

  const TrajectorySet set = encode_buffer({r, flat}, ens, 3, 10);
  CHECK(set.normalizer == doctest::Approx(1.0));
  CHECK(set.state_dim == state_dimension(3, 2));
  const Trajectory& t = set.trajectories[0];
  CHECK(t[0].rtg == doctest::Approx(1.0));
  CHECK(t[1].rtg == doctest::Approx(0.5));
  CHECK(t[2].rtg == doctest::Approx(0.5));
  for (const auto& s : set.trajectories[1]) CHECK(s.rtg == 0.0);
  for (const auto& traj : set.trajectories) CHECK(validate_trajectory(traj));

  // States carry the running best before each step.
  CHECK(t[0].state(6) == doctest::Approx(1.0));
  CHECK(t[1].state(6) == doctest::Approx(1.5));
  CHECK(t[1].state.tail(2)(0) == doctest::Approx(0.1));
  CHECK(t[0].state(7) == doctest::Approx(0.3));
}

TEST_CASE("validator rejects shuffled trajectories") {
  const Ensemble ens = small_ensemble(two_points());
  RolloutResult r;
  r.initial_best = 0.0;
  r.initial_best_point = Vector::Zero(2);
  r.steps = {step(0.1, 0.6, 0.6), step(0.2, 0.9, 0.9), step(0.3, 1.0, 1.0)};
  Trajectory t = encode_rollout(r, ens, 1.0, 0, 5);
  CHECK(validate_trajectory(t));
  std::reverse(t.begin(), t.end());
  std::string why;
  CHECK_FALSE(validate_trajectory(t, 20, &why));
  CHECK(why.find("increases") != std::string::npos);
  CHECK_FALSE(validate_trajectory({}, 20));
}

TEST_CASE("total return stays in [0, 1]") {
  Rng rng(1);
  std::uniform_real_distribution<double> u(-1.0, 2.0);
  const Ensemble ens = small_ensemble(two_points());
  std::vector<RolloutResult> buf;
  for (int k = 0; k < 50; ++k) {
    RolloutResult r;
    r.initial_best = 0.5;
    r.initial_best_point = Vector::Zero(2);
    double best = r.initial_best;
    const int len = 1 + k % 20;
    for (int i = 0; i < len; ++i) {
      const double y = u(rng);
      best = std::max(best, y);
      r.steps.push_back(step(0.1, y, best));
    }
    buf.push_back(r);
  }
  const TrajectorySet set = encode_buffer(buf, ens, 0, 10);
  for (const auto& t : set.trajectories) {
    CHECK(t.front().rtg >= 0.0);
    CHECK(t.front().rtg <= 1.0 + 1e-12);
    CHECK(validate_trajectory(t));
    for (std::size_t i = 0; i + 1 < t.size(); ++i) CHECK(t[i].rtg >= t[i + 1].rtg);
  }
}

TEST_CASE("live state") {
  Matrix x1(1, 2);
  x1 << 0.3, 0.4;
  Vector y1(1);
  y1 << 2.0;
  const gp::Dataset one(x1, y1);
  const Ensemble e1 = small_ensemble(one);
  const Vector s1 = live_state(e1, one, 10, 10);
  CHECK(s1.tail(2) == x1.row(0).transpose());
  CHECK(s1(7) == 1.0);

  const gp::Dataset two = two_points();
  const Ensemble e2 = small_ensemble(two);
  const Vector s2 = live_state(e2, two, 2, 10);
  CHECK(s2.tail(2) == two.points.row(1).transpose());
  CHECK(s2.size() == static_cast<Eigen::Index>(state_dimension(3, 2)));
  CHECK(s2(0) == doctest::Approx(std::log(e2.models[0].hypers().lengthscale)));
}
