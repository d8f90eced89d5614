#include <doctest.h>

#include <filesystem>
#include <random>

#include "dro/transformer.hpp"

using namespace dro;
using namespace dro::dt;

namespace {

DtConfig tiny(std::size_t state_dim = 4, std::size_t action_dim = 2) {
  DtConfig c;
  c.embed_dim = 16;
  c.n_heads = 2;
  c.n_layers = 2;
  c.dropout = 0.0;
  c.seq_len = 6;
  c.state_dim = state_dim;
  c.action_dim = action_dim;
  c.batch_size = 8;
  c.history_len = 5;
  return c;
}

Trajectory random_traj(std::size_t len, const DtConfig& c, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Trajectory t;
  double rtg = 1.0;
  for (std::size_t i = 0; i < len; ++i) {
    Vector s(static_cast<Eigen::Index>(c.state_dim)), a(static_cast<Eigen::Index>(c.action_dim));
    for (auto& v : s) v = u(rng) - 0.5;
    for (auto& v : a) v = u(rng);
    t.push_back({s, a, rtg});
    rtg *= 0.7;
  }
  return t;
}

bool same_params(const DecisionTransformer& a, const DecisionTransformer& b) {
  for (std::size_t i = 0; i < a.parameters().size(); ++i)
    if (!(a.parameters()[i].value == b.parameters()[i].value)) return false;
  return true;
}

}  // namespace

TEST_CASE("untrained model predicts the box center") {
  DtConfig c = tiny();
  c.dropout = 0.1;
  DecisionTransformer model(c, 1);
  Rng rng(1);
  const Trajectory t = random_traj(4, c, rng);
  const auto out = model.predict({&t});
  for (const Vector& a : out.front())
    for (double v : a) CHECK(v == 0.5);
}

TEST_CASE("padding does not change real positions") {
  const DtConfig c = tiny();
  DecisionTransformer model(c, 2);
  Rng rng(2);
  // Move the head away from zero so predictions depend on the inputs.
  for (auto& p : model.parameters())
    if (p.name == "head.w") p.value = nn::Tensor::randn(p.value.shape, rng, 0.5);
  const Trajectory one = random_traj(1, c, rng);
  const Trajectory longer = random_traj(5, c, rng);
  const Trajectory mid = random_traj(3, c, rng);
  const auto alone = model.predict({&one});
  const auto padded = model.predict({&one, &longer});
  const auto padded2 = model.predict({&mid, &one, &longer});
  CHECK(alone[0][0] == padded[0][0]);
  CHECK(alone[0][0] == padded2[1][0]);
  CHECK(model.predict({&mid})[0][2] == padded2[0][2]);
}

TEST_CASE("future steps do not influence earlier predictions") {
  const DtConfig c = tiny();
  DecisionTransformer model(c, 3);
  Rng rng(3);
  for (auto& p : model.parameters())
    if (p.name == "head.w") p.value = nn::Tensor::randn(p.value.shape, rng, 0.5);
  const Trajectory base = random_traj(6, c, rng);
  const auto ref = model.predict({&base})[0];
  for (std::size_t tau = 0; tau < base.size(); ++tau) {
    Trajectory changed = base;
    for (std::size_t j = tau + 1; j < changed.size(); ++j) {
      changed[j].rtg += 3.0;
      changed[j].state.array() += 1.0;
      changed[j].action.array() = 1.0 - changed[j].action.array();
    }
    // The action at tau itself is not an input to the prediction at tau.
    changed[tau].action.array() += 0.3;
    const auto out = model.predict({&changed})[0];
    for (std::size_t j = 0; j <= tau; ++j) CHECK(out[j] == ref[j]);
  }
}

TEST_CASE("memorizes a single step") {
  DtConfig c = tiny(3, 2);
  c.lr = 1e-3;
  DecisionTransformer model(c, 4);
  Rng rng(4);
  TrajectorySet set;
  set.state_dim = 3;
  set.action_dim = 2;
  Trajectory t = random_traj(1, c, rng);
  t[0].action << 0.2, 0.9;
  set.trajectories.push_back(t);
  const TrainResult r = dt_train(model, set, 4, 500);
  CHECK(r.epoch_loss.back() < 1e-4);
}

TEST_CASE("training lowers the loss and is deterministic") {
  const DtConfig c = tiny();
  Rng rng(5);
  TrajectorySet set;
  set.state_dim = c.state_dim;
  set.action_dim = c.action_dim;
  for (int i = 0; i < 100; ++i) {
    Trajectory t = random_traj(1 + i % 8, c, rng);
    // Actions follow the first state coordinate so there is something to learn.
    for (auto& s : t) s.action.setConstant(0.5 + 0.8 * s.state(0));
    set.trajectories.push_back(t);
  }
  DtConfig fast = c;
  fast.lr = 1e-3;
  DecisionTransformer a(fast, 6), b(fast, 6);
  const TrainResult ra = dt_train(a, set, 7, 100);
  const TrainResult rb = dt_train(b, set, 7, 100);
  CHECK(ra.epoch_loss.back() < ra.epoch_loss.front());
  CHECK(ra.epoch_loss == rb.epoch_loss);
  CHECK(same_params(a, b));
}

TEST_CASE("zero epochs leave the model unchanged") {
  const DtConfig c = tiny();
  DecisionTransformer model(c, 8), copy(c, 8);
  Rng rng(8);
  TrajectorySet set;
  set.state_dim = c.state_dim;
  set.action_dim = c.action_dim;
  set.trajectories.push_back(random_traj(3, c, rng));
  CHECK(dt_train(model, set, 1, 0).epoch_loss.empty());
  CHECK(same_params(model, copy));
  CHECK(model.optimizer().step == 0);
}

TEST_CASE("long trajectories are windowed for training") {
  const DtConfig c = tiny();
  DecisionTransformer model(c, 9);
  Rng rng(9);
  TrajectorySet set;
  set.state_dim = c.state_dim;
  set.action_dim = c.action_dim;
  set.trajectories.push_back(random_traj(20, c, rng));
  CHECK(dt_train(model, set, 1, 1).epoch_loss.size() == 1);

  const Trajectory too_long = random_traj(7, c, rng);
  CHECK_THROWS_AS(model.predict({&too_long}), InputError);
  CHECK_THROWS_AS(dt_train(model, TrajectorySet{}, 1, 1), PreconditionError);
}

TEST_CASE("inference stays inside the box") {
  const DtConfig c = tiny();
  DecisionTransformer model(c, 10);
  Rng rng(10);
  for (auto& p : model.parameters())
    if (p.name == "head.w") p.value = nn::Tensor::randn(p.value.shape, rng, 5.0);
  const Vector live = random_traj(1, c, rng)[0].state;
  const Vector cold = dt_infer(model, {}, live, 1.0);
  REQUIRE(cold.size() == 2);
  for (int trial = 0; trial < 20; ++trial) {
    const Trajectory hist = random_traj(static_cast<std::size_t>(trial), c, rng);
    const Vector a = dt_infer(model, hist, live, 1.0);
    CHECK(a.minCoeff() > 0.0);
    CHECK(a.maxCoeff() < 1.0);
  }
}

TEST_CASE("constant actions are recovered") {
  DtConfig c = tiny();
  c.lr = 1e-3;
  Rng rng(11);
  TrajectorySet set;
  set.state_dim = c.state_dim;
  set.action_dim = c.action_dim;
  for (int i = 0; i < 32; ++i) {
    Trajectory t = random_traj(1 + i % 6, c, rng);
    for (auto& s : t) s.action << 0.8, 0.15;
    set.trajectories.push_back(t);
  }
  DecisionTransformer model(c, 11);
  dt_train(model, set, 11, 60);
  const Vector a = dt_infer(model, set.trajectories[3], random_traj(1, c, rng)[0].state, 1.0);
  CHECK(std::abs(a(0) - 0.8) < 0.02);
  CHECK(std::abs(a(1) - 0.15) < 0.02);
}

TEST_CASE("checkpoint round trip") {
  const DtConfig c = tiny();
  DecisionTransformer model(c, 12);
  Rng rng(12);
  TrajectorySet set;
  set.state_dim = c.state_dim;
  set.action_dim = c.action_dim;
  set.trajectories.push_back(random_traj(4, c, rng));
  dt_train(model, set, 1, 3);
  const auto dir = std::filesystem::temp_directory_path() / "dro_dt_ckpt";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "model.bin").string();
  save_checkpoint(model, {10, 2, 0.5}, path);
  CheckpointMeta meta;
  DecisionTransformer loaded = load_checkpoint(path, &meta);
  CHECK(meta.ensemble_size == 10);
  CHECK(meta.normalizer == 0.5);
  CHECK(same_params(model, loaded));
  CHECK(loaded.optimizer().step == model.optimizer().step);
  const Trajectory& t = set.trajectories[0];
  CHECK(loaded.predict({&t}) == model.predict({&t}));
  std::filesystem::remove_all(dir);
}

TEST_CASE("config validation") {
  DtConfig c = tiny();
  c.embed_dim = 15;
  CHECK_THROWS_AS(c.validate(), InputError);
  c = tiny();
  c.state_dim = 0;
  CHECK_THROWS_AS(c.validate(), InputError);
  c = tiny();
  c.dropout = 1.0;
  CHECK_THROWS_AS(c.validate(), InputError);
}
