#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include <Eigen/Cholesky>

#include "dro/ensemble.hpp"

using namespace dro;

namespace {

gp::Dataset sample_gp_1d(std::size_t n, double lengthscale, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> nd(0.0, 1.0);
  Matrix x(n, 1);
  for (std::size_t i = 0; i < n; ++i) x(i, 0) = u(rng);
  const gp::HyperParams h{lengthscale, 1.0, 1e-2};
  Matrix k = gp::kernel_matrix(x, x, h);
  k.diagonal().array() += h.noise_variance + 1e-8;
  const Matrix l = k.llt().matrixL();
  Vector z(n);
  for (auto& v : z) v = nd(rng);
  return {x, l * z};
}

}  // namespace

TEST_CASE("initial lengthscale grid") {
  EnsembleConfig one;
  one.size = 1;
  const auto single = initial_lengthscales(one);
  REQUIRE(single.size() == 1);
  CHECK(single[0] == doctest::Approx(1.0).epsilon(1e-12));

  const auto ls = initial_lengthscales(EnsembleConfig{});
  REQUIRE(ls.size() == 10);
  CHECK(ls.front() == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(ls.back() == doctest::Approx(10.0).epsilon(1e-12));
  const double ratio = std::pow(100.0, 1.0 / 9.0);
  for (std::size_t i = 1; i < ls.size(); ++i)
    CHECK(ls[i] / ls[i - 1] == doctest::Approx(ratio).epsilon(1e-12));
}

TEST_CASE("init is deterministic and diverse") {
  Rng rng(1);
  const gp::Dataset data = sample_gp_1d(12, 0.3, rng);
  const Ensemble a = init_ensemble(EnsembleConfig{}, data);
  const Ensemble b = init_ensemble(EnsembleConfig{}, data);
  std::set<double> seen;
  for (std::size_t m = 0; m < a.size(); ++m) {
    CHECK(a.models[m].hypers() == b.models[m].hypers());
    CHECK(a.models[m].alpha() == b.models[m].alpha());
    seen.insert(a.models[m].hypers().lengthscale);
  }
  CHECK(seen.size() == a.size());
}

TEST_CASE("update keeps the dataset shared") {
  Rng rng(2);
  const gp::Dataset data = sample_gp_1d(10, 0.3, rng);
  EnsembleConfig cfg;
  cfg.training.iters = 0;
  const Ensemble e0 = init_ensemble(cfg, data);
  const Ensemble same = update_ensemble(e0, data);
  for (std::size_t m = 0; m < e0.size(); ++m)
    CHECK(same.models[m].hypers() == e0.models[m].hypers());

  Vector x(1);
  x << 0.42;
  const Ensemble grown = update_ensemble(e0, data.with_point(x, 0.1));
  for (const auto& model : grown.models) CHECK(model.data().size() == 11);
}

TEST_CASE("repeated updates recover a short lengthscale") {
  Rng rng(3);
  const gp::Dataset full = sample_gp_1d(60, 0.3, rng);
  const auto take = [&](Eigen::Index n) {
    return gp::Dataset(full.points.topRows(n), full.values.head(n));
  };
  Ensemble ens = init_ensemble(EnsembleConfig{}, take(10));
  for (Eigen::Index n = 11; n <= 60; ++n) ens = update_ensemble(ens, take(n));
  bool any = false;
  for (const auto& m : ens.models)
    any = any || (m.hypers().lengthscale >= 0.1 && m.hypers().lengthscale <= 1.0);
  CHECK(any);
}
