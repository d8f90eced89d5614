#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/LU>

#include "dro/gp.hpp"
#include "dro/validation/oracles.hpp"

using namespace dro;
using namespace dro::gp;

namespace {

Dataset random_dataset(std::size_t n, std::size_t d, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> z(0.0, 1.0);
  Matrix x(n, d);
  Vector y(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) x(i, j) = u(rng);
    y(i) = 3.0 * std::sin(4.0 * x(i, 0)) + 0.1 * z(rng) + 2.0;
  }
  return {x, y};
}

// Dense reference for the standardized NLML.
double dense_nlml(const Dataset& data, const HyperParams& h, double jitter) {
  const Standardizer s = Standardizer::fit(data.values);
  Vector y(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) y(i) = s.forward(data.values(i));
  const auto n = static_cast<Eigen::Index>(data.size());
  Matrix k(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const double r2 = (data.points.row(i) - data.points.row(j)).squaredNorm();
      k(i, j) = h.outputscale * std::exp(-0.5 * r2 / (h.lengthscale * h.lengthscale));
    }
  k.diagonal().array() += h.noise_variance + jitter * h.outputscale;
  const Matrix inv = k.inverse();
  return 0.5 * y.dot(inv * y) + 0.5 * std::log(k.determinant()) +
         0.5 * static_cast<double>(n) * std::log(2.0 * M_PI);
}

}  // namespace

TEST_CASE("kernel examples") {
  HyperParams h{1.0, 1.0, kNoiseFloor};
  Vector a(1), b(1);
  a << 0.0;
  b << 1.0;
  CHECK(kernel_eval(a, a, h) == 1.0);
  CHECK(kernel_eval(a, b, h) == doctest::Approx(0.60653066).epsilon(1e-8));

  Vector c(2), e(2);
  c << 0.0, 0.0;
  e << 3.0, 4.0;
  HyperParams h2{5.0, 2.0, kNoiseFloor};
  CHECK(kernel_eval(c, e, h2) == doctest::Approx(2.0 * std::exp(-0.5)).epsilon(1e-12));
  CHECK(kernel_eval(e, c, h2) == kernel_eval(c, e, h2));
}

TEST_CASE("single datum interpolates at the noise floor") {
  Matrix x(1, 1);
  x << 0.5;
  Vector y(1);
  y << 7.0;
  const GpModel m = gp_fit({x, y}, {0.3, 1.0, kNoiseFloor});
  Vector q(1);
  q << 0.5;
  CHECK(m.posterior(q).mean == doctest::Approx(7.0).epsilon(1e-3));
}

TEST_CASE("duplicate points fit through jitter") {
  Matrix x(2, 1);
  x << 0.4, 0.4;
  Vector y(2);
  y << 1.0, 1.0;
  CHECK_NOTHROW(gp_fit({x, y}, {0.3, 1.0, kNoiseFloor}, 0.0));
}

TEST_CASE("posterior matches the dense oracle") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t d = 1 + trial % 5;
    const Dataset data = random_dataset(5 + 2 * trial, d, rng);
    const HyperParams h{0.2 + 0.05 * trial, 0.5 + 0.1 * trial, 1e-3};
    const GpModel m = gp_fit(data, h);
    for (int q = 0; q < 10; ++q) {
      const Vector x = q < 5 ? Vector(data.points.row(q).transpose())
                             : Vector(Vector::Random(static_cast<Eigen::Index>(d)).array().abs());
      const auto oracle = validation::dense_gp_oracle(data, h, x, m.jitter());
      REQUIRE(oracle.has_value());
      const Posterior p = m.posterior(x);
      CHECK(std::abs(p.mean - oracle->mean) < 1e-8);
      CHECK(std::abs(p.variance - oracle->variance) < 1e-8);
    }
  }
}

TEST_CASE("n=1 closed form on the standardized scale") {
  Matrix x(1, 2);
  x << 0.2, 0.7;
  Vector y(1);
  y << 3.0;
  const HyperParams h{0.5, 1.7, 0.3};
  const GpModel m = gp_fit({x, y}, h, 0.0);
  Vector q(2);
  q << 0.4, 0.6;
  const double k = kernel_eval(q, x.row(0).transpose(), h);
  const double y_std = m.standardized_values()(0);
  CHECK(m.posterior_standardized(q).mean ==
        doctest::Approx(k / (h.outputscale + h.noise_variance) * y_std).epsilon(1e-12));
}

TEST_CASE("far queries revert to the prior") {
  Rng rng(3);
  const Dataset data = random_dataset(15, 2, rng);
  const GpModel m = gp_fit(data, {0.05, 1.3, kNoiseFloor});
  Vector q(2);
  q << 50.0, -50.0;
  const Posterior p = m.posterior(q);
  CHECK(p.mean == doctest::Approx(data.values.mean()).epsilon(1e-9));
  const double sc = m.standardizer().scale;
  CHECK(p.variance == doctest::Approx(1.3 * sc * sc).epsilon(1e-9));
}

TEST_CASE("posterior variance is non-negative") {
  Rng rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int ds = 0; ds < 50; ++ds) {
    const Dataset data = random_dataset(3 + ds % 40, 2, rng);
    const GpModel m = gp_fit(data, {0.05 + 0.1 * (ds % 7), 1.0, kNoiseFloor});
    Matrix q(1000, 2);
    for (Eigen::Index i = 0; i < q.size(); ++i) q.data()[i] = u(rng);
    Vector mean, sd;
    m.posterior_standardized(q, mean, sd);
    CHECK(sd.minCoeff() >= 0.0);
  }
}

TEST_CASE("affine transform of y transforms the posterior") {
  Rng rng(8);
  const Dataset data = random_dataset(12, 2, rng);
  const double a = -2.5, b = 4.0;
  const Dataset scaled(data.points, (a * data.values.array() + b).matrix());
  const HyperParams h{0.3, 1.0, 1e-3};
  const GpModel m1 = gp_fit(data, h), m2 = gp_fit(scaled, h);
  Vector q(2);
  q << 0.31, 0.77;
  const Posterior p1 = m1.posterior(q), p2 = m2.posterior(q);
  CHECK(std::abs(p2.mean - (a * p1.mean + b)) < 1e-8);
  CHECK(std::abs(std::sqrt(p2.variance) - std::abs(a) * std::sqrt(p1.variance)) < 1e-8);
}

TEST_CASE("predictive sampling") {
  Matrix x(1, 1);
  x << 0.5;
  Vector y(1);
  y << 3.0;
  const GpModel m = gp_fit({x, y}, {0.3, 1.0, kNoiseFloor});
  Vector q(1);
  q << 0.5;
  Rng r1(9), r2(9);
  CHECK(m.sample_predictive(q, r1) == m.sample_predictive(q, r2));

  Rng rng(10);
  Rng drng(4);
  const Dataset data = random_dataset(8, 1, drng);
  const GpModel g = gp_fit(data, {0.2, 1.0, 0.05});
  q << 0.9;
  const Posterior p = g.posterior(q);
  const double noise_var = 0.05 * g.standardizer().scale * g.standardizer().scale;
  const int n = 100000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += g.sample_predictive(q, rng);
  const double se = std::sqrt((p.variance + noise_var) / n);
  CHECK(std::abs(sum / n - p.mean) < 3.0 * se);
}

TEST_CASE("nlml examples") {
  Matrix x(1, 1);
  x << 0.3;
  Vector y(1);
  y << 5.0;
  const HyperParams h{1.0, 1.0, 0.01};
  CHECK(nlml({x, y}, h, 0.0) == doctest::Approx(0.5 * std::log(2 * M_PI * 1.01)).epsilon(1e-12));

  Rng rng(2);
  const Dataset data = random_dataset(20, 2, rng);
  for (double l : {0.1, 0.4, 1.5}) {
    const HyperParams hh{l, 0.8, 0.02};
    CHECK(std::abs(nlml(data, hh) - dense_nlml(data, hh, kDefaultJitter)) < 1e-8);
  }
}

TEST_CASE("nlml gradient matches finite differences") {
  Rng rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    const Dataset data = random_dataset(10, 2, rng);
    const HyperParams h{0.2 + 0.1 * trial, 0.7 + 0.1 * trial, 1e-2};
    const NlmlGrad g = nlml_grad(data, h);
    const Eigen::Vector3d theta = to_unconstrained(h);
    const Vector fd = validation::finite_difference_gradient(
        [&](const Vector& t) { return nlml(data, from_unconstrained(Eigen::Vector3d(t))); },
        Vector(theta), 1e-5);
    for (int k = 0; k < 3; ++k)
      CHECK(validation::relative_error(g.grad(k), fd(k), 1e-6) < 1e-4);
  }
}

TEST_CASE("outputscale gradient is positive for huge outputscale") {
  Rng rng(6);
  const Dataset data = random_dataset(10, 2, rng);
  CHECK(nlml_grad(data, {0.3, 1e6, 1e-2}).grad(1) > 0.0);
}

TEST_CASE("hyperparameter training") {
  Rng rng(31);
  const Dataset data = random_dataset(15, 2, rng);
  const HyperParams init{0.5, 1.0, 1e-2};
  CHECK(train_hypers(data, init, {0.1, 0}) == init);
  const HyperParams trained = train_hypers(data, init, {0.1, 50});
  CHECK(nlml(data, trained) <= nlml(data, init));

  // A long run reaches a stationary point.
  const HyperParams opt = train_hypers(data, init, {0.05, 2000});
  CHECK(nlml_grad(data, opt).grad.norm() < 1e-3);
}

TEST_CASE("lengthscale recovery from a GP sample") {
  Rng rng(41);
  const std::size_t n = 200;
  Matrix x(n, 1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) x(i, 0) = u(rng);
  const HyperParams truth{0.3, 1.0, 1e-2};
  Matrix k = kernel_matrix(x, x, truth);
  k.diagonal().array() += truth.noise_variance + 1e-8;
  const Matrix l = k.llt().matrixL();
  Vector z(n);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (auto& v : z) v = nd(rng);
  const Dataset data(x, l * z);
  const HyperParams fit = train_hypers(data, {1.0, 1.0, 1e-2});
  CHECK(fit.lengthscale >= 0.15);
  CHECK(fit.lengthscale <= 0.6);
}
