#include <doctest.h>

#include <cmath>
#include <sstream>

#include "dro/metrics.hpp"
#include "dro/objective.hpp"
#include "dro/orchestrator.hpp"

using namespace dro;

namespace {

// Independent Ackley transliteration.
double ackley_ref(const std::vector<double>& x) {
  const double d = static_cast<double>(x.size());
  double sq = 0.0, cs = 0.0;
  for (double v : x) {
    sq += v * v;
    cs += std::cos(2.0 * M_PI * v);
  }
  return -20.0 * std::exp(-0.2 * std::sqrt(sq / d)) - std::exp(cs / d) + 20.0 + std::exp(1.0);
}

RunConfig small_dro(Method m = Method::DRO) {
  RunConfig cfg;
  cfg.method = m;
  cfg.budget = 8;
  cfg.pool_size = 256;
  cfg.ensemble.size = 2;
  cfg.rollout.rollouts_per_gp = 2;
  cfg.rollout.max_len = 5;
  cfg.dt.embed_dim = 8;
  cfg.dt.n_heads = 1;
  cfg.dt.n_layers = 1;
  cfg.dt.epochs = 2;
  return cfg;
}

std::string csv(const RunRecord& r) {
  std::ostringstream out;
  write_run_csv(out, r, false);
  return out.str();
}

}  // namespace

TEST_CASE("ackley examples") {
  const Objective f = make_ackley(3, 0.0, 0.0);
  const Vector center = Vector::Constant(3, 0.5);
  CHECK(std::abs(f.clean(center)) < 1e-12);
  CHECK(std::abs(make_ackley(3, 10.0, 0.0).clean(center) - 10.0) < 1e-12);
  CHECK(*make_ackley(2, 10.0).optimum == 10.0);

  // Native [1, 1, 1] corresponds to u = (1 / 32.768 + 1) / 2.
  const Vector u = Vector::Constant(3, (1.0 / kAckleyBound + 1.0) / 2.0);
  CHECK(f.clean(u) == doctest::Approx(-ackley_ref({1.0, 1.0, 1.0})).epsilon(1e-12));
  CHECK(ackley(Vector::Constant(2, 1.0)) == doctest::Approx(ackley_ref({1.0, 1.0})).epsilon(1e-14));

  CHECK_THROWS_AS(make_objective("branin", 2, 0.0, 0.0), InputError);
}

TEST_CASE("regret metrics") {
  const RegretMetrics hit = regret_metrics({-3.0, -1.0, 0.0, -2.0}, 0.0);
  CHECK(hit.simple == std::vector<double>{3.0, 1.0, 0.0, 0.0});
  CHECK(hit.cumulative == doctest::Approx(6.0));

  const RegretMetrics flat = regret_metrics(std::vector<double>(7, -0.5), 1.0);
  CHECK(flat.cumulative == doctest::Approx(7 * 1.5));

  const std::vector<double> vals{-4.0, -1.5, -2.0, -0.7, -3.0};
  const RegretMetrics r = regret_metrics(vals, 0.0);
  for (std::size_t t = 0; t < vals.size(); ++t) {
    double min_regret = 1e300;
    for (std::size_t s = 0; s <= t; ++s) min_regret = std::min(min_regret, -vals[s]);
    CHECK(r.simple[t] == min_regret);
  }
  CHECK(best_so_far({1.0, 0.0, 2.0}) == std::vector<double>{1.0, 1.0, 2.0});
}

TEST_CASE("summary statistics") {
  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
  CHECK(quantile({0.0, 10.0}, 0.25) == 2.5);
  const MeanSe ms = mean_se({1.0, 2.0, 3.0, 4.0});
  CHECK(ms.mean == 2.5);
  CHECK(ms.se == doctest::Approx(std::sqrt(5.0 / 3.0) / 2.0));
  CHECK(std::isnan(mean_se({1.0}).se));
}

TEST_CASE("budget equal to the initial design") {
  RunConfig cfg = small_dro();
  cfg.budget = cfg.n_init;
  const RunRecord r = run_method(cfg);
  CHECK(r.completed);
  REQUIRE(r.rows.size() == 5);
  const Matrix design = initial_design(2, 5, cfg.seed);
  for (int i = 0; i < 5; ++i) CHECK(r.rows[i].x == design.row(i).transpose());
  CHECK(r.diagnostics.empty());
}

TEST_CASE("runs are deterministic and monotone") {
  for (Method m : {Method::DRO, Method::GPBO_LOGEI, Method::RANDOM}) {
    RunConfig cfg = small_dro(m);
    cfg.seed = 3;
    const RunRecord a = run_method(cfg), b = run_method(cfg);
    CHECK(a.completed);
    CHECK(a.rows.size() == 8);
    CHECK(csv(a) == csv(b));
    for (std::size_t i = 1; i < a.rows.size(); ++i) {
      CHECK(a.rows[i].best >= a.rows[i - 1].best);
      CHECK(a.rows[i].regret <= a.rows[i - 1].regret);
    }
    for (const auto& row : a.rows) {
      CHECK(row.x.minCoeff() >= 0.0);
      CHECK(row.x.maxCoeff() <= 1.0);
    }
  }
}

TEST_CASE("DRO with an all-covering ROI matches DRO_GLOBAL") {
  RunConfig roi = small_dro(Method::DRO);
  roi.rollout.kappa_roi = 1e9;
  const RunConfig global = small_dro(Method::DRO_GLOBAL);
  CHECK(csv(run_method(roi)) == csv(run_method(global)));
  // With the default kappa the two methods share only the initial design.
  const RunRecord a = run_method(small_dro(Method::DRO));
  const RunRecord b = run_method(global);
  for (int i = 0; i < 5; ++i) CHECK(a.rows[i].x == b.rows[i].x);
}

TEST_CASE("DRO diagnostics") {
  const RunRecord r = run_method(small_dro());
  REQUIRE(r.diagnostics.size() == 3);
  for (const auto& d : r.diagnostics) {
    CHECK(d.rollouts == 4);
    CHECK(d.mean_rollout_length >= 1.0);
    CHECK(d.mean_rollout_length <= 5.0);
    CHECK(d.max_pool_ei >= 0.0);
  }
}

TEST_CASE("GP-BO solves a noiseless 1D quadratic") {
  RunConfig cfg;
  cfg.method = Method::GPBO_LOGEI;
  cfg.objective = {"quadratic", 1, 0.0, 0.0};
  cfg.budget = 20;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    cfg.seed = seed;
    const RunRecord r = run_method(cfg);
    // Value range of -(u - 0.3)^2 on [0, 1] is 0.49.
    CHECK(r.rows.back().regret < 0.05 * 0.49);
  }
}

TEST_CASE("random search matches the order-statistics oracle") {
  // f(u) = -(u - 0.3)^2, so the best of n uniform draws is -D^2 with D the
  // smallest |u - 0.3|. E[D^2] = integral of P(D^2 > s)^n ds.
  const int n = 6;
  auto tail = [](double t) {
    return std::max(0.0, 1.0 - std::min(t, 0.3) - std::min(t, 0.7));
  };
  double oracle = 0.0;
  const int steps = 200000;
  for (int i = 0; i < steps; ++i) {
    const double s = (i + 0.5) * 0.49 / steps;
    oracle -= std::pow(tail(std::sqrt(s)), n) * 0.49 / steps;
  }

  RunConfig cfg;
  cfg.method = Method::RANDOM;
  cfg.objective = {"quadratic", 1, 0.0, 0.0};
  cfg.n_init = 1;
  cfg.budget = n;
  std::vector<double> finals;
  for (std::uint64_t seed = 0; seed < 4000; ++seed) {
    cfg.seed = seed;
    finals.push_back(run_method(cfg).final_best());
  }
  const MeanSe ms = mean_se(finals);
  CHECK(std::abs(ms.mean - oracle) < 4.0 * ms.se);

  cfg.budget = 100;
  cfg.seed = 1;
  CHECK(run_method(cfg).final_best() > -1e-3);
}

TEST_CASE("csv layout") {
  RunConfig cfg;
  cfg.method = Method::RANDOM;
  cfg.budget = 6;
  const RunRecord r = run_method(cfg);
  const std::string text = csv(r);
  CHECK(text.rfind("iter,x_0,x_1,y,best,regret,phase_fit_ms,phase_rollout_ms,phase_train_ms,"
                   "phase_infer_ms\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 7);
  CHECK(run_csv_name(Method::DRO_GLOBAL, 4) == "DRO_GLOBAL_seed4.csv");
}

TEST_CASE("invalid run configs") {
  RunConfig cfg;
  cfg.budget = 3;
  CHECK_THROWS_AS(run_method(cfg), InputError);
  cfg = {};
  cfg.objective.dimension = 0;
  CHECK_THROWS_AS(run_method(cfg), InputError);
  CHECK_THROWS_AS(parse_method("TURBO"), InputError);
  CHECK(parse_method("DRO_GLOBAL") == Method::DRO_GLOBAL);
}
