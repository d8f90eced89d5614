#include "dro/orchestrator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

#include "dro/acquisition.hpp"
#include "dro/sobol.hpp"
#include "dro/trajectory.hpp"

namespace dro {

namespace {

enum SeedTag : std::uint64_t {
  kInitDesign = 100,
  kObservation = 101,
  kPool = 102,
  kRollout = 103,
  kDtInit = 104,
  kDtTrain = 105,
  kDuplicate = 106,
  kRandomSearch = 107,
};

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

/// State shared by all methods: dataset, observation noise stream and rows.
class RunState {
 public:
  RunState(const RunConfig& cfg, const ProgressFn& progress)
      : cfg_(cfg),
        progress_(progress),
        objective_(make_objective(cfg.objective.name, cfg.objective.dimension,
                                  cfg.objective.shift, cfg.objective.noise_std)),
        obs_rng_(stable_hash({cfg.seed, kObservation})),
        dup_rng_(stable_hash({cfg.seed, kDuplicate})) {
    record_.method = cfg.method;
    record_.seed = cfg.seed;
    record_.dimension = cfg.objective.dimension;
    record_.optimum = objective_.optimum;
  }

  std::size_t dim() const { return cfg_.objective.dimension; }
  const gp::Dataset& data() const { return data_; }
  RunRecord& record() { return record_; }
  int next_iter() const { return static_cast<int>(record_.rows.size()); }

  void run_initial_design() {
    const Matrix pts = initial_design(dim(), cfg_.n_init, cfg_.seed);
    for (Eigen::Index i = 0; i < pts.rows(); ++i) observe(pts.row(i).transpose(), {});
  }

  /// Evaluates x (after clamping and the duplicate guard) and appends a row.
  IterationRow& observe(Vector x, IterationRow timing) {
    x = x.cwiseMax(0.0).cwiseMin(1.0);
    if (!data_.empty()) {
      const double nearest =
          (data_.points.rowwise() - x.transpose()).rowwise().squaredNorm().minCoeff();
      if (nearest < 1e-18) {
        std::normal_distribution<double> jitter(0.0, 1e-6);
        for (Eigen::Index k = 0; k < x.size(); ++k) x(k) += jitter(dup_rng_);
        x = x.cwiseMax(0.0).cwiseMin(1.0);
      }
    }
    IterationRow row = timing;
    row.iter = next_iter();
    row.x = x;
    row.clean = objective_.clean(x);
    row.y = objective_.noise_std > 0.0
                ? row.clean + std::normal_distribution<double>(0.0, objective_.noise_std)(obs_rng_)
                : row.clean;
    best_ = std::max(best_, row.y);
    best_clean_ = std::max(best_clean_, row.clean);
    row.best = best_;
    row.regret = objective_.optimum ? *objective_.optimum - best_clean_
                                    : std::numeric_limits<double>::quiet_NaN();
    if (data_.empty()) {
      data_ = gp::Dataset(x.transpose(), Vector::Constant(1, row.y));
    } else {
      data_ = data_.with_point(x, row.y);
    }
    record_.rows.push_back(row);
    if (progress_) progress_(record_.rows.back());
    return record_.rows.back();
  }

 private:
  const RunConfig& cfg_;
  const ProgressFn& progress_;
  Objective objective_;
  Rng obs_rng_;
  Rng dup_rng_;
  gp::Dataset data_;
  RunRecord record_;
  double best_ = -std::numeric_limits<double>::infinity();
  double best_clean_ = -std::numeric_limits<double>::infinity();
};

std::size_t pool_size(const RunConfig& cfg) {
  return cfg.pool_size ? cfg.pool_size : default_pool_size(cfg.objective.dimension);
}

template <typename Body>
RunRecord guarded(RunState& state, Body body) {
  try {
    state.run_initial_design();
    body();
  } catch (const std::exception& e) {
    state.record().completed = false;
    state.record().error = "iteration " + std::to_string(state.next_iter()) + ": " + e.what();
  }
  return std::move(state.record());
}

double max_pool_ei_original(const gp::GpModel& model, const acq::PoolMoments& moments) {
  const double inc = model.best_standardized();
  return model.standardizer().scale *
         acq::max_expected_improvement(moments, acq::full_roi(moments.size()), inc);
}

/// Real steps encoded like simulated ones: rewards are normalized improvements
/// of the real best, and each step's return-to-go is target plus the rewards
/// collected from that step on.
struct RealStep {
  Vector state;
  Vector action;
  double best_before = 0.0;
  double y = 0.0;
};

Trajectory encode_history(const std::vector<RealStep>& steps, const gp::Dataset& data,
                          double normalizer, double target) {
  const double scale = gp::Standardizer::fit(data.values).scale;
  std::vector<double> rewards;
  for (const RealStep& s : steps) {
    const double gain = std::max(0.0, s.y - s.best_before) / scale;
    rewards.push_back(normalizer > 0.0 ? gain / normalizer : 0.0);
  }
  const std::vector<double> rtg = returns_to_go(rewards);
  Trajectory traj;
  for (std::size_t i = 0; i < steps.size(); ++i)
    traj.push_back({steps[i].state, steps[i].action, target + rtg[i]});
  return traj;
}

}  // namespace

std::string_view to_string(Method m) {
  switch (m) {
    case Method::DRO: return "DRO";
    case Method::DRO_GLOBAL: return "DRO_GLOBAL";
    case Method::GPBO_LOGEI: return "GPBO_LOGEI";
    case Method::GPBO_LOGEI_ROI: return "GPBO_LOGEI_ROI";
    case Method::RANDOM: return "RANDOM";
  }
  return "?";
}

Method parse_method(std::string_view name) {
  for (Method m : {Method::DRO, Method::DRO_GLOBAL, Method::GPBO_LOGEI, Method::GPBO_LOGEI_ROI,
                   Method::RANDOM})
    if (to_string(m) == name) return m;
  throw InputError("unknown method '" + std::string(name) +
                   "' (expected DRO, DRO_GLOBAL, GPBO_LOGEI, GPBO_LOGEI_ROI or RANDOM)");
}

void RunConfig::validate() const {
  if (objective.dimension == 0) throw InputError("objective.dimension must be >= 1");
  if (!(objective.noise_std >= 0.0)) throw InputError("objective.noise_std must be >= 0");
  if (n_init < 1) throw InputError("n_init must be >= 1");
  if (budget < n_init) throw InputError("budget must be >= n_init");
  ensemble.validate();
  rollout.validate();
}

Matrix initial_design(std::size_t d, int n_init, std::uint64_t seed) {
  return sobol_points(d, static_cast<std::size_t>(n_init), stable_hash({seed, kInitDesign}), true);
}

RunRecord dro_run(const RunConfig& cfg, const ProgressFn& progress) {
  if (cfg.method != Method::DRO && cfg.method != Method::DRO_GLOBAL)
    throw PreconditionError("dro_run requires method DRO or DRO_GLOBAL");
  cfg.validate();
  RunState state(cfg, progress);
  return guarded(state, [&] {
    const std::size_t d = state.dim();
    RolloutConfig rcfg = cfg.rollout;
    rcfg.use_roi = cfg.method == Method::DRO;
    dt::DtConfig dcfg = cfg.dt;
    dcfg.action_dim = d;
    dcfg.state_dim = state_dimension(static_cast<std::size_t>(cfg.ensemble.size), d);
    const std::uint64_t dt_seed = stable_hash({cfg.seed, kDtInit});
    dt::DecisionTransformer model(dcfg, dt_seed);

    if (cfg.budget == cfg.n_init) return;
    Ensemble ens = init_ensemble(cfg.ensemble, state.data());
    std::vector<RealStep> history;
    for (int t = cfg.n_init; t < cfg.budget; ++t) {
      IterationRow timing;
      IterationDiagnostics diag;
      auto start = Clock::now();
      ens = update_ensemble(ens, state.data());
      timing.fit_ms = elapsed_ms(start);

      start = Clock::now();
      const CandidatePool pool =
          make_pool(d, pool_size(cfg), stable_hash({cfg.seed, kPool, static_cast<std::uint64_t>(t)}));
      const std::vector<RolloutResult> rollouts =
          generate_buffer(ens, pool, rcfg, stable_hash({cfg.seed, kRollout}), t);
      const acq::PoolMoments moments = acq::pool_moments(ens.models.front(), pool);
      diag.max_pool_ei = max_pool_ei_original(ens.models.front(), moments);
      diag.roi_size = rcfg.use_roi ? acq::compute_roi(moments, rcfg.kappa_roi).count() : pool.size();
      diag.rollouts = rollouts.size();
      for (const RolloutResult& r : rollouts)
        diag.mean_rollout_length += static_cast<double>(r.steps.size());
      diag.mean_rollout_length /= static_cast<double>(std::max<std::size_t>(1, rollouts.size()));
      timing.rollout_ms = elapsed_ms(start);

      start = Clock::now();
      const TrajectorySet set = encode_buffer(rollouts, ens, t, cfg.budget);
      if (dcfg.reset_each_iter) model = dt::DecisionTransformer(dcfg, dt_seed);
      const dt::TrainResult trained =
          dt::dt_train(model, set, stable_hash({cfg.seed, kDtTrain, static_cast<std::uint64_t>(t)}));
      if (!trained.epoch_loss.empty()) diag.final_train_loss = trained.epoch_loss.back();
      timing.train_ms = elapsed_ms(start);

      start = Clock::now();
      const Vector live = live_state(ens, state.data(), t, cfg.budget);
      const Trajectory past = encode_history(history, state.data(), set.normalizer, dcfg.target_rtg);
      const Vector x = dt::dt_infer(model, past, live, dcfg.target_rtg);
      timing.infer_ms = elapsed_ms(start);

      const double best_before = state.data().values.maxCoeff();
      const IterationRow& row = state.observe(x, timing);
      history.push_back({live, row.x, best_before, row.y});
      state.record().diagnostics.push_back(diag);
    }
  });
}

RunRecord gpbo_logei_run(const RunConfig& cfg, const ProgressFn& progress) {
  if (cfg.method != Method::GPBO_LOGEI && cfg.method != Method::GPBO_LOGEI_ROI)
    throw PreconditionError("gpbo_logei_run requires method GPBO_LOGEI or GPBO_LOGEI_ROI");
  cfg.validate();
  RunState state(cfg, progress);
  return guarded(state, [&] {
    const std::size_t d = state.dim();
    EnsembleConfig single = cfg.ensemble;
    single.size = 1;
    gp::HyperParams hypers{initial_lengthscales(single).front(), 1.0, gp::kNoiseFloor};
    for (int t = cfg.n_init; t < cfg.budget; ++t) {
      IterationRow timing;
      IterationDiagnostics diag;
      auto start = Clock::now();
      hypers = gp::train_hypers(state.data(), hypers, cfg.ensemble.training);
      const gp::GpModel model = gp::gp_fit(state.data(), hypers);
      timing.fit_ms = elapsed_ms(start);

      start = Clock::now();
      const CandidatePool pool =
          make_pool(d, pool_size(cfg), stable_hash({cfg.seed, kPool, static_cast<std::uint64_t>(t)}));
      const acq::PoolMoments moments = acq::pool_moments(model, pool);
      const acq::Roi roi = cfg.method == Method::GPBO_LOGEI_ROI
                               ? acq::compute_roi(moments, cfg.rollout.kappa_roi)
                               : acq::full_roi(pool.size());
      acq::AcqParams params = cfg.rollout.acquisition;
      params.kind = acq::AcqKind::LOG_EI;
      params.xi = 0.0;
      params.incumbent = model.best_standardized();
      const acq::Choice choice = acq::maximize_acq(moments, pool, roi, params);
      diag.max_pool_ei = max_pool_ei_original(model, moments);
      diag.roi_size = roi.count();
      timing.infer_ms = elapsed_ms(start);

      state.observe(choice.point, timing);
      state.record().diagnostics.push_back(diag);
    }
  });
}

RunRecord random_run(const RunConfig& cfg, const ProgressFn& progress) {
  if (cfg.method != Method::RANDOM) throw PreconditionError("random_run requires method RANDOM");
  cfg.validate();
  RunState state(cfg, progress);
  return guarded(state, [&] {
    Rng rng(stable_hash({cfg.seed, kRandomSearch}));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int t = cfg.n_init; t < cfg.budget; ++t) {
      Vector x(static_cast<Eigen::Index>(state.dim()));
      for (Eigen::Index k = 0; k < x.size(); ++k) x(k) = unit(rng);
      state.observe(x, {});
    }
  });
}

RunRecord run_method(const RunConfig& cfg, const ProgressFn& progress) {
  switch (cfg.method) {
    case Method::DRO:
    case Method::DRO_GLOBAL: return dro_run(cfg, progress);
    case Method::GPBO_LOGEI:
    case Method::GPBO_LOGEI_ROI: return gpbo_logei_run(cfg, progress);
    case Method::RANDOM: return random_run(cfg, progress);
  }
  throw InputError("unknown method");
}

void write_run_csv(std::ostream& out, const RunRecord& record, bool include_timing) {
  out << "iter";
  for (std::size_t k = 0; k < record.dimension; ++k) out << ",x_" << k;
  out << ",y,best,regret,phase_fit_ms,phase_rollout_ms,phase_train_ms,phase_infer_ms\n";
  const auto old_flags = out.flags();
  const auto old_precision = out.precision();
  out << std::setprecision(12);
  for (const IterationRow& r : record.rows) {
    out << r.iter;
    for (Eigen::Index k = 0; k < r.x.size(); ++k) out << ',' << r.x(k);
    out << ',' << r.y << ',' << r.best << ',';
    if (!std::isnan(r.regret)) out << r.regret;
    if (include_timing) {
      out << std::fixed << std::setprecision(3) << ',' << r.fit_ms << ',' << r.rollout_ms << ','
          << r.train_ms << ',' << r.infer_ms;
      out.flags(old_flags);
      out << std::setprecision(12);
    } else {
      out << ",0,0,0,0";
    }
    out << '\n';
  }
  out.flags(old_flags);
  out.precision(old_precision);
}

std::string run_csv_name(Method m, std::uint64_t seed) {
  return std::string(to_string(m)) + "_seed" + std::to_string(seed) + ".csv";
}

}  // namespace dro
