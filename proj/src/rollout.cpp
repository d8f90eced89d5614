#include "dro/rollout.hpp"

#include <cmath>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>

#include <json.hpp>

namespace dro {

void RolloutConfig::validate() const {
  if (!(delta >= 0.0)) throw InputError("rollout delta must be >= 0");
  if (max_len < 1) throw InputError("rollout max_len must be >= 1");
  if (rollouts_per_gp < 1) throw InputError("rollouts_per_gp must be >= 1");
  if (!(kappa_roi >= 0.0)) throw InputError("kappa_roi must be >= 0");
  if (rotation.empty()) throw InputError("acquisition rotation must not be empty");
  if (acquisition.mes_samples < 1) throw InputError("mes_samples must be >= 1");
}

std::string_view to_string(StopReason r) { return r == StopReason::BES ? "BES" : "MAX_LEN"; }

PoolPosterior::PoolPosterior(const gp::GpModel& model, const CandidatePool& pool,
                             std::size_t reserve)
    : jitter_(model.jitter()) {
  rows_ = static_cast<Eigen::Index>(model.data().size());
  const Eigen::Index capacity = rows_ + static_cast<Eigen::Index>(reserve);
  kernel_.resize(capacity, pool.points.rows());
  solved_.resize(capacity, pool.points.rows());
  kernel_.topRows(rows_) = gp::kernel_matrix(model.data().points, pool.points, model.hypers());
  solved_.topRows(rows_) =
      model.chol().triangularView<Eigen::Lower>().solve(kernel_.topRows(rows_));
  reduction_ = solved_.topRows(rows_).colwise().squaredNorm().transpose();
  refresh_moments(model);
}

void PoolPosterior::extend(const gp::GpModel& conditioned, const CandidatePool& pool) {
  const auto n = rows_;
  if (static_cast<Eigen::Index>(conditioned.data().size()) != n + 1)
    throw PreconditionError("PoolPosterior::extend expects exactly one appended observation");
  if (conditioned.jitter() != jitter_) {
    // Escalated jitter changes every pivot; start over.
    *this = PoolPosterior(conditioned, pool, static_cast<std::size_t>(kernel_.rows() - n));
    return;
  }
  if (n + 1 > kernel_.rows()) {
    kernel_.conservativeResize(n + 8, Eigen::NoChange);
    solved_.conservativeResize(n + 8, Eigen::NoChange);
  }
  const Matrix x_new = conditioned.data().points.row(n);
  kernel_.row(n) = gp::kernel_matrix(x_new, pool.points, conditioned.hypers());
  const Matrix& chol = conditioned.chol();
  const Eigen::RowVectorXd l = chol.row(n).head(n);
  solved_.row(n) = (kernel_.row(n) - l * solved_.topRows(n)) / chol(n, n);
  reduction_ += solved_.row(n).array().square().matrix().transpose();
  rows_ = n + 1;
  refresh_moments(conditioned);
}

void PoolPosterior::refresh_moments(const gp::GpModel& model) {
  moments_.mean = kernel_.topRows(rows_).transpose() * model.alpha();
  moments_.stddev = (model.hypers().outputscale - reduction_.array()).max(0.0).sqrt();
}

namespace {

acq::Roi roi_for(const acq::PoolMoments& moments, const RolloutConfig& cfg) {
  return cfg.use_roi ? acq::compute_roi(moments, cfg.kappa_roi) : acq::full_roi(moments.size());
}

}  // namespace

RolloutResult simulate_rollout(const gp::GpModel& model, const CandidatePool& pool,
                               const RolloutConfig& cfg, acq::AcqKind kind, std::uint64_t seed) {
  const PoolPosterior base(model, pool, static_cast<std::size_t>(cfg.max_len));
  return simulate_rollout(model, base, pool, cfg, kind, seed);
}

RolloutResult simulate_rollout(const gp::GpModel& model, const PoolPosterior& base,
                               const CandidatePool& pool, const RolloutConfig& cfg,
                               acq::AcqKind kind, std::uint64_t seed) {
  cfg.validate();
  if (pool.size() == 0) throw PreconditionError("simulate_rollout requires a non-empty pool");
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  RolloutResult result;
  Eigen::Index best_row = 0;
  double best = model.best_standardized(&best_row);
  Vector best_point = model.data().points.row(best_row).transpose();
  result.initial_best = best;
  result.initial_best_point = best_point;

  gp::GpModel current = model;
  PoolPosterior posterior = base;
  acq::Roi roi = roi_for(posterior.moments(), cfg);

  for (int tau = 0; tau < cfg.max_len; ++tau) {
    acq::AcqParams params = cfg.acquisition;
    params.kind = kind;
    params.incumbent = best;
    if (kind == acq::AcqKind::MES) {
      // The ROI holds the maximizer with high probability, so the max-value
      // distribution is fitted on it alone.
      params.max_values = acq::sample_max_values(posterior.moments(), best,
                                                 params.mes_samples, rng, &roi);
    }
    const acq::Choice choice = acq::maximize_acq(posterior.moments(), pool, roi, params);
    const auto idx = static_cast<Eigen::Index>(choice.index);
    const double mu = posterior.moments().mean(idx);
    const double sd = posterior.moments().stddev(idx);
    const double y = mu + std::sqrt(sd * sd + current.hypers().noise_variance) * normal(rng);

    if (cfg.record_masks) result.roi_masks.push_back(roi.mask);
    if (y > best) {
      best = y;
      best_point = choice.point;
    }
    result.steps.push_back({choice.point, choice.index, y, best, kind});

    try {
      current = current.condition_on_standardized(choice.point, y);
    } catch (const NumericalError&) {
      result.stop_reason = StopReason::MAX_LEN;
      return result;
    }
    posterior.extend(current, pool);
    roi = roi_for(posterior.moments(), cfg);
    result.final_max_ei = acq::max_expected_improvement(posterior.moments(), roi, best);
    if (result.final_max_ei < cfg.delta) {
      result.stop_reason = StopReason::BES;
      return result;
    }
  }
  result.stop_reason = StopReason::MAX_LEN;
  return result;
}

std::uint64_t rollout_seed(std::uint64_t base_seed, int real_iter, std::size_t m, std::size_t k) {
  return stable_hash({base_seed, static_cast<std::uint64_t>(real_iter), m, k});
}

std::vector<RolloutResult> generate_buffer(const Ensemble& ens, const CandidatePool& pool,
                                           const RolloutConfig& cfg, std::uint64_t base_seed,
                                           int real_iter) {
  cfg.validate();
  if (ens.models.empty()) throw PreconditionError("generate_buffer requires a fitted ensemble");
  const std::size_t big_m = ens.size();
  const auto big_k = static_cast<std::size_t>(cfg.rollouts_per_gp);

  std::vector<std::optional<PoolPosterior>> bases(big_m);
  parallel_for(big_m, [&](std::size_t m) {
    bases[m].emplace(ens.models[m], pool, static_cast<std::size_t>(cfg.max_len));
  });

  std::vector<std::optional<RolloutResult>> slots(big_m * big_k);
  std::vector<std::string> errors(big_m * big_k);
  parallel_for(big_m * big_k, [&](std::size_t i) {
    const std::size_t m = i / big_k;
    const std::size_t k = i % big_k;
    const acq::AcqKind kind = cfg.rotation[k % cfg.rotation.size()];
    try {
      RolloutResult r = simulate_rollout(ens.models[m], *bases[m], pool, cfg, kind,
                                         rollout_seed(base_seed, real_iter, m, k));
      r.gp_index = m;
      r.rollout_index = k;
      if (r.steps.empty()) throw NumericalError("rollout produced no steps", 0.0);
      slots[i] = std::move(r);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });

  std::vector<RolloutResult> out;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i]) {
      out.push_back(std::move(*slots[i]));
    } else {
      std::cerr << "rollout (m=" << i / big_k << ", k=" << i % big_k
                << ") failed: " << errors[i] << '\n';
    }
  }
  if (out.empty()) throw NumericalError("all rollouts failed", 0.0);
  return out;
}

void write_rollouts_jsonl(std::ostream& out, const std::vector<RolloutResult>& rollouts) {
  for (const auto& r : rollouts) {
    nlohmann::json steps = nlohmann::json::array();
    for (const auto& s : r.steps) {
      steps.push_back({{"x", std::vector<double>(s.x.data(), s.x.data() + s.x.size())},
                       {"y_sim", s.y_sim},
                       {"best_after", s.best_after},
                       {"acq_kind", std::string(acq::to_string(s.acq_kind))}});
    }
    nlohmann::json line = {{"gp_index", r.gp_index},
                           {"rollout_index", r.rollout_index},
                           {"steps", std::move(steps)},
                           {"stop_reason", std::string(to_string(r.stop_reason))}};
    out << line.dump() << '\n';
  }
}

}  // namespace dro
