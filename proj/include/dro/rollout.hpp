#pragma once

#include <iosfwd>
#include <vector>

#include "dro/acquisition.hpp"
#include "dro/ensemble.hpp"
#include "dro/gp.hpp"
#include "dro/sobol.hpp"

namespace dro {

struct RolloutConfig {
  /// BES threshold on the standardized scale.
  double delta = 1e-4;
  int max_len = 20;
  int rollouts_per_gp = 4;
  double kappa_roi = 6.0;
  /// false: every candidate is eligible (rollouts over the global space).
  bool use_roi = true;
  /// Keep the ROI mask used at every step (diagnostics and tests).
  bool record_masks = false;
  /// Acquisition used by rollout k is rotation[k mod size].
  std::vector<acq::AcqKind> rotation{acq::AcqKind::EI, acq::AcqKind::UCB, acq::AcqKind::PI,
                                     acq::AcqKind::MES};
  /// kappa / xi / mes_samples shared by all rollouts; kind and incumbent are set per step.
  acq::AcqParams acquisition{};

  void validate() const;
};

enum class StopReason { BES, MAX_LEN };
std::string_view to_string(StopReason r);

struct SimStep {
  Vector x;
  std::size_t pool_index = 0;
  /// Fantasy observation, standardized with the base model's transform.
  double y_sim = 0.0;
  double best_after = 0.0;
  acq::AcqKind acq_kind = acq::AcqKind::EI;
};

struct RolloutResult {
  std::vector<SimStep> steps;
  std::size_t gp_index = 0;
  std::size_t rollout_index = 0;
  StopReason stop_reason = StopReason::MAX_LEN;
  /// Incumbent (best real observation, standardized) the rollout started from.
  double initial_best = 0.0;
  Vector initial_best_point;
  /// Max EI over the final ROI, the quantity BES compares against delta.
  double final_max_ei = 0.0;
  /// Per-step masks, filled only when RolloutConfig::record_masks is set.
  std::vector<std::vector<std::uint8_t>> roi_masks;
};

/// Posterior moments over a fixed pool, extended one observation at a time.
/// Keeps K(data, pool) and L^-1 K so an appended point costs O(n N).
class PoolPosterior {
 public:
  PoolPosterior(const gp::GpModel& model, const CandidatePool& pool, std::size_t reserve = 0);

  /// `conditioned` must be the previous model with exactly one point appended.
  void extend(const gp::GpModel& conditioned, const CandidatePool& pool);
  const acq::PoolMoments& moments() const { return moments_; }

 private:
  void refresh_moments(const gp::GpModel& model);

  Eigen::Index rows_ = 0;
  double jitter_ = 0.0;
  Matrix kernel_;  // capacity x N, first rows_ in use
  Matrix solved_;  // L^-1 kernel_
  Vector reduction_;
  acq::PoolMoments moments_;
};

/// One simulated BO trajectory inside `model`'s belief. Hyperparameters stay
/// frozen; the ROI is recomputed after every fantasy update.
RolloutResult simulate_rollout(const gp::GpModel& model, const CandidatePool& pool,
                               const RolloutConfig& cfg, acq::AcqKind kind, std::uint64_t seed);

/// Same, starting from precomputed pool moments of `model`.
RolloutResult simulate_rollout(const gp::GpModel& model, const PoolPosterior& base,
                               const CandidatePool& pool, const RolloutConfig& cfg,
                               acq::AcqKind kind, std::uint64_t seed);

std::uint64_t rollout_seed(std::uint64_t base_seed, int real_iter, std::size_t m, std::size_t k);

/// M * K rollouts; (m, k) uses rotation[k mod 4] and rollout_seed(...). Failed
/// rollouts are reported on stderr and skipped; throws only if all fail.
std::vector<RolloutResult> generate_buffer(const Ensemble& ens, const CandidatePool& pool,
                                           const RolloutConfig& cfg, std::uint64_t base_seed,
                                           int real_iter);

/// One JSON object per line: gp_index, rollout_index, steps[{x, y_sim,
/// best_after, acq_kind}], stop_reason.
void write_rollouts_jsonl(std::ostream& out, const std::vector<RolloutResult>& rollouts);

}  // namespace dro
