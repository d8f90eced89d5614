#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dro/ensemble.hpp"
#include "dro/objective.hpp"
#include "dro/rollout.hpp"
#include "dro/transformer.hpp"

namespace dro {

enum class Method { DRO, DRO_GLOBAL, GPBO_LOGEI, GPBO_LOGEI_ROI, RANDOM };

std::string_view to_string(Method m);
Method parse_method(std::string_view name);

struct ObjectiveConfig {
  std::string name = "ackley";
  std::size_t dimension = 2;
  double shift = 0.0;
  double noise_std = 0.1;
};

struct RunConfig {
  ObjectiveConfig objective;
  /// Total evaluations, initial design included.
  int budget = 50;
  int n_init = 5;
  Method method = Method::DRO;
  std::uint64_t seed = 0;
  /// Candidates per iteration; 0 selects default_pool_size(d).
  std::size_t pool_size = 0;
  /// Write measured phase times instead of zeros (makes CSVs run-dependent).
  bool record_timing = false;
  EnsembleConfig ensemble;
  RolloutConfig rollout;
  /// state_dim and action_dim are derived from the ensemble size and dimension.
  dt::DtConfig dt;

  void validate() const;
};

struct IterationRow {
  int iter = 0;
  Vector x;
  double y = 0.0;
  double clean = 0.0;
  double best = 0.0;
  /// NaN when the objective's optimum is unknown.
  double regret = 0.0;
  double fit_ms = 0.0;
  double rollout_ms = 0.0;
  double train_ms = 0.0;
  double infer_ms = 0.0;
};

/// Per model-based iteration, aligned with rows[n_init + i].
struct IterationDiagnostics {
  /// max over the pool of EI (xi = 0) in original output units, first model.
  double max_pool_ei = 0.0;
  double mean_rollout_length = 0.0;
  std::size_t rollouts = 0;
  std::size_t roi_size = 0;
  double final_train_loss = 0.0;
};

struct RunRecord {
  Method method = Method::DRO;
  std::uint64_t seed = 0;
  std::size_t dimension = 0;
  std::optional<double> optimum;
  std::vector<IterationRow> rows;
  std::vector<IterationDiagnostics> diagnostics;
  bool completed = true;
  std::string error;

  double final_best() const { return rows.empty() ? 0.0 : rows.back().best; }
};

using ProgressFn = std::function<void(const IterationRow&)>;

/// Dispatches on cfg.method.
RunRecord run_method(const RunConfig& cfg, const ProgressFn& progress = {});
RunRecord dro_run(const RunConfig& cfg, const ProgressFn& progress = {});
RunRecord gpbo_logei_run(const RunConfig& cfg, const ProgressFn& progress = {});
RunRecord random_run(const RunConfig& cfg, const ProgressFn& progress = {});

/// Shared initial design: scrambled Sobol points keyed by the seed.
Matrix initial_design(std::size_t d, int n_init, std::uint64_t seed);

/// Header `iter,x_0..x_{d-1},y,best,regret,phase_fit_ms,...,phase_infer_ms`.
void write_run_csv(std::ostream& out, const RunRecord& record, bool include_timing);
std::string run_csv_name(Method m, std::uint64_t seed);

}  // namespace dro
