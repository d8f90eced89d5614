#pragma once

#include <vector>

#include "dro/gp.hpp"

namespace dro {

struct EnsembleConfig {
  int size = 10;
  double lengthscale_min = 0.1;
  double lengthscale_max = 10.0;
  gp::TrainOptions training{};

  void validate() const;
};

/// M GP models conditioned on one shared dataset.
struct Ensemble {
  std::vector<gp::GpModel> models;
  EnsembleConfig config;

  std::size_t size() const { return models.size(); }
  const gp::Dataset& data() const { return models.front().data(); }
};

/// Geometric progression of `size` lengthscales from min to max; a single
/// model gets the geometric mean of the bounds.
std::vector<double> initial_lengthscales(const EnsembleConfig& config);

/// Fits one model per initial lengthscale with outputscale 1 and noise at the
/// floor. No hyperparameter training happens here.
Ensemble init_ensemble(const EnsembleConfig& config, const gp::Dataset& data);

/// Refits every model on `data`, warm-starting hyperparameter training from
/// each model's current values. Models are fitted concurrently.
Ensemble update_ensemble(const Ensemble& ensemble, const gp::Dataset& data);

}  // namespace dro
