#include "dro/ensemble.hpp"

#include <cmath>
#include <optional>

namespace dro {

void EnsembleConfig::validate() const {
  if (size < 1) throw InputError("ensemble size must be >= 1");
  if (!(lengthscale_min > 0.0 && lengthscale_min < lengthscale_max))
    throw InputError("ensemble lengthscale bounds must satisfy 0 < min < max");
  if (training.iters < 0) throw InputError("GP training iterations must be >= 0");
  if (!(training.lr > 0.0)) throw InputError("GP learning rate must be positive");
}

std::vector<double> initial_lengthscales(const EnsembleConfig& config) {
  config.validate();
  const double lo = std::log(config.lengthscale_min);
  const double hi = std::log(config.lengthscale_max);
  if (config.size == 1) return {std::exp(0.5 * (lo + hi))};
  std::vector<double> out(static_cast<std::size_t>(config.size));
  for (int m = 0; m < config.size; ++m)
    out[static_cast<std::size_t>(m)] =
        std::exp(lo + (hi - lo) * static_cast<double>(m) / static_cast<double>(config.size - 1));
  out.back() = config.lengthscale_max;
  out.front() = config.lengthscale_min;
  return out;
}

Ensemble init_ensemble(const EnsembleConfig& config, const gp::Dataset& data) {
  if (data.empty()) throw PreconditionError("init_ensemble requires a non-empty dataset");
  const auto lengthscales = initial_lengthscales(config);
  std::vector<std::optional<gp::GpModel>> fitted(lengthscales.size());
  parallel_for(lengthscales.size(), [&](std::size_t m) {
    fitted[m] = gp::GpModel::fit(data, {lengthscales[m], 1.0, gp::kNoiseFloor});
  });
  Ensemble ens;
  ens.config = config;
  for (auto& f : fitted) ens.models.push_back(std::move(*f));
  return ens;
}

Ensemble update_ensemble(const Ensemble& ensemble, const gp::Dataset& data) {
  if (data.empty()) throw PreconditionError("update_ensemble requires a non-empty dataset");
  std::vector<std::optional<gp::GpModel>> fitted(ensemble.size());
  parallel_for(ensemble.size(), [&](std::size_t m) {
    const gp::HyperParams hypers =
        gp::train_hypers(data, ensemble.models[m].hypers(), ensemble.config.training);
    fitted[m] = gp::GpModel::fit(data, hypers);
  });
  Ensemble out;
  out.config = ensemble.config;
  for (auto& f : fitted) out.models.push_back(std::move(*f));
  return out;
}

}  // namespace dro
