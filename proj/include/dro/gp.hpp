#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "dro/common.hpp"

namespace dro::gp {

/// Lower bound on the likelihood noise variance (standardized output units).
inline constexpr double kNoiseFloor = 1e-4;
/// Diagonal jitter relative to the outputscale, before escalation.
inline constexpr double kDefaultJitter = 1e-6;
inline constexpr int kJitterRetries = 3;

/// Isotropic RBF hyperparameters. All three live on the standardized output
/// scale of the dataset the model is fitted to.
struct HyperParams {
  double lengthscale = 1.0;
  double outputscale = 1.0;
  double noise_variance = kNoiseFloor;

  void validate() const;
  bool operator==(const HyperParams&) const = default;
};

/// Observations with inputs in the unit box. One row of `points` per datum.
struct Dataset {
  Matrix points;
  Vector values;

  Dataset() = default;
  Dataset(Matrix pts, Vector vals);

  std::size_t size() const { return static_cast<std::size_t>(values.size()); }
  std::size_t dimension() const { return static_cast<std::size_t>(points.cols()); }
  bool empty() const { return values.size() == 0; }

  Dataset with_point(const Vector& x, double y) const;
  void validate() const;
};

/// Affine map between raw observations and zero-mean unit-variance values.
struct Standardizer {
  double mean = 0.0;
  double scale = 1.0;

  /// Sample mean and unbiased standard deviation; scale falls back to 1 when
  /// fewer than two values or a (numerically) constant sample.
  static Standardizer fit(const Vector& y);
  double forward(double y) const { return (y - mean) / scale; }
  double inverse(double z) const { return mean + scale * z; }
};

struct Posterior {
  double mean = 0.0;
  double variance = 0.0;
};

/// RBF kernel: outputscale * exp(-|a-b|^2 / (2 lengthscale^2)).
double kernel_eval(const Vector& a, const Vector& b, const HyperParams& h);

/// Cross-kernel matrix with rows indexing `a` and columns indexing `b`.
Matrix kernel_matrix(const Matrix& a, const Matrix& b, const HyperParams& h);

/// Exact GP regression model. Immutable once fitted.
class GpModel {
 public:
  /// Standardizes the values, factorizes K + (noise + jitter*outputscale) I and
  /// caches alpha. Escalates the jitter x10 up to kJitterRetries times.
  static GpModel fit(const Dataset& data, const HyperParams& hypers,
                     double jitter = kDefaultJitter);

  /// Posterior of the latent function in original output units.
  Posterior posterior(const Vector& x) const;
  /// Posterior of the latent function on the model's standardized scale.
  Posterior posterior_standardized(const Vector& x) const;
  /// Batched standardized posterior over the rows of `x`; writes the mean and
  /// the (clamped, non-negative) standard deviation.
  void posterior_standardized(const Matrix& x, Vector& mean, Vector& stddev) const;

  /// Draw from the posterior predictive (latent + noise), original units.
  double sample_predictive(const Vector& x, Rng& rng) const;
  /// Same draw on the standardized scale.
  double sample_predictive_standardized(const Vector& x, Rng& rng) const;

  /// Adds one observation (given on the standardized scale) and refactorizes
  /// with hyperparameters and standardization frozen.
  GpModel condition_on_standardized(const Vector& x, double y_standardized) const;

  const HyperParams& hypers() const { return hypers_; }
  const Dataset& data() const { return data_; }
  const Standardizer& standardizer() const { return standardizer_; }
  const Vector& standardized_values() const { return y_; }
  const Matrix& chol() const { return chol_; }
  const Vector& alpha() const { return alpha_; }
  /// Relative jitter that made the factorization succeed.
  double jitter() const { return jitter_; }
  std::size_t dimension() const { return data_.dimension(); }

  /// Largest standardized training value and its row index.
  double best_standardized(Eigen::Index* row = nullptr) const;

 private:
  GpModel() = default;
  void factorize(double jitter);

  HyperParams hypers_;
  Dataset data_;
  Standardizer standardizer_;
  Vector y_;
  Matrix chol_;
  Vector alpha_;
  double jitter_ = 0.0;
};

inline GpModel gp_fit(const Dataset& data, const HyperParams& hypers,
                      double jitter = kDefaultJitter) {
  return GpModel::fit(data, hypers, jitter);
}

/// Unconstrained coordinates (log lengthscale, log outputscale,
/// log(noise - floor)). The noise shift is clamped below at kMinNoiseShift so a
/// noise exactly at the floor maps to a finite coordinate.
inline constexpr double kMinNoiseShift = 1e-6;
Eigen::Vector3d to_unconstrained(const HyperParams& h);
HyperParams from_unconstrained(const Eigen::Vector3d& theta);

/// Negative log marginal likelihood of the standardized data.
double nlml(const Dataset& data, const HyperParams& hypers, double jitter = kDefaultJitter);

struct NlmlGrad {
  double value = 0.0;
  /// d nlml / d (log lengthscale, log outputscale, log(noise - floor)).
  Eigen::Vector3d grad = Eigen::Vector3d::Zero();
};

/// NLML and its analytic gradient through the trace identity
/// 0.5 tr((K^-1 - alpha alpha^T) dK).
NlmlGrad nlml_grad(const Dataset& data, const HyperParams& hypers,
                   double jitter = kDefaultJitter);

struct TrainOptions {
  double lr = 0.1;
  int iters = 50;
};

/// Adam on the NLML in unconstrained coordinates. Returns the best iterate seen
/// (the initial point included).
HyperParams train_hypers(const Dataset& data, const HyperParams& init,
                         const TrainOptions& opts = {});

}  // namespace dro::gp
