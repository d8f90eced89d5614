#pragma once

#include <functional>
#include <optional>

#include "dro/acquisition.hpp"
#include "dro/gp.hpp"

namespace dro::validation {

/// Posterior in original output units computed with an explicit matrix
/// inverse of K + (noise + jitter * outputscale) I; nullopt when that matrix is
/// numerically singular or n > 200.
std::optional<gp::Posterior> dense_gp_oracle(const gp::Dataset& data, const gp::HyperParams& h,
                                             const Vector& query, double jitter);

/// Monte-Carlo EI (E[max(0, f - threshold)]) or PI (P(f > threshold)) for
/// f ~ N(mu, sigma^2).
double mc_acq_oracle(double mu, double sigma, double threshold, acq::AcqKind kind,
                     std::size_t n_samples, Rng& rng);

/// Same at x under the model's standardized posterior with threshold
/// incumbent + xi.
double mc_acq_oracle(const gp::GpModel& model, const Vector& x, const acq::AcqParams& params,
                     std::size_t n_samples, Rng& rng);

/// Central differences of a scalar function, step h per coordinate.
Vector finite_difference_gradient(const std::function<double(const Vector&)>& f, const Vector& x,
                                  double h);

/// |a - b| / max(|a|, |b|, floor).
double relative_error(double a, double b, double floor = 1e-6);

}  // namespace dro::validation
