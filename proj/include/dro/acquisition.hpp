#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "dro/gp.hpp"
#include "dro/sobol.hpp"

namespace dro::acq {

enum class AcqKind { EI, LOG_EI, UCB, PI, MES };

std::string_view to_string(AcqKind kind);
/// Accepts the upper-case names used in configs and CLI flags.
AcqKind parse_acq_kind(std::string_view name);

/// Acquisition settings. Values are on the model's standardized scale.
struct AcqParams {
  AcqKind kind = AcqKind::EI;
  double kappa = 2.0;
  double xi = 0.01;
  int mes_samples = 10;
  double incumbent = 0.0;
  /// Gumbel max-value draws; required when kind == MES.
  std::vector<double> max_values;

  void validate() const;
};

/// Candidate mask: true where UCB >= max LCB over the pool.
struct Roi {
  std::vector<std::uint8_t> mask;
  double kappa_roi = 6.0;

  std::size_t count() const;
  bool contains(std::size_t i) const { return mask[i] != 0; }
};

// Scalar helpers ------------------------------------------------------------

double normal_pdf(double z);
double normal_cdf(double z);
/// log Phi(z), accurate deep into the lower tail.
double log_normal_cdf(double z);

/// E[max(0, f - threshold)] for f ~ N(mu, sigma^2).
double expected_improvement(double mu, double sigma, double threshold);
/// log of the same quantity, evaluated in the log domain for very negative z.
double log_expected_improvement(double mu, double sigma, double threshold);
double probability_of_improvement(double mu, double sigma, double threshold);
/// Mean over max-value draws of gamma phi(gamma) / (2 Phi(gamma)) - log Phi(gamma).
double max_value_entropy(double mu, double sigma, const std::vector<double>& max_values);

double acq_from_moments(double mu, double sigma, const AcqParams& params);
double acq_value(const gp::GpModel& model, const Vector& x, const AcqParams& params);

// Pool-level operations ------------------------------------------------------

/// Standardized posterior mean and latent standard deviation at every pool point.
struct PoolMoments {
  Vector mean;
  Vector stddev;
  std::size_t size() const { return static_cast<std::size_t>(mean.size()); }
};

PoolMoments pool_moments(const gp::GpModel& model, const CandidatePool& pool);

Roi compute_roi(const PoolMoments& moments, double kappa_roi);
Roi compute_roi(const gp::GpModel& model, const CandidatePool& pool, double kappa_roi);
/// Every candidate selected (ROI filtering disabled).
Roi full_roi(std::size_t n);

struct Choice {
  std::size_t index = 0;
  Vector point;
  double value = 0.0;
};

/// Argmax of the acquisition over masked candidates; ties go to the lowest index.
Choice maximize_acq(const PoolMoments& moments, const CandidatePool& pool, const Roi& roi,
                    const AcqParams& params);
Choice maximize_acq(const gp::GpModel& model, const CandidatePool& pool, const Roi& roi,
                    const AcqParams& params);

/// max over masked candidates of EI with xi = 0 against `incumbent`.
double max_expected_improvement(const PoolMoments& moments, const Roi& roi, double incumbent);

/// Gumbel fit of P(max f <= y) ~ prod_i Phi((y - mu_i) / sigma_i) by matching the
/// 0.25 and 0.75 quantiles. Draws are clamped to >= incumbent + 1e-6. When
/// `mask` is given only masked candidates enter the product.
std::vector<double> sample_max_values(const PoolMoments& moments, double incumbent, int count,
                                      Rng& rng, const Roi* mask = nullptr);
/// Uses the model's best standardized observation as the incumbent.
std::vector<double> sample_max_values(const gp::GpModel& model, const CandidatePool& pool,
                                      int count, Rng& rng);

}  // namespace dro::acq
