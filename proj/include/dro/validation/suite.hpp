#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace dro::validation {

struct OracleReport {
  std::string name;
  double max_abs_err = 0.0;
  double max_rel_err = 0.0;
  int n_cases = 0;
  /// Tolerance the pass flag was judged against and whether it applies to
  /// the absolute or relative error.
  double tolerance = 0.0;
  bool relative = false;
  bool pass = false;
};

/// Posterior mean and variance against the dense oracle on random datasets
/// (n <= 50, d <= 5); absolute tolerance 1e-8.
OracleReport check_gp_posterior(std::uint64_t seed, int n_cases = 50);
/// nlml_grad against central differences; relative tolerance 1e-4.
OracleReport check_nlml_grad(std::uint64_t seed, int n_cases = 20);
/// EI and PI against Monte-Carlo at random (mu, sigma, incumbent); absolute 3e-3.
std::vector<OracleReport> check_acq_monte_carlo(std::uint64_t seed, int n_cases = 20,
                                                std::size_t n_samples = 1000000);
/// exp(LOG_EI) against EI where EI > 1e-12; relative 1e-6.
OracleReport check_log_ei(std::uint64_t seed, int n_cases = 2000);
/// Every primitive's gradient against central differences; relative 1e-3.
OracleReport check_autodiff_primitives(std::uint64_t seed);
/// Tiny transformer (embed 8, 1 layer, 1 head, seq 3, dropout 0), every
/// parameter element against central differences; relative 1e-3.
OracleReport check_transformer_grad(std::uint64_t seed);
/// Mean of inverted-dropout activations (p = 0.1) within 1% of eval mode.
OracleReport check_dropout_expectation(std::uint64_t seed, int trials = 100000);
/// Negated Ackley against a direct transliteration of the formula.
OracleReport check_ackley(std::uint64_t seed, int n_cases = 100);

/// All of the above. `quick` reduces the Monte-Carlo sample count.
std::vector<OracleReport> run_validation_suite(std::uint64_t seed, bool quick = false);

/// Header `name,max_abs_err,max_rel_err,n_cases,tolerance,kind,pass`.
void write_reports_csv(std::ostream& out, const std::vector<OracleReport>& reports);

}  // namespace dro::validation
