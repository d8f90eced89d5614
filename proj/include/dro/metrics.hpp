#pragma once

#include <vector>

namespace dro {

struct RegretMetrics {
  /// simple[t] = optimum - max_{s<=t} f(x_s).
  std::vector<double> simple;
  /// Sum over t of optimum - f(x_t).
  double cumulative = 0.0;
};

/// `clean_values` are noiseless objective values of the queries in order.
RegretMetrics regret_metrics(const std::vector<double>& clean_values, double optimum);

/// Running maximum.
std::vector<double> best_so_far(const std::vector<double>& values);

/// Linear-interpolation quantile (q in [0, 1]) of a non-empty sample.
double quantile(std::vector<double> values, double q);
double median(std::vector<double> values);

/// Sample mean and standard error (sample std / sqrt(n)); se is NaN for n < 2.
struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};
MeanSe mean_se(const std::vector<double>& values);

}  // namespace dro
