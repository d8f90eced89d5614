#include "dro/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dro/common.hpp"

namespace dro {

RegretMetrics regret_metrics(const std::vector<double>& clean_values, double optimum) {
  RegretMetrics m;
  double best = -std::numeric_limits<double>::infinity();
  for (double v : clean_values) {
    best = std::max(best, v);
    m.simple.push_back(optimum - best);
    m.cumulative += optimum - v;
  }
  return m;
}

std::vector<double> best_so_far(const std::vector<double>& values) {
  std::vector<double> out;
  double best = -std::numeric_limits<double>::infinity();
  for (double v : values) out.push_back(best = std::max(best, v));
  return out;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw InputError("quantile of an empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw InputError("quantile level must be in [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

double median(std::vector<double> values) { return quantile(std::move(values), 0.5); }

MeanSe mean_se(const std::vector<double>& values) {
  if (values.empty()) throw InputError("mean of an empty sample");
  const double n = static_cast<double>(values.size());
  MeanSe r;
  for (double v : values) r.mean += v;
  r.mean /= n;
  if (values.size() < 2) {
    r.se = std::numeric_limits<double>::quiet_NaN();
    return r;
  }
  double ss = 0.0;
  for (double v : values) ss += (v - r.mean) * (v - r.mean);
  r.se = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  return r;
}

}  // namespace dro
