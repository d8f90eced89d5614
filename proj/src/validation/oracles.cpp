#include "dro/validation/oracles.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/LU>

namespace dro::validation {

std::optional<gp::Posterior> dense_gp_oracle(const gp::Dataset& data, const gp::HyperParams& h,
                                             const Vector& query, double jitter) {
  const Eigen::Index n = data.points.rows();
  if (n == 0 || n > 200) return std::nullopt;

  // Standardization: sample mean, unbiased std; unit scale for n < 2 or a
  // constant sample.
  double mean = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) mean += data.values(i);
  mean /= static_cast<double>(n);
  double scale = 1.0;
  if (n >= 2) {
    double ss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) ss += (data.values(i) - mean) * (data.values(i) - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    if (sd > 1e-12 * std::max(1.0, std::abs(mean))) scale = sd;
  }

  auto k = [&](const Vector& a, const Vector& b) {
    double d2 = 0.0;
    for (Eigen::Index j = 0; j < a.size(); ++j) d2 += (a(j) - b(j)) * (a(j) - b(j));
    return h.outputscale * std::exp(-d2 / (2.0 * h.lengthscale * h.lengthscale));
  };

  Matrix kxx(n, n);
  Vector kxq(n), y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vector xi = data.points.row(i).transpose();
    for (Eigen::Index j = 0; j < n; ++j) kxx(i, j) = k(xi, data.points.row(j).transpose());
    kxx(i, i) += h.noise_variance + jitter * h.outputscale;
    kxq(i) = k(xi, query);
    y(i) = (data.values(i) - mean) / scale;
  }
  Eigen::FullPivLU<Matrix> lu(kxx);
  if (!lu.isInvertible() || lu.rcond() < 1e-14) return std::nullopt;
  const Matrix inv = lu.inverse();
  const double mu = kxq.dot(inv * y);
  const double var = std::max(0.0, k(query, query) - kxq.dot(inv * kxq));
  return gp::Posterior{mean + scale * mu, scale * scale * var};
}

double mc_acq_oracle(double mu, double sigma, double threshold, acq::AcqKind kind,
                     std::size_t n_samples, Rng& rng) {
  if (kind != acq::AcqKind::EI && kind != acq::AcqKind::PI)
    throw InputError("Monte-Carlo oracle supports EI and PI only");
  if (n_samples == 0) throw InputError("Monte-Carlo oracle needs samples");
  std::normal_distribution<double> normal(0.0, 1.0);
  // Antithetic pairs: each draw z also contributes -z.
  const std::size_t pairs = (n_samples + 1) / 2;
  double acc = 0.0;
  for (std::size_t i = 0; i < pairs; ++i) {
    const double z = normal(rng);
    for (double f : {mu + sigma * z, mu - sigma * z}) {
      if (kind == acq::AcqKind::EI)
        acc += std::max(0.0, f - threshold);
      else
        acc += f > threshold ? 1.0 : 0.0;
    }
  }
  return acc / static_cast<double>(2 * pairs);
}

double mc_acq_oracle(const gp::GpModel& model, const Vector& x, const acq::AcqParams& params,
                     std::size_t n_samples, Rng& rng) {
  const gp::Posterior p = model.posterior_standardized(x);
  return mc_acq_oracle(p.mean, std::sqrt(p.variance), params.incumbent + params.xi, params.kind,
                       n_samples, rng);
}

Vector finite_difference_gradient(const std::function<double(const Vector&)>& f, const Vector& x,
                                  double h) {
  Vector g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vector up = x, down = x;
    up(i) += h;
    down(i) -= h;
    g(i) = (f(up) - f(down)) / (2.0 * h);
  }
  return g;
}

double relative_error(double a, double b, double floor) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace dro::validation
