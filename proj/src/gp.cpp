#include "dro/gp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <Eigen/Cholesky>

namespace dro::gp {

namespace {

struct Factor {
  Eigen::LLT<Matrix> llt;
  double jitter = 0.0;
};

double sq_dist(const Matrix& a, Eigen::Index i, const Matrix& b, Eigen::Index j) {
  double s = 0.0;
  for (Eigen::Index k = 0; k < a.cols(); ++k) {
    const double diff = a(i, k) - b(j, k);
    s += diff * diff;
  }
  return s;
}

// Factorizes K + (noise + jitter * outputscale) I, escalating the jitter on failure.
Factor factorize_kernel(const Matrix& points, const HyperParams& h, double jitter) {
  const Matrix k = kernel_matrix(points, points, h);
  const auto n = k.rows();
  double j = jitter;
  for (int attempt = 0; attempt <= kJitterRetries; ++attempt) {
    Matrix a = k;
    a.diagonal().array() += h.noise_variance + j * h.outputscale;
    Factor f{Eigen::LLT<Matrix>(a), j};
    if (f.llt.info() == Eigen::Success) {
      const Matrix& l = f.llt.matrixLLT();
      bool ok = true;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (!(l(i, i) > 0.0) || !std::isfinite(l(i, i))) {
          ok = false;
          break;
        }
      }
      if (ok) return f;
    }
    j = (j == 0.0) ? kDefaultJitter : j * 10.0;
  }
  throw NumericalError("Cholesky factorization failed after jitter escalation (last jitter " +
                           std::to_string(j / 10.0) + ")",
                       j / 10.0);
}

double log_det_from_llt(const Eigen::LLT<Matrix>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

Vector standardize(const Vector& y, const Standardizer& s) {
  return (y.array() - s.mean) / s.scale;
}

}  // namespace

void HyperParams::validate() const {
  if (!(lengthscale > 0.0) || !std::isfinite(lengthscale))
    throw InputError("lengthscale must be positive, got " + std::to_string(lengthscale));
  if (!(outputscale > 0.0) || !std::isfinite(outputscale))
    throw InputError("outputscale must be positive, got " + std::to_string(outputscale));
  if (!(noise_variance >= kNoiseFloor) || !std::isfinite(noise_variance))
    throw InputError("noise_variance must be >= 1e-4, got " + std::to_string(noise_variance));
}

Dataset::Dataset(Matrix pts, Vector vals) : points(std::move(pts)), values(std::move(vals)) {
  validate();
}

Dataset Dataset::with_point(const Vector& x, double y) const {
  if (!empty() && static_cast<std::size_t>(x.size()) != dimension())
    throw InputError("point dimension " + std::to_string(x.size()) + " does not match dataset " +
                     std::to_string(dimension()));
  Matrix p(points.rows() + 1, x.size());
  if (points.rows() > 0) p.topRows(points.rows()) = points;
  p.row(points.rows()) = x.transpose();
  Vector v(values.size() + 1);
  v.head(values.size()) = values;
  v(values.size()) = y;
  return Dataset(std::move(p), std::move(v));
}

void Dataset::validate() const {
  if (points.rows() != values.size())
    throw InputError("dataset has " + std::to_string(points.rows()) + " points but " +
                     std::to_string(values.size()) + " values");
  for (Eigen::Index i = 0; i < points.rows(); ++i)
    for (Eigen::Index k = 0; k < points.cols(); ++k)
      if (!(points(i, k) >= 0.0 && points(i, k) <= 1.0))
        throw InputError("dataset point coordinate outside [0,1]: " +
                         std::to_string(points(i, k)));
}

Standardizer Standardizer::fit(const Vector& y) {
  Standardizer s;
  const auto n = y.size();
  if (n == 0) return s;
  s.mean = y.mean();
  if (n < 2) return s;
  const double var = (y.array() - s.mean).square().sum() / static_cast<double>(n - 1);
  const double sd = std::sqrt(var);
  if (sd > 1e-12 * std::max(1.0, std::abs(s.mean))) s.scale = sd;
  return s;
}

double kernel_eval(const Vector& a, const Vector& b, const HyperParams& h) {
  if (a.size() != b.size())
    throw InputError("kernel_eval dimension mismatch: " + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()));
  const double d2 = (a - b).squaredNorm();
  return h.outputscale * std::exp(-0.5 * d2 / (h.lengthscale * h.lengthscale));
}

Matrix kernel_matrix(const Matrix& a, const Matrix& b, const HyperParams& h) {
  if (a.cols() != b.cols())
    throw InputError("kernel_matrix dimension mismatch: " + std::to_string(a.cols()) + " vs " +
                     std::to_string(b.cols()));
  const double inv = -0.5 / (h.lengthscale * h.lengthscale);
  Matrix k(a.rows(), b.rows());
  for (Eigen::Index j = 0; j < b.rows(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      k(i, j) = h.outputscale * std::exp(inv * sq_dist(a, i, b, j));
  return k;
}

GpModel GpModel::fit(const Dataset& data, const HyperParams& hypers, double jitter) {
  if (data.empty()) throw PreconditionError("gp_fit requires a non-empty dataset");
  if (jitter < 0.0) throw InputError("jitter must be non-negative");
  hypers.validate();
  GpModel m;
  m.hypers_ = hypers;
  m.data_ = data;
  m.standardizer_ = Standardizer::fit(data.values);
  m.y_ = standardize(data.values, m.standardizer_);
  m.factorize(jitter);
  return m;
}

void GpModel::factorize(double jitter) {
  Factor f = factorize_kernel(data_.points, hypers_, jitter);
  chol_ = f.llt.matrixL();
  alpha_ = f.llt.solve(y_);
  jitter_ = f.jitter;
}

GpModel GpModel::condition_on_standardized(const Vector& x, double y_standardized) const {
  GpModel m;
  m.hypers_ = hypers_;
  m.standardizer_ = standardizer_;
  m.data_ = data_.with_point(x, standardizer_.inverse(y_standardized));
  m.y_.resize(y_.size() + 1);
  m.y_.head(y_.size()) = y_;
  m.y_(y_.size()) = y_standardized;
  m.factorize(jitter_);
  return m;
}

Posterior GpModel::posterior_standardized(const Vector& x) const {
  if (static_cast<std::size_t>(x.size()) != dimension())
    throw InputError("posterior query dimension " + std::to_string(x.size()) +
                     " does not match model dimension " + std::to_string(dimension()));
  Vector mean, sd;
  posterior_standardized(Matrix(x.transpose()), mean, sd);
  return {mean(0), sd(0) * sd(0)};
}

void GpModel::posterior_standardized(const Matrix& x, Vector& mean, Vector& stddev) const {
  if (static_cast<std::size_t>(x.cols()) != dimension())
    throw InputError("posterior query dimension " + std::to_string(x.cols()) +
                     " does not match model dimension " + std::to_string(dimension()));
  const Matrix kxs = kernel_matrix(data_.points, x, hypers_);  // n x N
  mean = kxs.transpose() * alpha_;
  const Matrix v = chol_.triangularView<Eigen::Lower>().solve(kxs);
  const Vector reduction = v.colwise().squaredNorm().transpose();
  stddev = (hypers_.outputscale - reduction.array()).max(0.0).sqrt();
}

Posterior GpModel::posterior(const Vector& x) const {
  const Posterior p = posterior_standardized(x);
  const double s = standardizer_.scale;
  return {standardizer_.inverse(p.mean), s * s * p.variance};
}

double GpModel::sample_predictive_standardized(const Vector& x, Rng& rng) const {
  const Posterior p = posterior_standardized(x);
  std::normal_distribution<double> normal(0.0, 1.0);
  return p.mean + std::sqrt(p.variance + hypers_.noise_variance) * normal(rng);
}

double GpModel::sample_predictive(const Vector& x, Rng& rng) const {
  return standardizer_.inverse(sample_predictive_standardized(x, rng));
}

double GpModel::best_standardized(Eigen::Index* row) const {
  Eigen::Index r = 0;
  const double best = y_.maxCoeff(&r);
  if (row) *row = r;
  return best;
}

Eigen::Vector3d to_unconstrained(const HyperParams& h) {
  return {std::log(h.lengthscale), std::log(h.outputscale),
          std::log(std::max(h.noise_variance - kNoiseFloor, kMinNoiseShift))};
}

HyperParams from_unconstrained(const Eigen::Vector3d& theta) {
  return {std::exp(theta(0)), std::exp(theta(1)), kNoiseFloor + std::exp(theta(2))};
}

double nlml(const Dataset& data, const HyperParams& hypers, double jitter) {
  if (data.empty()) throw PreconditionError("nlml requires a non-empty dataset");
  hypers.validate();
  const Vector y = standardize(data.values, Standardizer::fit(data.values));
  const Factor f = factorize_kernel(data.points, hypers, jitter);
  const Vector alpha = f.llt.solve(y);
  const double n = static_cast<double>(y.size());
  return 0.5 * y.dot(alpha) + 0.5 * log_det_from_llt(f.llt) +
         0.5 * n * std::log(2.0 * std::numbers::pi);
}

NlmlGrad nlml_grad(const Dataset& data, const HyperParams& hypers, double jitter) {
  if (data.empty()) throw PreconditionError("nlml_grad requires a non-empty dataset");
  hypers.validate();
  const Vector y = standardize(data.values, Standardizer::fit(data.values));
  const Factor f = factorize_kernel(data.points, hypers, jitter);
  const auto n = y.size();
  const Vector alpha = f.llt.solve(y);

  NlmlGrad out;
  out.value = 0.5 * y.dot(alpha) + 0.5 * log_det_from_llt(f.llt) +
              0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);

  // W = K^-1 - alpha alpha^T; each gradient entry is 0.5 * sum(W .* dK).
  Matrix w = f.llt.solve(Matrix::Identity(n, n));
  w.noalias() -= alpha * alpha.transpose();

  const double inv_l2 = 1.0 / (hypers.lengthscale * hypers.lengthscale);
  double g_len = 0.0;
  double g_out = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double d2 = sq_dist(data.points, i, data.points, j);
      const double k = hypers.outputscale * std::exp(-0.5 * d2 * inv_l2);
      g_len += w(i, j) * k * d2 * inv_l2;
      g_out += w(i, j) * k;
    }
  }
  const double trace_w = w.trace();
  g_out += trace_w * f.jitter * hypers.outputscale;
  const double shift = hypers.noise_variance - kNoiseFloor;
  out.grad = {0.5 * g_len, 0.5 * g_out, 0.5 * trace_w * shift};
  return out;
}

HyperParams train_hypers(const Dataset& data, const HyperParams& init, const TrainOptions& opts) {
  if (data.empty()) throw PreconditionError("train_hypers requires a non-empty dataset");
  init.validate();
  if (opts.iters <= 0) return init;

  // Box on the unconstrained coordinates keeps the kernel matrix factorizable.
  const Eigen::Vector3d lo{std::log(1e-3), std::log(1e-4), std::log(kMinNoiseShift)};
  const Eigen::Vector3d hi{std::log(1e3), std::log(1e4), std::log(10.0)};
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

  HyperParams best = init;
  double best_value = nlml(data, init);

  Eigen::Vector3d theta = to_unconstrained(init).cwiseMax(lo).cwiseMin(hi);
  Eigen::Vector3d m = Eigen::Vector3d::Zero();
  Eigen::Vector3d v = Eigen::Vector3d::Zero();
  for (int step = 1; step <= opts.iters; ++step) {
    const HyperParams current = from_unconstrained(theta);
    const NlmlGrad g = nlml_grad(data, current);
    if (g.value < best_value) {
      best_value = g.value;
      best = current;
    }
    m = beta1 * m + (1.0 - beta1) * g.grad;
    v = beta2 * v + (1.0 - beta2) * g.grad.cwiseProduct(g.grad);
    const Eigen::Vector3d m_hat = m / (1.0 - std::pow(beta1, step));
    const Eigen::Vector3d v_hat = v / (1.0 - std::pow(beta2, step));
    theta -= (opts.lr * m_hat.array() / (v_hat.array().sqrt() + eps)).matrix();
    theta = theta.cwiseMax(lo).cwiseMin(hi);
  }
  const HyperParams last = from_unconstrained(theta);
  if (const double value = nlml(data, last); value < best_value) best = last;
  return best;
}

}  // namespace dro::gp
