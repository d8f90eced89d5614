#include "dro/acquisition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace dro::acq {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // 0.5 * log(2 pi)
constexpr double kMaxValueEps = 1e-6;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Mills ratio Phi(-u) / phi(u) for u >= 0.
double mills_ratio(double u) {
  if (u < 25.0) {
    return 0.5 * std::erfc(u * kInvSqrt2) * std::sqrt(2.0 * std::numbers::pi) *
           std::exp(0.5 * u * u);
  }
  // Asymptotic series 1/u (1 - 1/u^2 + 3/u^4 - 15/u^6 + ...).
  const double inv2 = 1.0 / (u * u);
  double term = 1.0, sum = 1.0;
  for (int k = 1; k <= 8; ++k) {
    term *= -static_cast<double>(2 * k - 1) * inv2;
    sum += term;
  }
  return sum / u;
}

// 1 - u * mills_ratio(u), the tail factor of z Phi(z) + phi(z) at z = -u.
double ei_tail_factor(double u) {
  if (u < 25.0) return 1.0 - u * mills_ratio(u);
  // 1/u^2 - 3/u^4 + 15/u^6 - ...
  const double inv2 = 1.0 / (u * u);
  double term = inv2, sum = inv2;
  for (int k = 2; k <= 9; ++k) {
    term *= -static_cast<double>(2 * k - 1) * inv2;
    sum += term;
  }
  return sum;
}

}  // namespace

std::string_view to_string(AcqKind kind) {
  switch (kind) {
    case AcqKind::EI: return "EI";
    case AcqKind::LOG_EI: return "LOG_EI";
    case AcqKind::UCB: return "UCB";
    case AcqKind::PI: return "PI";
    case AcqKind::MES: return "MES";
  }
  return "?";
}

AcqKind parse_acq_kind(std::string_view name) {
  if (name == "EI") return AcqKind::EI;
  if (name == "LOG_EI" || name == "LOGEI") return AcqKind::LOG_EI;
  if (name == "UCB") return AcqKind::UCB;
  if (name == "PI") return AcqKind::PI;
  if (name == "MES") return AcqKind::MES;
  throw InputError("unknown acquisition kind '" + std::string(name) + "'");
}

void AcqParams::validate() const {
  if (mes_samples < 1) throw InputError("mes_samples must be >= 1");
  if (!(kappa >= 0.0)) throw InputError("kappa must be >= 0");
  if (kind == AcqKind::MES && max_values.empty())
    throw PreconditionError("MES acquisition requires sampled max values");
}

std::size_t Roi::count() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

double normal_pdf(double z) { return std::exp(-0.5 * z * z - kLogSqrt2Pi); }

double normal_cdf(double z) { return 0.5 * std::erfc(-z * kInvSqrt2); }

double log_normal_cdf(double z) {
  if (z > 0.0) return std::log1p(-0.5 * std::erfc(z * kInvSqrt2));
  if (z > -5.0) return std::log(normal_cdf(z));
  return -0.5 * z * z - kLogSqrt2Pi + std::log(mills_ratio(-z));
}

double expected_improvement(double mu, double sigma, double threshold) {
  const double diff = mu - threshold;
  if (!(sigma > 0.0)) return std::max(0.0, diff);
  const double z = diff / sigma;
  return std::max(0.0, diff * normal_cdf(z) + sigma * normal_pdf(z));
}

double log_expected_improvement(double mu, double sigma, double threshold) {
  const double diff = mu - threshold;
  if (!(sigma > 0.0)) return diff > 0.0 ? std::log(diff) : kNegInf;
  const double z = diff / sigma;
  double log_h;
  if (z > -1.0) {
    log_h = std::log(z * normal_cdf(z) + normal_pdf(z));
  } else {
    log_h = -0.5 * z * z - kLogSqrt2Pi + std::log(ei_tail_factor(-z));
  }
  return std::log(sigma) + log_h;
}

double probability_of_improvement(double mu, double sigma, double threshold) {
  if (!(sigma > 0.0)) return mu > threshold ? 1.0 : 0.0;
  return normal_cdf((mu - threshold) / sigma);
}

double max_value_entropy(double mu, double sigma, const std::vector<double>& max_values) {
  if (!(sigma > 0.0) || max_values.empty()) return 0.0;
  double total = 0.0;
  for (double y_star : max_values) {
    const double gamma = (y_star - mu) / sigma;
    const double log_cdf = log_normal_cdf(gamma);
    const double pdf_over_cdf = std::exp(-0.5 * gamma * gamma - kLogSqrt2Pi - log_cdf);
    total += 0.5 * gamma * pdf_over_cdf - log_cdf;
  }
  return total / static_cast<double>(max_values.size());
}

double acq_from_moments(double mu, double sigma, const AcqParams& p) {
  switch (p.kind) {
    case AcqKind::EI: return expected_improvement(mu, sigma, p.incumbent + p.xi);
    case AcqKind::LOG_EI: return log_expected_improvement(mu, sigma, p.incumbent + p.xi);
    case AcqKind::UCB: return mu + p.kappa * sigma;
    case AcqKind::PI: return probability_of_improvement(mu, sigma, p.incumbent + p.xi);
    case AcqKind::MES: return max_value_entropy(mu, sigma, p.max_values);
  }
  return 0.0;
}

double acq_value(const gp::GpModel& model, const Vector& x, const AcqParams& params) {
  params.validate();
  const gp::Posterior post = model.posterior_standardized(x);
  return acq_from_moments(post.mean, std::sqrt(post.variance), params);
}

PoolMoments pool_moments(const gp::GpModel& model, const CandidatePool& pool) {
  PoolMoments m;
  model.posterior_standardized(pool.points, m.mean, m.stddev);
  return m;
}

Roi compute_roi(const PoolMoments& moments, double kappa_roi) {
  if (moments.size() == 0) throw PreconditionError("compute_roi requires a non-empty pool");
  const Vector lcb = moments.mean - kappa_roi * moments.stddev;
  const double threshold = lcb.maxCoeff();
  Roi roi;
  roi.kappa_roi = kappa_roi;
  roi.mask.resize(moments.size());
  for (std::size_t i = 0; i < moments.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    roi.mask[i] = (moments.mean(k) + kappa_roi * moments.stddev(k) >= threshold) ? 1 : 0;
  }
  return roi;
}

Roi compute_roi(const gp::GpModel& model, const CandidatePool& pool, double kappa_roi) {
  return compute_roi(pool_moments(model, pool), kappa_roi);
}

Roi full_roi(std::size_t n) {
  Roi roi;
  roi.kappa_roi = std::numeric_limits<double>::infinity();
  roi.mask.assign(n, 1);
  return roi;
}

Choice maximize_acq(const PoolMoments& moments, const CandidatePool& pool, const Roi& roi,
                    const AcqParams& params) {
  params.validate();
  if (roi.mask.size() != pool.size() || moments.size() != pool.size())
    throw InputError("ROI mask, moments and pool sizes differ");
  bool found = false;
  Choice best;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (!roi.contains(i)) continue;
    const auto k = static_cast<Eigen::Index>(i);
    const double v = acq_from_moments(moments.mean(k), moments.stddev(k), params);
    if (!found || v > best.value) {
      found = true;
      best.index = i;
      best.value = v;
    }
  }
  if (!found) throw PreconditionError("maximize_acq called with an empty ROI mask");
  best.point = pool.points.row(static_cast<Eigen::Index>(best.index)).transpose();
  return best;
}

Choice maximize_acq(const gp::GpModel& model, const CandidatePool& pool, const Roi& roi,
                    const AcqParams& params) {
  return maximize_acq(pool_moments(model, pool), pool, roi, params);
}

double max_expected_improvement(const PoolMoments& moments, const Roi& roi, double incumbent) {
  double best = 0.0;
  bool found = false;
  for (std::size_t i = 0; i < moments.size(); ++i) {
    if (!roi.contains(i)) continue;
    const auto k = static_cast<Eigen::Index>(i);
    const double v = expected_improvement(moments.mean(k), moments.stddev(k), incumbent);
    if (!found || v > best) best = v;
    found = true;
  }
  if (!found) throw PreconditionError("max_expected_improvement over an empty ROI");
  return best;
}

std::vector<double> sample_max_values(const PoolMoments& moments, double incumbent, int count,
                                      Rng& rng, const Roi* mask) {
  if (count < 1) throw InputError("max-value sample count must be >= 1");
  double lo = kNegInf, hi = kNegInf, max_sd = 0.0;
  bool any = false;
  for (std::size_t i = 0; i < moments.size(); ++i) {
    if (mask && !mask->contains(i)) continue;
    const double m = moments.mean(static_cast<Eigen::Index>(i));
    const double s = moments.stddev(static_cast<Eigen::Index>(i));
    lo = std::max(lo, m - 0.7 * s);
    hi = std::max(hi, m + 6.0 * s);
    max_sd = std::max(max_sd, s);
    any = true;
  }
  if (!any) throw PreconditionError("sample_max_values over an empty candidate set");

  // Both quantiles lie above lo. Candidates more than 8.3 standard deviations
  // below it contribute less than 1e-16 each to log P(max <= y) and are dropped.
  std::vector<double> mu, sd;
  for (std::size_t i = 0; i < moments.size(); ++i) {
    if (mask && !mask->contains(i)) continue;
    const double m = moments.mean(static_cast<Eigen::Index>(i));
    const double s = moments.stddev(static_cast<Eigen::Index>(i));
    if (s > 1e-12 && (lo - m) / s > 8.3) continue;
    mu.push_back(m);
    sd.push_back(s);
  }

  // log P(max <= y); non-decreasing in y.
  auto log_cdf_max = [&](double y) {
    double acc = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) {
      if (sd[i] > 1e-12) {
        acc += log_normal_cdf((y - mu[i]) / sd[i]);
      } else if (y < mu[i]) {
        return kNegInf;
      }
    }
    return acc;
  };

  const double step = std::max(max_sd, 1e-6);
  // Illinois-modified regula falsi on log P(max <= y) - log q.
  auto quantile = [&](double q) {
    const double target = std::log(q);
    auto g = [&](double y) { return log_cdf_max(y) - target; };
    double a = lo, b = hi;
    double fa = g(a), fb = g(b);
    while (fa > 0.0) fa = g(a -= step);
    while (fb < 0.0) fb = g(b += step);
    double c = 0.5 * (a + b);
    int side = 0;
    for (int it = 0; it < 100 && b - a > 1e-9 * (step + std::abs(a)); ++it) {
      c = std::isfinite(fa) && std::isfinite(fb) && fb > fa ? (a * fb - b * fa) / (fb - fa)
                                                            : 0.5 * (a + b);
      if (!(c > a && c < b)) c = 0.5 * (a + b);
      const double fc = g(c);
      if (std::abs(fc) < 1e-13) break;
      if (fc < 0.0) {
        a = c;
        fa = fc;
        if (side == -1) fb *= 0.5;
        side = -1;
      } else {
        b = c;
        fb = fc;
        if (side == 1) fa *= 0.5;
        side = 1;
      }
    }
    return c;
  };

  const double y25 = quantile(0.25);
  const double y75 = quantile(0.75);
  const double g25 = std::log(-std::log(0.25));
  const double g75 = std::log(-std::log(0.75));
  const double scale = std::max(0.0, (y75 - y25) / (g25 - g75));
  const double location = y25 + scale * g25;

  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> out(static_cast<std::size_t>(count));
  for (auto& y : out) {
    double u = unif(rng);
    u = std::clamp(u, 1e-300, 1.0 - 1e-16);
    y = std::max(location - scale * std::log(-std::log(u)), incumbent + kMaxValueEps);
  }
  return out;
}

std::vector<double> sample_max_values(const gp::GpModel& model, const CandidatePool& pool,
                                      int count, Rng& rng) {
  return sample_max_values(pool_moments(model, pool), model.best_standardized(), count, rng);
}

}  // namespace dro::acq
