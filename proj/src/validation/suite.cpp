#include "dro/validation/suite.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <numbers>
#include <ostream>

#include "dro/acquisition.hpp"
#include "dro/gp.hpp"
#include "dro/nn/ops.hpp"
#include "dro/objective.hpp"
#include "dro/transformer.hpp"
#include "dro/validation/oracles.hpp"

namespace dro::validation {

namespace {

using nn::Parameter;
using nn::Tape;
using nn::Tensor;
using nn::Var;

double log_uniform(Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
  return std::exp(u(rng));
}

int uniform_int(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

gp::Dataset random_dataset(Rng& rng, int n, int d) {
  Matrix x(n, d);
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = uniform(rng, 0.0, 1.0);
  Vector w(d);
  for (Eigen::Index j = 0; j < d; ++j) w(j) = uniform(rng, -4.0, 4.0);
  const double offset = uniform(rng, -3.0, 3.0);
  Vector y(n);
  std::normal_distribution<double> noise(0.0, 0.1);
  for (Eigen::Index i = 0; i < n; ++i)
    y(i) = offset + std::sin(x.row(i).dot(w)) + noise(rng);
  return gp::Dataset(x, y);
}

/// Five-point central difference of g at 0.
double derivative(const std::function<double(double)>& g, double h) {
  return (8.0 * (g(h) - g(-h)) - (g(2.0 * h) - g(-2.0 * h))) / (12.0 * h);
}

struct Accumulator {
  OracleReport report;

  Accumulator(std::string name, double tolerance, bool relative) {
    report.name = std::move(name);
    report.tolerance = tolerance;
    report.relative = relative;
  }
  void add(double analytic, double reference, double floor = 1e-6) {
    report.max_abs_err = std::max(report.max_abs_err, std::abs(analytic - reference));
    report.max_rel_err = std::max(report.max_rel_err, relative_error(analytic, reference, floor));
  }
  OracleReport finish() {
    const double err = report.relative ? report.max_rel_err : report.max_abs_err;
    report.pass = report.n_cases > 0 && err < report.tolerance;
    return report;
  }
};

Tensor random_tensor(nn::Shape shape, Rng& rng, double scale = 1.0) {
  return Tensor::randn(std::move(shape), rng, scale);
}

/// Checks d mse(build(inputs), target) / d inputs against finite differences.
void check_primitive(Accumulator& acc, std::vector<Tensor> inputs,
                     const std::function<Var(Tape&, const std::vector<Var>&)>& build, Rng& rng) {
  std::vector<Parameter> params;
  for (auto& t : inputs) params.push_back({"input", std::move(t), {}});
  nn::Shape out_shape;
  {
    Tape tape;
    std::vector<Var> vs;
    for (auto& p : params) vs.push_back(tape.param(p));
    out_shape = build(tape, vs).value().shape;
  }
  const Tensor target = random_tensor(out_shape, rng);
  Tensor weights(out_shape);
  for (auto& w : weights.values) w = uniform(rng, 0.5, 1.5);
  auto loss = [&](bool backward) {
    Tape tape;
    std::vector<Var> vs;
    for (auto& p : params) vs.push_back(tape.param(p));
    Var l = nn::mse(build(tape, vs), target, weights);
    if (backward) tape.backward(l);
    return l.value()[0];
  };
  for (auto& p : params) p.zero_grad();
  loss(true);
  for (auto& p : params) {
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double x0 = p.value[i];
      const double fd = derivative(
          [&](double dx) {
            p.value[i] = x0 + dx;
            return loss(false);
          },
          1e-4);
      p.value[i] = x0;
      acc.add(p.grad[i], fd);
    }
  }
  ++acc.report.n_cases;
}

}  // namespace

OracleReport check_gp_posterior(std::uint64_t seed, int n_cases) {
  Rng rng(seed);
  Accumulator acc("gp_posterior_vs_dense_oracle", 1e-8, false);
  for (int c = 0; c < n_cases; ++c) {
    const int n = uniform_int(rng, 1, 50), d = uniform_int(rng, 1, 5);
    const gp::Dataset data = random_dataset(rng, n, d);
    const gp::HyperParams h{log_uniform(rng, 0.1, 2.0), log_uniform(rng, 0.5, 2.0),
                            log_uniform(rng, 1e-4, 0.1)};
    const gp::GpModel model = gp::gp_fit(data, h);
    bool used = false;
    for (int q = 0; q < 5; ++q) {
      Vector x(d);
      for (Eigen::Index j = 0; j < d; ++j) x(j) = uniform(rng, 0.0, 1.0);
      const auto ref = dense_gp_oracle(data, h, x, model.jitter());
      if (!ref) continue;
      const gp::Posterior p = model.posterior(x);
      acc.add(p.mean, ref->mean);
      acc.add(p.variance, ref->variance);
      used = true;
    }
    if (used) ++acc.report.n_cases;
  }
  return acc.finish();
}

OracleReport check_nlml_grad(std::uint64_t seed, int n_cases) {
  Rng rng(seed);
  Accumulator acc("nlml_grad_vs_finite_difference", 1e-4, true);
  for (int c = 0; c < n_cases; ++c) {
    const int n = uniform_int(rng, 5, 30), d = uniform_int(rng, 1, 4);
    const gp::Dataset data = random_dataset(rng, n, d);
    const gp::HyperParams h{log_uniform(rng, 0.1, 2.0), log_uniform(rng, 0.3, 3.0),
                            log_uniform(rng, 1e-3, 0.5)};
    const gp::NlmlGrad g = gp::nlml_grad(data, h);
    const Eigen::Vector3d theta = gp::to_unconstrained(h);
    for (int k = 0; k < 3; ++k) {
      const double fd = derivative(
          [&](double dx) {
            Eigen::Vector3d t = theta;
            t(k) += dx;
            return gp::nlml(data, gp::from_unconstrained(t));
          },
          1e-4);
      acc.add(g.grad(k), fd);
    }
    ++acc.report.n_cases;
  }
  return acc.finish();
}

std::vector<OracleReport> check_acq_monte_carlo(std::uint64_t seed, int n_cases,
                                                std::size_t n_samples) {
  Rng rng(seed);
  Accumulator ei("ei_vs_monte_carlo", 3e-3, false);
  Accumulator pi("pi_vs_monte_carlo", 3e-3, false);
  for (int c = 0; c < n_cases; ++c) {
    const double mu = uniform(rng, -1.0, 1.0), sigma = uniform(rng, 0.1, 1.0),
                 inc = uniform(rng, -1.0, 1.0);
    acq::AcqParams params;
    params.incumbent = inc;
    params.kind = acq::AcqKind::EI;
    ei.add(acq::acq_from_moments(mu, sigma, params),
           mc_acq_oracle(mu, sigma, inc + params.xi, acq::AcqKind::EI, n_samples, rng));
    params.kind = acq::AcqKind::PI;
    pi.add(acq::acq_from_moments(mu, sigma, params),
           mc_acq_oracle(mu, sigma, inc + params.xi, acq::AcqKind::PI, n_samples, rng));
    ++ei.report.n_cases;
    ++pi.report.n_cases;
  }
  return {ei.finish(), pi.finish()};
}

OracleReport check_log_ei(std::uint64_t seed, int n_cases) {
  Rng rng(seed);
  Accumulator acc("exp_log_ei_vs_ei", 1e-6, true);
  for (int c = 0; c < n_cases; ++c) {
    const double sigma = log_uniform(rng, 1e-3, 10.0);
    const double z = uniform(rng, -12.0, 8.0);
    const double threshold = uniform(rng, -5.0, 5.0);
    const double mu = threshold + z * sigma;
    const double ei = acq::expected_improvement(mu, sigma, threshold);
    if (!(ei > 1e-12)) continue;
    acc.add(std::exp(acq::log_expected_improvement(mu, sigma, threshold)), ei, 0.0);
    ++acc.report.n_cases;
  }
  return acc.finish();
}

OracleReport check_autodiff_primitives(std::uint64_t seed) {
  Rng rng(seed);
  Accumulator acc("autodiff_primitives_vs_finite_difference", 1e-3, true);
  auto t = [&](nn::Shape s) { return random_tensor(std::move(s), rng); };

  check_primitive(acc, {t({2, 3, 4}), t({4, 5})},
                  [](Tape&, const std::vector<Var>& v) { return nn::matmul(v[0], v[1]); }, rng);
  check_primitive(acc, {t({2, 3, 4}), t({2, 4, 5})},
                  [](Tape&, const std::vector<Var>& v) {
                    return nn::batched_matmul(v[0], v[1], false);
                  },
                  rng);
  check_primitive(acc, {t({2, 3, 4}), t({2, 5, 4})},
                  [](Tape&, const std::vector<Var>& v) {
                    return nn::batched_matmul(v[0], v[1], true);
                  },
                  rng);
  check_primitive(acc, {t({3, 4}), t({3, 4})},
                  [](Tape&, const std::vector<Var>& v) { return nn::add(v[0], v[1]); }, rng);
  check_primitive(acc, {t({2, 3, 4}), t({4})},
                  [](Tape&, const std::vector<Var>& v) { return nn::add(v[0], v[1]); }, rng);
  check_primitive(acc, {t({3, 4})},
                  [](Tape&, const std::vector<Var>& v) { return nn::scale(v[0], -1.7); }, rng);
  check_primitive(acc, {t({3, 6}), t({6}), t({6})},
                  [](Tape&, const std::vector<Var>& v) {
                    return nn::layernorm(v[0], v[1], v[2]);
                  },
                  rng);
  check_primitive(acc, {t({3, 5})},
                  [](Tape&, const std::vector<Var>& v) { return nn::softmax(v[0]); }, rng);
  check_primitive(acc, {t({3, 5})},
                  [](Tape&, const std::vector<Var>& v) { return nn::gelu(v[0]); }, rng);
  check_primitive(acc, {t({3, 5})},
                  [](Tape&, const std::vector<Var>& v) { return nn::sigmoid(v[0]); }, rng);
  check_primitive(acc, {t({4, 3})},
                  [](Tape&, const std::vector<Var>& v) {
                    return nn::embed(v[0], {2, 0, 2, 3});
                  },
                  rng);
  check_primitive(acc, {t({4, 3, 3})},
                  [](Tape&, const std::vector<Var>& v) {
                    return nn::softmax(nn::causal_mask(v[0], 2, {1, 1, 0, 1, 0, 1}));
                  },
                  rng);
  check_primitive(acc, {t({4, 5})},
                  [](Tape&, const std::vector<Var>& v) {
                    Rng fixed(7);
                    return nn::dropout(v[0], 0.3, fixed, true);
                  },
                  rng);
  check_primitive(acc, {t({2, 6})},
                  [](Tape&, const std::vector<Var>& v) { return nn::reshape(v[0], {3, 4}); },
                  rng);
  check_primitive(acc, {t({2, 3, 4})},
                  [](Tape&, const std::vector<Var>& v) { return nn::split_heads(v[0], 2); }, rng);
  check_primitive(acc, {t({4, 3, 2})},
                  [](Tape&, const std::vector<Var>& v) { return nn::merge_heads(v[0], 2); }, rng);
  check_primitive(acc, {t({2, 2, 3}), t({2, 2, 3}), t({2, 2, 3})},
                  [](Tape&, const std::vector<Var>& v) { return nn::interleave(v); }, rng);
  check_primitive(acc, {t({2, 6, 3})},
                  [](Tape&, const std::vector<Var>& v) { return nn::select_tokens(v[0], 3, 1); },
                  rng);
  check_primitive(acc, {t({2, 3})},
                  [](Tape&, const std::vector<Var>& v) { return nn::sum(v[0]); }, rng);
  return acc.finish();
}

OracleReport check_transformer_grad(std::uint64_t seed) {
  Rng rng(seed);
  dt::DtConfig cfg;
  cfg.embed_dim = 8;
  cfg.n_layers = 1;
  cfg.n_heads = 1;
  cfg.seq_len = 3;
  cfg.dropout = 0.0;
  cfg.state_dim = 3;
  cfg.action_dim = 2;
  dt::DecisionTransformer model(cfg, seed);
  // The action head starts at zero, which would block every upstream gradient.
  for (Parameter& p : model.parameters()) {
    if (p.name == "head.w" || p.name == "head.b") p.value = random_tensor(p.value.shape, rng, 0.5);
    if (p.name.find(".g") != std::string::npos || p.name.find("ln") != std::string::npos)
      for (auto& v : p.value.values) v += uniform(rng, -0.2, 0.2);
  }

  std::vector<Trajectory> seqs(2);
  for (std::size_t b = 0; b < seqs.size(); ++b) {
    const std::size_t len = b == 0 ? 3 : 2;
    for (std::size_t t = 0; t < len; ++t) {
      TrajStep step;
      step.state = Vector::NullaryExpr(3, [&] { return uniform(rng, -1.0, 1.0); });
      step.action = Vector::NullaryExpr(2, [&] { return uniform(rng, 0.0, 1.0); });
      step.rtg = uniform(rng, 0.0, 1.0);
      seqs[b].push_back(step);
    }
  }
  const std::vector<const Trajectory*> batch{&seqs[0], &seqs[1]};
  Tensor target({2, 3, 2}), weights({2, 3, 2});
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t t = 0; t < seqs[b].size(); ++t)
      for (std::size_t j = 0; j < 2; ++j) {
        target[(b * 3 + t) * 2 + j] = seqs[b][t].action(static_cast<Eigen::Index>(j));
        weights[(b * 3 + t) * 2 + j] = 1.0;
      }

  auto loss = [&](bool backward) {
    Tape tape;
    Rng unused(0);
    Var l = nn::mse(model.forward(tape, batch, true, unused), target, weights);
    if (backward) tape.backward(l);
    return l.value()[0];
  };
  for (Parameter& p : model.parameters()) p.zero_grad();
  loss(true);

  Accumulator acc("transformer_grad_vs_finite_difference", 1e-3, true);
  for (Parameter& p : model.parameters()) {
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double x0 = p.value[i];
      const double fd = derivative(
          [&](double dx) {
            p.value[i] = x0 + dx;
            return loss(false);
          },
          1e-4);
      p.value[i] = x0;
      acc.add(p.grad[i], fd);
      ++acc.report.n_cases;
    }
  }
  return acc.finish();
}

OracleReport check_dropout_expectation(std::uint64_t seed, int trials) {
  Rng rng(seed);
  const std::vector<double> base{1.7, -0.4, 3.2, 0.9};
  const std::size_t width = base.size(), n = static_cast<std::size_t>(trials);
  Tensor x({n, width});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < width; ++j) x[i * width + j] = base[j];
  Tape tape;
  const Tensor& out = nn::dropout(tape.input(x), 0.1, rng, true).value();
  Accumulator acc("dropout_expectation", 1e-2, true);
  for (std::size_t j = 0; j < width; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += out[i * width + j];
    acc.add(mean / static_cast<double>(n), base[j], 0.0);
    ++acc.report.n_cases;
  }
  return acc.finish();
}

OracleReport check_ackley(std::uint64_t seed, int n_cases) {
  Rng rng(seed);
  Accumulator acc("ackley_vs_transliteration", 1e-12, false);
  for (int c = 0; c < n_cases; ++c) {
    const int d = uniform_int(rng, 1, 10);
    const double shift = c % 2 ? 10.0 : 0.0;
    const Objective obj = make_ackley(static_cast<std::size_t>(d), shift, 0.0);
    Vector u(d);
    for (Eigen::Index j = 0; j < d; ++j) u(j) = uniform(rng, 0.0, 1.0);
    double s1 = 0.0, s2 = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) {
      const double xj = -32.768 + 65.536 * u(j);
      s1 += xj * xj;
      s2 += std::cos(2.0 * std::numbers::pi * xj);
    }
    const double a = -20.0 * std::exp(-0.2 * std::sqrt(s1 / d)) - std::exp(s2 / d) + 20.0 +
                     std::exp(1.0);
    acc.add(obj.clean(u), shift - a);
    ++acc.report.n_cases;
  }
  return acc.finish();
}

std::vector<OracleReport> run_validation_suite(std::uint64_t seed, bool quick) {
  std::vector<OracleReport> out;
  out.push_back(check_gp_posterior(mix64(seed + 1)));
  out.push_back(check_nlml_grad(mix64(seed + 2)));
  for (auto& r : check_acq_monte_carlo(mix64(seed + 3), 20, quick ? 200000 : 1000000))
    out.push_back(r);
  out.push_back(check_log_ei(mix64(seed + 4)));
  out.push_back(check_autodiff_primitives(mix64(seed + 5)));
  out.push_back(check_transformer_grad(mix64(seed + 6)));
  out.push_back(check_dropout_expectation(mix64(seed + 7)));
  out.push_back(check_ackley(mix64(seed + 8)));
  return out;
}

void write_reports_csv(std::ostream& out, const std::vector<OracleReport>& reports) {
  out << "name,max_abs_err,max_rel_err,n_cases,tolerance,kind,pass\n";
  const auto old_precision = out.precision(6);
  for (const OracleReport& r : reports)
    out << r.name << ',' << r.max_abs_err << ',' << r.max_rel_err << ',' << r.n_cases << ','
        << r.tolerance << ',' << (r.relative ? "relative" : "absolute") << ','
        << (r.pass ? "true" : "false") << '\n';
  out.precision(old_precision);
}

}  // namespace dro::validation
