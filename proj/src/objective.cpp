#include "dro/objective.hpp"

#include <cmath>
#include <numbers>

namespace dro {

double ackley(const Vector& x) {
  constexpr double a = 20.0, b = 0.2, c = 2.0 * std::numbers::pi;
  const double n = static_cast<double>(x.size());
  const double sq = x.squaredNorm() / n;
  const double cs = x.unaryExpr([](double v) { return std::cos(c * v); }).sum() / n;
  return -a * std::exp(-b * std::sqrt(sq)) - std::exp(cs) + a + std::numbers::e;
}

double Objective::evaluate(const Vector& x, Rng& rng) const {
  const double value = clean(x);
  if (noise_std == 0.0) return value;
  std::normal_distribution<double> noise(0.0, noise_std);
  return value + noise(rng);
}

Objective make_ackley(std::size_t d, double shift, double noise_std) {
  if (d == 0) throw InputError("objective dimension must be >= 1");
  if (!(noise_std >= 0.0)) throw InputError("noise_std must be non-negative");
  Objective obj;
  obj.name = "ackley";
  obj.dimension = d;
  obj.noise_std = noise_std;
  obj.optimum = shift;
  obj.clean = [d, shift](const Vector& u) {
    if (static_cast<std::size_t>(u.size()) != d)
      throw InputError("ackley expects " + std::to_string(d) + " coordinates, got " +
                       std::to_string(u.size()));
    const Vector x = (2.0 * u.array() - 1.0) * kAckleyBound;
    return -ackley(x) + shift;
  };
  return obj;
}

Objective make_quadratic(std::size_t d, const Vector& center, double noise_std) {
  if (d == 0 || static_cast<std::size_t>(center.size()) != d)
    throw InputError("quadratic center must have " + std::to_string(d) + " coordinates");
  Objective obj;
  obj.name = "quadratic";
  obj.dimension = d;
  obj.noise_std = noise_std;
  obj.optimum = 0.0;
  obj.clean = [center](const Vector& u) {
    if (u.size() != center.size()) throw InputError("quadratic: dimension mismatch");
    return -(u - center).squaredNorm();
  };
  return obj;
}

Objective make_objective(const std::string& name, std::size_t d, double shift, double noise_std) {
  if (name == "ackley") return make_ackley(d, shift, noise_std);
  if (name == "quadratic")
    return make_quadratic(d, Vector::Constant(static_cast<Eigen::Index>(d), 0.3), noise_std);
  throw InputError("unknown objective '" + name + "'");
}

}  // namespace dro
