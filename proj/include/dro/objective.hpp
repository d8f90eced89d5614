#pragma once

#include <functional>
#include <optional>
#include <string>

#include "dro/common.hpp"

namespace dro {

/// Standard Ackley function (a=20, b=0.2, c=2pi), minimized at the origin.
double ackley(const Vector& x_native);

inline constexpr double kAckleyBound = 32.768;

/// Black-box maximization target on the unit box.
struct Objective {
  std::string name;
  std::size_t dimension = 0;
  double noise_std = 0.0;
  std::optional<double> optimum;
  /// Noiseless value at a point of [0,1]^d.
  std::function<double(const Vector&)> clean;

  /// clean(x) plus one N(0, noise_std^2) draw from rng.
  double evaluate(const Vector& x, Rng& rng) const;
};

/// -ackley(x_native) + shift with x_native = (2u - 1) * 32.768.
Objective make_ackley(std::size_t d, double shift = 0.0, double noise_std = 0.1);

/// -|u - center|^2 on the unit box (optimum 0 at center).
Objective make_quadratic(std::size_t d, const Vector& center, double noise_std = 0.0);

/// "ackley" or "quadratic" (centered at 0.3 per coordinate); throws InputError otherwise.
Objective make_objective(const std::string& name, std::size_t d, double shift, double noise_std);

}  // namespace dro
