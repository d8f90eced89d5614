#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace dro {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Rng = std::mt19937_64;

/// Caller passed arguments that violate a shape or range requirement.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An operation was invoked outside its documented precondition.
class PreconditionError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Factorization or other floating-point failure.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, double last_jitter)
      : std::runtime_error(what), last_jitter_(last_jitter) {}
  double last_jitter() const noexcept { return last_jitter_; }

 private:
  double last_jitter_;
};

/// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Order-sensitive hash of a tuple of integers; used to derive child seeds.
std::uint64_t stable_hash(std::initializer_list<std::uint64_t> parts) noexcept;

/// Number of workers from DRO_NUM_WORKERS, else hardware concurrency (min 1).
std::size_t worker_count();

/// Runs fn(i) for i in [0, n) on up to worker_count() threads. Each index runs
/// exactly once; results must be written to per-index slots by the caller.
/// The first exception thrown by any task is rethrown after all threads join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace dro
