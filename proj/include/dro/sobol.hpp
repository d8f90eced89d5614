#pragma once

#include <cstdint>

#include "dro/common.hpp"

namespace dro {

/// Discrete candidate set standing in for the continuous search box.
struct CandidatePool {
  Matrix points;  // n_cand x d, rows in [0,1]^d
  std::uint64_t seed = 0;

  std::size_t size() const { return static_cast<std::size_t>(points.rows()); }
  std::size_t dimension() const { return static_cast<std::size_t>(points.cols()); }
};

/// First `n` points of the Sobol sequence in `d` dimensions. With `scramble`
/// each coordinate gets a hash-based Owen scramble keyed by (seed, dimension).
Matrix sobol_points(std::size_t d, std::size_t n, std::uint64_t seed, bool scramble = true);

CandidatePool make_pool(std::size_t d, std::size_t n_cand, std::uint64_t seed,
                        bool scramble = true);

/// min(per_dim * d, max_size).
std::size_t default_pool_size(std::size_t d, std::size_t per_dim = 1024,
                              std::size_t max_size = 8192);

}  // namespace dro
