#include "dro/sobol.hpp"

#include <algorithm>
#include <string>

#include <boost/random/sobol.hpp>

namespace dro {

namespace {

std::uint32_t reverse_bits(std::uint32_t x) {
  x = ((x >> 1) & 0x55555555u) | ((x & 0x55555555u) << 1);
  x = ((x >> 2) & 0x33333333u) | ((x & 0x33333333u) << 2);
  x = ((x >> 4) & 0x0f0f0f0fu) | ((x & 0x0f0f0f0fu) << 4);
  x = ((x >> 8) & 0x00ff00ffu) | ((x & 0x00ff00ffu) << 8);
  return (x >> 16) | (x << 16);
}

// Laine-Karras style permutation; applied to bit-reversed values it yields a
// nested uniform (Owen) scramble.
std::uint32_t owen_scramble(std::uint32_t x, std::uint32_t seed) {
  x = reverse_bits(x);
  x += seed;
  x ^= x * 0x6c50b47cu;
  x ^= x * 0xb82f1e52u;
  x ^= x * 0xc7afe638u;
  x ^= x * 0x8d22f6e6u;
  return reverse_bits(x);
}

}  // namespace

Matrix sobol_points(std::size_t d, std::size_t n, std::uint64_t seed, bool scramble) {
  if (d < 1) throw InputError("Sobol dimension must be >= 1");
  if (n < 1) throw InputError("Sobol point count must be >= 1");
  boost::random::sobol engine(d);
  std::vector<std::uint32_t> dim_seeds(d);
  for (std::size_t k = 0; k < d; ++k)
    dim_seeds[k] = static_cast<std::uint32_t>(stable_hash({seed, k}) >> 32);

  Matrix out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  constexpr double kScale = 1.0 / 4294967296.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < d; ++k) {
      auto u = static_cast<std::uint32_t>(engine() >> 32);
      if (scramble) u = owen_scramble(u, dim_seeds[k]);
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
          static_cast<double>(u) * kScale;
    }
  }
  return out;
}

CandidatePool make_pool(std::size_t d, std::size_t n_cand, std::uint64_t seed, bool scramble) {
  return {sobol_points(d, n_cand, seed, scramble), seed};
}

std::size_t default_pool_size(std::size_t d, std::size_t per_dim, std::size_t max_size) {
  return std::min(per_dim * d, max_size);
}

}  // namespace dro
