#pragma once

#include <string>
#include <vector>

#include "dro/nn/tensor.hpp"

namespace dro::nn {

/// Binary layout: "DROT", u32 version, u64 tensor count, then per tensor
/// u32 rank, rank x u64 dims and the values as little-endian f64.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_tensors(const std::string& path, const std::vector<Tensor>& tensors);
std::vector<Tensor> load_tensors(const std::string& path);

}  // namespace dro::nn
